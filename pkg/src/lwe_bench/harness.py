"""Experiment configs, seeded end-to-end runs, result logs and the leaderboard.

A config is a TOML file with top-level run settings and one section per
stage, for example::

    name = "desk-cc"
    attack = "cc"
    seed = 7
    h_list = [2, 3]
    trials_per_h = 10

    [params]
    n = 64
    q = 3329
    [params.secret]
    dist = "ternary"

    [preprocess]
    omega = 64
    target_count = 2000

Every key can be overridden with ``key.path=value`` strings (CLI ``--set``).
Results are appended to a JSON-lines log, one record per (h, trial).
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import os
import resource
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cc import alphabet_for, cc_attack, verify_secret
from .distinguisher import SyntheticOracle, recover_secret
from .errors import InvalidSpec, MemoryCapExceeded, SearchBlowup
from .mitm import MitmParams, derive_samples_and_bound, mitm_decide, scaled_dual_short_vectors
from .preprocess import apply_reductions, default_m, reduce_matrices
from .rand import GeneratorSpec, make_generator
from .sampling import LweParams, gen_samples, plant_secret, sample_secret
from .usvp import usvp_attack

__all__ = [
    "ATTACKS",
    "DEFAULTS",
    "AttackResult",
    "ExperimentConfig",
    "fingerprint",
    "load_config",
    "load_results",
    "outcome_fields",
    "apply_overrides",
    "render_json",
    "render_tsv",
    "report",
    "run_experiment",
    "trial_seed",
    "write_report",
]

log = logging.getLogger(__name__)

ATTACKS = ("usvp", "cc", "mitm", "distinguish")
OUTCOMES = ("recovered", "decided", "failed", "timeout")

DEFAULTS = {
    "name": "experiment",
    "attack": "cc",
    "seed": 0,
    "h_list": [],
    "trials_per_h": 10,
    "workers": None,
    "time_limit": None,
    "mem_cap": None,
    "num_samples": None,
    "holdout": 64,
    "generator": "cryptographic",
    "params": {
        "n": 64,
        "q": 3329,
        "k": 1,
        "variant": "plain",
        "secret": {"dist": "ternary", "eta": 2, "sigma": 3.19},
        "error": {"dist": "gaussian", "sigma": 3.19, "eta": 2},
    },
    "preprocess": {"m": None, "omega": 64, "beta": 2, "target_count": 2000, "num_matrices": None, "max_loops": 4},
    "usvp": {"m": None, "omega": None, "beta_start": 20, "beta_step": 5, "beta_max": 30, "loop_budget": 4},
    "cc": {"h_limit": 3, "gamma": 0.7, "method": "linreg", "shifts": None},
    "mitm": {"zeta": 24, "tau": 12, "c": 10, "beta": 10, "h_prime": None},
    "distinguish": {"delta": 16, "probes": 128, "oracle_sigma": 3.0},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings; values are parsed as TOML, else kept as text."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise InvalidSpec(f"override {item!r} is not key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise InvalidSpec(f"override {key!r} descends into a scalar")
        node[parts[-1]] = _parse_value(text.strip())
    return cfg


@dataclass
class ExperimentConfig:
    name: str
    attack: str
    params: dict
    h_list: list
    trials_per_h: int
    seed: int
    time_limit: float | None = None
    mem_cap: int | None = None
    workers: int | None = None
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.attack not in ATTACKS:
            raise InvalidSpec(f"unknown attack {self.attack!r}")
        if self.trials_per_h < 1:
            raise InvalidSpec("trials_per_h must be >= 1")
        for cap in (self.time_limit, self.mem_cap):
            if cap is not None and cap <= 0:
                raise InvalidSpec("resource caps must be positive")
        self.lwe_params(self.h_list[0] if self.h_list else None)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        cfg = _merge(DEFAULTS, d)
        return cls(
            name=str(cfg["name"]),
            attack=str(cfg["attack"]),
            params=cfg["params"],
            h_list=[int(h) for h in cfg["h_list"]],
            trials_per_h=int(cfg["trials_per_h"]),
            seed=int(cfg["seed"]),
            time_limit=cfg.get("time_limit"),
            mem_cap=None if cfg.get("mem_cap") is None else int(cfg["mem_cap"]),
            workers=cfg.get("workers"),
            raw=cfg,
        )

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    def lwe_params(self, h: int | None) -> LweParams:
        p = self.params
        n, k = int(p["n"]), int(p.get("k", 1))
        secret = dict(p.get("secret", {}))
        secret["length"] = n * k
        secret["fixed_h"] = h
        return LweParams.from_dict({**p, "secret": secret})

    @property
    def setting(self) -> str:
        p = self.params
        return f"{self.name}:{p.get('variant', 'plain')}-n{p['n']}-k{p.get('k', 1)}-q{p['q']}-{p['secret']['dist']}"


def load_config(path=None, overrides=None) -> ExperimentConfig:
    """Defaults, then the file, then the overrides."""
    cfg = {}
    if path is not None:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    return ExperimentConfig.from_dict(apply_overrides(_merge(DEFAULTS, cfg), overrides))


def trial_seed(seed: int, *path) -> int:
    """Independent 63-bit seed for a labelled position in the run."""
    key = [int(seed)] + [int(hashlib.sha256(str(p).encode()).hexdigest()[:8], 16) for p in path]
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0] >> np.uint64(1))


def fingerprint(s) -> str:
    s = np.asarray(s, dtype=np.int64).reshape(-1)
    return hashlib.sha256(",".join(str(int(v)) for v in s).encode()).hexdigest()[:16]


@dataclass
class AttackResult:
    attack: str
    setting: str
    params: dict
    h: int
    trial: int
    seed: int
    outcome: str
    reason: str = ""
    preprocess_hours: float = 0.0
    recover_hours: float = 0.0
    peak_memory: int = 0
    fingerprint: str = ""
    planted_fingerprint: str = ""
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _peak_memory() -> int:
    return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss) * 1024


def _workers(workers):
    if workers is not None:
        return max(1, int(workers))
    return max(1, int(os.environ.get("LWE_BENCH_WORKERS", "1")))


def _holdout(params: LweParams, secret, rows: int, gen):
    num = rows if params.variant == "plain" else max(1, math.ceil(rows / params.n))
    return gen_samples(params, num=num, secret=secret, gen=gen)


def _num_samples(cfg: ExperimentConfig, params: LweParams, need_rows: int) -> int:
    if cfg.raw.get("num_samples") is not None:
        return int(cfg.raw["num_samples"])
    if params.variant == "plain":
        return max(need_rows, 4 * params.n)
    return max(1, math.ceil(max(need_rows, 4 * params.n) / params.n))


def _secret(cfg, params, seed):
    gen = make_generator(GeneratorSpec(cfg.raw["generator"], seed))
    return sample_secret(params.secret, gen, params.q), gen


def _shared_context(cfg: ExperimentConfig) -> dict:
    """Preprocessing that only depends on the public matrix, done once per experiment."""
    ctx = {"preprocess_hours": 0.0}
    if cfg.attack not in ("cc", "mitm") or not cfg.h_list:
        return ctx
    params = cfg.lwe_params(cfg.h_list[0])
    base_seed = trial_seed(cfg.seed, "matrix")
    gen = make_generator(GeneratorSpec(cfg.raw["generator"], base_seed))
    t0 = time.perf_counter()
    if cfg.attack == "cc":
        pre = cfg.section("preprocess")
        m = default_m(params) if pre.get("m") is None else int(pre["m"])
        base = gen_samples(params, num=_num_samples(cfg, params, m), gen=gen)
        run = reduce_matrices(
            base.A,
            params.q,
            m,
            omega=int(pre["omega"]),
            beta=int(pre["beta"]),
            num_matrices=pre.get("num_matrices"),
            target_count=pre.get("target_count"),
            seed=trial_seed(cfg.seed, "subsample"),
            max_loops=int(pre["max_loops"]),
            workers=_workers(cfg.workers),
        )
        ctx.update(base=base, run=run)
    else:
        mp = _mitm_params(cfg)
        n = params.dim
        m = mp.m or n
        base = gen_samples(params, num=_num_samples(cfg, params, mp.tau * m), gen=gen)
        n1 = n - mp.zeta
        blocks = [np.arange(i * m, (i + 1) * m) for i in range(mp.tau)]
        vecs = scaled_dual_short_vectors([base.A[idx, :n1] for idx in blocks], params.q, mp.c, mp.tau, mp.beta, workers=1)
        ctx.update(base=base, vecs=vecs, blocks=blocks, n1=n1)
    ctx["preprocess_hours"] = (time.perf_counter() - t0) / 3600
    return ctx


def _mitm_params(cfg) -> MitmParams:
    sec = cfg.section("mitm")
    return MitmParams(zeta=int(sec["zeta"]), tau=int(sec["tau"]), c=int(sec["c"]), beta=int(sec["beta"]), m=sec.get("m"))


def _run_trial(cfg: ExperimentConfig, ctx: dict, h: int, trial: int) -> AttackResult:
    params = cfg.lwe_params(h)
    seed = trial_seed(cfg.seed, "trial", h, trial)
    s, gen = _secret(cfg, params, seed)
    rec = AttackResult(
        attack=cfg.attack,
        setting=cfg.setting,
        params=params.to_dict(),
        h=h,
        trial=trial,
        seed=seed,
        outcome="failed",
        preprocess_hours=ctx["preprocess_hours"],
        planted_fingerprint=fingerprint(s),
    )
    t0 = time.perf_counter()
    try:
        found = _ATTACK_FNS[cfg.attack](cfg, ctx, params, s, gen, rec)
    except MemoryCapExceeded as exc:
        rec.outcome, rec.reason = "failed", "memory_cap"
        rec.details["estimate_bytes"] = exc.estimate_bytes
        found = None
    except SearchBlowup as exc:
        rec.outcome, rec.reason = "failed", str(exc)
        found = None
    rec.recover_hours = (time.perf_counter() - t0) / 3600
    if found is not None:
        rec.fingerprint = fingerprint(found)
    if cfg.time_limit is not None and rec.outcome == "failed" and not rec.reason and rec.recover_hours * 3600 > cfg.time_limit:
        rec.outcome, rec.reason = "timeout", "time_limit"
    rec.peak_memory = _peak_memory()
    return rec


def _attack_usvp(cfg, ctx, params, s, gen, rec):
    sec = cfg.section("usvp")
    m = default_m(params) if sec.get("m") is None else int(sec["m"])
    samples = gen_samples(params, num=_num_samples(cfg, params, m), secret=s, gen=gen)
    holdout = _holdout(params, s, int(cfg.raw["holdout"]), gen)
    res = usvp_attack(
        samples,
        holdout,
        m=m,
        omega=sec.get("omega"),
        beta_start=int(sec["beta_start"]),
        beta_step=int(sec["beta_step"]),
        beta_max=int(sec["beta_max"]),
        loop_budget=int(sec["loop_budget"]),
        time_limit=cfg.time_limit,
    )
    rec.details = {"tours": res.tours, "betas": res.betas}
    rec.outcome = res.status
    if res.status == "timeout":
        rec.reason = "time_limit"
    return res.secret


def _attack_cc(cfg, ctx, params, s, gen, rec):
    sec = cfg.section("cc")
    samples = plant_secret(ctx["base"], s, gen)
    holdout = _holdout(params, s, int(cfg.raw["holdout"]), gen)
    ds = apply_reductions(ctx["run"], samples)
    alphabet = alphabet_for(params.secret.dist, params.secret.eta, params.secret.sigma)
    res = cc_attack(
        ds, holdout, int(sec["h_limit"]), alphabet, float(sec["gamma"]), method=str(sec["method"]), shifts=sec.get("shifts")
    )
    rec.details = {
        "num_cruel": ds.num_cruel,
        "cruel_nonzeros": int(np.count_nonzero(s[ds.cruel_mask])),
        "rho": round(float(ds.rho), 6),
        "shift": res.shift,
        "candidates": len(res.candidates),
    }
    rec.outcome = res.status
    return res.secret


def _attack_mitm(cfg, ctx, params, s, gen, rec):
    mp = _mitm_params(cfg)
    sec = cfg.section("mitm")
    q = params.q
    samples = plant_secret(ctx["base"], s, gen)
    blocks, n1 = ctx["blocks"], ctx["n1"]
    A2 = [samples.A[idx, n1:] for idx in blocks]
    bb = [samples.b[idx] for idx in blocks]
    Ap, bp, B = derive_samples_and_bound(ctx["vecs"], A2, bb, params.sigma_e, mp.c, q)
    h_prime = rec.h if sec.get("h_prime") is None else int(sec["h_prime"])
    dec = mitm_decide(Ap, bp, h_prime, mp, q, B=B, mem_cap=cfg.mem_cap)
    s2 = s[n1:]
    rec.details = {
        "B_over_q": round(B / q, 6),
        "guess_weight": int(np.count_nonzero(s2)),
        "table_entries": dec.table_entries,
        "s2_correct": bool(dec.s2 is not None and np.array_equal(dec.s2, s2)),
    }
    if dec.is_lwe:
        rec.outcome = "decided"
    # only the guessed tail is pinned down, so there is no full secret to fingerprint
    return None


def _attack_distinguish(cfg, ctx, params, s, gen, rec):
    sec = cfg.section("distinguish")
    oracle = SyntheticOracle(s, params.q, float(sec["oracle_sigma"]), seed=rec.seed)
    est, unknown = recover_secret(oracle, params.q, params.dim, int(sec["delta"]), int(sec["probes"]), seed=rec.seed)
    rec.details = {"unknown": len(unknown), "wrong_coords": int(np.count_nonzero(est != s))}
    holdout = _holdout(params, s, int(cfg.raw["holdout"]), gen)
    if verify_secret(holdout, est):
        rec.outcome = "recovered"
        return est
    return None


_ATTACK_FNS = {"usvp": _attack_usvp, "cc": _attack_cc, "mitm": _attack_mitm, "distinguish": _attack_distinguish}


def _trial_task(args):
    cfg, ctx, h, trial = args
    return _run_trial(cfg, ctx, h, trial)


def run_experiment(config: ExperimentConfig, results_path=None) -> list:
    """Run every (h, trial) of ``config``; append each record to ``results_path`` as it finishes."""
    if not config.h_list:
        return []
    ctx = _shared_context(config)
    tasks = [(config, ctx, h, t) for h in config.h_list for t in range(config.trials_per_h)]
    nworkers = _workers(config.workers)
    out = []
    fh = open(results_path, "a") if results_path is not None else None
    try:
        if nworkers > 1:
            with ProcessPoolExecutor(nworkers) as pool:
                for rec in pool.map(_trial_task, tasks):
                    out.append(_emit(rec, fh))
        else:
            for task in tasks:
                out.append(_emit(_trial_task(task), fh))
    finally:
        if fh is not None:
            fh.close()
    return out


def _emit(rec: AttackResult, fh):
    log.info("%s h=%d trial=%d -> %s", rec.attack, rec.h, rec.trial, rec.outcome)
    if fh is not None:
        fh.write(rec.to_json() + "\n")
        fh.flush()
    return rec


def outcome_fields(records) -> list:
    """The parts of each record that must replay identically."""
    return [(r.attack, r.setting, r.h, r.trial, r.seed, r.outcome, r.reason, r.fingerprint, r.planted_fingerprint) for r in records]


def load_results(path):
    """Parse a result log. Returns ``(records, skipped)``; bad lines are counted, not fatal."""
    records, skipped = [], 0
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                rec = AttackResult(**d)
                if rec.outcome not in OUTCOMES:
                    raise ValueError(rec.outcome)
            except (ValueError, TypeError):
                skipped += 1
                continue
            if rec.outcome == "recovered" and rec.fingerprint != rec.planted_fingerprint:
                skipped += 1
                continue
            records.append(rec)
    return records, skipped


def _fmt_hours(x):
    return f"{x:.6f}"


def report(results_path) -> dict:
    """Leaderboard over a result log.

    One row per (setting, attack): best h with at least one success, success
    rate per h, and the best time at that h. Total hours follow the full
    parallelization convention: preprocessing once plus recovery.
    """
    records, skipped = load_results(results_path)
    if skipped:
        log.warning("skipped %d unusable result records", skipped)
    groups = {}
    for r in records:
        groups.setdefault((r.setting, r.attack), []).append(r)
    rows = []
    for (setting, attack), recs in groups.items():
        per_h = {}
        for r in recs:
            att, ok = per_h.get(r.h, (0, 0))
            per_h[r.h] = (att + 1, ok + (r.outcome in ("recovered", "decided")))
        wins = [r for r in recs if r.outcome in ("recovered", "decided")]
        best_h = max((r.h for r in wins), default=None)
        best = [r for r in wins if r.h == best_h]
        recover = min((r.recover_hours for r in best), default=None)
        pre = max((r.preprocess_hours for r in recs), default=0.0)
        rows.append(
            {
                "setting": setting,
                "attack": attack,
                "best_h": best_h,
                "rates": {str(h): f"{ok}/{att}" for h, (att, ok) in sorted(per_h.items())},
                "attempted": len(recs),
                "preprocess_hours": pre,
                "recover_hours": recover,
                "total_hours": None if recover is None else pre + recover,
            }
        )
    rows.sort(
        key=lambda r: (
            -(r["best_h"] if r["best_h"] is not None else -1),
            r["total_hours"] if r["total_hours"] is not None else math.inf,
            r["setting"],
            r["attack"],
        )
    )
    return {"rows": rows, "skipped": skipped, "records": len(records)}


def render_tsv(board: dict) -> str:
    head = ["setting", "attack", "best_h", "rates", "preprocess_hours", "recover_hours", "total_hours"]
    lines = ["\t".join(head)]
    for r in board["rows"]:
        rates = " ".join(f"h{h}:{v}" for h, v in r["rates"].items())
        lines.append(
            "\t".join(
                [
                    r["setting"],
                    r["attack"],
                    "-" if r["best_h"] is None else str(r["best_h"]),
                    rates,
                    _fmt_hours(r["preprocess_hours"]),
                    "-" if r["recover_hours"] is None else _fmt_hours(r["recover_hours"]),
                    "-" if r["total_hours"] is None else _fmt_hours(r["total_hours"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def render_json(board: dict) -> str:
    return json.dumps(board, sort_keys=True, indent=2) + "\n"


def write_report(results_path, out_dir, figures: bool = True) -> dict:
    """Write ``leaderboard.tsv``, ``leaderboard.json`` and (optionally) a success-rate figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    board = report(results_path)
    (out / "leaderboard.tsv").write_text(render_tsv(board))
    (out / "leaderboard.json").write_text(render_json(board))
    paths = {"tsv": out / "leaderboard.tsv", "json": out / "leaderboard.json"}
    if figures and board["rows"]:
        from .plotting import plot_success_rates

        paths["png"] = plot_success_rates(board, out / "success_rates.png")
    return paths
