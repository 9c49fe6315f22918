"""``lwe-bench`` command line.

Records go to stdout as tab-separated lines (or JSON lines with ``--json``);
logs go to stderr. Exit status is 0 unless something went wrong internally:
2 for bad input, 1 for anything unexpected. A failed attack is a result, not
an error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import estimator, harness, io
from .cc import alphabet_for, cc_attack
from .distinguisher import StdioOracle, SyntheticOracle, binary_distinguish, recover_secret, serve_oracle
from .errors import LweBenchError, MemoryCapExceeded
from .mitm import MitmParams, mitm_attack, table_memory_estimate
from .preprocess import ReducedDataset, build_reduced_dataset, cruel_threshold
from .rand import GeneratorSpec, make_generator
from .sampling import ErrorSpec, LweParams, SecretSpec, gen_samples
from .usvp import usvp_attack

log = logging.getLogger("lwe_bench")

HOLDOUT_SUFFIX = ".holdout"


class _Out:
    def __init__(self, as_json: bool):
        self.as_json = as_json

    def record(self, **fields):
        if self.as_json:
            print(json.dumps(fields, sort_keys=True, default=_jsonable))
        else:
            print("\t".join(f"{k}={_text(v)}" for k, v in fields.items()))

    def table(self, head, rows):
        if self.as_json:
            for r in rows:
                self.record(**dict(zip(head, r)))
            return
        cells = [[_text(v) for v in r] for r in rows]
        widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(head)]
        print("  ".join(h.rjust(w) for h, w in zip(head, widths)))
        for r in cells:
            print("  ".join(v.rjust(w) for v, w in zip(r, widths)))


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return str(v)


def _text(v):
    if isinstance(v, float):
        return f"{v:.4g}" if abs(v) < 1e6 else f"{v:.4e}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(str(int(x)) if isinstance(x, (int, np.integer)) else str(x) for x in v)
    return str(v)


def _params_from_args(a) -> LweParams:
    k = a.k if a.variant == "module" else 1
    dim = a.n * k
    secret = SecretSpec(a.secret, dim, fixed_h=a.h, eta=a.eta, sigma=a.secret_sigma)
    return LweParams(a.n, a.q, secret, ErrorSpec(a.error, a.sigma, a.eta), k=k, variant=a.variant)


def _holdout_path(path):
    return io.sidecar(path, HOLDOUT_SUFFIX)


def _load_holdout(data_path, explicit=None):
    path = Path(explicit) if explicit else _holdout_path(data_path)
    samples, _ = io.load_samples(path)
    return samples


def _compare(out, s, truth):
    if truth is None or s is None:
        return
    out.record(check="planted", match=bool(np.array_equal(np.asarray(s), truth)))


# ---------------------------------------------------------------- commands


def cmd_gen(a, out):
    params = _params_from_args(a)
    spec = GeneratorSpec(a.generator, a.seed)
    gen = make_generator(spec)
    S = gen_samples(params, num=a.num, gen=gen)
    io.save_samples(a.out, S, seed=a.seed, generator=a.generator)
    hold_rows = a.holdout if params.variant == "plain" else max(1, math.ceil(a.holdout / params.n))
    H = gen_samples(params, num=hold_rows, secret=S.secret, gen=gen)
    io.save_samples(_holdout_path(a.out), H, seed=a.seed, generator=a.generator, holdout=True)
    out.record(path=a.out, rows=len(S), holdout_rows=len(H), dim=params.dim, q=params.q, variant=params.variant)
    return 0


def cmd_preprocess(a, out):
    S, header = io.load_samples(a.data)
    split = None
    if a.split_nu is not None:
        split = (S.params.k, S.params.n, a.split_nu)
    ds = build_reduced_dataset(
        S,
        m=a.m,
        omega=a.omega,
        beta=a.beta,
        num_matrices=a.num_matrices,
        target_count=a.target_count,
        seed=a.seed,
        max_loops=a.max_loops,
        split_nu=split,
    )
    ds.save(a.out)
    out.record(path=a.out, rows=len(ds), rho=ds.rho, num_cruel=ds.num_cruel, matrices=len(ds.profiles), partial=ds.partial)
    if a.figure:
        from .plotting import plot_column_profile

        plot_column_profile(ds.column_std(), S.params.q, a.figure, threshold=cruel_threshold(S.params.q))
        out.record(figure=a.figure)
    return 0


def cmd_attack_usvp(a, out):
    S, _ = io.load_samples(a.data)
    H = _load_holdout(a.data, a.holdout)
    res = usvp_attack(
        S,
        H,
        m=a.m,
        omega=a.omega,
        beta_start=a.beta_start,
        beta_step=a.beta_step,
        beta_max=a.beta_max,
        loop_budget=a.loop_budget,
        time_limit=a.time_limit,
    )
    for t, (beta, sec, norm) in enumerate(zip(res.betas, res.tour_times, res.first_norms), 1):
        out.record(tour=t, beta=beta, seconds=sec, first_norm=norm)
    out.record(attack="usvp", status=res.status, tours=res.tours, seconds=res.seconds, secret=res.secret)
    _compare(out, res.secret, S.secret)
    return 0


def cmd_attack_cc(a, out):
    ds = ReducedDataset.load(a.reduced)
    holdout_src = a.data if a.data else None
    if holdout_src is None and a.holdout is None:
        raise LweBenchError("cc needs --data (for its holdout sidecar) or --holdout")
    H = _load_holdout(holdout_src, a.holdout)
    p = ds.params.secret
    alphabet = alphabet_for(p.dist, p.eta, p.sigma)
    shifts = None if a.shifts is None else [int(x) for x in a.shifts.split(",")]
    res = cc_attack(ds, H, a.h_limit, alphabet, a.gamma, method=a.method, shifts=shifts)
    for c in res.candidates[: a.log_candidates]:
        out.record(candidate=list(c.support), values=list(c.values), score=c.score)
    out.record(
        attack="cc",
        status=res.status,
        shift=res.shift,
        num_cruel=ds.num_cruel,
        brute_seconds=res.brute_seconds,
        recover_seconds=res.recover_seconds,
        secret=res.secret,
    )
    _compare(out, res.secret, H.secret)
    return 0


def cmd_attack_mitm(a, out):
    S, _ = io.load_samples(a.data)
    p = S.params.secret
    alphabet = tuple(v for v in alphabet_for(p.dist, p.eta, p.sigma))
    mp = MitmParams(zeta=a.zeta, tau=a.tau, c=a.c, alphabet=alphabet, m=a.m, beta=a.beta)
    cap = None if a.mem_cap is None else int(a.mem_cap)
    try:
        dec, B, _ = mitm_attack(S, mp, a.h_limit, mem_cap=cap)
    except MemoryCapExceeded as exc:
        out.record(
            attack="mitm",
            status="refused",
            zeta=a.zeta,
            h_prime=a.h_limit,
            estimate_bytes=exc.estimate_bytes,
            cap_bytes=exc.cap_bytes,
        )
        return 0
    out.record(
        attack="mitm",
        status="decided" if dec.is_lwe else "failed",
        B_over_q=B / S.params.q,
        table_entries=dec.table_entries,
        pairs_checked=dec.pairs_checked,
        blowups=dec.blowups,
        seconds=dec.seconds,
        s2=dec.s2,
    )
    if S.secret is not None and dec.s2 is not None:
        n1 = S.params.dim - a.zeta
        out.record(check="planted_tail", match=bool(np.array_equal(dec.s2, S.secret[n1:])))
    return 0


def _read_secret_file(path):
    return np.array([int(t) for t in Path(path).read_text().split()], dtype=np.int64)


def cmd_distinguish(a, out):
    truth = None
    if a.secret_file:
        truth = _read_secret_file(a.secret_file)
    if a.serve:
        if truth is None:
            raise LweBenchError("--serve needs --secret-file")
        serve_oracle(SyntheticOracle(truth, a.q, a.sigma, seed=a.seed))
        return 0
    if a.oracle_cmd:
        if a.dim is None:
            raise LweBenchError("--oracle-cmd needs --dim")
        oracle = StdioOracle(a.oracle_cmd, a.q)
        dim = a.dim
    else:
        if truth is None:
            raise LweBenchError("give --oracle-cmd or --secret-file for the synthetic oracle")
        oracle = SyntheticOracle(truth, a.q, a.sigma, seed=a.seed)
        dim = truth.size
    try:
        if a.binary:
            rng = np.random.default_rng(a.seed)
            pts = rng.integers(0, a.q, size=(a.probes, dim))
            s = np.array([binary_distinguish(oracle, a.q, i, a.probes, base_points=pts) == "active" for i in range(dim)], dtype=np.int64)
            unknown = []
        else:
            s, unknown = recover_secret(oracle, a.q, dim, a.delta, a.probes, seed=a.seed)
    finally:
        if isinstance(oracle, StdioOracle):
            oracle.close()
    out.record(attack="distinguish", mode="binary" if a.binary else "slope", unknown=len(unknown), secret=s)
    if truth is not None:
        out.record(check="planted", match=bool(np.array_equal(s, truth)), wrong=int(np.count_nonzero(s != truth)))
    return 0


def cmd_estimate_cost(a, out):
    reports = []
    for n in a.n:
        for beta in a.beta:
            if a.model in ("chengu", "both"):
                reports.append(estimator.chengu_cost(beta, n, a.log2q))
            if a.model in ("ablr21", "both"):
                reports.append(estimator.ablr21_cost(beta, n, a.log2q))
    out.table(
        ["model", "n", "beta", "dim", "log2_cycles", "hours"],
        [[r.model, r.n, r.beta, r.lattice_dim, round(r.log2_cycles, 2), r.hours_at_2_1ghz] for r in reports],
    )
    if a.figure:
        from .plotting import plot_costs

        plot_costs(reports, a.figure)
    return 0


def cmd_estimate_mitm(a, out):
    rows = []
    for h in a.h:
        for hp in a.h_prime:
            p = estimator.mitm_hit_prob(a.n_total, a.zeta, h, hp, mode=a.mode, trials=a.trials, seed=a.seed)
            mem = table_memory_estimate(a.zeta, hp, a.tau)
            rows.append([a.n_total, a.zeta, h, hp, round(100 * p, 1), mem])
    out.table(["n_total", "zeta", "h", "h_prime", "percent", "table_bytes"], rows)
    return 0


def cmd_estimate_cruel(a, out):
    rows = []
    for h in a.h:
        for x in a.x:
            p = estimator.cruel_bit_prob(a.n, a.k, a.num_cruel, h, x, trials=a.trials, seed=a.seed)
            rows.append([a.n, a.k, a.num_cruel, h, x, round(100 * p, 1)])
    out.table(["n", "k", "num_cruel", "h", "x", "percent"], rows)
    return 0


def cmd_estimate_irwin(a, out):
    r = estimator.irwin_hall_check(a.terms, a.q, a.samples, seed=a.seed)
    out.record(
        n_terms=a.terms,
        q=a.q,
        samples=a.samples,
        p_one_wrap=r["p_one_wrap"],
        p_one_wrap_exact=r["p_one_wrap_exact"],
        max_density_deviation=r["max_deviation"] * a.q,
    )
    if a.figure:
        from .plotting import plot_irwin_hall

        plot_irwin_hall(r, a.figure)
    return 0


def cmd_estimate_sieve(a, out):
    rows = []
    for n in a.n:
        e = estimator.sieving_memory_estimate(n)
        rows.append([n, round(e["sieve_dim"], 1), round(e["log2_vectors"], 1), e["bytes"]])
    out.table(["n", "sieve_dim", "log2_vectors", "bytes"], rows)
    return 0


def cmd_report(a, out):
    paths = harness.write_report(a.results, a.out, figures=not a.no_figures)
    text = Path(paths["tsv"]).read_text()
    if out.as_json:
        sys.stdout.write(Path(paths["json"]).read_text())
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(a, out):
    cfg = harness.load_config(a.config, a.set)
    records = harness.run_experiment(cfg, a.results)
    for r in records:
        out.record(attack=r.attack, h=r.h, trial=r.trial, outcome=r.outcome, reason=r.reason, fingerprint=r.fingerprint)
    return 0


# ---------------------------------------------------------------- parser


def _add_params(p):
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--q", type=int, default=3329)
    p.add_argument("--k", type=int, default=2, help="module rank (module variant only)")
    p.add_argument("--variant", choices=("plain", "ring", "module"), default="plain")
    p.add_argument("--secret", choices=("binary", "ternary", "binomial", "gaussian", "uniform"), default="ternary")
    p.add_argument("--h", type=int, default=None, help="fixed Hamming weight")
    p.add_argument("--eta", type=int, default=2)
    p.add_argument("--secret-sigma", type=float, default=3.19)
    p.add_argument("--error", choices=("gaussian", "binomial", "ternary", "binary"), default="gaussian")
    p.add_argument("--sigma", type=float, default=3.19, help="error std for gaussian errors")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lwe-bench", description="Desk-scale LWE attack benchmarks")
    ap.add_argument("--json", action="store_true", help="emit JSON lines instead of tab-separated records")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an LWE/RLWE/MLWE dataset")
    _add_params(p)
    p.add_argument("--num", type=int, default=None, help="samples (polynomial samples for ring/module)")
    p.add_argument("--holdout", type=int, default=64, help="rows kept aside for verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--generator", choices=("cryptographic", "lcg"), default="cryptographic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("preprocess", help="reduce subsampled matrices into a reduced dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--omega", type=int, default=4)
    p.add_argument("--beta", type=int, default=20)
    p.add_argument("--num-matrices", type=int, default=None)
    p.add_argument("--target-count", type=int, default=None)
    p.add_argument("--max-loops", type=int, default=8)
    p.add_argument("--split-nu", type=int, default=None, help="cliff splitting with this many unreduced columns per component")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--figure", default=None, help="write the per-column std profile to this image")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("attack", help="run one attack")
    asub = p.add_subparsers(dest="attack", required=True)

    u = asub.add_parser("usvp")
    u.add_argument("--data", required=True)
    u.add_argument("--holdout", default=None)
    u.add_argument("--m", type=int, default=None)
    u.add_argument("--omega", type=int, default=None)
    u.add_argument("--beta-start", type=int, default=20)
    u.add_argument("--beta-step", type=int, default=5)
    u.add_argument("--beta-max", type=int, default=40)
    u.add_argument("--loop-budget", type=int, default=8)
    u.add_argument("--time-limit", type=float, default=None)
    u.set_defaults(func=cmd_attack_usvp)

    c = asub.add_parser("cc")
    c.add_argument("--reduced", required=True)
    c.add_argument("--data", default=None, help="original dataset (its holdout sidecar is used)")
    c.add_argument("--holdout", default=None)
    c.add_argument("--h-limit", type=int, default=3)
    c.add_argument("--gamma", type=float, default=0.7)
    c.add_argument("--method", choices=("linreg", "greedy", "both"), default="linreg")
    c.add_argument("--shifts", default=None, help="comma-separated cliff shifts to try")
    c.add_argument("--log-candidates", type=int, default=10)
    c.set_defaults(func=cmd_attack_cc)

    m = asub.add_parser("mitm")
    m.add_argument("--data", required=True)
    m.add_argument("--zeta", type=int, required=True)
    m.add_argument("--tau", type=int, default=50)
    m.add_argument("--c", type=int, default=10)
    m.add_argument("--m", type=int, default=None)
    m.add_argument("--beta", type=int, default=20)
    m.add_argument("--h-limit", type=int, required=True, help="largest secret weight in the guessing region")
    m.add_argument("--mem-cap", type=float, default=None, help="bytes")
    m.set_defaults(func=cmd_attack_mitm)

    p = sub.add_parser("distinguish", help="recover a secret from a prediction oracle")
    p.add_argument("--q", type=int, default=3329)
    p.add_argument("--secret-file", default=None, help="planted secret (synthetic oracle / checking)")
    p.add_argument("--oracle-cmd", default=None, help="external oracle speaking the line protocol")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--sigma", type=float, default=0.0, help="synthetic oracle noise")
    p.add_argument("--delta", type=int, default=16)
    p.add_argument("--probes", type=int, default=128)
    p.add_argument("--binary", action="store_true", help="active/inactive test instead of slopes")
    p.add_argument("--serve", action="store_true", help="act as the synthetic oracle on stdin/stdout")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_distinguish)

    p = sub.add_parser("estimate", help="cost, probability and memory models")
    esub = p.add_subparsers(dest="what", required=True)
    e = esub.add_parser("cost")
    e.add_argument("--n", type=int, nargs="+", required=True)
    e.add_argument("--beta", type=int, nargs="+", required=True)
    e.add_argument("--log2q", type=float, default=None)
    e.add_argument("--model", choices=("chengu", "ablr21", "both"), default="both")
    e.add_argument("--figure", default=None)
    e.set_defaults(func=cmd_estimate_cost)
    e = esub.add_parser("mitm-prob")
    e.add_argument("--n-total", type=int, required=True)
    e.add_argument("--zeta", type=int, required=True)
    e.add_argument("--h", type=int, nargs="+", required=True)
    e.add_argument("--h-prime", type=int, nargs="+", required=True)
    e.add_argument("--tau", type=int, default=50)
    e.add_argument("--mode", choices=("exact", "monte_carlo"), default="exact")
    e.add_argument("--trials", type=int, default=10_000)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_estimate_mitm)
    e = esub.add_parser("cruel-prob")
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--k", type=int, default=1)
    e.add_argument("--num-cruel", type=int, required=True)
    e.add_argument("--h", type=int, nargs="+", required=True)
    e.add_argument("--x", type=int, nargs="+", required=True)
    e.add_argument("--trials", type=int, default=10_000)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_estimate_cruel)
    e = esub.add_parser("irwin-hall")
    e.add_argument("--terms", type=int, default=3)
    e.add_argument("--q", type=int, default=3329)
    e.add_argument("--samples", type=int, default=1_000_000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--figure", default=None)
    e.set_defaults(func=cmd_estimate_irwin)
    e = esub.add_parser("sieve-mem")
    e.add_argument("--n", type=int, nargs="+", required=True)
    e.set_defaults(func=cmd_estimate_sieve)

    p = sub.add_parser("report", help="leaderboard from a result log")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True, help="directory for leaderboard.tsv/json and figures")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="run a configured experiment")
    p.add_argument("--config", default=None, help="TOML experiment file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field")
    p.add_argument("--results", required=True, help="JSON-lines log to append to")
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = _Out(args.json)
    try:
        return int(args.func(args, out) or 0)
    except (LweBenchError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
