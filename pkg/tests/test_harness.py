import json

import pytest

from lwe_bench.errors import InvalidSpec
from lwe_bench.harness import (
    AttackResult,
    ExperimentConfig,
    apply_overrides,
    fingerprint,
    load_config,
    load_results,
    outcome_fields,
    render_json,
    render_tsv,
    report,
    run_experiment,
    trial_seed,
    write_report,
)


def usvp_config(**over):
    d = {
        "name": "toy",
        "attack": "usvp",
        "seed": 5,
        "h_list": [2, 3],
        "trials_per_h": 2,
        "holdout": 32,
        "params": {"n": 16, "q": 97, "secret": {"dist": "binary"}},
        "usvp": {"m": 14, "beta_start": 10, "beta_max": 10, "loop_budget": 2},
    }
    d.update(over)
    return ExperimentConfig.from_dict(d)


def record(setting="s", attack="cc", h=3, trial=0, outcome="failed", pre=1.0, rec=0.5, fp=""):
    return AttackResult(attack, setting, {}, h, trial, 0, outcome, "", pre, rec, 0, fp, fp)


def write_log(path, records, extra_lines=()):
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
        for line in extra_lines:
            fh.write(line + "\n")


def test_empty_h_list_runs_nothing(tmp_path):
    assert run_experiment(usvp_config(h_list=[]), tmp_path / "r.jsonl") == []
    assert not (tmp_path / "r.jsonl").exists()


def test_unknown_attack_rejected():
    with pytest.raises(InvalidSpec):
        ExperimentConfig.from_dict({"attack": "sieve"})
    with pytest.raises(InvalidSpec):
        ExperimentConfig.from_dict({"time_limit": -1})


def test_config_precedence(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('name = "file"\nseed = 3\n[params]\nn = 32\n[cc]\ngamma = 0.6\n')
    cfg = load_config(path, ["seed=9", "cc.h_limit=2", "params.secret.dist=binary"])
    assert cfg.name == "file" and cfg.seed == 9
    assert cfg.params["n"] == 32 and cfg.params["q"] == 3329
    assert cfg.section("cc") == {"h_limit": 2, "gamma": 0.6, "method": "linreg", "shifts": None}
    assert cfg.lwe_params(4).secret.dist == "binary"
    assert apply_overrides({}, ["a.b=text"]) == {"a": {"b": "text"}}
    with pytest.raises(InvalidSpec):
        apply_overrides({}, ["novalue"])


def test_trial_seeds_are_stable_and_distinct():
    assert trial_seed(1, 3, 0) == trial_seed(1, 3, 0)
    seeds = {trial_seed(1, h, t) for h in range(5) for t in range(20)}
    assert len(seeds) == 100
    assert fingerprint([1, 0, -1]) == fingerprint([1, 0, -1]) != fingerprint([1, 0, 1])


def test_replay_is_deterministic(tmp_path):
    a = run_experiment(usvp_config(), tmp_path / "a.jsonl")
    b = run_experiment(usvp_config(), tmp_path / "b.jsonl")
    assert len(a) == 4
    assert outcome_fields(a) == outcome_fields(b)
    assert any(r.outcome == "recovered" for r in a)
    for r in a:
        if r.outcome == "recovered":
            assert r.fingerprint == r.planted_fingerprint


def test_distinguish_trials(tmp_path):
    cfg = ExperimentConfig.from_dict(
        {"attack": "distinguish", "h_list": [4], "trials_per_h": 2, "params": {"n": 16, "secret": {"dist": "ternary"}}}
    )
    recs = run_experiment(cfg)
    assert [r.outcome for r in recs] == ["recovered", "recovered"]


def test_report_rates_and_best_h(tmp_path):
    recs = [
        record(h=3, trial=0, outcome="recovered", rec=0.2, fp="x"),
        record(h=3, trial=1, outcome="failed"),
        record(h=4, trial=0, outcome="failed"),
        record(h=4, trial=1, outcome="timeout"),
    ]
    write_log(tmp_path / "r.jsonl", recs)
    board = report(tmp_path / "r.jsonl")
    (row,) = board["rows"]
    assert row["best_h"] == 3
    assert row["rates"] == {"3": "1/2", "4": "0/2"}
    assert row["attempted"] == 4
    assert row["total_hours"] == pytest.approx(1.2)


def ordering_records():
    rows = [
        record("a", "cc", 5, outcome="recovered", rec=3.0, fp="x"),
        record("b", "cc", 5, outcome="recovered", rec=1.0, fp="x"),
        record("c", "usvp", 8, outcome="recovered", rec=9.0, fp="x"),
        record("d", "mitm", 9, outcome="failed"),
    ]
    return rows


def test_report_sorted_by_h_then_time(tmp_path):
    write_log(tmp_path / "r.jsonl", ordering_records())
    board = report(tmp_path / "r.jsonl")
    assert [r["setting"] for r in board["rows"]] == ["c", "b", "a", "d"]
    assert board["rows"][-1]["best_h"] is None


def test_corrupt_and_unverified_lines_are_skipped(tmp_path):
    bad = record(outcome="recovered")
    bad.fingerprint, bad.planted_fingerprint = "aa", "bb"
    write_log(tmp_path / "r.jsonl", [record(), bad], ['{"attack": "cc"', "not json", json.dumps({"x": 1})])
    recs, skipped = load_results(tmp_path / "r.jsonl")
    assert len(recs) == 1 and skipped == 4
    assert report(tmp_path / "r.jsonl")["skipped"] == 4


def test_report_outputs_are_byte_stable(tmp_path):
    write_log(tmp_path / "r.jsonl", ordering_records())
    outs = []
    for name in ("x", "y"):
        write_report(tmp_path / "r.jsonl", tmp_path / name)
        outs.append([(tmp_path / name / f).read_bytes() for f in ("leaderboard.tsv", "leaderboard.json", "success_rates.png")])
    assert outs[0] == outs[1]
    board = report(tmp_path / "r.jsonl")
    assert render_tsv(board).splitlines()[0].startswith("setting\tattack")
    assert json.loads(render_json(board))["records"] == 4
