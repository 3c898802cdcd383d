import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from mpu.errors import ConfigError, DataError
from mpu.harness import ExperimentConfig, run, summarize
from mpu.harness.cli import main
from mpu.harness.config import apply_seed_env, parse_ensemble
from mpu.harness.runner import read_rows
from mpu.harness.summarize import describe


def small(kind="gen", **kw):
    base = {"kind": kind, "N": 12, "M": 16, "trials": 3, "seed": 1}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_config_round_trip_and_hash():
    cfg = small("edge", options={"k": 2})
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.content_hash() == cfg.content_hash()
    assert len(cfg.content_hash()) == 16
    assert cfg.replace(output="elsewhere").content_hash() == cfg.content_hash()
    assert cfg.replace(seed=2).content_hash() != cfg.content_hash()
    assert cfg.options["batch"] == 100


@pytest.mark.parametrize("bad", [
    {"kind": "nope", "N": 4, "M": 4},
    {"kind": "gen", "N": 4},
    {"kind": "gen", "N": 4, "M": 4, "trials": -1},
    {"kind": "gen", "N": 4, "M": 4, "seed": 1.5},
    {"kind": "gen", "N": 4, "M": 4, "colour": "red"},
    {"kind": "gen", "N": 4, "M": 4, "options": {"k": 1}},
    {"kind": "gen", "N": 4, "M": 4, "ensembles": [{"kind": "cauchy"}]},
    {"kind": "gen", "N": 1000, "M": 4},
    {"kind": "gfct", "N": 10, "M": 20},
    {"kind": "edge", "N": 10, "M": 20, "options": {"k": 11}},
    {"kind": "flow", "N": 10, "M": 20, "options": {"t": 1.0, "steps": 10}},
    {"kind": "bulk", "N": 10, "M": 10, "ensembles": [{"kind": "gaussian"}] * 2,
     "options": {"E": 0.1}},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{not json")


def test_seed_env_override():
    cfg = small()
    assert apply_seed_env(cfg, {"MPU_SEED": "7"}).seed == 7
    assert apply_seed_env(cfg, {}).seed == 1
    with pytest.raises(ConfigError):
        apply_seed_env(cfg, {"MPU_SEED": "x"})


def test_parse_ensemble():
    assert parse_ensemble("two_point:a=2") == {"kind": "two_point", "params": {"a": 2.0}}
    assert parse_ensemble("gaussian") == {"kind": "gaussian", "params": {}}
    with pytest.raises(ConfigError):
        parse_ensemble("two_point:a")
    with pytest.raises(ConfigError):
        parse_ensemble("two_point:a=b")


def test_labels_disambiguate_repeats():
    cfg = small(ensembles=[{"kind": "gaussian"}, {"kind": "gaussian"}])
    assert cfg.labels() == ["gaussian", "gaussian2"]


@pytest.mark.parametrize("kind,extra", [
    ("gen", {}),
    ("rigidity", {}),
    ("edge", {"ensembles": [{"kind": "gaussian"}, {"kind": "rademacher"}], "options": {"batch": 2}}),
    ("locallaw", {"options": {"n_eta": 3, "z_subset": 2}}),
    ("gfct", {"N": 30, "M": 60, "ensembles": [{"kind": "gaussian"}, {"kind": "rademacher"}]}),
    ("flow", {"options": {"t": 0.1, "steps": 10}}),
    ("bulk", {"N": 40, "M": 40, "ensembles": [{"kind": "gaussian"}, {"kind": "rademacher"}]}),
])
def test_run_is_thread_count_independent(tmp_path, kind, extra):
    cfg = small(kind, **extra)
    s1 = run(cfg, tmp_path / "a", threads=1)
    s4 = run(cfg, tmp_path / "b", threads=4)
    for name in ("data.jsonl", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert s1 == s4
    rows = read_rows(tmp_path / "a" / "data.jsonl")
    assert sum(1 for r in rows if r.get("trial_complete")) == 3
    assert all(r["config_hash"] == cfg.content_hash() and r["schema"] == 1 for r in rows)
    meta = json.loads((tmp_path / "a" / "metadata.json").read_text())
    assert meta["config_hash"] == cfg.content_hash()


def test_gen_and_rigidity_write_csv(tmp_path):
    run(small("gen"), tmp_path / "g")
    assert (tmp_path / "g" / "spectrum_gaussian_trial00000.csv").exists()
    assert (tmp_path / "g" / "classical_locations.csv").exists()
    run(small("rigidity"), tmp_path / "r")
    head = (tmp_path / "r" / "rigidity_gaussian_trial00002.csv").read_text().splitlines()[0]
    assert head == "j,jtilde,lambda,gamma,raw_dev,normalized_dev"


def test_zero_trials(tmp_path):
    s = run(small(trials=0), tmp_path)
    assert (tmp_path / "data.jsonl").read_text() == ""
    assert s["trials"] == 0


def test_resume_matches_fresh_run(tmp_path):
    cfg = small("edge", trials=4)
    run(cfg, tmp_path / "fresh")
    fresh = (tmp_path / "fresh" / "data.jsonl").read_bytes()
    run(cfg.replace(trials=2), tmp_path / "part")
    part = tmp_path / "part" / "data.jsonl"
    # wrong hash: the partial run belongs to a different config
    with pytest.raises(DataError):
        run(cfg, tmp_path / "part", resume=True)
    # same config, interrupted mid-write: a torn final line is dropped
    run(cfg, tmp_path / "torn")
    lines = (tmp_path / "torn" / "data.jsonl").read_text().splitlines(keepends=True)
    cut = max(i for i, l in enumerate(lines) if '"trial": 2' in l)
    (tmp_path / "torn" / "data.jsonl").write_text("".join(lines[:cut]) + lines[cut][:10])
    run(cfg, tmp_path / "torn", resume=True)
    assert (tmp_path / "torn" / "data.jsonl").read_bytes() == fresh
    meta = json.loads((tmp_path / "torn" / "metadata.json").read_text())
    assert meta["resumed_trials"] == [0, 1]
    assert part.exists()


def test_summarize_single_record_and_quantiles(tmp_path):
    p = tmp_path / "d.jsonl"
    p.write_text(json.dumps({"config_hash": "h", "schema": 1, "trial": 0, "x": 2.5}) + "\n")
    out = summarize([p])
    st_ = out["statistics"]["x"]
    assert st_["n"] == 1 and st_["mean"] == 2.5 and set(st_["quantiles"].values()) == {2.5}
    assert "aggregate" not in out
    rows = [{"config_hash": "h", "schema": 1, "trial": i, "x": float(i)} for i in range(1, 101)]
    p.write_text("".join(json.dumps(r) + "\n" for r in rows))
    assert summarize([p])["statistics"]["x"]["median"] == 50.5


def test_summarize_permutation_invariant(tmp_path):
    rows = [{"config_hash": "h", "schema": 1, "trial": i, "x": random.Random(i).random()}
            for i in range(50)]
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    a.write_text("".join(json.dumps(r) + "\n" for r in rows))
    random.Random(0).shuffle(rows)
    b.write_text("".join(json.dumps(r) + "\n" for r in rows))
    assert summarize([a]) == summarize([b])


def test_summarize_refuses_mixed_and_bad_schema(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    a.write_text(json.dumps({"config_hash": "h1", "schema": 1, "trial": 0, "x": 1}) + "\n")
    b.write_text(json.dumps({"config_hash": "h2", "schema": 1, "trial": 0, "x": 2}) + "\n")
    with pytest.raises(DataError):
        summarize([a, b])
    assert summarize([a, b], allow_mixed=True)["statistics"]["x"]["n"] == 2
    b.write_text(json.dumps({"config_hash": "h1", "schema": 99, "trial": 0}) + "\n")
    with pytest.raises(DataError):
        summarize([b])
    b.write_text("{oops\n")
    with pytest.raises(DataError):
        summarize([b])


def test_summarize_recomputes_aggregate(tmp_path):
    s = run(small("edge"), tmp_path)
    out = summarize([tmp_path / "data.jsonl"])
    assert out["aggregate"] == json.loads(json.dumps(s["aggregate"]))


@settings(max_examples=40, deadline=None)
@given(v=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=30), data=st.data())
def test_describe_permutation_invariant(v, data):
    assert describe(v) == describe(data.draw(st.permutations(v)))


# -- CLI ---------------------------------------------------------------------

def test_cli_run_and_summarize(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["edge", "--N", "10", "--M", "20", "--trials", "2", "--out", str(out),
                 "--ensemble", "gaussian", "--ensemble", "two_point:a=2", "--batch", "1"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["kind"] == "edge"
    assert main(["summarize", str(out / "data.jsonl")]) == 0
    assert "statistics" in json.loads(capsys.readouterr().out)


def _err(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["gen", "--N", "10"]) == 2
    assert _err(capsys)["error"] == "ConfigError"
    assert main(["gen", "--N", "10", "--M", "10", "--bogus"]) == 2
    _err(capsys)
    assert main(["summarize", str(tmp_path / "missing.jsonl")]) == 3
    assert _err(capsys)["exit_code"] == 3
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"config_hash": "h", "schema": 7, "trial": 0}\n')
    assert main(["summarize", str(bad)]) == 3
    assert main(["gfct", "--N", "10", "--M", "20", "--E-offset", "5"]) == 2


def test_cli_config_precedence_and_seed_env(tmp_path, capsys, monkeypatch):
    cfgfile = tmp_path / "c.json"
    cfgfile.write_text(json.dumps({"N": 8, "M": 8, "trials": 1, "options": {"k": 2}}))
    out = tmp_path / "o"
    monkeypatch.setenv("MPU_SEED", "5")
    assert main(["edge", "--config", str(cfgfile), "--N", "99", "--M", "99", "--batch", "3",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    meta = json.loads((out / "metadata.json").read_text())["config"]
    assert (meta["N"], meta["seed"]) == (8, 5)
    assert meta["options"]["k"] == 2 and meta["options"]["batch"] == 3
    cfgfile.write_text(json.dumps({"kind": "gen", "N": 8, "M": 8}))
    assert main(["edge", "--config", str(cfgfile)]) == 2


def test_cli_figures(tmp_path, capsys):
    out = tmp_path / "f"
    assert main(["edge", "--N", "10", "--M", "20", "--trials", "3", "--out", str(out),
                 "--figures"]) == 0
    capsys.readouterr()
    pngs = list(out.glob("*.png"))
    assert pngs and all(p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n" for p in pngs)


def test_cli_table_check(capsys):
    assert main(["tw-table-check"]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]
