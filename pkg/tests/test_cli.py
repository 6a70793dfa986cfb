import csv
import io
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combdrive.cli import (
    CONFIG_ENV,
    ConfigError,
    RunConfig,
    build_parser,
    config_from_args,
    dump_config,
    load_config,
    main,
    make_config,
    parse_list,
)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


configs = st.builds(
    RunConfig,
    beta=st.floats(0.05, 1.0),
    V0=st.just(0.3),
    Tv=st.floats(1.0, 20.0),
    delta_grid=st.lists(st.floats(1e-6, 0.25), max_size=5, unique=True).map(lambda v: (0.0, *sorted(v))),
    m=st.lists(st.integers(1, 9), min_size=1, max_size=3).map(tuple),
    p=st.lists(st.integers(1, 4), min_size=1, max_size=3).map(tuple),
    n=st.lists(st.integers(1, 6), min_size=1, max_size=4).map(tuple),
    symmetry=st.sampled_from(["odd", "even", "both"]),
    grid_size=st.integers(10, 500),
    points=st.integers(2, 5000),
    out=st.one_of(st.none(), st.text("abc_/.", min_size=1, max_size=12)),
    format=st.sampled_from(["csv", "jsonl"]),
    workers=st.integers(1, 8),
)


@settings(max_examples=100, deadline=None)
@given(configs)
def test_config_round_trip(cfg):
    text = dump_config(cfg)
    again = load_config(text)
    assert again == cfg
    assert dump_config(again) == text


def test_parse_list():
    assert parse_list("1-4", int) == [1, 2, 3, 4]
    assert parse_list("2, 5,7", int) == [2, 5, 7]
    assert parse_list("0,1e-4,2e-4") == [0.0, 1e-4, 2e-4]


def test_precedence_flags_over_file_over_defaults(tmp_path, monkeypatch):
    f = tmp_path / "run.json"
    f.write_text(json.dumps({"beta": 0.2, "m": [4], "workers": 3}))
    parser = build_parser()
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    cfg = config_from_args(parser.parse_args(["period", "--config", str(f), "--beta", "0.3"]))
    assert cfg.beta == 0.3 and cfg.m == (4,) and cfg.workers == 3 and cfg.V0 == RunConfig().V0
    env_cfg = config_from_args(parser.parse_args(["period"]), environ={CONFIG_ENV: str(f)})
    assert env_cfg.beta == 0.2
    assert config_from_args(parser.parse_args(["period"]), environ={}) == RunConfig()


def test_dump_config_flag(capsys):
    code, out, _ = run(["orbit", "--m", "2-3", "--dump-config"], capsys)
    assert code == 0
    assert load_config(out).m == (2, 3)


@pytest.mark.parametrize(
    "values",
    [
        {"V0": 5.0},
        {"delta_grid": [0.1, 0.2]},
        {"delta_grid": [0.0, 0.6]},
        {"symmetry": "skew"},
        {"format": "xml"},
        {"workers": 0},
        {"m": [1.5]},
        {"colour": "red"},
        {"hbar": [0.2]},
    ],
)
def test_invalid_config_rejected(values):
    with pytest.raises(ConfigError):
        make_config(values)


def test_exit_codes(capsys, tmp_path):
    assert run(["orbit", "--m", "1", "--p", "1"], capsys)[0] == 2
    assert run(["period", "--hbar", "0.01,0.2"], capsys)[0] == 2
    assert run(["period", "--bogus"], capsys)[0] == 2
    assert run([], capsys)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["period", "--config", str(bad)], capsys)[0] == 2
    assert run(["period", "--config", str(tmp_path / "missing.json")], capsys)[0] == 2


def test_period_table(capsys, tmp_path):
    out = tmp_path / "period.csv"
    code, text, _ = run(["period", "--out", str(out)], capsys)
    assert code == 0
    assert "3/3 properties pass" in text
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 100
    assert set(rows[0]) == {"hbar", "T", "dTdh", "dTdh_fd"}
    first = out.read_bytes()
    assert run(["period", "--out", str(out)], capsys)[0] == 0
    assert out.read_bytes() == first


def test_orbit_summary_and_trajectory(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    code, text, _ = run(["orbit", "--m", "2", "--p", "1", "--symmetry", "odd", "--points", "101", "--out", str(out)], capsys)
    assert code == 0
    assert "zeros=2" in text
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 101 and set(rows[0]) == {"t", "x", "xdot", "H"}
    code, text, _ = run(["orbit", "--m", "2", "--p", "1", "--symmetry", "odd"], capsys)
    summary = json.loads(text.splitlines()[0])
    assert summary["zero_count"] == 2
    assert summary["period"] == pytest.approx(4 * math.pi, rel=1e-9)
    assert summary["residuals"]["symmetry"] <= 1e-8


def test_orbit_multiple_files(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    assert run(["orbit", "--m", "3", "--p", "1-2", "--points", "11", "--out", str(out)], capsys)[0] == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [f"traj_m3_p{p}_{s}.csv" for p in (1, 2) for s in ("even", "odd")]


def test_stability_table(capsys):
    code, text, err = run(["stability", "--n", "1-2", "--m", "3", "--format", "jsonl"], capsys)
    assert code == 0
    rows = [json.loads(line) for line in text.splitlines()]
    by = {(r["m"], r["p"], r["symmetry"]): r for r in rows}
    assert set(by) == {(m, 1, s) for m in (2, 3, 4) for s in ("odd", "even")}
    assert by[(3, 1, "odd")]["delicate"] and "delicate, tau'=0" in err
    assert by[(2, 1, "odd")]["tau_prime"] < 0 < by[(2, 1, "even")]["tau_prime"]
    assert by[(2, 1, "odd")]["frequency_condition"] is True
    assert by[(2, 1, "odd")]["A_n"] == pytest.approx(-0.3744, abs=1e-3)


def test_parallel_output_matches_serial(capsys):
    serial = run(["stability", "--n", "1-2", "--m", "3"], capsys)[1]
    parallel = run(["stability", "--n", "1-2", "--m", "3", "--workers", "2"], capsys)[1]
    assert serial == parallel


def test_continue_family_output(capsys, tmp_path):
    out = tmp_path / "fam.jsonl"
    argv = ["continue", "--m", "2", "--symmetry", "odd", "--delta-grid", "0,1e-4,2e-4", "--format", "jsonl", "--out", str(out)]
    code, text, _ = run(argv, capsys)
    assert code == 0
    assert "slope match" in text
    first = out.read_bytes()
    rows = [json.loads(line) for line in first.decode().splitlines()]
    assert [r["delta"] for r in rows] == [0.0, 1e-4, 2e-4]
    assert run(argv, capsys)[0] == 0
    assert out.read_bytes() == first


def test_verify_subset(capsys, tmp_path):
    out = tmp_path / "verify.jsonl"
    code, text, _ = run(["verify", "--criteria", "1-3", "--out", str(out)], capsys)
    assert code == 0
    assert "3/3 criteria pass" in text
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["criterion"] for r in recs] == [1, 2, 3] and all(r["passed"] for r in recs)
