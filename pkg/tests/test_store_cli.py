import json
import math

import numpy as np
import pytest

from cascade_ldp import WeightModel, cli, store
from cascade_ldp import cascade as cs
from cascade_ldp import moments as mo
from cascade_ldp import ratefn as rf


def test_rate_grid_round_trip(tmp_path, expo):
    g = rf.rate_infinite(expo)
    store.write_rate_grid(g, tmp_path / "g")
    back = store.read_rate_grid(tmp_path / "g.csv")
    assert np.array_equal(back.points, g.points)
    assert np.array_equal(back.values, g.values)
    assert back.metadata() == json.loads((tmp_path / "g.json").read_text())
    assert json.loads((tmp_path / "g.json").read_text()) == store.jsonable(g.metadata())


def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(0)
    xs = np.concatenate([rng.standard_normal(1000) * 10.0 ** rng.integers(-300, 300, 1000),
                         [0.1, 1 / 3, np.nextafter(1, 2), 5e-324]])
    assert all(float(store.fmt(x)) == x for x in xs)
    assert store.fmt(math.inf) == "inf" and store.fmt(-math.inf) == "-inf"


def test_moment_table_round_trip(tmp_path, expo):
    t = mo.cascade_moments(expo, 4, 3, "exact")
    store.write_moment_table(t, tmp_path / "m")
    back = store.read_moment_table(tmp_path / "m")
    assert back.values == t.values and back.mode == "exact"
    f = mo.cascade_moments(expo, 7, 5)
    store.write_moment_table(f, tmp_path / "f")
    assert store.read_moment_table(tmp_path / "f").values == f.values


def test_batch_round_trip(tmp_path, expo):
    b = cs.sample_finite(expo, 3, 2, 500, seed=4)
    files = store.write_batch(b, tmp_path / "b")
    assert (tmp_path / "b.csv") in files
    back = store.read_batch(tmp_path / "b")
    assert np.array_equal(back.samples, b.samples)
    assert back.seed == 4 and back.level == 2
    big = cs.sample_finite(expo, 2, 1, store.CSV_BATCH_LIMIT + 1, seed=1)
    assert not any(p.suffix == ".csv" for p in store.write_batch(big, tmp_path / "big"))


def test_manifest_covers_files(tmp_path):
    a = tmp_path / "a.txt"
    a.write_text("x")
    store.write_manifest(tmp_path, [a], {"argv": []})
    b = tmp_path / "b.txt"
    b.write_text("y")
    man = json.loads(store.write_manifest(tmp_path, [b], {"argv": []}, [1]).read_text())
    assert [f["path"] for f in man["files"]] == ["a.txt", "b.txt"]
    assert man["files"][0]["sha256"] == store.sha256(a)
    assert len(man["runs"]) == 2


def _manifest_ok(out):
    man = json.loads((out / "manifest.json").read_text())
    emitted = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert emitted == {f["path"] for f in man["files"]}
    for f in man["files"]:
        assert f["sha256"] == store.sha256(out / f["path"])


def test_cli_rate(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["rate", "--model", "exp", "--n", "2", "--amax", "50", "--out", str(out)]) == 0
    g = store.read_rate_grid(out / "rate_n2")
    assert g.at(1.0) == 0.0 and g.level == 2
    _manifest_ok(out)


def test_cli_moments(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.run(["moments", "--model", "exp", "--r", "4", "--hmax", "3", "--out", str(out)]) == 0
    t = store.read_moment_table(out / "moments_r4_inf")
    assert t[2] == pytest.approx(1.5) and t[3] == pytest.approx(3.3)
    assert cli.run(["moments", "--model", "exp", "--r", "4", "--hmax", "3", "--mode", "exact",
                    "--out", str(out)]) == 0
    assert "33/10" in capsys.readouterr().out


def test_cli_simulate_and_exit_codes(tmp_path):
    out = str(tmp_path / "o")
    assert cli.run(["simulate", "--model", "exp", "--r", "4", "--n", "2", "--count", "200", "--out", out]) == 2
    assert cli.run(["simulate", "--model", "exp", "--r", "4", "--n", "2", "--count", "200",
                    "--seed", "1", "--out", out]) == 0
    assert cli.run(["simulate", "--model", "exp", "--r", "64", "--n", "5", "--count", "1",
                    "--seed", "1", "--out", out]) == 3
    assert cli.run(["moments", "--model", "exp", "--r", "2", "--hmax", "2", "--out", out]) == 3
    assert cli.run(["rate", "--model", "weibull", "--out", out]) == 2
    assert cli.run(["rate", "--bogus"]) == 2
    assert cli.run([]) == 2
    assert cli.run(["rate", "--n", "inf", "--max-level", "2", "--out", out]) == 3


def test_cli_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[w]\nkind = gamma\nshape = 2.0\n\n[simulate]\nseed = 9\nr = 3\nn = 2\ncount = 300\n")
    out = tmp_path / "o"
    assert cli.run(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    head = json.loads((out / "batch_r3_n2.json").read_text())
    assert head["model"] == "gamma(shape=2.0)" and head["seed"] == 9
    assert cli.run(["simulate", "--config", str(cfg), "--r", "5", "--out", str(out)]) == 0
    assert (out / "batch_r5_n2.npy").is_file()
    assert cli.run(["simulate", "--config", str(tmp_path / "missing.ini")]) == 2


def test_cli_verify_and_plotdata(tmp_path):
    out = tmp_path / "o"
    code = cli.run(["verify", "--preset", "quick", "--samples", "3000", "--out", str(out)])
    assert code in (0, 1)
    rep = json.loads((out / "report.json").read_text())
    assert code == (0 if rep["passed"] else 1)
    assert cli.run(["rate", "--n", "inf", "--out", str(out)]) == 0
    assert cli.run(["plotdata", "--grid", str(out / "rate_inf.csv"), "--report", str(out / "report.json"),
                    "--out", str(out)]) == 0
    import csv

    rows = list(csv.DictReader((out / "plotdata.csv").open()))
    grid = store.read_rate_grid(out / "rate_inf")
    rate_rows = [r for r in rows if r["kind"] == "rate"]
    assert np.array_equal([float(r["value"]) for r in rate_rows], grid.values)
    assert any(r["kind"] == "deviation" for r in rows)
    _manifest_ok(out)


def test_cli_twopoint_model_flags(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["rate", "--model", "twopoint", "--p-zero", "0.5", "--n", "3", "--out", str(out)]) == 0
    g = store.read_rate_grid(out / "rate_n3")
    assert g.model_id == WeightModel.two_point(0.5).model_id


def test_cli_missing_input_file_is_config_error(tmp_path):
    code = cli.run(["plotdata", "--grid", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == cli.EXIT_CONFIG
