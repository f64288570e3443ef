import csv
import math

import pytest

from shiftlab import cli


def run(capsys, *argv):
    rc = cli.main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def rows(text):
    return list(csv.DictReader(text.splitlines()))


def test_gen_writes_manifest(tmp_path, capsys):
    out = tmp_path / "data"
    rc, _, _ = run(capsys, "gen", "--preset", "D1", "--scaling", "listing1", "--d", "3",
                   "--n", "20", "--out", str(out))
    assert rc == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["env1.csv", "env2.csv", "env3.csv", "run_manifest.csv", "true_gamma.csv"]
    manifest = rows((out / "run_manifest.csv").read_text())
    assert manifest[0]["command"] == "gen" and manifest[0]["seed"] == "0"
    assert set(manifest[0]) == {"command", "config_hash", "seed", "version", "timestamp"}


def test_gen_reruns_are_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "gen", "--d", "4", "--n", "50", "--seed", "9",
                   "--out", str(tmp_path / name))[0] == 0
    for f in ("env1.csv", "env2.csv", "env3.csv", "true_gamma.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    ha = rows((tmp_path / "a" / "run_manifest.csv").read_text())[0]["config_hash"]
    hb = rows((tmp_path / "b" / "run_manifest.csv").read_text())[0]["config_hash"]
    assert ha != hb  # out path is part of the config


def test_seed_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SHIFTLAB_SEED", "5")
    run(capsys, "gen", "--d", "2", "--n", "5", "--out", str(tmp_path / "env"))
    run(capsys, "gen", "--d", "2", "--n", "5", "--seed", "5", "--out", str(tmp_path / "flag"))
    assert (tmp_path / "env" / "env1.csv").read_bytes() == (tmp_path / "flag" / "env1.csv").read_bytes()


def test_fit_orders_d1_and_d2(tmp_path, capsys):
    spurious = {}
    for preset in ("D1", "D2"):
        d = tmp_path / preset
        run(capsys, "gen", "--preset", preset, "--n", "2000", "--d", "5", "--out", str(d))
        rc, out, _ = run(capsys, "fit", "--data", str(d), "--method", "normal-eq")
        assert rc == 0
        spurious[preset] = float(rows(out)[0]["spurious_mean_abs"])
    assert spurious["D2"] < spurious["D1"]


def test_fit_writes_weights(tmp_path, capsys):
    d = tmp_path / "d"
    run(capsys, "gen", "--d", "2", "--n", "100", "--out", str(d))
    assert run(capsys, "fit", "--data", str(d), "--out", str(tmp_path / "fit"))[0] == 0
    lines = (tmp_path / "fit" / "weights.csv").read_text().splitlines()
    assert lines[0] == "0" and len(lines) == 1 + 4


def test_bounds_example(capsys):
    rc, out, err = run(capsys, "bounds", "t1", "--alpha", "0", "--E", "3", "--delta", "0.05")
    assert rc == 0
    row = rows(out)[0]
    assert float(row["rhs"]) == pytest.approx(math.sqrt(math.log(20) / 6), abs=1e-15)
    assert "run_manifest" in err


def test_bounds_log_base_is_display_only(capsys):
    _, plain, _ = run(capsys, "bounds", "t2", "--beta", "0.5", "--m", "0.5", "--E", "9")
    _, based, _ = run(capsys, "bounds", "t2", "--beta", "0.5", "--m", "0.5", "--E", "9",
                      "--log-base", "2")
    a, b = rows(plain)[0], rows(based)[0]
    assert a["rhs"] == b["rhs"] and a["sigma"] == b["sigma"]
    assert float(b["kl_radius_base2"]) == pytest.approx((1 / 3) / math.log(2))


def test_shift_output_layout(capsys):
    rc, out, _ = run(capsys, "shift", "--preset", "D1", "--scaling", "listing1", "--d", "2")
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "env_id,1,2,3"
    assert lines[-1].startswith("alpha,")
    assert float(lines[-1].split(",")[1]) == pytest.approx(4 - math.log(3))


def test_massart_outputs(tmp_path, capsys):
    rc, out, _ = run(capsys, "massart", "--trials", "4", "--n", "200", "--out", str(tmp_path))
    assert rc == 0
    trials = rows((tmp_path / "trials.csv").read_text())
    assert list(trials[0]) == ["trial", "lhs", "rhs", "violated"] and len(trials) == 4
    assert rows(out)[0]["trials"] == "4"


def test_sweep_columns(capsys):
    rc, out, _ = run(capsys, "sweep", "--grid", "0.3", "--n", "200", "--trials", "1")
    assert rc == 0
    assert out.splitlines()[0] == "trial,e1,e2,dv,y_un,y_e1,cf_gap_un,cf_gap_e1"


def test_colored(capsys):
    rc, out, _ = run(capsys, "colored", "--n", "500")
    assert rc == 0 and len(rows(out)) == 3


def test_hyptest_and_singular(tmp_path, capsys):
    path = tmp_path / "d.csv"
    path.write_text("y,a,b\n1,1,2\n2,2,4\n3,3,6.5\n5,4,8\n")
    rc, out, _ = run(capsys, "hyptest", "--csv", str(path), "--y-col", "y", "--x-cols", "a",
                     "--no-intercept")
    assert rc == 0 and rows(out)[0]["name"] == "a"
    path.write_text("y,a,b\n1,1,2\n2,2,4\n3,3,6\n5,4,8\n")
    rc, _, err = run(capsys, "hyptest", "--csv", str(path), "--y-col", "y", "--x-cols", "a,b")
    assert rc == 3 and "rank deficient" in err


def test_exit_code_validation(capsys):
    assert run(capsys, "bounds", "t1", "--alpha", "0", "--E", "2")[0] == 2


def test_exit_code_io(tmp_path, capsys):
    assert run(capsys, "fit", "--data", str(tmp_path / "missing"))[0] == 4
    assert run(capsys, "hyptest", "--csv", str(tmp_path / "none.csv"), "--y-col", "y",
               "--x-cols", "a")[0] == 4


def test_config_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[bounds]\nalpha = 0.0\nE = 101\ndelta = 0.05\n")
    _, out, _ = run(capsys, "--config", str(cfg), "bounds", "t1")
    assert float(rows(out)[0]["rhs"]) == pytest.approx(0.9713, abs=1e-4)
    _, out, _ = run(capsys, "--config", str(cfg), "bounds", "t1", "--E", "3")
    assert float(rows(out)[0]["rhs"]) == pytest.approx(0.7066, abs=1e-4)


@pytest.mark.parametrize("body", ["[bounds]\nalpah = 1\n", "[nope]\nx = 1\n", "[bounds]\nE = 'x'\n",
                                  "not toml ["])
def test_config_rejected(tmp_path, capsys, body):
    cfg = tmp_path / "c.toml"
    cfg.write_text(body)
    rc, _, err = run(capsys, "--config", str(cfg), "bounds", "t1", "--alpha", "0", "--E", "3")
    assert rc == 2 and "error" in err


def test_fmt_round_trip():
    for v in (0.1, 1 / 3, 1e-300, 123456789.123456789):
        assert float(cli.fmt(v)) == v
    assert cli.fmt(True) == "true" and cli.fmt(math.inf) == "inf"
