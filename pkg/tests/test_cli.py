import csv

import numpy as np
import pytest

from fatou2d.cli import EXIT_HYPOTHESIS, EXIT_IO, EXIT_OK, EXIT_VERIFY, main
from fatou2d.suite import abel_samples


@pytest.fixture(autouse=True)
def at_root(monkeypatch, data_dir):
    monkeypatch.chdir(data_dir.parent)


def read_kv(text):
    out = {}
    for line in text.splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            out[k.strip()] = v.strip()
    return out


def test_analyze_abate(capsys, tmp_path):
    assert main(["analyze", "--germ", "data/abate_1_11.germ", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "order k = 2" in out and "directions = 1" in out
    assert "[0:1]" in out and "lambda = 1+0j" in out and "director = 0+0j" in out
    assert "hypothesis: PASS" in out
    rows = list(csv.reader(open(tmp_path / "analyze.csv")))
    assert rows[0][0] == "direction" and len(rows) == 2


def test_analyze_three_directions(capsys):
    assert main(["analyze", "--germ", "data/three_directions.germ"]) == EXIT_HYPOTHESIS
    out = capsys.readouterr().out
    assert "directions = 3" in out and "hypothesis: FAIL" in out


def test_analyze_parse_error(capsys, tmp_path):
    bad = tmp_path / "bad.germ"
    bad.write_text("1 1 x 0 0\n")
    assert main(["analyze", "--germ", str(bad)]) == EXIT_IO
    assert "line 1" in capsys.readouterr().err


def test_usage_error_is_not_a_hypothesis_failure(capsys):
    assert main(["analyze", "--no-such-flag"]) == EXIT_IO
    assert main(["frobnicate"]) == EXIT_IO


def test_missing_file(capsys):
    assert main(["analyze", "--germ", "data/nope.germ"]) == EXIT_IO


def test_normalize_outputs(capsys, tmp_path):
    assert main(["normalize", "--germ", "data/k3_template.germ", "--out", str(tmp_path)]) == EXIT_OK
    assert "k = 3" in capsys.readouterr().out
    for name in ("normal_form.txt", "g_coeffs.csv", "h_coeffs.csv"):
        assert (tmp_path / name).exists()
    assert open(tmp_path / "g_coeffs.csv").readline().strip() == "j,m,re,im"


def test_orbit_first_row_is_input(capsys, tmp_path):
    rc = main(["orbit", "--germ", "data/abate_1_11.germ", "--out", str(tmp_path),
               "--u", "40+1j", "--v", "20000", "--steps", "0"])
    assert rc == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "orbit.csv")))
    assert len(rows) == 2
    assert [float(c) for c in rows[1][1:5]] == [40.0, 1.0, 20000.0, 0.0]


def test_orbit_outside_region(capsys, tmp_path):
    rc = main(["orbit", "--germ", "data/abate_1_11.germ", "--out", str(tmp_path),
               "--u", "5", "--v", "100"])
    assert rc == EXIT_IO


def test_fatou_abel_through_cli(capsys, ctx2):
    u, v = abel_samples(ctx2, 1, seed=21)
    u1, v1 = ctx2.step(u, v)
    vals = []
    for a, b in ((u[0], v[0]), (u1[0], v1[0])):
        assert main(["fatou", "--germ", "data/abate_1_11.germ",
                     "--u", repr(complex(a)), "--v", repr(complex(b))]) == EXIT_OK
        vals.append(complex(read_kv(capsys.readouterr().out)["omega"].strip("()")))
    assert abs(vals[1] - vals[0] - 1) <= 1e-8


def test_fatou_extension_point(capsys):
    rc = main(["fatou", "--germ", "data/abate_1_11.germ",
               "--x=-0.011363636363636364j", "--y=-0.08545454545454546"])
    assert rc == EXIT_OK
    kv = read_kv(capsys.readouterr().out)
    assert kv["verdict"] == "attracted" and kv["n_entry"] == "4054"
    # values are plain complex literals
    complex(kv["omega"]), complex(kv["tau"])


def test_verify_small_passes(capsys, tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text("germ = data/abate_1_11.germ\nsamples_invariance = 500\nsamples_bounds = 5\n"
                   "bounds_steps = 1000\nsamples_abel = 5\nsamples_tau = 5\nsamples_f3 = 500\n"
                   f"out = {tmp_path}\n")
    assert main(["verify", "--config", str(cfg)]) == EXIT_OK
    cert = read_kv((tmp_path / "certificate.txt").read_text())
    assert cert["all_pass"] == "true" and cert["k"] == "2"
    assert float(cert["abel_max_residual"]) <= 1e-8
    assert cert["region_invariance_pass"] == "true"


def test_verify_bad_region(capsys, tmp_path):
    rc = main(["verify", "--config", "data/bad_region.cfg", "--out", str(tmp_path)])
    assert rc == EXIT_VERIFY
    cert = read_kv((tmp_path / "certificate.txt").read_text())
    assert cert["region_invariance_pass"] == "false" and cert["all_pass"] == "false"
    assert int(cert["region_invariance_max_residual"].split(".")[0]) > 0


def test_verify_rejected_config(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("germ = data/abate_1_11.germ\nR = 1\ndelta = 0.5\n")
    assert main(["verify", "--config", str(cfg)]) == EXIT_IO


def test_verify_hypothesis_gate(capsys, tmp_path):
    rc = main(["verify", "--germ", "data/three_directions.germ", "--out", str(tmp_path)])
    assert rc == EXIT_HYPOTHESIS
    assert not (tmp_path / "certificate.txt").exists()


def test_basin_smoke_deterministic(capsys, tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert main(["basin", "--config", "data/smoke_basin.cfg", "--out", str(d)]) == EXIT_OK
        outs.append(((d / "basin.ppm").read_bytes(), (d / "basin.csv").read_bytes()))
    assert outs[0] == outs[1]
    ppm = outs[0][0]
    assert ppm.startswith(b"P6\n64 64\n255\n") and len(ppm) == 13 + 3 * 64 * 64
    assert b"attracted" in outs[0][1]
