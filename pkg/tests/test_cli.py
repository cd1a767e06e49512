import csv
import json

import numpy as np
import pytest

from goldenrenorm.arclab import degenerate_arc
from goldenrenorm.cli import main
from goldenrenorm.goldenrot import THETA
from goldenrenorm.renorm1d import C_STAR, MU_STAR


def _json(path):
    return json.loads(path.read_text())


def test_rotation(tmp_path):
    assert main(["rotation", "--level", "12", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "rotation.csv")))
    assert len(rows) == 13
    for r in rows:
        assert r["j_count"] == r["q_2n+1"] and r["i_count"] == r["q_2n"]
        assert r["refines"] in ("1", "")
    sweep = _json(tmp_path / "equidist.json")["levels"]
    assert all(s["error"] <= s["bound"] for s in sweep)
    man = _json(tmp_path / "rotation.manifest.json")
    assert man["command"] == "rotation" and man["outputs"] == ["rotation.csv", "equidist.json"]
    assert {"config_hash", "config", "versions", "wall_time", "schema_version"} <= set(man)
    assert not (tmp_path / "error.json").exists()


def test_rotation_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["rotation", "--level", "8", "--out", str(a)]) == 0
    assert main(["rotation", "--level", "8", "--out", str(b)]) == 0
    for name in ("rotation.csv", "equidist.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert _json(a / "rotation.manifest.json")["config_hash"] == \
        _json(b / "rotation.manifest.json")["config_hash"]


@pytest.mark.parametrize("argv", [
    ["henon", "--nu", "1.5"],
    ["arc", "--level", "13"],
    ["holder", "--nu2", "-1.0"],
    ["henon", "--precision", "extended", "--level", "1"],
    ["spectrum"],
    ["nonsense"],
    ["rotation", "--level", "x"],
])
def test_invalid_input_exits_2(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] != "nonsense" else argv) == 2


def test_error_record(tmp_path, capsys):
    assert main(["spectrum", "--out", str(tmp_path)]) == 2
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["error"] == "MissingArtifact" and rec["exit_code"] == 2
    assert _json(tmp_path / "error.json") == rec


def test_bad_config_file(tmp_path):
    cfile = tmp_path / "c.json"
    cfile.write_text("[1, 2]")
    assert main(["rotation", "--config", str(cfile), "--out", str(tmp_path)]) == 2
    cfile.write_text('{"degree": -3}')
    assert main(["rotation", "--config", str(cfile), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    cfile = tmp_path / "c.json"
    cfile.write_text(json.dumps({"max_iters": 1, "tol": 1e-16}))
    assert main(["fixed-point", "--config", str(cfile), "--out", str(tmp_path)]) == 3
    assert _json(tmp_path / "error.json")["exit_code"] == 3


def test_config_overrides_flags(tmp_path, monkeypatch):
    cfile = tmp_path / "c.json"
    cfile.write_text(json.dumps({"level": 3, "threads": 8}))
    monkeypatch.setenv("RENORM_THREADS", "2")
    assert main(["rotation", "--level", "9", "--config", str(cfile), "--out", str(tmp_path)]) == 0
    man = _json(tmp_path / "rotation.manifest.json")
    assert man["run"]["level"] == 3
    assert man["config"]["threads"] == 2
    assert len(list(csv.reader(open(tmp_path / "rotation.csv")))) == 5


def test_threads_env_validation(tmp_path, monkeypatch):
    monkeypatch.setenv("RENORM_THREADS", "zero")
    assert main(["rotation", "--level", "2", "--out", str(tmp_path)]) == 2


def test_fixed_point_and_spectrum(tmp_path, fixed_point70):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["fixed-point", "--out", str(a)]) == 0
    assert main(["fixed-point", "--out", str(b)]) == 0
    assert (a / "fixedpoint.json").read_bytes() == (b / "fixedpoint.json").read_bytes()
    fp = _json(a / "fixedpoint.json")
    assert fp["residual"] < 1e-11 and fp["schema_version"] == 1
    lam = complex(*fp["lambda"])
    assert abs(lam - fixed_point70[1]) < 1e-6
    chk = _json(a / "fixedpoint_check.json")
    assert chk["gstar_prime_1_minus_lambda_sq"] < 1e-8
    assert main(["spectrum", "--dim", "20", "--out", str(a)]) == 0
    spec = _json(a / "spectrum.json")
    assert spec["schema_version"] == 1


def test_arc_nu_zero_is_degenerate(tmp_path):
    assert main(["arc", "--nu", "0", "--level", "3", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "arc.csv")))
    d = degenerate_arc(C_STAR, 3)
    assert len(rows) == len(d)
    x = np.array([complex(float(r["x_re"]), float(r["x_im"])) for r in rows])
    y = np.array([complex(float(r["y_re"]), float(r["y_im"])) for r in rows])
    assert np.max(np.abs(x - d.x)) < 1e-10 and np.max(np.abs(y - d.y)) < 1e-10
    assert not (tmp_path / "jacobian.json").exists()
    assert len(list(csv.reader(open(tmp_path / "boundary.csv")))) == 2 * len(d) + 1


def test_henon_trace(tmp_path):
    assert main(["henon", "--nu", "0.2", "--level", "2", "--out", str(tmp_path)]) == 0
    tr = _json(tmp_path / "trace.json")
    assert len(tr["levels"]) == 2 and len(tr["norm_y"]) == 3
    assert tr["norm_y"][2] < tr["norm_y"][1] < tr["norm_y"][0]


def test_holder_closed_form(tmp_path):
    assert main(["holder", "--nu1", "0.3", "--nu2", "0.1", "--level", "2",
                 "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "holder.json")
    m1, m2 = abs(MU_STAR * 0.3), abs(MU_STAR * 0.1)
    closed = 0.5 * (1 + (1 + THETA) * np.log(m1) / ((1 + THETA) * np.log(m2)))
    assert rep["bound_closed_form"] == pytest.approx(closed, rel=1e-14)
    assert rep["bound"] == pytest.approx(closed, rel=1e-8)
    assert rep["binding"] is True
    assert {"alpha_hat", "bound", "binding"} <= set(rep)
