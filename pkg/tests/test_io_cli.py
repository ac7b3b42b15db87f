import json
import re
import signal
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from alphatrim import io as aio
from alphatrim.cli import main
from alphatrim.regions import SupportRegion, zonoid_region


def _csv(path, rows, header=None, newline="\n"):
    lines = ([header] if header else []) + [",".join(repr(float(v)) for v in r) for r in rows]
    path.write_bytes((newline.join(lines) + newline).encode())
    return str(path)


# -- point parsing -----------------------------------------------------------

@pytest.mark.parametrize("newline", ["\n", "\r\n"])
def test_parse_points_line_endings(newline):
    text = newline.join(["x,y", "1,2", "3.5,-4e-1", ""])
    assert aio.parse_points(text).tolist() == [[1.0, 2.0], [3.5, -0.4]]


def test_parse_points_without_header():
    assert aio.parse_points("1\n2\n").tolist() == [[1.0], [2.0]]


def test_parse_points_ragged_row():
    with pytest.raises(aio.InputError, match="line 3: expected 2 columns, found 3") as err:
        aio.parse_points("x,y\n1,2\n3,4,5\n")
    assert err.value.line == 3


def test_parse_points_bad_token():
    with pytest.raises(aio.InputError, match="line 2"):
        aio.parse_points("1,2\n1,abc\n")
    with pytest.raises(aio.InputError):
        aio.parse_points("x,y\n")


# -- region command ----------------------------------------------------------

@pytest.fixture
def square_points(tmp_path):
    x = np.random.default_rng(0).random((40, 2))
    return x, _csv(tmp_path / "pts.csv", x, "x,y")


def test_region_zonoid_json_round_trip(tmp_path, square_points):
    x, path = square_points
    out = tmp_path / "r.json"
    assert main(["region", "zonoid", "--in", path, "--alpha", "0.3", "--out", str(out), "--grid", "92"]) == 0
    data = json.loads(out.read_text())
    assert data["schema_version"] == 1
    region = SupportRegion.from_dict(data)
    assert region == zonoid_region(x, 0.3, region.directions)


def test_region_svg_is_valid_and_matches_vertices(tmp_path, square_points):
    x, path = square_points
    svg = tmp_path / "r.svg"
    out = tmp_path / "r.json"
    assert main(["region", "zonoid", "--in", path, "--alpha", "0.3", "--out", str(out), "--svg", str(svg)]) == 0
    text = svg.read_text()
    root = ET.fromstring(text.split("\n", 1)[1])
    poly = [el for el in root.iter() if el.get("id") == "region"][0]
    canvas = np.array([[float(v) for v in p.split(",")] for p in poly.get("points").split()])
    vp = {k: float(v) for k, v in re.findall(r"(\w+)=([-0-9.e+]+)", text.split("-->")[0])}
    back = np.column_stack([canvas[:, 0] / vp["scale"] + vp["xmin"], vp["ymax"] - canvas[:, 1] / vp["scale"]])
    verts = np.asarray(json.loads(out.read_text())["vertices"])
    assert back.shape == verts.shape and np.max(np.abs(back - verts)) <= 1e-9


def test_region_integral_csv(tmp_path, square_points):
    _, path = square_points
    out = tmp_path / "m.csv"
    assert main(["region", "integral", "--in", path, "--alpha", "0.5", "--family", "clipped-axes",
                 "--grid", "11", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y,member" and len(lines) == 122
    assert any(line.endswith(",1") for line in lines[1:])


def test_exit_code_alpha_out_of_range(square_points):
    _, path = square_points
    with pytest.raises(SystemExit) as err:
        main(["region", "zonoid", "--in", path, "--alpha", "1.5"])
    assert err.value.code == 3


def test_exit_code_unknown_family(square_points, capsys):
    _, path = square_points
    assert main(["region", "integral", "--in", path, "--alpha", "0.5", "--family", "nope"]) == 3
    err = capsys.readouterr().err
    assert "clipped-axes" in err and "linear-8" in err


def test_exit_code_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    assert main(["region", "zonoid", "--in", str(bad), "--alpha", "0.5"]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["region", "zonoid", "--in", str(tmp_path / "missing.csv"), "--alpha", "0.5"]) == 2


# -- trim command ------------------------------------------------------------

def _json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_trim_check_reports_violation(tmp_path, capsys):
    q = _json(tmp_path / "q.json", {"atoms": [[0.0], [1.0]], "probs": [0.9, 0.1]})
    p = _json(tmp_path / "p.json", {"atoms": [[0.0], [1.0]], "probs": [0.5, 0.5]})
    assert main(["trim", "check", "--measure", q, "--reference", p, "--alpha", "0.6"]) == 0
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["member"] is False and verdict["first_violation"]["atom"] == [0.0]
    assert main(["trim", "check", "--measure", q, "--reference", p, "--alpha", "0.5"]) == 0
    assert json.loads(capsys.readouterr().out)["member"] is True


def test_trim_update(tmp_path, capsys):
    pts = _csv(tmp_path / "x.csv", [[0.0], [1.0]])
    w = _json(tmp_path / "w.json", {"weights": [1.0, 0.0]})
    assert main(["trim", "update", "--in", pts, "--weights", w, "--alpha", "0.5", "--point", "2"]) == 0
    assert np.allclose(json.loads(capsys.readouterr().out)["weights"], [2 / 3, 0, 1 / 3], atol=1e-15)
    assert main(["trim", "update", "--in", pts, "--weights", w, "--alpha", "0.9", "--point", "2"]) == 4


def test_trim_reweight(tmp_path, capsys):
    pts = _csv(tmp_path / "x.csv", [[0.0], [1.0], [2.0]])
    good = _json(tmp_path / "g.json", {"form": "tabulated", "params": {"values": [2, 1, 0]}})
    assert main(["trim", "reweight", "--in", pts, "--density", good, "--alpha", "0.5"]) == 0
    assert np.allclose(json.loads(capsys.readouterr().out)["weights"], [2 / 3, 1 / 3, 0], atol=1e-15)
    low = _json(tmp_path / "h.json", {"form": "tabulated", "params": {"values": [0.5, 0.5, 0.5]}})
    assert main(["trim", "reweight", "--in", pts, "--density", low, "--alpha", "0.5"]) == 4
    assert "index not in N_Q" in capsys.readouterr().err


# -- experiment command ------------------------------------------------------

def _small_config(tmp_path, **extra):
    return _json(tmp_path / "cfg.json", {"replications": 3, "grid": 72, **extra})


def test_experiment_consistency_csv_is_reproducible(tmp_path):
    cfg = _small_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["experiment", "consistency", "--config", cfg, "--out", str(a)]) == 0
    assert main(["experiment", "consistency", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = [line for line in a.read_text().splitlines() if not line.startswith("#")]
    assert len(rows) == 5  # header + one row per n


def test_experiment_json_and_seed_override(tmp_path):
    cfg = _small_config(tmp_path)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["experiment", "consistency", "--config", cfg, "--format", "json", "--out", str(a)]) == 0
    assert main(["experiment", "consistency", "--config", cfg, "--format", "json", "--seed", "5",
                 "--out", str(b)]) == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    assert da["schema_version"] == 1 and da["config_hash"] != db["config_hash"]


def test_experiment_ladder_epochs_file(tmp_path):
    cfg = _json(tmp_path / "cfg.json", {"replications": 2, "n_schedule": [50, 100], "source": "density",
                                        "density": {"form": "constant", "params": {"value": 1.0}}})
    out = tmp_path / "ladder.csv"
    assert main(["experiment", "ladder", "--config", cfg, "--out", str(out)]) == 0
    lines = (tmp_path / "ladder.epochs.csv").read_text().splitlines()
    assert lines[0] == "k,epoch,ratio"
    for line in lines[1:]:
        k, epoch, ratio = line.split(",")
        assert int(epoch) == int(k) and float(ratio) == pytest.approx(1 / int(k), abs=1e-15)


def test_experiment_bad_config(tmp_path):
    assert main(["experiment", "consistency", "--config", _json(tmp_path / "c.json", {"alpha": 2})]) == 3
    assert main(["experiment", "consistency", "--config", _json(tmp_path / "d.json", {"bogus": 1})]) == 3
    assert main(["experiment", "nope"]) == 3
    assert main(["experiment", "gc", "--family", "nope"]) == 3


def test_experiment_interrupt_writes_partial(tmp_path):
    cfg = _json(tmp_path / "cfg.json", {"replications": 400, "n_schedule": [100, 400, 1600, 6400, 25600]})
    out = tmp_path / "seq.csv"
    proc = subprocess.Popen([sys.executable, "-m", "alphatrim", "experiment", "consistency", "--config", cfg,
                             "--out", str(out)], stderr=subprocess.PIPE, text=True)
    partial = tmp_path / "seq.csv.partial"
    try:
        proc.wait(timeout=6)
    except subprocess.TimeoutExpired:
        proc.send_signal(signal.SIGINT)
        proc.wait(timeout=60)
    assert proc.returncode == 130
    assert partial.exists() and not out.exists()
    assert "interrupted" in proc.stderr.read()


# -- lp debug command --------------------------------------------------------

def test_lp_dump_then_solve(tmp_path, square_points, capsys):
    _, path = square_points
    prog = tmp_path / "lp.json"
    assert main(["lp", "dump", "--in", path, "--alpha", "0.5", "--point", "0.5,0.5", "--out", str(prog)]) == 0
    assert main(["lp", "solve", "--in", str(prog)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["status"] == "optimal" and abs(sum(res["solution"]) - 1) <= 1e-9
    assert main(["lp", "dump", "--in", path, "--alpha", "0.5"]) == 3


def test_experiment_malformed_config_file(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text("{not json")
    assert main(["experiment", "consistency", "--config", str(bad)]) == 2
