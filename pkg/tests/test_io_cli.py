import csv
import json
import math
import subprocess
import sys
from dataclasses import asdict

import numpy as np
import pytest

from conftest import star
from oracles import flat_ground_depth
from sliceloc import io
from sliceloc.cli import main
from sliceloc.errors import FormatError
from sliceloc.evaluation import EvalRecord
from sliceloc.geometry import CameraPose
from sliceloc.nullmodel import DEFAULT_PARAMS, PRINTED_PARAMS
from sliceloc.projection import DepthPanorama, SlicePlan
from sliceloc.simulator import ScenarioConfig


def write_instances(path, instances):
    io.write_jsonl(path, (io.instance_to_json(i) for i in instances))


def test_float_tokens():
    assert io.encode_float(-math.inf) == "-inf" and io.encode_float(math.inf) == "inf"
    assert io.decode_float("-inf") == -math.inf and io.decode_float(1.5) == 1.5
    assert math.isnan(io.decode_float(io.encode_float(math.nan)))
    with pytest.raises(FormatError):
        io.decode_float("nope")


def test_kv_round_trips(tmp_path):
    io.write_null_model(tmp_path / "nm.txt", DEFAULT_PARAMS)
    assert io.read_null_model(tmp_path / "nm.txt") == DEFAULT_PARAMS
    (tmp_path / "printed.txt").write_text("t1=50\nt2=132\nA=-6.7e-5\nB=8.8e-4\n")
    assert io.read_null_model(tmp_path / "printed.txt") == PRINTED_PARAMS
    plan = SlicePlan(n=8, vfov_center=1.9)
    io.write_slice_plan(tmp_path / "plan.txt", plan)
    assert io.read_slice_plan(tmp_path / "plan.txt") == plan
    (tmp_path / "cfg.txt").write_text("# scenario\nn = 9\nseed=7\noutlier_fraction=0.25\n")
    cfg = io.read_config(tmp_path / "cfg.txt", ScenarioConfig)
    assert (cfg.n, cfg.seed, cfg.outlier_fraction) == (9, 7, 0.25)


@pytest.mark.parametrize("text", ["n=3\nbogus=1\n", "n=three\n", "just a line\n"])
def test_kv_errors(tmp_path, text):
    (tmp_path / "cfg.txt").write_text(text)
    with pytest.raises(FormatError):
        io.read_config(tmp_path / "cfg.txt", ScenarioConfig)


def test_instance_round_trip(tmp_path):
    inst = io.Instance("x1", star((10.0, 20.0), n=5), 0.11, CameraPose(10, 20, 0), True, "val")
    write_instances(tmp_path / "in.jsonl", [inst])
    back = [io.instance_from_json(d) for d in io.read_jsonl(tmp_path / "in.jsonl")]
    assert back == [inst]
    bad = io.instance_to_json(inst)
    bad["n"] = 4
    with pytest.raises(FormatError):
        io.instance_from_json(bad)


def test_eval_record_round_trip():
    r = EvalRecord("a", True, -math.inf, CameraPose(1, 2, 3), CameraPose(1, 2, 3), CameraPose(0, 0, 0),
                   False, 0.11, "s")
    d = json.loads(io.dumps(io.eval_record_to_json(r)))
    assert io.eval_record_from_json(d) == r
    r2 = EvalRecord("b", False, 2.5, None, CameraPose(1, 2, 3), None, None, 1.0, "all")
    assert io.eval_record_from_json(json.loads(io.dumps(io.eval_record_to_json(r2)))) == r2


def test_read_jsonl_reports_line(tmp_path):
    (tmp_path / "x.jsonl").write_text('{"a": 1}\n\n{oops\n')
    with pytest.raises(FormatError, match=":3"):
        list(io.read_jsonl(tmp_path / "x.jsonl"))


def test_pgm_round_trip(tmp_path):
    d = np.round(flat_ground_depth(16, 32, 2.0), 2)
    d = np.minimum(d, 600.0)
    io.write_depth_pgm(tmp_path / "d.pgm", DepthPanorama(d))
    back = io.read_depth_pgm(tmp_path / "d.pgm")
    np.testing.assert_allclose(back.depth, d, atol=0.005)
    raw = (tmp_path / "d.pgm").read_bytes()
    assert raw.startswith(b"P5\n# scale=0.01\n32 16\n65535\n")
    assert back.valid.sum() == (d < 255).sum()


@pytest.mark.parametrize("blob", [b"P6\n1 1\n255\n\x00", b"P5\n1 1\n65535\n\x00\x00",
                                  b"P5\n# scale=0.01\n2 2\n65535\n\x00\x00",
                                  b"P5\n# scale=0.01\n2 2\n255\n" + bytes(8),
                                  b"P5\n# scale=0.01\nx 2\n65535\n", b"P5\n# scale"])
def test_pgm_malformed(tmp_path, blob):
    (tmp_path / "bad.pgm").write_bytes(blob)
    with pytest.raises(FormatError):
        io.read_depth_pgm(tmp_path / "bad.pgm")


# -- CLI -------------------------------------------------------------------

def run_cli(*args):
    return main([str(a) for a in args])


def test_cli_localize_noiseless(tmp_path):
    write_instances(tmp_path / "in.jsonl", [io.Instance("a", star((100.0, 100.0), n=3), 0.11)])
    io.write_null_model(tmp_path / "nm.txt", DEFAULT_PARAMS)
    assert run_cli("localize", "--poses", tmp_path / "in.jsonl", "--null-model", tmp_path / "nm.txt",
                   "--tau", 0, "--out", tmp_path / "out.jsonl") == 0
    line = (tmp_path / "out.jsonl").read_text().splitlines()[0]
    rec = json.loads(line)
    assert rec["valid"] is True and rec["lg_eps"] == "-inf" and rec["inliers"] == [0, 1, 2]
    assert math.hypot(rec["camera"]["x"] - 100, rec["camera"]["y"] - 100) < 1e-9
    assert set(rec) >= {"id", "valid", "lg_eps", "camera", "inliers", "pairs_tested"}


def test_cli_evaluate_hand_example(tmp_path):
    gt = {"x": 0.0, "y": 0.0, "heading_deg": 0.0}
    rows = []
    for i, (err, lg) in enumerate([(1, -3), (2, -1), (50, -2), (40, 2), (30, 0), (20, 1), (1, 3)]):
        cam = {"x": float(err), "y": 0.0, "heading_deg": 0.0}
        rows.append({"id": str(i), "valid": lg < 0, "lg_eps": lg, "camera": cam if lg < 0 else None,
                     "estimate": cam, "camera_gt": gt, "meters_per_pixel": 1.0})
    io.write_jsonl(tmp_path / "r.jsonl", rows)
    assert run_cli("evaluate", "--records", tmp_path / "r.jsonl", "--mode", "localization",
                   "--out", tmp_path / "m.csv") == 0
    (row,) = csv.DictReader(open(tmp_path / "m.csv"))
    assert (row["tp"], row["fp"], row["tn"], row["fn"]) == ("2", "1", "3", "1")
    assert float(row["potn"]) == float(row["rotn"]) == float(row["f1"]) == 0.75
    assert float(row["acc"]) == pytest.approx(0.7142857, abs=1e-7)


def test_cli_evaluate_reference_mode_joins_truth(tmp_path):
    insts = [io.Instance(str(i), star((0.0, 0.0), n=3), 1.0, None, ok) for i, ok in enumerate([True, False])]
    write_instances(tmp_path / "in.jsonl", insts)
    io.write_jsonl(tmp_path / "r.jsonl", [
        {"id": "0", "valid": True, "lg_eps": -2.0, "camera": None, "estimate": None},
        {"id": "1", "valid": False, "lg_eps": 1.0, "camera": None, "estimate": None},
    ])
    assert run_cli("evaluate", "--records", tmp_path / "r.jsonl", "--poses", tmp_path / "in.jsonl",
                   "--mode", "reference", "--out", tmp_path / "m.csv") == 0
    (row,) = csv.DictReader(open(tmp_path / "m.csv"))
    assert (row["tp"], row["tn"], row["acc"]) == ("1", "1", "1.0")


def test_cli_simulate_deterministic(tmp_path):
    (tmp_path / "cfg.txt").write_text("seed=4\noutlier_fraction=0.34\nbearing_noise_sigma=1.0\n")
    outs = []
    for w in (1, 4):
        out = tmp_path / f"sim{w}.jsonl"
        assert run_cli("simulate", "--config", tmp_path / "cfg.txt", "--trials", 12, "--workers", w,
                       "--out", out) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    first = json.loads(outs[0].splitlines()[0])
    assert first["id"] == "trial-000000" and len(first["poses"]) == 12


def test_cli_calibrate_null(tmp_path):
    assert run_cli("calibrate-null", "--samples", 20_000, "--out", tmp_path / "nm.txt") == 0
    p = io.read_null_model(tmp_path / "nm.txt")
    assert p.K > 0 and p.is_valid


def test_cli_slice_plan_and_project(tmp_path):
    assert run_cli("slice-plan", "--n", 4, "--out", tmp_path / "plan.txt") == 0
    assert io.read_slice_plan(tmp_path / "plan.txt") == SlicePlan(n=4)
    d = np.minimum(flat_ground_depth(64, 128, 2.0), 600.0)
    d[:, :16] = 600.0  # blank out part of the north slice's window
    io.write_depth_pgm(tmp_path / "d.pgm", DepthPanorama(d))
    (tmp_path / "geo.txt").write_text("width=640\nheight=640\nmeters_per_pixel=0.11\n")
    assert run_cli("project", "--pano", tmp_path / "d.pgm", "--plan", tmp_path / "plan.txt",
                   "--geo", tmp_path / "geo.txt", "--out", tmp_path / "c.csv") == 0
    rows = list(csv.DictReader(open(tmp_path / "c.csv")))
    assert [r["slice_index"] for r in rows] == ["0", "1", "2", "3"]
    east = rows[1]
    assert float(east["x"]) > 320 and abs(float(east["y"]) - 320) < 1.0


def test_cli_project_sky_slice_is_blank(tmp_path):
    io.write_depth_pgm(tmp_path / "d.pgm", DepthPanorama(np.full((8, 16), 600.0)))
    io.write_slice_plan(tmp_path / "plan.txt", SlicePlan(n=2))
    (tmp_path / "geo.txt").write_text("width=64\nheight=64\nmeters_per_pixel=1\n")
    assert run_cli("project", "--pano", tmp_path / "d.pgm", "--plan", tmp_path / "plan.txt",
                   "--geo", tmp_path / "geo.txt", "--out", tmp_path / "c.csv") == 0
    rows = list(csv.DictReader(open(tmp_path / "c.csv")))
    assert rows[0]["x"] == "" and rows[1]["y"] == ""


def test_cli_error_line(tmp_path, capsys):
    (tmp_path / "bad.jsonl").write_text('{"id": "z"}\n')
    assert run_cli("localize", "--poses", tmp_path / "bad.jsonl", "--out", tmp_path / "o.jsonl") != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "FormatError" and err["message"]


def test_cli_missing_file(tmp_path, capsys):
    assert run_cli("evaluate", "--records", tmp_path / "none.jsonl", "--out", tmp_path / "m.csv") != 0
    assert "error" in json.loads(capsys.readouterr().err.strip())


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sliceloc", "slice-plan", "--n", "6",
                           "--out", str(tmp_path / "p.txt")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert io.read_slice_plan(tmp_path / "p.txt").n == 6
