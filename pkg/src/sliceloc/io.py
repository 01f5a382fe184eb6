"""Readers and writers for the on-disk formats.

* flat ``key=value`` text (configs, slice plans, geo transforms, null models)
* JSON Lines for slice-pose inputs, localisation results and eval records
* 16-bit binary PGM for depth panoramas (centimetre samples)
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional

import numpy as np

from .errors import FormatError
from .evaluation import EvalRecord
from .geometry import CameraPose, SlicePose
from .nullmodel import NullModelParams
from .projection import DepthPanorama, GeoTransform, SlicePlan

PGM_SCALE = 0.01  # metres per sample
PGM_MAXVAL = 65535


# -- key=value -------------------------------------------------------------

def read_kv(path) -> Dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def write_kv(path, values: Dict[str, Any]) -> None:
    lines = [f"{k}={_fmt_scalar(v)}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(cls, raw: Dict[str, str]):
    """Build dataclass ``cls`` from string values, converting by field type."""
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for k, v in raw.items():
        if k not in fields:
            raise FormatError(f"unknown key {k!r} for {cls.__name__}")
        default = fields[k].default
        try:
            if isinstance(default, bool):
                kwargs[k] = v.lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[k] = int(v)
            else:
                kwargs[k] = float(v)
        except ValueError as exc:
            raise FormatError(f"bad value for {k}: {v!r}") from exc
    return cls(**kwargs)


def read_null_model(path) -> NullModelParams:
    raw = read_kv(path)
    try:
        vals = {k: float(raw[k]) for k in ("t1", "t2", "A", "B")}
    except KeyError as exc:
        raise FormatError(f"null model file lacks {exc.args[0]}") from None
    if "C" in raw and "K" in raw:
        return NullModelParams(C=float(raw["C"]), K=float(raw["K"]), **vals)
    return NullModelParams.from_line(**vals)


def write_null_model(path, p: NullModelParams) -> None:
    write_kv(path, dataclasses.asdict(p))


def read_slice_plan(path) -> SlicePlan:
    return _coerce(SlicePlan, read_kv(path))


def write_slice_plan(path, plan: SlicePlan) -> None:
    write_kv(path, dataclasses.asdict(plan))


def read_geo(path) -> GeoTransform:
    raw = read_kv(path)
    try:
        return GeoTransform(
            width=int(raw.pop("width")),
            height=int(raw.pop("height")),
            meters_per_pixel=float(raw.pop("meters_per_pixel")),
            **{k: float(v) for k, v in raw.items()},
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad geo transform file: {exc}") from None


def read_config(path, cls):
    return _coerce(cls, read_kv(path))


# -- JSON lines ------------------------------------------------------------

def encode_float(x: float):
    """JSON-safe float: infinities become the strings ``"inf"``/``"-inf"``."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def decode_float(v) -> float:
    if isinstance(v, str):
        if v not in ("inf", "-inf", "nan"):
            raise FormatError(f"bad numeric token {v!r}")
        return float(v)
    return float(v)


def camera_to_json(c: Optional[CameraPose]):
    if c is None:
        return None
    return {"x": c.x, "y": c.y, "heading_deg": c.heading}


def camera_from_json(d) -> Optional[CameraPose]:
    if d is None:
        return None
    try:
        return CameraPose(float(d["x"]), float(d["y"]), float(d["heading_deg"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad camera object {d!r}") from exc


def pose_to_json(p: SlicePose) -> dict:
    return {
        "slice_index": p.slice_index,
        "x": p.x,
        "y": p.y,
        "bearing_deg": p.bearing,
        "hfov_center_deg": math.degrees(p.hfov_center),
    }


def pose_from_json(d) -> SlicePose:
    try:
        return SlicePose(
            int(d["slice_index"]),
            float(d["x"]),
            float(d["y"]),
            float(d["bearing_deg"]),
            math.radians(float(d["hfov_center_deg"])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad pose object {d!r}") from exc


def dumps(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "), allow_nan=False)


def read_jsonl(path) -> Iterator[dict]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: {exc.msg}") from None


def write_jsonl(path, rows: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(dumps(row) + "\n")


# -- depth PGM -------------------------------------------------------------

_PGM_HEADER = re.compile(rb"P5\s")


def write_depth_pgm(path, pano: DepthPanorama) -> None:
    """Write depth in metres as big-endian 16-bit centimetre samples."""
    d = np.asarray(pano.depth)
    samples = np.clip(np.round(d / PGM_SCALE), 0, PGM_MAXVAL).astype(">u2")
    h, w = d.shape
    header = f"P5\n# scale={PGM_SCALE}\n{w} {h}\n{PGM_MAXVAL}\n".encode("ascii")
    Path(path).write_bytes(header + samples.tobytes())


def read_depth_pgm(path, invalid_threshold: float = 255.0) -> DepthPanorama:
    data = Path(path).read_bytes()
    if not _PGM_HEADER.match(data):
        raise FormatError("not a binary PGM (magic P5)")
    tokens: List[bytes] = []
    scale = None
    pos = 2
    while len(tokens) < 3:
        # header tokens are separated by whitespace; comments run to end of line
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise FormatError("unterminated PGM header comment")
            m = re.match(rb"#\s*scale\s*=\s*([0-9.eE+-]+)", data[pos:end])
            if m:
                scale = float(m.group(1))
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace before the raster
    if scale is None:
        raise FormatError("PGM header lacks '# scale=' comment")
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FormatError("bad PGM header") from None
    if maxval != PGM_MAXVAL:
        raise FormatError(f"expected maxval {PGM_MAXVAL}, got {maxval}")
    if len(data) - pos < 2 * w * h:
        raise FormatError("truncated PGM raster")
    raster = np.frombuffer(data, dtype=">u2", count=w * h, offset=pos)
    depth = raster.reshape(h, w).astype(float) * scale
    return DepthPanorama(depth, invalid_threshold=invalid_threshold)


# -- localisation records --------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Instance:
    """One line of a slice-pose input file."""

    id: str
    poses: List[SlicePose]
    meters_per_pixel: float = 1.0
    camera_gt: Optional[CameraPose] = None
    reference_correct: Optional[bool] = None
    split: str = "all"


def instance_from_json(d: dict) -> Instance:
    try:
        poses = [pose_from_json(p) for p in d["poses"]]
        inst = Instance(
            id=str(d["id"]),
            poses=poses,
            meters_per_pixel=float(d.get("meters_per_pixel", 1.0)),
            camera_gt=camera_from_json(d.get("camera_gt")),
            reference_correct=d.get("reference_correct"),
            split=str(d.get("split", "all")),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad instance: {exc}") from None
    if "n" in d and int(d["n"]) != len(poses):
        raise FormatError(f"instance {inst.id}: n={d['n']} but {len(poses)} poses")
    return inst


def instance_to_json(inst: Instance) -> dict:
    d = {
        "id": inst.id,
        "n": len(inst.poses),
        "meters_per_pixel": inst.meters_per_pixel,
        "poses": [pose_to_json(p) for p in inst.poses],
    }
    if inst.camera_gt is not None:
        d["camera_gt"] = camera_to_json(inst.camera_gt)
    if inst.reference_correct is not None:
        d["reference_correct"] = bool(inst.reference_correct)
    if inst.split != "all":
        d["split"] = inst.split
    return d


def result_to_json(id_: str, r) -> dict:
    """Localisation result line (``RigidityResult``)."""
    return {
        "id": id_,
        "valid": bool(r.valid),
        "lg_eps": encode_float(r.lg_eps),
        "camera": camera_to_json(r.camera),
        "inliers": list(r.inlier_indices),
        "pairs_tested": int(r.pairs_tested),
        "alpha": encode_float(r.alpha),
        "estimate": camera_to_json(r.estimate),
        "out_of_bounds": bool(r.out_of_bounds),
    }


def eval_record_to_json(r: EvalRecord) -> dict:
    d = {
        "id": r.id,
        "valid": r.valid,
        "lg_eps": encode_float(r.lg_eps),
        "camera": camera_to_json(r.predicted),
        "estimate": camera_to_json(r.estimate),
        "camera_gt": camera_to_json(r.ground_truth),
        "meters_per_pixel": r.meters_per_pixel,
        "split": r.split,
    }
    if r.reference_correct is not None:
        d["reference_correct"] = bool(r.reference_correct)
    return d


def eval_record_from_json(d: dict, truth: Optional[Instance] = None) -> EvalRecord:
    """Build an eval record from a result or trial line, joining ``truth`` if given."""
    try:
        rec = EvalRecord(
            id=str(d["id"]),
            valid=bool(d["valid"]),
            lg_eps=decode_float(d["lg_eps"]),
            predicted=camera_from_json(d.get("camera")),
            estimate=camera_from_json(d.get("estimate")),
            ground_truth=camera_from_json(d.get("camera_gt")),
            reference_correct=d.get("reference_correct"),
            meters_per_pixel=float(d.get("meters_per_pixel", 1.0)),
            split=str(d.get("split", "all")),
        )
    except KeyError as exc:
        raise FormatError(f"record lacks {exc.args[0]!r}") from None
    if truth is not None:
        rec = dataclasses.replace(
            rec,
            ground_truth=truth.camera_gt if truth.camera_gt is not None else rec.ground_truth,
            reference_correct=(truth.reference_correct if truth.reference_correct is not None
                               else rec.reference_correct),
            meters_per_pixel=truth.meters_per_pixel,
            split=truth.split,
        )
    return rec


def trial_to_json(t, meters_per_pixel: float) -> dict:
    """Simulation trial line: a result line plus truth and inlier scores."""
    d = result_to_json(f"trial-{t.trial:06d}", t.result)
    d.update(
        trial=t.trial,
        camera_gt=camera_to_json(t.scene.ground_truth),
        meters_per_pixel=meters_per_pixel,
        true_inliers=[p.slice_index for p, m in zip(t.scene.poses, t.scene.inlier_mask) if m],
        loc_error_m=t.loc_error_m,
        heading_error_deg=t.heading_error_deg,
        precision=t.precision,
        recall=t.recall,
        poses=[pose_to_json(p) for p in t.scene.poses],
    )
    return d
