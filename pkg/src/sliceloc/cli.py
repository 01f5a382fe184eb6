"""Command-line entry point: ``sliceloc <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from . import io
from .acontrario import DEFAULT_TAU, STRICT_TAU, osa_cvl
from .errors import SliceLocError
from .evaluation import RULE_ERROR, RULE_REFERENCE, metrics_by_split, report_row
from .geometry import ErrorMode
from .nullmodel import DEFAULT_PARAMS, calibrate
from .projection import SlicePlan, scene_centroid
from .simulator import ScenarioConfig, run_trials, simulate_null_thetas

log = logging.getLogger("sliceloc")


def _null_model(path):
    return io.read_null_model(path) if path else DEFAULT_PARAMS


def _tau(args) -> float:
    return STRICT_TAU if args.strict else args.tau


def _scenario(args) -> ScenarioConfig:
    cfg = io.read_config(args.config, ScenarioConfig) if args.config else ScenarioConfig()
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_localize(args) -> int:
    params = _null_model(args.null_model)
    tau = _tau(args)
    mode = ErrorMode(args.error_mode)
    bounds = tuple(args.bounds) if args.bounds else None
    instances = [io.instance_from_json(d) for d in io.read_jsonl(args.poses)]

    def run(inst):
        res = osa_cvl(inst.poses, tau=tau, p=params, mode=mode, bounds=bounds)
        return io.result_to_json(inst.id, res)

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        rows = list(pool.map(run, instances))
    io.write_jsonl(args.out, rows)
    log.info("localized %d instances, %d valid", len(rows), sum(r["valid"] for r in rows))
    return 0


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    records = run_trials(cfg, args.trials, tau=_tau(args), p=_null_model(args.null_model),
                         workers=args.workers)
    io.write_jsonl(args.out, (io.trial_to_json(t, cfg.meters_per_pixel) for t in records))
    return 0


def cmd_calibrate_null(args) -> int:
    cfg = _scenario(args)
    thetas = simulate_null_thetas(cfg, args.samples)
    params = calibrate(thetas, args.t1, args.t2)
    params.validate()
    io.write_null_model(args.out, params)
    if args.thetas_out:
        with open(args.thetas_out, "w") as fh:
            fh.writelines(f"{t!r}\n" for t in thetas.tolist())
    return 0


def cmd_evaluate(args) -> int:
    truth = {}
    if args.poses:
        truth = {inst.id: inst for inst in map(io.instance_from_json, io.read_jsonl(args.poses))}
    records = [io.eval_record_from_json(d, truth.get(str(d.get("id")))) for d in io.read_jsonl(args.records)]
    rule = RULE_REFERENCE if args.mode == "reference" else RULE_ERROR
    reports = metrics_by_split(records, include_invalid=args.include_invalid, tau=_tau(args),
                               negative_rule=rule)
    rows = [report_row(name, m) for name, m in reports.items()]
    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return 0


def cmd_project(args) -> int:
    pano = io.read_depth_pgm(args.pano, invalid_threshold=args.invalid_threshold)
    plan = io.read_slice_plan(args.plan)
    geo_t = io.read_geo(args.geo)
    camera = (geo_t.origin_east, geo_t.origin_north, 0.0)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slice_index", "hfov_center_deg", "x", "y"])
        for i in range(plan.n):
            c = scene_centroid(plan, i, pano, camera, geo_t)
            w.writerow([i, math.degrees(plan.hfov_center(i)), "" if c is None else c.x,
                        "" if c is None else c.y])
    return 0


def cmd_slice_plan(args) -> int:
    plan = SlicePlan(n=args.n, hfov_deg=args.hfov, vfov_deg=args.vfov,
                     vfov_center=math.radians(args.vfov_center_deg), size=args.size)
    io.write_slice_plan(args.out, plan)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sliceloc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def tau_opts(p):
        p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="log10 NFA threshold")
        p.add_argument("--strict", action="store_true", help="use the stricter tau = -1 preset")

    p = sub.add_parser("localize", help="robust pose + NFA per slice-pose instance")
    p.add_argument("--poses", required=True)
    p.add_argument("--null-model")
    p.add_argument("--error-mode", default=ErrorMode.PER_SLICE_BEARING.value,
                   choices=[m.value for m in ErrorMode])
    p.add_argument("--bounds", type=float, nargs=2, metavar=("W", "H"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    tau_opts(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("simulate", help="seeded synthetic localisation trials")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--null-model")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    tau_opts(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate-null", help="fit the null error density from naive poses")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, default=260_000)
    p.add_argument("--t1", type=float, default=50.0)
    p.add_argument("--t2", type=float, default=132.0)
    p.add_argument("--thetas-out")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate_null)

    p = sub.add_parser("evaluate", help="metrics CSV from result or trial records")
    p.add_argument("--records", required=True)
    p.add_argument("--poses", help="input instances to join ground truth from, by id")
    p.add_argument("--mode", choices=["localization", "reference"], default="localization")
    p.add_argument("--include-invalid", action="store_true")
    p.add_argument("--out", required=True)
    tau_opts(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("project", help="scene centroids of each slice from a depth panorama")
    p.add_argument("--pano", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--geo", required=True)
    p.add_argument("--invalid-threshold", type=float, default=255.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("slice-plan", help="write a slicing plan")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--hfov", type=float, default=90.0)
    p.add_argument("--vfov", type=float, default=90.0)
    p.add_argument("--vfov-center-deg", type=float, default=135.0)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_slice_plan)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SliceLocError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
