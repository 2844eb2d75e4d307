"""Command-line interface: one subcommand per pipeline stage.

Exit codes: 0 success, 2 usage error, 3 input error (missing/malformed
files or arguments), 4 pipeline error (external tool or contract failure).
All randomness is surfaced as an explicit --seed; identical invocations
produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bev, evaluate, ingest, pngio
from .errors import BevplanError, InputError, MalformedFileError
from .inpaint import InpainterChoice, inpaint as run_inpaint
from .partition import ClassPartition, default_partition, load_partition
from .planner import SensorModel, astar, simulate
from .evaluate import StudyConfig, StudyReport, VariantStats


def _cell(text: str) -> tuple[int, int]:
    try:
        r, c = text.split(",")
        return (int(r), int(c))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected ROW,COL, got {text!r}") from exc


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = text.split(",")
        return (float(a), float(b))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from exc


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = text.split(",")
        return (int(w), int(h))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected WIDTH,HEIGHT, got {text!r}") from exc


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _get_partition(args) -> ClassPartition:
    if getattr(args, "partition", None):
        return load_partition(args.partition)
    return default_partition()


def _grid_spec(args) -> bev.GridSpec:
    width, height = args.grid
    return bev.GridSpec(
        width=width,
        height=height,
        cell_size=args.cell_size,
        origin=args.origin,
        row_axis=args.row_axis,
        col_axis=args.col_axis,
    )


def _add_partition_flag(p) -> None:
    p.add_argument("--partition", help="class partition JSON (defaults built in)")


def _add_grid_flags(p) -> None:
    p.add_argument("--grid", type=_size, default=(256, 256), help="WIDTH,HEIGHT cells")
    p.add_argument("--cell-size", type=float, default=0.2, help="meters per cell")
    p.add_argument("--origin", type=_pair, default=(0.0, -25.6), help="world coord of cell (0,0)")
    p.add_argument("--row-axis", default="x")
    p.add_argument("--col-axis", default="y")
    p.add_argument("--z-min", type=float, default=None, help="height clip lower bound")
    p.add_argument("--z-max", type=float, default=None, help="height clip upper bound")


def _add_calib_flags(p, required: bool) -> None:
    p.add_argument("--calib", required=required, help="calibration text file")
    p.add_argument("--image-width", type=_positive_int, default=1226)
    p.add_argument("--image-height", type=_positive_int, default=370)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_datagen(args) -> int:
    partition = _get_partition(args)
    spec = _grid_spec(args)
    calib = ingest.load_calibration(args.calib, args.image_width, args.image_height)
    scan_dir = Path(args.scan_dir)
    gt_dir = Path(args.gt_dir)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scans = sorted(scan_dir.glob("*.bin"))
    if not scans:
        raise InputError(f"no .bin files in {scan_dir}")
    pairs = 0
    for points_path in scans:
        stem = points_path.stem
        gt_points = gt_dir / f"{stem}.bin"
        if not gt_points.exists():
            raise InputError(f"missing ground-truth cloud {gt_points}")
        scan = ingest.load_cloud(points_path, points_path.with_suffix(".label"))
        gt_map = ingest.load_cloud(gt_points, gt_points.with_suffix(".label"))
        masked, mask, target = bev.build_training_pair(
            scan, gt_map, calib, spec, partition, args.z_min, args.z_max
        )
        pngio.render_png(masked, out_dir / f"{stem}_input.png", partition)
        pngio.save_mask_png(mask, out_dir / f"{stem}_mask.png")
        pngio.render_png(target, out_dir / f"{stem}_target.png", partition)
        pairs += 1
    print(f"wrote {pairs} training pairs to {out_dir}")
    return 0


def cmd_rasterize(args) -> int:
    partition = _get_partition(args)
    spec = _grid_spec(args)
    cloud = ingest.load_cloud(args.points, args.labels)
    if args.calib:
        calib = ingest.load_calibration(args.calib, args.image_width, args.image_height)
        cloud = ingest.frustum_filter(cloud, calib)
    if not args.keep_dynamic:
        cloud = ingest.strip_dynamic(cloud, partition)
    grid = bev.rasterize_bev(cloud, spec, partition, args.z_min, args.z_max)
    pngio.render_png(grid, args.out, partition)
    return 0


def cmd_mask(args) -> int:
    partition = _get_partition(args)
    grid = pngio.load_png(args.grid, partition)
    mask = bev.hull_mask(grid)
    pngio.save_mask_png(mask, args.out)
    if args.apply:
        pngio.render_png(bev.apply_mask(grid, mask), args.apply, partition)
    return 0


def cmd_inpaint(args) -> int:
    partition = _get_partition(args)
    grid = pngio.load_png(args.grid, partition)
    if args.mask:
        mask = pngio.load_mask_png(args.mask, spec=grid.spec)
        grid = bev.apply_mask(grid, mask)
    choice = InpainterChoice(
        method=args.method,
        radius=args.radius,
        max_iters=args.max_iters,
        seed=args.seed,
        command=args.command,
    )
    pngio.render_png(run_inpaint(grid, choice, partition), args.out, partition)
    return 0


def cmd_obstacles(args) -> int:
    partition = _get_partition(args)
    grid = pngio.load_png(args.grid, partition)
    obstacle_map = bev.to_obstacle_map(grid, partition)
    if args.downsample > 1:
        obstacle_map = bev.downsample(obstacle_map, args.downsample)
    pngio.save_obstacle_png(obstacle_map, args.out)
    return 0


def cmd_plan(args) -> int:
    obstacle_map = pngio.load_obstacle_png(args.map)
    path = astar(obstacle_map, args.start, args.goal)
    if args.format == "structured":
        doc = {"found": path is not None}
        if path is not None:
            doc.update(cost=path.cost, steps=path.steps, path=[list(c) for c in path.cells])
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        if path is None:
            _emit("no path\n", args.out)
        else:
            _emit(f"steps: {path.steps}\ncost: {path.cost!r}\n", args.out)
    if args.plot:
        cells = list(path.cells) if path is not None else []
        evaluate.render_trial_plot(obstacle_map, cells, []).save(args.plot)
    return 0


def cmd_simulate(args) -> int:
    belief = pngio.load_obstacle_png(args.belief)
    gt = pngio.load_obstacle_png(args.gt)
    result = simulate(belief, gt, args.start, args.goal, SensorModel(args.radius))
    if args.format == "structured":
        doc = {
            "outcome": result.outcome,
            "path_steps": result.path_steps,
            "replans": result.replans,
            "executed": [list(c) for c in result.executed.cells],
        }
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        _emit(
            f"outcome: {result.outcome}\npath steps: {result.path_steps}\n"
            f"replans: {result.replans}\n",
            args.out,
        )
    if args.plot:
        observed = [
            (int(r), int(c))
            for r, c in zip(*((result.belief_final.occupied & ~belief.occupied).nonzero()))
        ]
        evaluate.render_trial_plot(belief, list(result.executed.cells), observed).save(args.plot)
    return 0


def _load_study_config(path: str, seed_override: int | None) -> tuple[StudyConfig, dict]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}: not valid JSON ({exc})") from exc
    base = Path(path).parent
    try:
        map_paths = {k: str((base / v)) for k, v in data["maps"].items()}
        maps = {k: pngio.load_obstacle_png(p) for k, p in map_paths.items()}
        factor = int(data.get("downsample", 1))
        if factor > 1:
            maps = {k: bev.downsample(m, factor) for k, m in maps.items()}
        start = data.get("start", {"mode": "random"})
        config = StudyConfig(
            input_map=maps["input"],
            inpainted_map=maps["inpainted"],
            gt_map=maps["gt"],
            trials=int(data.get("trials", 50)),
            seed=int(data["seed"]) if seed_override is None else seed_override,
            sensor=SensorModel(float(data.get("sensor_radius", 30.0))),
            start_mode=start.get("mode", "random"),
            start_cell=tuple(start["cell"]) if "cell" in start else None,
            start_sigma=float(start.get("sigma", 5.0)),
        )
    except KeyError as exc:
        raise MalformedFileError(f"{path}: missing config key {exc}") from exc
    return config, {"maps": map_paths}


def cmd_study(args) -> int:
    config, extra = _load_study_config(args.config, args.seed)
    report = evaluate.run_study(config, jobs=args.jobs)
    report.extra = extra
    _emit(evaluate.render_report(report, args.format), args.out)
    return 0


def cmd_miou(args) -> int:
    partition = _get_partition(args)
    pred = pngio.load_png(args.pred, partition)
    gt = pngio.load_png(args.gt, partition, spec=pred.spec)
    mask = pngio.load_mask_png(args.mask, spec=pred.spec)
    score, per_class = evaluate.miou(pred, gt, mask, partition, mode=args.mode)
    names = partition.names
    if args.format == "structured":
        doc = {
            "miou": score,
            "mode": args.mode,
            "per_class": {names[c]: iou for c, iou in per_class.items()},
        }
        _emit(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    else:
        lines = [f"mIoU: {score!r}"]
        lines += [f"  {names[c]} ({c}): {iou!r}" for c, iou in sorted(per_class.items())]
        _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_histogram(args) -> int:
    partition = _get_partition(args)
    totals = {c: 0 for c in sorted(partition.classes)}
    for path in args.grids:
        grid = pngio.load_png(path, partition)
        for c, n in evaluate.class_histogram(grid, partition).items():
            totals[c] += n
    names = partition.names
    if args.format == "structured":
        _emit(
            json.dumps({names[c]: n for c, n in totals.items()}, indent=2, sort_keys=True) + "\n",
            args.out,
        )
    else:
        lines = [f"{names[c]} ({c}): {n}" for c, n in totals.items()]
        _emit("\n".join(lines) + "\n", args.out)
    return 0


def _report_from_dict(doc: dict) -> StudyReport:
    stats = {}
    for name, v in doc["variants"].items():
        def unpack(block):
            if block is None:
                return None, None
            return block["mean"], block["std"]

        steps_mean, steps_std = unpack(v["path_steps"])
        replans_mean, replans_std = unpack(v["replans"])
        nopath_mean, nopath_std = unpack(v["replans_no_path"])
        stats[name] = VariantStats(
            name=name,
            reached=v["reached"],
            no_path=v["no_path"],
            steps_mean=steps_mean,
            steps_std=steps_std,
            replans_mean=replans_mean,
            replans_std=replans_std,
            nopath_replans_mean=nopath_mean,
            nopath_replans_std=nopath_std,
        )
    return StudyReport(
        trials=doc["trials"],
        seed=doc["seed"],
        sensor_radius=doc["sensor_radius"],
        stats=stats,
        records=[],
        extra={k: doc[k] for k in ("maps",) if k in doc},
    )


def cmd_report(args) -> int:
    try:
        doc = json.loads(Path(args.report).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{args.report}: not valid JSON ({exc})") from exc
    if args.format == "text":
        _emit(evaluate.render_report_text(_report_from_dict(doc)), args.out)
        return 0
    # plot
    trial = next((t for t in doc["trial_ledger"] if t["trial"] == args.trial), None)
    if trial is None:
        raise InputError(f"trial {args.trial} not in report")
    if args.variant not in trial["variants"]:
        raise InputError(f"variant {args.variant!r} not in report")
    if args.map:
        map_path = args.map
    else:
        map_path = doc.get("maps", {}).get(args.variant)
        if map_path is None:
            raise InputError("report carries no map paths; pass --map")
    base = pngio.load_obstacle_png(map_path)
    entry = trial["variants"][args.variant]
    executed = [tuple(c) for c in entry["executed"]]
    observed = [tuple(c) for c in entry["observed_online"]]
    evaluate.render_trial_plot(base, executed, observed).save(args.out or "trial.png")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bevplan",
        description="BEV semantic mapping, inpainting, and planner evaluation",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("datagen", help="build inpainting training pairs from a sequence")
    p.add_argument("--scan-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--out-dir", required=True)
    _add_calib_flags(p, required=True)
    _add_partition_flag(p)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("rasterize", help="point cloud to semantic BEV grid PNG")
    p.add_argument("--points", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--keep-dynamic", action="store_true")
    _add_calib_flags(p, required=False)
    _add_partition_flag(p)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("mask", help="convex-hull inpaint mask from a grid PNG")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--apply", help="also write the grid with the mask applied")
    _add_partition_flag(p)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("inpaint", help="fill masked cells of a grid PNG")
    p.add_argument("--grid", required=True)
    p.add_argument("--mask", help="mask PNG to apply before filling")
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["nearest", "majority", "external"], default="majority")
    p.add_argument("--radius", type=_positive_int, default=1)
    p.add_argument("--max-iters", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--command", help="external template with {input} {mask} {output}")
    _add_partition_flag(p)
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("obstacles", help="grid PNG to binary obstacle map PNG")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--downsample", type=_positive_int, default=1)
    _add_partition_flag(p)
    p.set_defaults(func=cmd_obstacles)

    p = sub.add_parser("plan", help="A* on an obstacle map PNG")
    p.add_argument("--map", required=True)
    p.add_argument("--start", type=_cell, required=True)
    p.add_argument("--goal", type=_cell, required=True)
    p.add_argument("--format", choices=["text", "structured"], default="text")
    p.add_argument("--out")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="one online replanning trial")
    p.add_argument("--belief", required=True, help="initial obstacle map PNG")
    p.add_argument("--gt", required=True, help="ground-truth obstacle map PNG")
    p.add_argument("--start", type=_cell, required=True)
    p.add_argument("--goal", type=_cell, required=True)
    p.add_argument("--radius", type=float, default=30.0)
    p.add_argument("--format", choices=["text", "structured"], default="text")
    p.add_argument("--out")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="multi-trial planner comparison")
    p.add_argument("--config", required=True, help="study config JSON")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--format", choices=["text", "structured"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("miou", help="mean IoU of a prediction inside a mask")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--mode", choices=["present", "all"], default="present")
    p.add_argument("--format", choices=["text", "structured"], default="text")
    p.add_argument("--out")
    _add_partition_flag(p)
    p.set_defaults(func=cmd_miou)

    p = sub.add_parser("histogram", help="class distribution over grid PNGs")
    p.add_argument("--grids", nargs="+", required=True)
    p.add_argument("--format", choices=["text", "structured"], default="text")
    p.add_argument("--out")
    _add_partition_flag(p)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("report", help="re-render a structured study report")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=["text", "plot"], default="text")
    p.add_argument("--variant", default="gt")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--map", help="obstacle map PNG for plotting")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, NotADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except BevplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
