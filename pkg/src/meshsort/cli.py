"""Command-line surface: track, eval, synth, ablate, bench.

This is the only module that touches the filesystem; everything else works
on in-memory values. ``ablate`` may fan grid cells out over processes; the
``MESH_SORT_THREADS`` environment variable caps that parallelism.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import motfiles, synth
from .config import TrackerConfig
from .metrics import MetricsError, evaluate
from .pipeline import Tracker


def _load_tracker_config(path: str | None) -> TrackerConfig:
    if path is None:
        return TrackerConfig()
    return motfiles.load_config(path)


def _cmd_track(args) -> int:
    cfg = _load_tracker_config(args.config)
    if args.emit_virtual:
        cfg.emit_virtual = True
    frames = motfiles.parse_detections(args.dets)
    tracker = Tracker(cfg)
    outputs = [tracker.step(fd) for fd in frames]
    motfiles.write_results(args.out, outputs)
    if args.mesh_out:
        last = frames[-1].index if frames else 0
        with open(args.mesh_out, "w", encoding="ascii") as fh:
            fh.write(tracker.grid.snapshot(last).to_text())
    print(f"tracked {len(frames)} frames -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    gt = motfiles.parse_ground_truth(args.gt)
    res = motfiles.parse_results(args.res)
    report = evaluate(gt, res, iou_thr=args.iou)
    if args.format == "kv":
        sys.stdout.write(report.to_kv())
    else:
        sys.stdout.write(report.to_table())
    return 0


def _cmd_synth(args) -> int:
    scene = motfiles.load_scene(args.scene)
    gt, dets = synth.generate(scene)
    motfiles.write_ground_truth(args.out_gt, gt)
    motfiles.write_detections(args.out_dets, dets)
    print(f"generated {scene.frames} frames, {len(scene.agents)} agents")
    return 0


def _parse_grid(spec: str) -> list[dict]:
    """`key=v1,v2;key2=w1,w2` -> cartesian product of override dicts."""
    types = TrackerConfig.field_types()
    axes = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        key, _, values = part.partition("=")
        key = key.strip()
        if key not in types:
            raise motfiles.ConfigError(f"unknown grid key {key!r}")
        axis = [
            (key, motfiles.coerce_value(types[key], v.strip()))
            for v in values.split(",")
            if v.strip()
        ]
        if not axis:
            raise motfiles.ConfigError(f"grid key {key!r} has no values")
        axes.append(axis)
    if not axes:
        raise motfiles.ConfigError("empty grid spec")
    return [dict(combo) for combo in itertools.product(*axes)]


def run_ablation_cell(payload) -> dict:
    """One grid cell: run the tracker over every input pair, pool the metrics."""
    config_path, overrides, scene_paths, dets_path, gt_path, iou = payload
    cfg = _load_tracker_config(config_path)
    cfg = dataclasses.replace(cfg, **overrides)

    inputs = []
    if scene_paths:
        for sp in scene_paths:
            scene = motfiles.load_scene(sp)
            gt, dets = synth.generate(scene)
            cfg_cell = dataclasses.replace(
                cfg, frame_width=scene.frame_width, frame_height=scene.frame_height
            )
            inputs.append((gt, dets, cfg_cell))
    else:
        gt = motfiles.parse_ground_truth(gt_path)
        dets = motfiles.parse_detections(dets_path)
        inputs.append((gt, dets, cfg))

    totals = {"FP": 0, "FN": 0, "IDSW": 0, "FM": 0, "MT": 0, "ML": 0, "GT": 0}
    weighted = {"MOTA": 0.0, "IDF1": 0.0, "HOTA": 0.0}
    frames_done = 0
    elapsed = 0.0
    for gt, dets, cfg_cell in inputs:
        tracker = Tracker(cfg_cell)
        t0 = time.perf_counter()
        outputs = [tracker.step(fd) for fd in dets]
        elapsed += time.perf_counter() - t0
        frames_done += len(outputs)
        report = evaluate(gt, motfiles.outputs_to_trajectories(outputs), iou_thr=iou)
        totals["FP"] += report.fp
        totals["FN"] += report.fn
        totals["IDSW"] += report.idsw
        totals["FM"] += report.fm
        totals["MT"] += report.mt
        totals["ML"] += report.ml
        totals["GT"] += report.gt_total
        weighted["MOTA"] += report.mota * report.gt_total
        weighted["IDF1"] += report.idf1 * report.gt_total
        weighted["HOTA"] += report.hota * report.gt_total
    gt_total = max(totals["GT"], 1)
    row = dict(overrides)
    row.update(
        MOTA=weighted["MOTA"] / gt_total,
        IDF1=weighted["IDF1"] / gt_total,
        HOTA=weighted["HOTA"] / gt_total,
        **totals,
        FPS=(frames_done / elapsed) if elapsed > 0 else 0.0,
    )
    return row


def _cmd_ablate(args) -> int:
    cells = _parse_grid(args.grid)
    payloads = [
        (args.config, overrides, tuple(args.scene or ()), args.dets, args.gt, args.iou)
        for overrides in cells
    ]
    env_cap = os.environ.get("MESH_SORT_THREADS")
    workers = min(len(payloads), os.cpu_count() or 1)
    if env_cap:
        workers = max(1, min(workers, int(env_cap)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_ablation_cell, payloads))
    else:
        rows = [run_ablation_cell(p) for p in payloads]

    params = list(cells[0].keys())
    metric_cols = ["MOTA", "IDF1", "HOTA", "FP", "FN", "IDSW", "FM", "MT", "ML", "FPS"]
    header = params + metric_cols
    lines = ["\t".join(header)]
    for row in rows:
        cells_out = [str(row[p]) for p in params]
        for col in metric_cols:
            v = row[col]
            cells_out.append(f"{v:.4f}" if isinstance(v, float) else str(v))
        lines.append("\t".join(cells_out))
    table = "\n".join(lines) + "\n"
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write(table)
    sys.stdout.write(table)
    return 0


def _cmd_bench(args) -> int:
    if args.scene:
        scene = motfiles.load_scene(args.scene)
        _, dets = synth.generate(scene)
        cfg = _load_tracker_config(args.config)
        cfg.frame_width = scene.frame_width
        cfg.frame_height = scene.frame_height
    else:
        dets = motfiles.parse_detections(args.dets)
        cfg = _load_tracker_config(args.config)
    tracker = Tracker(cfg)
    t0 = time.perf_counter()
    for fd in dets:
        tracker.step(fd)
    elapsed = time.perf_counter() - t0
    stats = tracker.stats()
    fps = len(dets) / elapsed if elapsed > 0 else float("inf")
    print(f"frames={len(dets)} elapsed={elapsed:.3f}s fps={fps:.1f}")
    print(f"predicts={stats.predicts} doomed_predicts={stats.doomed_predicts} "
          f"spawned={stats.spawned} removed={stats.removed}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshsort",
        description="Location-aware multi-object tracker, evaluator, and scene generator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the tracker over a detection file")
    p.add_argument("--config", help="flat key = value tracker configuration")
    p.add_argument("--dets", required=True, help="detection file (10-field lines)")
    p.add_argument("--out", required=True, help="result file to write")
    p.add_argument("--emit-virtual", action="store_true",
                   help="also emit maintained (virtual) boxes")
    p.add_argument("--mesh-out", help="write the final loss-grid snapshot here")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("eval", help="score a result file against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--res", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--format", choices=("table", "kv"), default="table")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate ground truth and detections from a scene file")
    p.add_argument("--scene", required=True)
    p.add_argument("--out-gt", required=True)
    p.add_argument("--out-dets", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ablate", help="sweep config values and tabulate pooled metrics")
    p.add_argument("--config", help="base configuration file")
    p.add_argument("--grid", required=True, help="e.g. 'lost_maintain_frames=0,3;mesh_cols=4'")
    p.add_argument("--scene", action="append", help="scene file (repeatable)")
    p.add_argument("--dets", help="detection file (requires --gt)")
    p.add_argument("--gt", help="ground-truth file for --dets")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out", required=True, help="table file to write")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("bench", help="report tracking frames per second")
    p.add_argument("--config")
    p.add_argument("--dets")
    p.add_argument("--scene")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "ablate" and not args.scene and not (args.dets and args.gt):
        parser.error("ablate needs --scene or both --dets and --gt")
    if args.command == "bench" and not (args.dets or args.scene):
        parser.error("bench needs --dets or --scene")
    try:
        return args.func(args)
    except (OSError, ValueError, MetricsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
