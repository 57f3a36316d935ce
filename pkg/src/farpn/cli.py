"""``farpn`` command line: anchors, synth, propose, eval and bench.

Every command takes ``--config path.json`` plus repeatable ``--set key=value``
overrides, writes into ``--out`` (default ``out_dir`` from the config) and
echoes the resolved configuration there as ``config.json``. Stages talk to
each other only through files.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .anchors import anchors_from_csv, anchors_to_csv, place, place_dense
from .config import ConfigError, RunConfig
from .evalrec import Entry, emit_report, format_annotations, parse_annotations, parse_report, recall_at
from .nms import hard_nms, soft_nms
from .proposals import proposals_from_csv, proposals_to_csv
from .psroi import PoolConfig, batch_pool
from .refine import propose
from .synth import scene_suite, synth_features
from .tensor import read_tensor, write_tensor

SCORE_SUFFIX = ".score.farp"
REGRESS_SUFFIX = ".regress.farp"


class CommandError(RuntimeError):
    pass


def _workers(cfg: RunConfig) -> int:
    if cfg.workers > 0:
        return cfg.workers
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return os.cpu_count() or 1


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    return out


def cmd_anchors(args, cfg: RunConfig) -> int:
    acfg = cfg.anchor_config()
    strided = place(acfg)
    dense_stride = cfg.anchor_stride if cfg.anchor_stride is not None else cfg.c
    dense = place_dense(acfg, dense_stride)
    ratio = len(dense) / len(strided) if len(strided) else float("inf") if len(dense) else 0.0
    summary = f"strided={len(strided)} dense={len(dense)} ratio={ratio:.4f}"

    out = _out_dir(args, cfg)
    chosen = dense if args.dense else strided
    path = out / "anchors.csv"
    path.write_text(anchors_to_csv(chosen))
    (out / "summary.txt").write_text(summary + "\n")
    if len(anchors_from_csv(path.read_text())) != len(chosen):
        raise CommandError(f"{path}: row count mismatch after write")
    print(summary)
    return 0


def cmd_synth(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    tensors = out / "tensors"
    tensors.mkdir(exist_ok=True)
    scenes = scene_suite(
        cfg.seed,
        cfg.n_scenes,
        (cfg.image_width, cfg.image_height),
        (cfg.n_boxes_min, cfg.n_boxes_max),
        (cfg.side_min, cfg.side_max),
        cfg.iou_ceiling,
    )
    pool_cfg = cfg.pool_config()

    def build(scene):
        score, regress = synth_features(scene, cfg.feature_stride, pool_cfg, cfg.noise_sd)
        write_tensor(score, tensors / f"{scene.image_id}{SCORE_SUFFIX}")
        write_tensor(regress, tensors / f"{scene.image_id}{REGRESS_SUFFIX}")
        return scene.image_id

    with ThreadPoolExecutor(_workers(cfg)) as pool:
        list(pool.map(build, scenes))

    text = format_annotations(Entry(s.image_id, s.image_width, s.image_height, s.gts) for s in scenes)
    ann = out / "annotations.txt"
    ann.write_text(text)
    if len(parse_annotations(ann.read_text())) != len(scenes):
        raise CommandError(f"{ann}: entry count mismatch after write")
    print(f"scenes={len(scenes)} boxes={sum(len(s.gts) for s in scenes)} out={out}")
    return 0


def _image_ids(tensors: Path) -> list[str]:
    ids = sorted(p.name[: -len(SCORE_SUFFIX)] for p in tensors.glob(f"*{SCORE_SUFFIX}"))
    if not ids:
        raise CommandError(f"no *{SCORE_SUFFIX} tensors in {tensors}")
    return ids


def cmd_propose(args, cfg: RunConfig) -> int:
    if args.iterations is not None:
        cfg.iterations = args.iterations
    if args.nms is not None:
        cfg.nms = args.nms
    cfg.validate()
    tensors = Path(args.tensors or cfg.tensors_dir or "")
    if not tensors.is_dir():
        raise CommandError(f"tensor directory {tensors} not found")
    sizes = {}
    if cfg.annotations:
        sizes = {e.image_id: (e.width, e.height) for e in parse_annotations(Path(cfg.annotations).read_text())}
    out = _out_dir(args, cfg)
    prop_dir = out / "proposals"
    prop_dir.mkdir(exist_ok=True)
    pool_cfg, refine_cfg, nms_cfg = cfg.pool_config(), cfg.refine_config(), cfg.nms_config()

    def run(image_id):
        score = read_tensor(tensors / f"{image_id}{SCORE_SUFFIX}")
        regress = read_tensor(tensors / f"{image_id}{REGRESS_SUFFIX}")
        width, height = sizes.get(image_id, (cfg.image_width, cfg.image_height))
        acfg = replace(cfg.anchor_config(), image_width=width, image_height=height)
        props = propose(score, regress, acfg, refine_cfg, pool_cfg, uniform_stride=cfg.anchor_stride)
        if cfg.nms == "soft":
            props = soft_nms(props, nms_cfg)
        elif cfg.nms == "hard":
            props = hard_nms(props, nms_cfg)
        return proposals_to_csv(props)

    ids = _image_ids(tensors)
    with ThreadPoolExecutor(_workers(cfg)) as pool:
        results = list(pool.map(run, ids))
    total = 0
    for image_id, text in zip(ids, results):
        path = prop_dir / f"{image_id}.csv"
        path.write_text(text)
        total += len(proposals_from_csv(path.read_text()))
    print(f"images={len(ids)} proposals={total} iterations={cfg.iterations} nms={cfg.nms} out={out}")
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    if args.topn is not None:
        cfg.top_ns = [int(v) for v in args.topn.split(",")]
    if args.iou is not None:
        cfg.iou_thresholds = [float(v) for v in args.iou.split(",")]
    if args.format is not None:
        cfg.report_format = args.format
    cfg.validate()
    prop_dir = Path(args.proposals or cfg.proposals_dir or "")
    ann_path = args.annotations or cfg.annotations
    if not prop_dir.is_dir():
        raise CommandError(f"proposal directory {prop_dir} not found")
    if not ann_path or not Path(ann_path).is_file():
        raise CommandError(f"annotation file {ann_path} not found")
    dataset = parse_annotations(Path(ann_path).read_text())
    proposals = {}
    for entry in dataset:
        path = prop_dir / f"{entry.image_id}.csv"
        if path.is_file():
            proposals[entry.image_id] = proposals_from_csv(path.read_text())
    report = recall_at(proposals, dataset, cfg.iou_thresholds, cfg.top_ns)
    out = _out_dir(args, cfg)
    text = emit_report(report, cfg.report_format)
    path = out / f"report.{cfg.report_format}"
    path.write_text(text)
    if len(parse_report(path.read_text(), cfg.report_format).rows) != len(report.rows):
        raise CommandError(f"{path}: row count mismatch after write")
    if dataset.dropped:
        print(f"dropped {dataset.dropped} zero-area ground-truth boxes", file=sys.stderr)
    sys.stdout.write(text)
    return 0


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def bench_pool(n_rois: int, classes: int, k: int = 7, repeats: int = 5, seed: int = 0, size: int = 64) -> float:
    """Median seconds to pool both branches for ``n_rois`` random RoIs."""
    from .tensor import FeatureMap

    rng = np.random.default_rng(seed)
    pool_cfg = PoolConfig(k, classes)
    score = FeatureMap(rng.random((size, size, pool_cfg.channels("score")), dtype=np.float32), 16.0)
    regress = FeatureMap(rng.random((size, size, pool_cfg.channels("regress")), dtype=np.float32), 16.0)
    extent = 16.0 * size
    xy = rng.uniform(0, extent * 0.8, size=(n_rois, 2))
    wh = rng.uniform(16, extent * 0.2, size=(n_rois, 2))
    rois = np.hstack([xy, xy + wh])
    batch_pool(score, regress, rois[:8], pool_cfg)  # warm the compiled kernel
    return _median_time(lambda: batch_pool(score, regress, rois, pool_cfg), repeats)


def cmd_bench(args, cfg: RunConfig) -> int:
    n, c, reps = cfg.bench_rois, cfg.bench_classes, cfg.bench_repeats
    rows = [
        ("rois", n, bench_pool(n, c, cfg.k, reps, cfg.seed)),
        ("rois", 2 * n, bench_pool(2 * n, c, cfg.k, reps, cfg.seed)),
        ("classes", c, bench_pool(n, c, cfg.k, reps, cfg.seed)),
        ("classes", 2 * c, bench_pool(n, 2 * c, cfg.k, reps, cfg.seed)),
    ]
    lines = ["axis,value,seconds"] + [f"{a},{v},{t:.6f}" for a, v, t in rows]
    roi_ratio = rows[1][2] / rows[0][2]
    class_ratio = rows[3][2] / rows[2][2]
    out = _out_dir(args, cfg)
    (out / "bench.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"roi_ratio={roi_ratio:.3f} class_ratio={class_ratio:.3f}")
    return 0


COMMANDS = {
    "anchors": cmd_anchors,
    "synth": cmd_synth,
    "propose": cmd_propose,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="farpn", description="Floating-anchor proposal tools.")
    parser.add_argument("--version", action="version", version=f"farpn {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    common.add_argument("--out", help="output directory (default: out_dir)")
    common.add_argument("--workers", type=int, help="worker threads (default: available parallelism)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("anchors", parents=[common], help="place anchors and report counts")
    p.add_argument("--dense", action="store_true", help="write the uniform-stride set instead")
    sub.add_parser("synth", parents=[common], help="write synthetic scenes and feature tensors")
    p = sub.add_parser("propose", parents=[common], help="generate proposals from tensors")
    p.add_argument("--tensors", help="directory of *.score.farp / *.regress.farp")
    p.add_argument("--iterations", type=int)
    p.add_argument("--nms", choices=("soft", "hard", "none"))
    p = sub.add_parser("eval", parents=[common], help="recall of proposals against annotations")
    p.add_argument("--proposals", help="directory of per-image proposal CSVs")
    p.add_argument("--annotations", help="annotation text file")
    p.add_argument("--topn", help="comma-separated top-N values")
    p.add_argument("--iou", help="comma-separated IoU thresholds")
    p.add_argument("--format", choices=("csv", "json"))
    sub.add_parser("bench", parents=[common], help="pooling wall-clock table")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.set)
        if args.workers is not None:
            cfg.workers = args.workers
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, CommandError, OSError, ValueError) as exc:
        print(f"farpn {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
