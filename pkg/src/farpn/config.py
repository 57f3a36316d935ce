"""Flat run configuration shared by the command-line tools.

A run is described by a JSON object whose keys are the fields of
:class:`RunConfig`. Unknown keys are rejected; missing keys take the library
defaults. ``builders`` turn a resolved config into the per-module configs.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any

from .anchors import DEFAULT_SCALES, AnchorConfig
from .nms import NmsConfig
from .psroi import PoolConfig
from .refine import RefineConfig
from .targets import AssignConfig, ScaleRange


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # anchors
    scales: list[float] = field(default_factory=lambda: list(DEFAULT_SCALES))
    ratios: list[float] = field(default_factory=lambda: [1.0])
    c: float = 16.0
    d: float = 5.0
    image_width: float = 1024.0
    image_height: float = 1024.0
    anchor_stride: float | None = None  # uniform inference stride; None = max(c, s/d)
    # pooling
    k: int = 7
    classes: int = 2
    samples_per_bin: int = 2
    # training targets
    pos_iou: float = 0.5
    neg_iou: float = 0.4
    max_pos: int = 128
    max_neg: int = 128
    hard_neg: int = 32
    hard_neg_min_iou: float = 0.1
    hard_neg_in_budget: bool = True
    roi_cap: int = 50_000
    snip_min: float = 0.0
    snip_max: float | None = None
    # refinement
    iterations: int = 1
    top_k: int = 20_000
    output_n: int = 1_000
    # suppression
    nms: str = "soft"
    sigma: float = 0.35
    score_floor: float = 0.001
    hard_iou: float = 0.5
    # synthetic data
    seed: int = 0
    n_scenes: int = 10
    n_boxes_min: int = 10
    n_boxes_max: int = 50
    side_min: float = 16.0
    side_max: float = 512.0
    iou_ceiling: float = 0.3
    feature_stride: float = 8.0
    noise_sd: float = 0.0
    # evaluation
    top_ns: list[int] = field(default_factory=lambda: [100, 300, 1000])
    iou_thresholds: list[float] = field(default_factory=lambda: [0.5, 0.6, 0.7, 0.8, 0.9])
    report_format: str = "csv"
    # benchmark
    bench_rois: int = 25_000
    bench_classes: int = 2
    bench_repeats: int = 5
    # runtime and paths
    workers: int = 0  # 0 = available parallelism
    out_dir: str = "out"
    tensors_dir: str | None = None
    annotations: str | None = None
    proposals_dir: str | None = None

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | None, overrides: list[str] = ()) -> "RunConfig":
        values: dict[str, Any] = {}
        if path:
            with open(path) as fh:
                try:
                    values = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{path}: {exc}") from None
            if not isinstance(values, dict):
                raise ConfigError(f"{path}: top level must be a JSON object")
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not key=value")
            try:
                values[key.strip()] = json.loads(raw)
            except json.JSONDecodeError:
                values[key.strip()] = raw
        return cls.from_dict(values)

    def validate(self) -> None:
        if self.nms not in ("soft", "hard", "none"):
            raise ConfigError(f"nms must be soft, hard or none, not {self.nms!r}")
        if self.report_format not in ("csv", "json"):
            raise ConfigError(f"report_format must be csv or json, not {self.report_format!r}")
        if self.n_boxes_min > self.n_boxes_max:
            raise ConfigError("n_boxes_min exceeds n_boxes_max")
        try:
            self.anchor_config()
            self.pool_config()
            self.assign_config()
            self.refine_config()
            self.nms_config()
            self.scale_range()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def anchor_config(self) -> AnchorConfig:
        return AnchorConfig(tuple(self.scales), tuple(self.ratios), self.c, self.d, self.image_width, self.image_height)

    def pool_config(self) -> PoolConfig:
        return PoolConfig(self.k, self.classes, self.samples_per_bin)

    def assign_config(self) -> AssignConfig:
        return AssignConfig(
            pos_iou=self.pos_iou,
            neg_iou=self.neg_iou,
            max_pos=self.max_pos,
            max_neg=self.max_neg,
            hard_neg=self.hard_neg,
            hard_neg_min_iou=self.hard_neg_min_iou,
            hard_neg_in_budget=self.hard_neg_in_budget,
            roi_cap=self.roi_cap,
            rng_seed=self.seed,
        )

    def refine_config(self) -> RefineConfig:
        return RefineConfig(self.iterations, self.top_k, self.output_n)

    def nms_config(self) -> NmsConfig:
        return NmsConfig(self.sigma, self.score_floor, self.hard_iou, "hard" if self.nms == "hard" else "soft")

    def scale_range(self) -> ScaleRange:
        return ScaleRange(self.snip_min, math.inf if self.snip_max is None else self.snip_max)
