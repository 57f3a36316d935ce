"""Scored proposal containers and their CSV form ``x1,y1,x2,y2,score,iteration``."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geometry import Box, as_boxes

CSV_HEADER = "x1,y1,x2,y2,score,iteration"


class Proposal(NamedTuple):
    box: Box
    score: float
    iteration: int


@dataclass
class Proposals:
    """Column-wise proposal list. ``deltas`` holds the pooled regression per proposal."""

    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iteration: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    deltas: np.ndarray | None = None

    def __post_init__(self):
        self.boxes = as_boxes(self.boxes)
        self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        self.iteration = np.asarray(self.iteration, dtype=np.int64).reshape(-1)
        if self.iteration.size == 1 and len(self.boxes) != 1:
            self.iteration = np.full(len(self.boxes), int(self.iteration[0]), dtype=np.int64)
        if not len(self.boxes) == len(self.scores) == len(self.iteration):
            raise ValueError("boxes, scores and iteration must have equal length")

    def __len__(self) -> int:
        return len(self.scores)

    def __getitem__(self, i: int) -> Proposal:
        return Proposal(Box(*self.boxes[i].tolist()), float(self.scores[i]), int(self.iteration[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def take(self, index) -> "Proposals":
        index = np.asarray(index, dtype=np.int64)
        return Proposals(
            self.boxes[index],
            self.scores[index],
            self.iteration[index],
            None if self.deltas is None else self.deltas[index],
        )

    def ranked(self) -> "Proposals":
        """Sorted by descending score; equal scores keep their input order."""
        return self.take(np.argsort(-self.scores, kind="stable"))

    @classmethod
    def from_list(cls, items) -> "Proposals":
        items = list(items)
        if not items:
            return cls()
        return cls(
            np.array([list(p.box) for p in items], dtype=np.float64),
            np.array([p.score for p in items]),
            np.array([p.iteration for p in items]),
        )


def proposals_to_csv(props: Proposals, header: bool = True) -> str:
    buf = io.StringIO()
    if header:
        buf.write(CSV_HEADER + "\n")
    for box, score, it in zip(props.boxes.tolist(), props.scores.tolist(), props.iteration.tolist()):
        buf.write(f"{box[0]!r},{box[1]!r},{box[2]!r},{box[3]!r},{score!r},{it}\n")
    return buf.getvalue()


def proposals_from_csv(text: str) -> Proposals:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines and lines[0].strip() == CSV_HEADER:
        lines = lines[1:]
    rows = []
    for lineno, ln in enumerate(lines, 1):
        parts = ln.split(",")
        if len(parts) != 6:
            raise ValueError(f"proposal line {lineno}: expected 6 columns, got {len(parts)}")
        rows.append([float(v) for v in parts[:5]] + [int(parts[5])])
    if not rows:
        return Proposals()
    arr = np.array([r[:5] for r in rows], dtype=np.float64)
    return Proposals(arr[:, :4], arr[:, 4], np.array([r[5] for r in rows]))
