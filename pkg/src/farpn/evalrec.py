"""Ground-truth ingestion and proposal recall.

Annotation text is a sequence of blocks::

    image_id
    W H
    n
    x y w h        (n lines; extra columns, as in WIDER, are ignored)

Recall uses rank-greedy one-to-one matching: proposals are visited in rank
order and each claims the unmatched ground truth it overlaps most, provided
the IoU reaches the threshold.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geometry import as_boxes, box_areas, clip_boxes, iou_matrix
from .proposals import Proposals

REPORT_COLUMNS = ("top_n", "iou_thresh", "recall")


class AnnotationError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class Entry:
    image_id: str
    width: float
    height: float
    gts: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))


@dataclass
class Dataset:
    entries: list[Entry] = field(default_factory=list)
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def total_gts(self) -> int:
        return sum(len(e.gts) for e in self.entries)


def _fields(lines, pos, n_expected, what):
    lineno, text = lines[pos]
    parts = text.split()
    if len(parts) < n_expected:
        raise AnnotationError(lineno, f"expected {what}, got {text!r}")
    try:
        return [float(p) for p in parts[:n_expected]]
    except ValueError:
        raise AnnotationError(lineno, f"expected {what}, got {text!r}") from None


def parse_annotations(text: str) -> Dataset:
    lines = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), 1) if ln.strip()]
    entries = []
    dropped = 0
    pos = 0
    while pos < len(lines):
        _, image_id = lines[pos]
        if pos + 2 >= len(lines):
            raise AnnotationError(lines[-1][0], f"incomplete block for image {image_id!r}")
        width, height = _fields(lines, pos + 1, 2, "'W H'")
        lineno, count_text = lines[pos + 2]
        try:
            n = int(count_text)
        except ValueError:
            raise AnnotationError(lineno, f"expected box count, got {count_text!r}") from None
        if n < 0:
            raise AnnotationError(lineno, "negative box count")
        if pos + 3 + n > len(lines):
            raise AnnotationError(lines[-1][0], f"image {image_id!r} declares {n} boxes, file ends early")
        raw = np.array([_fields(lines, pos + 3 + b, 4, "'x y w h'") for b in range(n)]).reshape(-1, 4)
        boxes = np.column_stack([raw[:, 0], raw[:, 1], raw[:, 0] + raw[:, 2], raw[:, 1] + raw[:, 3]])
        boxes = clip_boxes(boxes, width, height)
        keep = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
        dropped += int((~keep).sum())
        entries.append(Entry(image_id, width, height, boxes[keep]))
        pos += 3 + n
    return Dataset(entries, dropped)


def _fmt(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def format_annotations(dataset: Dataset | Iterable[Entry]) -> str:
    buf = io.StringIO()
    for e in dataset:
        buf.write(f"{e.image_id}\n{_fmt(e.width)} {_fmt(e.height)}\n{len(e.gts)}\n")
        for x1, y1, x2, y2 in as_boxes(e.gts).tolist():
            buf.write(f"{_fmt(x1)} {_fmt(y1)} {_fmt(x2 - x1)} {_fmt(y2 - y1)}\n")
    return buf.getvalue()


def greedy_match(proposals, gts, iou_threshold: float) -> int:
    """Number of ground truths matched one-to-one by the ranked ``proposals``."""
    proposals = as_boxes(proposals)
    gts = as_boxes(gts)
    if len(proposals) == 0 or len(gts) == 0:
        return 0
    overlaps = iou_matrix(proposals, gts)
    free = np.ones(len(gts), dtype=bool)
    matched = 0
    for row in overlaps:
        cand = np.where(free & (row >= iou_threshold), row, -1.0)
        best = int(np.argmax(cand))
        if cand[best] >= 0.0:
            free[best] = False
            matched += 1
            if matched == len(gts):
                break
    return matched


@dataclass
class RecallReport:
    rows: list[tuple[int, float, float]] = field(default_factory=list)
    matched: dict[str, dict[tuple[int, float], int]] = field(default_factory=dict)
    gt_counts: dict[str, int] = field(default_factory=dict)
    proposal_counts: dict[str, int] = field(default_factory=dict)

    def recall(self, top_n: int, iou_thresh: float) -> float:
        for n, t, r in self.rows:
            if n == top_n and t == iou_thresh:
                return r
        raise KeyError((top_n, iou_thresh))


def recall_at(
    proposals: Mapping[str, Proposals],
    dataset: Dataset,
    iou_thresholds: Sequence[float] = (0.5,),
    top_ns: Sequence[int] = (1000,),
) -> RecallReport:
    """Dataset-level recall for every ``(top_n, iou_threshold)`` pair.

    ``proposals`` maps image id to ranked proposals; missing images count as
    having none.
    """
    report = RecallReport()
    totals = {(n, t): 0 for n in top_ns for t in iou_thresholds}
    total_gt = 0
    for entry in dataset:
        props = proposals.get(entry.image_id)
        boxes = props.boxes if props is not None else np.zeros((0, 4))
        per_image = {}
        for n in top_ns:
            for t in iou_thresholds:
                m = greedy_match(boxes[:n], entry.gts, t)
                per_image[(n, t)] = m
                totals[(n, t)] += m
        report.matched[entry.image_id] = per_image
        report.gt_counts[entry.image_id] = len(entry.gts)
        report.proposal_counts[entry.image_id] = len(boxes)
        total_gt += len(entry.gts)
    for n in top_ns:
        for t in iou_thresholds:
            report.rows.append((int(n), float(t), totals[(n, t)] / total_gt if total_gt else 0.0))
    return report


def emit_report(report: RecallReport, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(REPORT_COLUMNS) + "\n")
        for n, t, r in report.rows:
            buf.write(f"{n},{t!r},{r!r}\n")
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "columns": list(REPORT_COLUMNS),
            "rows": [dict(zip(REPORT_COLUMNS, (n, t, r))) for n, t, r in report.rows],
            "images": [
                {
                    "image_id": image_id,
                    "gt_count": report.gt_counts.get(image_id, 0),
                    "proposal_count": report.proposal_counts.get(image_id, 0),
                    "matched": [{"top_n": n, "iou_thresh": t, "matched": m} for (n, t), m in per.items()],
                }
                for image_id, per in report.matched.items()
            ],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(text: str, fmt: str = "csv") -> RecallReport:
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None:
            return RecallReport()
        if tuple(header) != REPORT_COLUMNS:
            raise ValueError(f"unexpected report header {header}")
        rows = [(int(n), float(t), float(r)) for n, t, r in reader]
        return RecallReport(rows=rows)
    if fmt == "json":
        doc = json.loads(text)
        report = RecallReport(rows=[(int(r["top_n"]), float(r["iou_thresh"]), float(r["recall"])) for r in doc["rows"]])
        for img in doc.get("images", []):
            report.gt_counts[img["image_id"]] = img["gt_count"]
            report.proposal_counts[img["image_id"]] = img["proposal_count"]
            report.matched[img["image_id"]] = {(m["top_n"], m["iou_thresh"]): m["matched"] for m in img["matched"]}
        return report
    raise ValueError(f"unknown report format {fmt!r}")
