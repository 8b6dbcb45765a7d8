"""Detection metrics: greedy IoU matching, AP / mAP and the confusion matrix."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from privod.dataset import CLASS_NAMES, NUM_CLASSES, Annotation, Detection
from privod.geometry import iou

MAP_IOU = 0.5
CM_IOU = 0.45
CM_CONF = 0.25
BACKGROUND = NUM_CLASSES
MATRIX_LABELS = CLASS_NAMES + ("background",)


@dataclass
class MatchResult:
    """Per-class ``(confidence, is_true_positive)`` records and truth counts.

    Results of separate frames combine with ``+``.
    """

    records: dict[int, list[tuple[float, bool]]] = field(default_factory=lambda: defaultdict(list))
    gt_counts: dict[int, int] = field(default_factory=lambda: defaultdict(int))

    def __add__(self, other: MatchResult) -> MatchResult:
        out = MatchResult()
        for src in (self, other):
            for c, recs in src.records.items():
                out.records[c].extend(recs)
            for c, n in src.gt_counts.items():
                out.gt_counts[c] += n
        return out

    def true_positives(self, class_id: int) -> int:
        return sum(tp for _, tp in self.records.get(class_id, ()))


def _by_confidence(dets: Sequence[Detection]) -> list[int]:
    # stable: equal confidences keep input order
    return sorted(range(len(dets)), key=lambda i: -dets[i].confidence)


def _greedy(dets: Sequence[Detection], truths: Sequence[Annotation], threshold: float) -> list[int | None]:
    """Index of the matched truth for each detection (None when unmatched)."""
    matched = [False] * len(truths)
    out: list[int | None] = [None] * len(dets)
    for di in _by_confidence(dets):
        best, best_iou = None, -1.0
        for ti, truth in enumerate(truths):
            if matched[ti]:
                continue
            value = iou(dets[di].box, truth.box)
            if value > best_iou:
                best, best_iou = ti, value
        if best is not None and best_iou >= threshold:
            matched[best] = True
            out[di] = best
    return out


def match_frame(
    detections: Sequence[Detection], truths: Sequence[Annotation], iou_threshold: float = MAP_IOU
) -> MatchResult:
    """Greedy same-class matching inside one frame.

    Per class, detections are visited by descending confidence and take the
    unmatched truth with the highest IoU if it reaches ``iou_threshold``. IoU
    ties go to the earlier truth. Matched detections are true positives.
    """
    result = MatchResult()
    for c in range(NUM_CLASSES):
        cls_truths = [t for t in truths if t.class_id == c]
        cls_dets = [d for d in detections if d.class_id == c]
        result.gt_counts[c] += len(cls_truths)
        if not cls_dets:
            continue
        assigned = _greedy(cls_dets, cls_truths, iou_threshold)
        for di in _by_confidence(cls_dets):
            result.records[c].append((cls_dets[di].confidence, assigned[di] is not None))
    return result


def average_precision(records: Sequence[tuple[float, bool]], gt_count: int) -> float:
    """All-points interpolated AP.

    Records are ranked by descending confidence (ties keep their order). The
    precision at each recall level is replaced by the best precision at any
    recall at least as high, and the resulting step curve is integrated over
    recall. Returns 0 when there are no truths.
    """
    if gt_count < 0:
        raise ValueError(f"gt_count must be >= 0, got {gt_count}")
    if gt_count == 0 or not records:
        return 0.0
    order = sorted(range(len(records)), key=lambda i: -records[i][0])
    tp = np.array([records[i][1] for i in order], dtype=np.float64)
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    recall = ctp / gt_count
    precision = ctp / (ctp + cfp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate(([0.0], recall)))
    return float(np.sum(steps * envelope))


def per_class_ap(result: MatchResult) -> dict[int, float | None]:
    """AP for every class; None where a class has neither truths nor detections."""
    out: dict[int, float | None] = {}
    for c in range(NUM_CLASSES):
        recs = result.records.get(c, [])
        gt = result.gt_counts.get(c, 0)
        out[c] = None if gt == 0 and not recs else average_precision(recs, gt)
    return out


def mean_average_precision(aps: Mapping[int, float | None] | Sequence[float | None]) -> float:
    """Unweighted mean over classes, skipping undefined (None) entries."""
    values = list(aps.values()) if isinstance(aps, Mapping) else list(aps)
    defined = [v for v in values if v is not None]
    if not defined:
        raise ValueError("mean_average_precision needs at least one defined class AP")
    return sum(defined) / len(defined)


def group_by_frame(items: Iterable) -> dict[str, list]:
    out: dict[str, list] = defaultdict(list)
    for item in items:
        out[item.frame_key].append(item)
    return out


def match_all(
    detections: Iterable[Detection], truths: Iterable[Annotation], iou_threshold: float = MAP_IOU
) -> MatchResult:
    dets = group_by_frame(detections)
    gts = group_by_frame(truths)
    result = MatchResult()
    for key in sorted(set(dets) | set(gts)):
        result = result + match_frame(dets.get(key, []), gts.get(key, []), iou_threshold)
    return result


@dataclass
class ConfusionMatrix:
    """Rows are predicted class, columns true class; index 4 is background."""

    counts: np.ndarray = field(default_factory=lambda: np.zeros((NUM_CLASSES + 1,) * 2, dtype=np.int64))

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        return ConfusionMatrix(self.counts + other.counts)

    def normalized(self) -> np.ndarray:
        """Divide each column by its total; empty columns stay zero."""
        totals = self.counts.sum(axis=0, keepdims=True).astype(np.float64)
        return np.divide(self.counts, totals, out=np.zeros(self.counts.shape), where=totals > 0)

    def to_csv(self, normalize: bool = True) -> str:
        values = self.normalized() if normalize else self.counts
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["predicted\\truth", *MATRIX_LABELS])
        for label, row in zip(MATRIX_LABELS, values):
            writer.writerow([label, *(f"{v:.4f}" if normalize else str(int(v)) for v in row)])
        return buf.getvalue()


def confusion_frame(
    detections: Sequence[Detection],
    truths: Sequence[Annotation],
    conf_threshold: float = CM_CONF,
    iou_threshold: float = CM_IOU,
) -> ConfusionMatrix:
    kept = [d for d in detections if d.confidence >= conf_threshold]
    assigned = _greedy(kept, truths, iou_threshold)
    cm = ConfusionMatrix()
    used = set()
    for det, ti in zip(kept, assigned):
        if ti is None:
            cm.counts[det.class_id, BACKGROUND] += 1
        else:
            cm.counts[det.class_id, truths[ti].class_id] += 1
            used.add(ti)
    for ti, truth in enumerate(truths):
        if ti not in used:
            cm.counts[BACKGROUND, truth.class_id] += 1
    return cm


def confusion_matrix(
    detections: Iterable[Detection],
    truths: Iterable[Annotation],
    conf_threshold: float = CM_CONF,
    iou_threshold: float = CM_IOU,
) -> ConfusionMatrix:
    """Class-agnostic greedy matching, tallied as (predicted, true) pairs.

    Detections below ``conf_threshold`` are dropped. Missed truths land in the
    background row, unmatched detections in the background column. Inputs may
    span many frames; matching happens per frame key.
    """
    for name, value in (("conf_threshold", conf_threshold), ("iou_threshold", iou_threshold)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    dets = group_by_frame(detections)
    gts = group_by_frame(truths)
    cm = ConfusionMatrix()
    for key in sorted(set(dets) | set(gts)):
        cm = cm + confusion_frame(dets.get(key, []), gts.get(key, []), conf_threshold, iou_threshold)
    return cm


def format_percent(value: float | None) -> str:
    return "n/a" if value is None else f"{100.0 * value:.1f}"


@dataclass
class EvaluationReport:
    aps: dict[int, float | None]
    map: float
    matrix: ConfusionMatrix
    result: MatchResult
    iou_threshold: float = MAP_IOU

    def ap_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class", "ap", "num_truths", "num_detections"])
        for c, ap in self.aps.items():
            writer.writerow(
                [
                    CLASS_NAMES[c],
                    "n/a" if ap is None else f"{ap:.6f}",
                    self.result.gt_counts.get(c, 0),
                    len(self.result.records.get(c, ())),
                ]
            )
        writer.writerow(["all", f"{self.map:.6f}", sum(self.result.gt_counts.values()),
                         sum(len(r) for r in self.result.records.values())])
        return buf.getvalue()

    def table(self, model: str = "model") -> str:
        head = f"mAP@{self.iou_threshold:g} (%)"
        cols = [name.capitalize() for name in CLASS_NAMES] + ["All"]
        cells = [format_percent(self.aps[c]) for c in range(NUM_CLASSES)] + [format_percent(self.map)]
        width = max(len(model), len("Model"))
        lines = [
            f"{'':{width}} | {head}",
            f"{'Model':{width}} | " + " | ".join(f"{c:>7}" for c in cols),
            "-" * (width + 3 + 10 * len(cols)),
            f"{model:{width}} | " + " | ".join(f"{v:>7}" for v in cells),
        ]
        return "\n".join(lines) + "\n"


def evaluate(
    detections: Iterable[Detection],
    truths: Iterable[Annotation],
    iou_threshold: float = MAP_IOU,
    conf_threshold: float = CM_CONF,
    cm_iou_threshold: float = CM_IOU,
) -> EvaluationReport:
    detections = list(detections)
    truths = list(truths)
    result = match_all(detections, truths, iou_threshold)
    aps = per_class_ap(result)
    defined = [v for v in aps.values() if v is not None]
    m = mean_average_precision(defined) if defined else 0.0
    matrix = confusion_matrix(detections, truths, conf_threshold, cm_iou_threshold)
    return EvaluationReport(aps, m, matrix, result, iou_threshold)
