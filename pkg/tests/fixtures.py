"""Hand-tallied 10-frame detection fixture shared by several test modules.

Classes: 0 bed, 1 staff, 2 devices, 3 patient. All boxes axis-aligned.

Per-class AP at IoU 0.5 (worked by hand from the ranked TP/FP lists):
    bed      .95 TP, .10 FP                      gt 2 -> 0.5
    staff    .90 TP, .85 FP, .60 FP, .50 TP, .40 TP  gt 4 -> 0.25 + 0.6 * 0.5 = 0.55
    devices  .70 FP (IoU 0.25), .65 TP           gt 2 -> 0.5 * 0.5 = 0.25
    patient  .80 TP, .75 FP, .30 TP, .20 FP      gt 2 -> 0.5 + 0.5 * 2/3 = 5/6

Confusion counts at conf 0.25, IoU 0.45 (rows predicted, columns truth,
order bed, staff, devices, patient, background) are in ``EXPECTED_COUNTS``.
"""

from privod.dataset import Annotation, Detection
from privod.geometry import OrientedBox

VIDEO = "fx"


def _a(frame, cls, cx, cy, w, h):
    return Annotation(cls, OrientedBox(cx, cy, w, h), frame, VIDEO)


def _d(frame, cls, cx, cy, w, h, conf):
    return Detection(cls, OrientedBox(cx, cy, w, h), conf, frame, VIDEO)


TRUTHS = [
    _a(0, 0, 50, 50, 20, 20),
    _a(1, 1, 100, 100, 10, 20),
    _a(2, 3, 200, 150, 40, 20),
    _a(3, 2, 30, 30, 10, 10),
    _a(4, 1, 60, 60, 10, 20),
    _a(6, 0, 80, 80, 20, 20),
    _a(7, 2, 10, 10, 6, 6),
    _a(7, 1, 40, 40, 10, 20),
    _a(8, 3, 120, 120, 40, 20),
    _a(9, 1, 90, 90, 10, 20),
]

DETECTIONS = [
    _d(0, 0, 50, 50, 20, 20, 0.95),
    _d(1, 1, 100, 100, 10, 20, 0.9),
    _d(1, 1, 101, 100, 10, 20, 0.6),
    _d(2, 3, 210, 150, 40, 20, 0.8),
    _d(3, 2, 36, 30, 10, 10, 0.7),
    _d(5, 1, 300, 300, 10, 20, 0.85),
    _d(6, 3, 80, 80, 20, 20, 0.75),
    _d(7, 2, 10, 10, 6, 6, 0.65),
    _d(7, 1, 40, 41, 10, 20, 0.5),
    _d(8, 3, 120, 120, 40, 20, 0.3),
    _d(8, 3, 125, 120, 40, 20, 0.2),
    _d(9, 1, 90, 90, 10, 20, 0.4),
    _d(9, 0, 500, 500, 20, 20, 0.1),
]

EXPECTED_AP = {0: 0.5, 1: 0.55, 2: 0.25, 3: 5 / 6}
EXPECTED_MAP = (0.5 + 0.55 + 0.25 + 5 / 6) / 4

EXPECTED_COUNTS = [
    [1, 0, 0, 0, 0],
    [0, 3, 0, 0, 2],
    [0, 0, 1, 0, 1],
    [1, 0, 0, 2, 0],
    [0, 1, 1, 0, 0],
]
