"""scikit-learn style wrappers around the functional pipeline stages.

Videos are ``uint8`` arrays shaped ``(n_frames, H, W)`` or
``(n_frames, H, W, 3)``, or any sequence of frames of equal shape. The
estimators hold only hyperparameters in ``__init__`` so ``get_params`` /
``set_params`` / ``clone`` work and they can sit in a ``Pipeline``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from privod import clips as clips_mod
from privod import encoder as enc
from privod.evaluation import CM_CONF, CM_IOU, MAP_IOU, evaluate
from privod.raster import BLUR_PASSES, BLUR_RADIUS, DEFAULT_FPS, MOTION_THRESHOLD, box_blur
from privod.validation import check_video


class BoxBlur(TransformerMixin, BaseEstimator):
    """Privacy blur applied frame by frame. Stateless; ``fit`` only validates."""

    def __init__(self, radius: int = BLUR_RADIUS, passes: int = BLUR_PASSES):
        self.radius = radius
        self.passes = passes

    def fit(self, X, y=None):
        video = check_video(X)
        self.frame_shape_ = video.shape[1:]
        return self

    def transform(self, X):
        check_is_fitted(self, "frame_shape_")
        video = check_video(X)
        if video.shape[1:] != self.frame_shape_:
            raise ValueError(f"fitted on frames {self.frame_shape_}, got {video.shape[1:]}")
        return np.stack([box_blur(f, self.radius, self.passes) for f in video])


class TemporalChannelEncoder(TransformerMixin, BaseEstimator):
    """Encode RGB videos into (luma, motion, previous-boxes) frames.

    ``transform(X, boxes=...)`` takes per-frame box lists; frame ``i`` is drawn
    with the boxes of frame ``i - 1``. With ``mode="train"`` the augmentation
    gates fire; with ``mode="infer"`` the boxes are filtered by
    ``confidence_floor`` and drawn unchanged. Frame ``i`` uses the random
    stream of ``(seed, i + start_index)``, so encoding a video in pieces gives
    the same result as encoding it whole.

    Parameters
    ----------
    mode : {"train", "infer"}
    motion_threshold : int
        Minimum absolute luma change kept in the green channel.
    p_use_bitmap, p_discard_all, p_jitter_box, jitter_max : float
        Training-mode augmentation, see :class:`privod.encoder.AugmentationPolicy`.
    confidence_floor : float
        Inference-mode cut on detection confidence.
    seed : int
    """

    def __init__(
        self,
        mode: str = "infer",
        motion_threshold: int = MOTION_THRESHOLD,
        p_use_bitmap: float = 0.5,
        p_discard_all: float = 0.2,
        p_jitter_box: float = 0.6,
        jitter_max: float = 10.0,
        confidence_floor: float = enc.CONFIDENCE_FLOOR,
        seed: int = 0,
    ):
        self.mode = mode
        self.motion_threshold = motion_threshold
        self.p_use_bitmap = p_use_bitmap
        self.p_discard_all = p_discard_all
        self.p_jitter_box = p_jitter_box
        self.jitter_max = jitter_max
        self.confidence_floor = confidence_floor
        self.seed = seed

    def fit(self, X, y=None):
        if self.mode not in ("train", "infer"):
            raise ValueError(f"mode must be 'train' or 'infer', got {self.mode!r}")
        if not 0 <= self.motion_threshold <= 255:
            raise ValueError(f"motion_threshold must be in [0, 255], got {self.motion_threshold}")
        self.policy_ = (
            enc.AugmentationPolicy(self.p_use_bitmap, self.p_discard_all, self.p_jitter_box, self.jitter_max, self.seed)
            if self.mode == "train"
            else None
        )
        self.frame_shape_ = check_video(X, channels=3).shape[1:]
        return self

    def _source(self, boxes, confidences) -> enc.BoxSource:
        if self.mode == "train":
            return enc.BoxSource.ground_truth(boxes)
        if confidences is None:
            confidences = [1.0] * len(boxes)
        return enc.BoxSource.predictions(boxes, confidences, self.confidence_floor)

    def encode_frames(
        self,
        X,
        boxes: Sequence[Sequence] | None = None,
        confidences: Sequence[Sequence[float]] | None = None,
        previous=None,
        start_index: int = 0,
        previous_boxes: Sequence | None = None,
        previous_confidences: Sequence[float] | None = None,
    ) -> list[enc.EncodedFrame]:
        """Like ``transform`` but returns :class:`EncodedFrame` objects with audit records.

        Args:
            previous: the frame preceding ``X[0]`` when encoding a video in
                chunks; None means ``X[0]`` starts the video.
            start_index: frame number of ``X[0]``.
            previous_boxes: boxes of the frame preceding ``X[0]``, drawn into
                the blue channel of ``X[0]``.
            previous_confidences: confidences for ``previous_boxes``.
        """
        check_is_fitted(self, "frame_shape_")
        video = check_video(X, channels=3)
        if video.shape[1:] != self.frame_shape_:
            raise ValueError(f"fitted on frames {self.frame_shape_}, got {video.shape[1:]}")
        if boxes is not None and len(boxes) != len(video):
            raise ValueError(f"{len(boxes)} box lists for {len(video)} frames")
        out = []
        prev = previous
        for i, frame in enumerate(video):
            source = None
            if boxes is not None and i > 0:
                source = self._source(boxes[i - 1], None if confidences is None else confidences[i - 1])
            elif i == 0 and previous_boxes is not None:
                source = self._source(previous_boxes, previous_confidences)
            out.append(
                enc.encode(
                    frame, prev, source, self.policy_, self.motion_threshold, index=start_index + i
                )
            )
            prev = frame
        return out

    def transform(self, X, boxes=None, confidences=None):
        return np.stack([e.to_array() for e in self.encode_frames(X, boxes, confidences)])


class MotionClipExtractor(BaseEstimator):
    """Find padded high-motion clips in a video.

    ``fit`` computes the motion series and the clip segments (``segments_``);
    ``predict`` returns a boolean per-frame mask of frames inside a clip.
    """

    def __init__(
        self,
        threshold: float = clips_mod.CLIP_THRESHOLD,
        pad_seconds: float = clips_mod.PAD_SECONDS,
        fps: float = DEFAULT_FPS,
        stride: int = 1,
    ):
        self.threshold = threshold
        self.pad_seconds = pad_seconds
        self.fps = fps
        self.stride = stride

    def fit(self, X, y=None):
        video = check_video(X)
        self.n_frames_ = len(video)
        self.motion_ = clips_mod.motion_series(video, self.stride)
        self.segments_ = clips_mod.extract_segments(
            self.motion_, self.threshold, self.pad_seconds, self.fps, self.n_frames_
        )
        return self

    def predict(self, X=None):
        check_is_fitted(self, "segments_")
        mask = np.zeros(self.n_frames_, dtype=bool)
        for seg in self.segments_:
            mask[seg.start : seg.end] = True
        return mask

    def fit_predict(self, X, y=None):
        return self.fit(X).predict()


class DetectionEvaluator(BaseEstimator):
    """mAP and confusion matrix for detections against ground truth.

    ``fit(detections, truths)`` stores the :class:`~privod.evaluation.EvaluationReport`
    as ``report_``; ``score`` returns mAP at ``iou_threshold``.
    """

    def __init__(self, iou_threshold: float = MAP_IOU, conf_threshold: float = CM_CONF, cm_iou_threshold: float = CM_IOU):
        self.iou_threshold = iou_threshold
        self.conf_threshold = conf_threshold
        self.cm_iou_threshold = cm_iou_threshold

    def fit(self, detections, truths):
        self.report_ = evaluate(detections, truths, self.iou_threshold, self.conf_threshold, self.cm_iou_threshold)
        self.ap_ = self.report_.aps
        self.map_ = self.report_.map
        self.confusion_matrix_ = self.report_.matrix
        return self

    def score(self, detections, truths) -> float:
        return evaluate(detections, truths, self.iou_threshold, self.conf_threshold, self.cm_iou_threshold).map
