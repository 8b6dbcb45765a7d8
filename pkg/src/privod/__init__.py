"""Privacy-preserving video object detection toolkit.

Box-blur anonymization, motion-based clip extraction, the temporal
three-channel frame encoding, oriented-box geometry and a mAP/confusion
matrix evaluator. The neural detector itself is external and talks to this
package through label and detection files.
"""

from privod.errors import FormatError, InvariantError
from privod.geometry import OrientedBox, iou
from privod.raster import Frame, VideoMeta
from privod.encoder import AugmentationPolicy, BoxSource, EncodedFrame, encode
from privod.estimators import (
    BoxBlur,
    DetectionEvaluator,
    MotionClipExtractor,
    TemporalChannelEncoder,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationPolicy",
    "BoxBlur",
    "BoxSource",
    "DetectionEvaluator",
    "EncodedFrame",
    "FormatError",
    "Frame",
    "InvariantError",
    "MotionClipExtractor",
    "OrientedBox",
    "TemporalChannelEncoder",
    "VideoMeta",
    "encode",
    "iou",
]
