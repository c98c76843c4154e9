"""
Visual post-processing of tool outputs: marker overlay for tracked objects, segment
trimming for temporal grounding and crop-and-resize for zoom. Frame pixels come from a
FrameStore that resolves manifest URIs.
"""

import hashlib
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from vistrace_lib.ingestion.components import FrameMeta, VideoManifest
from vistrace_lib.ingestion.planner import DEFAULT_MAX_PIXELS, resize_plan
from vistrace_lib.tooling.components import Annotation, FrameImage
from vistrace_lib.utils.errors import EmptySegment, IOFailure, OutOfBounds
from vistrace_lib.utils.logger import logger

# Marker colors by object id modulo the palette size.
PALETTE: List[Tuple[int, int, int]] = [
    (230, 25, 75),
    (60, 180, 75),
    (0, 130, 200),
    (255, 225, 25),
    (145, 30, 180),
    (245, 130, 48),
    (70, 240, 240),
    (240, 50, 230),
]
SYNTHETIC_SCHEME = "synthetic:"
SYNTHETIC_DEFAULT = (128, 128, 128)


def marker_color(object_id: int) -> Tuple[int, int, int]:
    return PALETTE[object_id % len(PALETTE)]


def payload_digest(frame: FrameImage) -> str:
    """SHA-256 of the frame shape and pixel bytes, used to compare rendered payloads."""
    digest = hashlib.sha256()
    digest.update(str(frame.pixels.shape).encode("ascii"))
    digest.update(np.ascontiguousarray(frame.pixels).tobytes())
    return digest.hexdigest()


class FrameStore:
    """
    Resolves frame URIs to pixels at the size recorded in the manifest.

    ``synthetic:<r>,<g>,<b>`` (or bare ``synthetic:``) yields a solid frame, which keeps
    fixture scenarios free of image files; any other URI is opened with Pillow, relative
    paths being taken from ``root``.
    """

    def __init__(self, root: Optional[str] = None):
        self.root = root
        self._cache: Dict[Tuple[str, int, int], np.ndarray] = {}

    def _synthetic(self, uri: str, width: int, height: int) -> np.ndarray:
        spec = uri[len(SYNTHETIC_SCHEME):]
        color = SYNTHETIC_DEFAULT
        if spec:
            try:
                color = tuple(int(v) for v in spec.split(","))
            except ValueError as exc:
                raise IOFailure(f"bad synthetic frame uri '{uri}'") from exc
        return np.full((height, width, 3), color, dtype=np.uint8)

    def _from_file(self, uri: str, width: int, height: int) -> np.ndarray:
        path = uri if self.root is None or uri.startswith("/") else f"{self.root}/{uri}"
        try:
            with Image.open(path) as image:
                image = image.convert("RGB")
                if image.size != (width, height):
                    image = image.resize((width, height), Image.BILINEAR)
                return np.asarray(image, dtype=np.uint8).copy()
        except OSError as exc:
            raise IOFailure(f"cannot open frame {path}: {exc}") from exc

    def load(self, meta: FrameMeta) -> FrameImage:
        key = (meta.uri, meta.width, meta.height)
        if key not in self._cache:
            if meta.uri.startswith(SYNTHETIC_SCHEME):
                self._cache[key] = self._synthetic(meta.uri, meta.width, meta.height)
            else:
                self._cache[key] = self._from_file(meta.uri, meta.width, meta.height)
        return FrameImage(index=meta.index, pixels=self._cache[key].copy())


def overlay_markers(frames: Sequence[FrameImage], tracks: Sequence[Annotation]) -> List[FrameImage]:
    """
    Draw a filled circle at every tracked object center.

    Pixels within ``radius`` (Euclidean, inclusive) of a center take the color of the
    object id; everything else is left as is. Input frames are not modified.

    Args:
        frames (Sequence[FrameImage]): Frames to annotate.
        tracks (Sequence[Annotation]): Markers; each refers to a frame by index.
    Returns:
        List[FrameImage]: New frames, in input order.
    """
    by_frame: Dict[int, List[Annotation]] = {}
    for annotation in tracks:
        by_frame.setdefault(annotation.frame, []).append(annotation)

    known = {frame.index for frame in frames}
    missing = sorted(set(by_frame) - known)
    if missing:
        raise OutOfBounds(f"annotations refer to frames {missing} that are not in the frame set")

    annotated = []
    for frame in frames:
        pixels = frame.pixels.copy()
        marks = by_frame.get(frame.index, [])
        if marks:
            yy, xx = np.mgrid[0:frame.height, 0:frame.width]
            for mark in marks:
                mark.check_bounds(frame.width, frame.height)
                cx, cy = mark.center
                disk = (xx - cx) ** 2 + (yy - cy) ** 2 <= mark.radius ** 2
                pixels[disk] = marker_color(mark.object_id)
        annotated.append(FrameImage(index=frame.index, pixels=pixels))
    return annotated


def trim_segment(m: VideoManifest, t0: float, t1: float) -> VideoManifest:
    """
    Restrict a manifest to the frames with t0 <= timestamp <= t1; indices, timestamps and
    duration of the parent are kept, which makes trimming idempotent.
    Args:
        m (VideoManifest): Parent manifest.
        t0 (float): Segment start in seconds.
        t1 (float): Segment end in seconds.
    Returns:
        VideoManifest: Trimmed manifest.
    """
    if not (0 <= t0 < t1 <= m.duration + 1e-9):
        raise ValueError(f"segment [{t0}, {t1}] must satisfy 0 <= t0 < t1 <= duration={m.duration}")
    frames = [meta for meta in m.frames if t0 <= meta.timestamp <= t1]
    if not frames:
        raise EmptySegment(f"no frame in segment [{t0}, {t1}]")
    return m.with_frames(frames)


def zoom(frame: FrameImage, bbox: Sequence[int], max_pixels: int = DEFAULT_MAX_PIXELS) -> FrameImage:
    """
    Crop a frame to ``bbox`` = (x, y, w, h) and bring the crop under the pixel budget.
    Args:
        frame (FrameImage): Source frame.
        bbox (Sequence[int]): Box in pixels, fully inside the frame, w and h >= 1.
        max_pixels (int): Exclusive pixel budget.
    Returns:
        FrameImage: Cropped (and possibly resized) frame.
    """
    x, y, w, h = (int(v) for v in bbox)
    if w < 1 or h < 1:
        raise OutOfBounds(f"zoom box {list(bbox)} must have positive width and height")
    if x < 0 or y < 0 or x + w > frame.width or y + h > frame.height:
        raise OutOfBounds(f"zoom box {list(bbox)} outside {frame.width}x{frame.height} frame {frame.index}")
    crop = frame.pixels[y:y + h, x:x + w]
    new_w, new_h = resize_plan(w, h, int(max_pixels))
    if (new_w, new_h) != (w, h):
        logger.debug("Zoom crop %dx%d resized to %dx%d.", w, h, new_w, new_h)
        crop = np.asarray(Image.fromarray(crop).resize((new_w, new_h), Image.BILINEAR), dtype=np.uint8)
    return FrameImage(index=frame.index, pixels=np.ascontiguousarray(crop).copy())
