"""
Preprocessing plans: frame-rate downsampling, pixel-budget resizing and token accounting.
All functions are pure; they return plans and never touch pixels.
"""

import math
from typing import List, Optional

from ensure import ensure_annotations

from vistrace_lib.ingestion.components import VideoManifest
from vistrace_lib.method.config.configuration import IngestionConfig
from vistrace_lib.utils.logger import logger

DEFAULT_TARGET_FPS = 4.0
DEFAULT_MAX_PIXELS = 50176
DEFAULT_PATCH = 14
CHARS_PER_TOKEN = 4


def downsample_plan(m: VideoManifest, target_fps: float = DEFAULT_TARGET_FPS) -> List[int]:
    """
    Frames to keep when resampling to ``target_fps``.

    For every tick t = n / target_fps up to the last timestamp, take the earliest frame at
    or after the tick that has not been taken yet. A video whose native rate does not
    exceed the target keeps every frame.

    Args:
        m (VideoManifest): Source manifest.
        target_fps (float): Target rate in frames per second.
    Returns:
        List[int]: Strictly increasing frame indices.
    """
    if not target_fps > 0:
        raise ValueError(f"target_fps must be > 0, got {target_fps}")
    m.require_frames()
    if m.native_fps <= target_fps:
        return m.indices

    timestamps = m.timestamps
    last = timestamps[-1]
    kept: List[int] = []
    cursor = 0
    tick_no = 0
    while True:
        tick = tick_no / target_fps
        if tick > last:
            break
        while cursor < len(timestamps) and timestamps[cursor] < tick:
            cursor += 1
        if cursor == len(timestamps):
            break
        kept.append(m.frames[cursor].index)
        cursor += 1
        tick_no += 1
    return kept


@ensure_annotations
def resize_plan(width: int, height: int, max_pixels: int = DEFAULT_MAX_PIXELS) -> tuple:
    """
    Frame size after enforcing the pixel budget (strictly fewer than ``max_pixels``).

    Frames already under budget are unchanged. Larger frames are scaled by
    s = sqrt(max_pixels / (width * height)) and floored; if the product still reaches the
    budget, the longer side is shortened one pixel at a time.

    Args:
        width (int): Width in pixels (>= 1).
        height (int): Height in pixels (>= 1).
        max_pixels (int): Exclusive pixel budget.
    Returns:
        tuple: (new_width, new_height).
    """
    if width < 1 or height < 1:
        raise ValueError(f"width and height must be >= 1, got {width}x{height}")
    if width * height < max_pixels:
        return width, height

    scale = math.sqrt(max_pixels / (width * height))
    new_width = max(1, int(math.floor(width * scale + 1e-9)))
    new_height = max(1, int(math.floor(height * scale + 1e-9)))
    while new_width * new_height >= max_pixels:
        if new_width >= new_height and new_width > 1:
            new_width -= 1
        elif new_height > 1:
            new_height -= 1
        else:
            break
    return new_width, new_height


@ensure_annotations
def estimate_visual_tokens(width: int, height: int, patch: int = DEFAULT_PATCH) -> int:
    """Visual tokens of one frame on a ``patch`` x ``patch`` grid: ceil(w/p) * ceil(h/p)."""
    if patch < 1:
        raise ValueError(f"patch must be >= 1, got {patch}")
    return math.ceil(width / patch) * math.ceil(height / patch)


@ensure_annotations
def estimate_text_tokens(text: str) -> int:
    """Rough text token count: one token per four characters, rounded up."""
    return math.ceil(len(text) / CHARS_PER_TOKEN)


def frame_visual_tokens(width: int, height: int, config: Optional[IngestionConfig] = None) -> int:
    """Visual tokens of a frame once it has been brought under the pixel budget."""
    config = config or IngestionConfig()
    new_width, new_height = resize_plan(int(width), int(height), config.max_pixels)
    return estimate_visual_tokens(new_width, new_height, config.patch)


def preprocess_manifest(m: VideoManifest, config: Optional[IngestionConfig] = None) -> VideoManifest:
    """
    Apply the preprocessing rules to a manifest: downsample to the target rate, then record
    the resized size of every kept frame.
    Args:
        m (VideoManifest): Raw manifest.
        config (Optional[IngestionConfig]): Rate, pixel budget and patch size.
    Returns:
        VideoManifest: Manifest of the kept frames with budget-compliant sizes.
    """
    config = config or IngestionConfig()
    kept = m.restrict(downsample_plan(m, config.target_fps))
    frames = []
    for meta in kept.frames:
        new_width, new_height = resize_plan(meta.width, meta.height, config.max_pixels)
        frames.append(type(meta)(meta.index, meta.timestamp, new_width, new_height, meta.uri, meta.embedding_row))
    logger.info("Preprocessed manifest: %d -> %d frames at %.3g fps.", len(m), len(frames), config.target_fps)
    return kept.with_frames(frames)
