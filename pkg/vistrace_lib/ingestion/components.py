"""
Frame manifests: the toolkit never decodes video, it works on a manifest listing the
frames an external extractor produced (timestamp, size, locator, optional embedding row).
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple

from vistrace_lib.utils.errors import EmptyManifest, InputFormatError


@dataclass(frozen=True)
class FrameMeta:
    index: int
    timestamp: float
    width: int
    height: int
    uri: str
    embedding_row: Optional[int] = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InputFormatError(f"frame {self.index}: width and height must be positive, "
                                   f"got {self.width}x{self.height}")

    @property
    def pixels(self) -> int:
        return self.width * self.height

    @property
    def row(self) -> int:
        """Row of this frame in the embedding matrix (defaults to the frame index)."""
        return self.index if self.embedding_row is None else self.embedding_row

    def to_dict(self) -> Dict[str, Any]:
        return {"index": self.index, "timestamp": self.timestamp, "width": self.width,
                "height": self.height, "uri": self.uri, "embedding_row": self.embedding_row}


@dataclass(frozen=True)
class VideoManifest:
    """
    Ordered frames of one video (or a single image as a one-frame manifest).
    Timestamps are strictly increasing; indices are those of the parent video and are kept
    through every restriction.
    """
    frames: Tuple[FrameMeta, ...]
    native_fps: float
    duration: float
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.native_fps > 0:
            raise InputFormatError(f"native fps must be positive, got {self.native_fps}")
        for previous, current in zip(self.frames, self.frames[1:]):
            if not current.timestamp > previous.timestamp:
                raise InputFormatError(
                    f"timestamps must be strictly increasing: frame {current.index} at {current.timestamp} "
                    f"follows frame {previous.index} at {previous.timestamp}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def indices(self) -> List[int]:
        return [frame.index for frame in self.frames]

    @property
    def timestamps(self) -> List[float]:
        return [frame.timestamp for frame in self.frames]

    def require_frames(self):
        if not self.frames:
            raise EmptyManifest("manifest has no frames")

    def frame(self, index: int) -> FrameMeta:
        for meta in self.frames:
            if meta.index == index:
                return meta
        raise KeyError(f"frame {index} is not in the manifest")

    def restrict(self, indices: Iterable[int]) -> "VideoManifest":
        """Sub-manifest of the given frame indices, in temporal order."""
        wanted = set(indices)
        return replace(self, frames=tuple(meta for meta in self.frames if meta.index in wanted))

    def with_frames(self, frames: Iterable[FrameMeta]) -> "VideoManifest":
        return replace(self, frames=tuple(frames))

    @classmethod
    def single_image(cls, uri: str, width: int, height: int) -> "VideoManifest":
        return cls(frames=(FrameMeta(0, 0.0, width, height, uri),), native_fps=1.0, duration=0.0)
