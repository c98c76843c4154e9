"""
Tool vocabulary of the episode loop: tool specifications with argument schemas, tool calls,
tool results, marker annotations and the per-episode context tools operate on.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from vistrace_lib.ingestion.components import FrameMeta, VideoManifest
from vistrace_lib.ingestion.planner import frame_visual_tokens
from vistrace_lib.method.config.configuration import IngestionConfig, SelectionConfig
from vistrace_lib.method.kernel.components import EmbeddingVector
from vistrace_lib.utils.errors import MalformedCall, OutOfBounds

RESULT_KINDS = ["new_frame_set", "annotated_frames", "segment", "region", "depth_map", "cropped_image", "error"]
ARGUMENT_TYPES = ["str", "int", "bbox"]
PROVENANCES = ["mock", "remote", "local"]


@dataclass(frozen=True)
class ArgumentField:
    name: str
    type: str
    required: bool = True
    description: str = ""

    def check(self, tool: str, value: Any):
        if self.type == "str":
            valid = isinstance(value, str) and value.strip() != ""
        elif self.type == "int":
            valid = isinstance(value, int) and not isinstance(value, bool)
        else:
            valid = (isinstance(value, (list, tuple)) and len(value) == 4
                     and all(isinstance(v, int) and not isinstance(v, bool) for v in value))
        if not valid:
            raise MalformedCall(f"{tool}: argument '{self.name}' must be of type {self.type}, got {value!r}")


@dataclass(frozen=True)
class ToolSpec:
    """Name, argument schema and result kind of one tool."""
    name: str
    arguments: Tuple[ArgumentField, ...]
    result_kind: str
    abbreviation: str = ""
    description: str = ""

    def validate(self, arguments: Mapping[str, Any]):
        """
        Check ``arguments`` against the schema.
        Args:
            arguments (Mapping[str, Any]): Call arguments.
        Raises:
            MalformedCall: On unknown, missing or ill-typed arguments.
        """
        if not isinstance(arguments, Mapping):
            raise MalformedCall(f"{self.name}: arguments must be an object")
        known = {arg.name: arg for arg in self.arguments}
        unknown = sorted(set(arguments) - set(known))
        if unknown:
            raise MalformedCall(f"{self.name}: unknown arguments {unknown}")
        for arg in self.arguments:
            if arg.name not in arguments:
                if arg.required:
                    raise MalformedCall(f"{self.name}: missing argument '{arg.name}'")
                continue
            arg.check(self.name, arguments[arg.name])

    def usage(self) -> str:
        args = ", ".join(f"{a.name}: {a.type}{'' if a.required else '?'}" for a in self.arguments)
        return f"{self.name}({args}) -> {self.result_kind}: {self.description}"


TOOL_SPECS: Dict[str, ToolSpec] = {
    "frame_selection": ToolSpec(
        "frame_selection",
        (ArgumentField("query", "str", description="what the frames should show"),
         ArgumentField("k", "int", required=False, description="number of frames")),
        "new_frame_set", "FS", "re-sample frames relevant to the query while avoiding redundant ones"),
    "object_tracking": ToolSpec(
        "object_tracking",
        (ArgumentField("object", "str", description="object to follow"),),
        "annotated_frames", "OT", "mark the object center in every frame where it appears"),
    "temporal_grounding": ToolSpec(
        "temporal_grounding",
        (ArgumentField("query", "str", description="event to localize"),),
        "segment", "TG", "trim the video to the segment matching the query"),
    "image_grounding": ToolSpec(
        "image_grounding",
        (ArgumentField("label", "str", description="region description"),
         ArgumentField("frame", "int", required=False, description="frame index")),
        "region", "IG", "locate the described region in a frame"),
    "depth_estimation": ToolSpec(
        "depth_estimation",
        (ArgumentField("frame", "int", required=False, description="frame index"),),
        "depth_map", "DE", "relative depth in [0, 1] for every pixel of a frame"),
    "zoom": ToolSpec(
        "zoom",
        (ArgumentField("bbox", "bbox", description="[x, y, w, h] in pixels"),
         ArgumentField("frame", "int", required=False, description="frame index")),
        "cropped_image", "ZI", "crop a frame to the box"),
}

VIDEO_TOOLS = list(TOOL_SPECS)
IMAGE_TOOLS = ["image_grounding", "depth_estimation", "zoom"]


@dataclass(frozen=True)
class ToolCall:
    tool: str
    arguments: Dict[str, Any]
    round: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {"tool": self.tool, "arguments": dict(self.arguments), "round": self.round}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ToolCall":
        return cls(tool=data["tool"], arguments=dict(data.get("arguments") or {}), round=int(data.get("round", 0)))


@dataclass(frozen=True)
class ToolResult:
    """
    What a tool returned. ``payload`` is JSON-like (frame references, annotations, boxes,
    digests of rendered pixels); ``token_cost`` is the number of visual tokens the payload
    adds to the model context.
    """
    tool: str
    kind: str
    payload: Dict[str, Any]
    token_cost: int = 0
    provenance: str = "mock"

    def __post_init__(self):
        if self.kind not in RESULT_KINDS:
            raise ValueError(f"unknown result kind '{self.kind}'")
        if self.token_cost < 0:
            raise ValueError(f"token_cost must be >= 0, got {self.token_cost}")

    @property
    def is_error(self) -> bool:
        return self.kind == "error"

    def describe(self) -> str:
        """Observation text shown to the model."""
        return f"[{self.tool} -> {self.kind}] " + json.dumps(self.payload, ensure_ascii=False, separators=(",", ":"))

    def to_dict(self) -> Dict[str, Any]:
        return {"tool": self.tool, "kind": self.kind, "payload": self.payload,
                "token_cost": self.token_cost, "provenance": self.provenance}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ToolResult":
        return cls(tool=data["tool"], kind=data["kind"], payload=dict(data.get("payload") or {}),
                   token_cost=int(data.get("token_cost", 0)), provenance=data.get("provenance", "mock"))

    @classmethod
    def error(cls, tool: str, message: str, provenance: str = "local") -> "ToolResult":
        return cls(tool=tool, kind="error", payload={"error": message}, token_cost=0, provenance=provenance)


@dataclass(frozen=True)
class Annotation:
    """A marker: filled circle of ``radius`` pixels at an object center in one frame."""
    frame: int
    center: Tuple[int, int]
    object_id: int
    label: str = ""
    radius: int = 4

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")

    def check_bounds(self, width: int, height: int):
        x, y = self.center
        if not (0 <= x < width and 0 <= y < height):
            raise OutOfBounds(f"marker center {self.center} outside {width}x{height} frame {self.frame}")

    def to_dict(self) -> Dict[str, Any]:
        return {"object_id": self.object_id, "label": self.label, "center": list(self.center), "radius": self.radius}


@dataclass
class FrameImage:
    """Pixels of one frame (H x W x 3, uint8) with the frame index they belong to."""
    index: int
    pixels: np.ndarray

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


@dataclass
class ToolContext:
    """
    Mutable per-episode state shared by tool backends: the whole (preprocessed) video, the
    currently active frames, frame embeddings for re-selection and a query encoder.
    """
    video: VideoManifest
    active: VideoManifest
    frame_store: Any
    embeddings: Optional[np.ndarray] = None
    query_encoder: Optional[Callable[[str], EmbeddingVector]] = None
    selection: SelectionConfig = field(default_factory=lambda: SelectionConfig(k=8))
    ingestion: IngestionConfig = field(default_factory=IngestionConfig)
    marker_radius: int = 4

    @classmethod
    def for_video(cls, video: VideoManifest, frame_store: Any, **kwargs) -> "ToolContext":
        return cls(video=video, active=video, frame_store=frame_store, **kwargs)

    def frame_tokens(self, meta: FrameMeta) -> int:
        return frame_visual_tokens(meta.width, meta.height, self.ingestion)

    def tokens_for(self, metas: List[FrameMeta]) -> int:
        return sum(self.frame_tokens(meta) for meta in metas)

    def default_frame(self) -> FrameMeta:
        self.active.require_frames()
        return self.active.frames[0]

    def resolve_frame(self, index: Optional[int]) -> FrameMeta:
        if index is None:
            return self.default_frame()
        try:
            return self.video.frame(index)
        except KeyError as exc:
            raise OutOfBounds(f"frame {index} is not part of the video") from exc
