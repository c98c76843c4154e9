"""
Tool backends.

Mock backends replay a fixture script (one JSON document per scenario mapping tool and
label to the scripted output) and are fully deterministic. The remote backend speaks the
HTTP JSON protocol ``POST <base>/tools/<name>`` with ``{"arguments": ..., "frames": [...]}``
and expects ``{"kind": ..., "payload": ..., "token_cost": n}``. Frame selection always runs
locally through the selection library.
"""

import time
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import requests

from vistrace_lib.ingestion.planner import estimate_visual_tokens
from vistrace_lib.method.config.configuration import SelectionConfig
from vistrace_lib.method.selection.solver import select_frames
from vistrace_lib.tooling.components import (
    IMAGE_TOOLS, TOOL_SPECS, Annotation, ToolCall, ToolContext, ToolResult,
)
from vistrace_lib.tooling.registry import ToolRegistry
from vistrace_lib.tooling.render import overlay_markers, payload_digest, trim_segment, zoom
from vistrace_lib.utils.common import load_json, round_floats
from vistrace_lib.utils.errors import OutOfBounds, ToolFailure, UnknownLabel, VisTraceError
from vistrace_lib.utils.logger import logger


class ToolScript:
    """
    Fixture of scripted tool outputs::

        {"object_tracking": {"sofa": {"3": [[x, y, object_id], ...]}},
         "image_grounding": {"chair": [x, y, w, h]} or {"chair": {"<frame>": [x, y, w, h]}},
         "temporal_grounding": {"<query>": [t0, t1]},
         "depth_estimation": {"<frame>" or "default": [[...], ...]},
         "query_embeddings": {"<query>": [v1, v2, ...]}}
    """

    def __init__(self, data: Optional[Mapping[str, Any]] = None):
        self.data: Dict[str, Any] = dict(data or {})

    @classmethod
    def load(cls, path: str) -> "ToolScript":
        document = load_json(path)
        return cls(document.get("tools", document))

    def section(self, tool: str) -> Dict[str, Any]:
        return dict(self.data.get(tool) or {})

    def lookup(self, tool: str, label: str) -> Any:
        section = self.section(tool)
        if label not in section:
            raise UnknownLabel(f"fixture has no '{tool}' entry for '{label}'")
        return section[label]


def mock_tracker(frames: Sequence[int], object_label: str, script: ToolScript) -> List[Annotation]:
    """
    Scripted object tracking.
    Args:
        frames (Sequence[int]): Frame indices to track over.
        object_label (str): Object to track.
        script (ToolScript): Fixture.
    Returns:
        List[Annotation]: Markers of the scripted centers that fall on the given frames, in frame order.
    """
    per_frame = script.lookup("object_tracking", object_label)
    annotations = []
    for index in frames:
        for x, y, object_id in per_frame.get(str(index), []):
            annotations.append(Annotation(frame=int(index), center=(int(x), int(y)),
                                          object_id=int(object_id), label=object_label))
    return annotations


def mock_grounder(frame: int, label: str, script: ToolScript) -> Tuple[int, int, int, int]:
    """Scripted image grounding: the box for ``label`` (per frame or frame-independent)."""
    entry = script.lookup("image_grounding", label)
    if isinstance(entry, Mapping):
        if str(frame) not in entry:
            raise UnknownLabel(f"fixture has no 'image_grounding' box for '{label}' in frame {frame}")
        entry = entry[str(frame)]
    x, y, w, h = (int(v) for v in entry)
    return x, y, w, h


def mock_temporal(query: str, script: ToolScript) -> Tuple[float, float]:
    t0, t1 = script.lookup("temporal_grounding", query)
    return float(t0), float(t1)


def mock_depth(frame: int, script: ToolScript) -> np.ndarray:
    """Scripted relative depth map of a frame (the ``default`` entry applies to any frame)."""
    section = script.section("depth_estimation")
    key = str(frame) if str(frame) in section else "default"
    depth = np.asarray(script.lookup("depth_estimation", key), dtype=float)
    if depth.ndim != 2 or depth.size == 0 or depth.min() < 0 or depth.max() > 1:
        raise ValueError(f"scripted depth map for frame {frame} must be a nonempty 2-D grid in [0, 1]")
    return depth


class FrameSelectionBackend:
    """Re-samples frames of the whole video through ``select_frames``."""

    def __init__(self, config: Optional[SelectionConfig] = None):
        self.config = config

    def __call__(self, call: ToolCall, context: ToolContext) -> ToolResult:
        if context.embeddings is None or context.query_encoder is None:
            raise ToolFailure("frame_selection needs frame embeddings and a query encoder")
        base = self.config or context.selection
        config = SelectionConfig(k=call.arguments.get("k", base.k), pool_multiplier=base.pool_multiplier,
                                 epsilon=base.epsilon, pad=base.pad)
        video = context.video
        rows = context.embeddings[[meta.row for meta in video.frames]]
        query = context.query_encoder(call.arguments["query"])
        result = select_frames(query, rows, config)

        chosen = [video.frames[i] for i in result.presented_indices]
        context.active = video.with_frames(chosen)
        payload = round_floats({
            "query": call.arguments["query"],
            "frames": [meta.index for meta in chosen],
            "gains": result.gains,
            "log_det": result.log_det,
        })
        return ToolResult("frame_selection", "new_frame_set", payload, context.tokens_for(chosen), "local")


class MockBackend:
    """Base of the fixture-driven backends."""
    provenance = "mock"

    def __init__(self, script: ToolScript):
        self.script = script


class MockTrackingBackend(MockBackend):
    def __call__(self, call: ToolCall, context: ToolContext) -> ToolResult:
        label = call.arguments["object"]
        annotations = mock_tracker(context.active.indices, label, self.script)
        annotations = [Annotation(a.frame, a.center, a.object_id, a.label, context.marker_radius) for a in annotations]
        marked = sorted({a.frame for a in annotations})
        metas = [context.active.frame(index) for index in marked]
        images = overlay_markers([context.frame_store.load(meta) for meta in metas], annotations)

        frames = []
        for meta, image in zip(metas, images):
            frames.append({
                "index": meta.index,
                "uri": meta.uri,
                "digest": payload_digest(image),
                "markers": [a.to_dict() for a in annotations if a.frame == meta.index],
            })
        payload = {"object": label, "objects": len({a.object_id for a in annotations}), "frames": frames}
        return ToolResult("object_tracking", "annotated_frames", payload, context.tokens_for(metas), self.provenance)


class MockTemporalBackend(MockBackend):
    def __call__(self, call: ToolCall, context: ToolContext) -> ToolResult:
        query = call.arguments["query"]
        t0, t1 = mock_temporal(query, self.script)
        segment = trim_segment(context.video, t0, t1)
        context.active = segment
        payload = round_floats({"query": query, "t0": t0, "t1": t1, "frames": segment.indices})
        return ToolResult("temporal_grounding", "segment", payload, context.tokens_for(list(segment.frames)),
                          self.provenance)


class MockGroundingBackend(MockBackend):
    def __call__(self, call: ToolCall, context: ToolContext) -> ToolResult:
        meta = context.resolve_frame(call.arguments.get("frame"))
        label = call.arguments["label"]
        x, y, w, h = mock_grounder(meta.index, label, self.script)
        if x < 0 or y < 0 or w < 1 or h < 1 or x + w > meta.width or y + h > meta.height:
            raise OutOfBounds(f"scripted box {[x, y, w, h]} outside {meta.width}x{meta.height} frame {meta.index}")
        payload = {"label": label, "frame": meta.index, "bbox": [x, y, w, h]}
        return ToolResult("image_grounding", "region", payload, 0, self.provenance)


class MockDepthBackend(MockBackend):
    def __call__(self, call: ToolCall, context: ToolContext) -> ToolResult:
        meta = context.resolve_frame(call.arguments.get("frame"))
        depth = mock_depth(meta.index, self.script)
        payload = round_floats({
            "frame": meta.index,
            "shape": list(depth.shape),
            "min": float(depth.min()),
            "max": float(depth.max()),
            "depth": depth.tolist(),
        })
        return ToolResult("depth_estimation", "depth_map", payload, context.frame_tokens(meta), self.provenance)


class ZoomBackend:
    """Crop-and-resize runs locally on the frame pixels; no fixture needed."""

    def __call__(self, call: ToolCall, context: ToolContext) -> ToolResult:
        meta = context.resolve_frame(call.arguments.get("frame"))
        bbox = list(call.arguments["bbox"])
        crop = zoom(context.frame_store.load(meta), bbox, context.ingestion.max_pixels)
        payload = {"frame": meta.index, "bbox": bbox, "size": [crop.width, crop.height],
                   "digest": payload_digest(crop)}
        cost = estimate_visual_tokens(crop.width, crop.height, context.ingestion.patch)
        return ToolResult("zoom", "cropped_image", payload, cost, "local")


class RemoteToolBackend:
    """
    HTTP client of a remote tool service. One retry by default; any transport error,
    non-2xx status or malformed body ends in ToolFailure.
    """

    def __init__(self, base_url: str, name: str, timeout: float = 60.0, retries: int = 1,
                 session: Optional[requests.Session] = None):
        self.endpoint = f"{base_url.rstrip('/')}/tools/{name}"
        self.name = name
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()

    def _post(self, body: Dict[str, Any]) -> Dict[str, Any]:
        last_error: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            try:
                response = self.session.post(self.endpoint, json=body, timeout=self.timeout)
                response.raise_for_status()
                return response.json()
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                logger.warning("Tool '%s' request failed (attempt %d/%d): %s",
                               self.name, attempt + 1, self.retries + 1, exc)
                if attempt < self.retries:
                    time.sleep(0.5 * (attempt + 1))
        raise ToolFailure(f"remote tool '{self.name}' failed: {last_error}")

    def __call__(self, call: ToolCall, context: ToolContext) -> ToolResult:
        body = {"arguments": dict(call.arguments), "frames": [meta.uri for meta in context.active.frames]}
        data = self._post(body)
        try:
            return ToolResult(self.name, data["kind"], dict(data["payload"]), int(data.get("token_cost", 0)), "remote")
        except (KeyError, TypeError, ValueError) as exc:
            raise ToolFailure(f"remote tool '{self.name}' returned a malformed body: {exc}") from exc


def build_registry(script: Optional[ToolScript] = None,
                   tools_url: Optional[str] = None,
                   selection: Optional[SelectionConfig] = None,
                   disabled: Iterable[str] = (),
                   modality: str = "video",
                   timeout: float = 60.0,
                   retries: int = 1) -> ToolRegistry:
    """
    Registry with all six tools: frame selection and zoom run locally, the four model-based
    tools use the fixture script (offline) or the remote service (``tools_url``).
    Args:
        script (Optional[ToolScript]): Fixture for the mock backends.
        tools_url (Optional[str]): Base URL of the tool service; takes precedence over ``script``.
        selection (Optional[SelectionConfig]): Defaults for frame selection.
        disabled (Iterable[str]): Tools to leave out (ablations).
        modality (str): 'video' (all tools) or 'image' (grounding, depth and zoom only).
    Returns:
        ToolRegistry: The registry.
    """
    if tools_url is None and script is None:
        raise ValueError("either a fixture script or a tools URL is required")

    def model_backend(name: str, mock_cls):
        if tools_url is not None:
            return RemoteToolBackend(tools_url, name, timeout=timeout, retries=retries)
        return mock_cls(script)

    registry = ToolRegistry.empty()
    registry = registry.register(TOOL_SPECS["frame_selection"], FrameSelectionBackend(selection))
    registry = registry.register(TOOL_SPECS["object_tracking"], model_backend("object_tracking", MockTrackingBackend))
    registry = registry.register(TOOL_SPECS["temporal_grounding"],
                                 model_backend("temporal_grounding", MockTemporalBackend))
    registry = registry.register(TOOL_SPECS["image_grounding"], model_backend("image_grounding", MockGroundingBackend))
    registry = registry.register(TOOL_SPECS["depth_estimation"], model_backend("depth_estimation", MockDepthBackend))
    registry = registry.register(TOOL_SPECS["zoom"], ZoomBackend())

    if modality == "image":
        registry = registry.restricted_to(IMAGE_TOOLS)
    disabled = list(disabled)
    if disabled:
        logger.info("Tools disabled: %s", disabled)
        registry = registry.without(disabled)
    return registry


def safe_dispatch(registry: ToolRegistry, call: ToolCall, context: ToolContext) -> ToolResult:
    """Dispatch and turn tool errors into an error result the model can read."""
    try:
        return registry.dispatch(call, context)
    except (VisTraceError, ValueError) as exc:
        logger.warning("Tool '%s' failed: %s", call.tool, exc)
        return ToolResult.error(call.tool, f"{type(exc).__name__}: {exc}")
