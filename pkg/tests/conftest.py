import json
from pathlib import Path

import numpy as np
import pytest

from vistrace_lib.ingestion.components import FrameMeta, VideoManifest
from vistrace_lib.llms_feat.client import FixtureQueryEncoder
from vistrace_lib.tooling.backends import ToolScript, build_registry
from vistrace_lib.tooling.components import ToolContext
from vistrace_lib.tooling.render import FrameStore

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "data" / "fixtures"


def unit_rows(rng: np.random.Generator, T: int, d: int) -> np.ndarray:
    rows = rng.normal(size=(T, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def make_manifest(n_frames: int, fps: float = 4.0, width: int = 64, height: int = 48,
                  uri: str = "synthetic:10,20,30") -> VideoManifest:
    frames = [FrameMeta(i, i / fps, width, height, uri) for i in range(n_frames)]
    return VideoManifest(frames=tuple(frames), native_fps=fps, duration=n_frames / fps, source="test")


def tool_call_text(tool: str, arguments: dict, thought: str = "Let me check.") -> str:
    return f"{thought}\n```tool\n{json.dumps({'tool': tool, 'arguments': arguments})}\n```"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def sofa_dir() -> Path:
    return FIXTURES / "sofa_counting"


@pytest.fixture
def small_video() -> VideoManifest:
    return make_manifest(8)


@pytest.fixture
def script() -> ToolScript:
    return ToolScript({
        "object_tracking": {"cup": {"0": [[10, 10, 1]], "2": [[20, 12, 1], [40, 30, 2]], "5": [[5, 5, 3]]}},
        "image_grounding": {"cup": [8, 8, 16, 16]},
        "temporal_grounding": {"pour": [0.5, 1.0]},
        "depth_estimation": {"default": [[0.0, 0.5], [0.5, 1.0]]},
        "query_embeddings": {"cup": [1.0, 0.0, 0.0]},
    })


@pytest.fixture
def registry(script):
    return build_registry(script)


@pytest.fixture
def context(small_video, rng):
    embeddings = unit_rows(rng, len(small_video), 3)
    return ToolContext.for_video(small_video, FrameStore(), embeddings=embeddings,
                                 query_encoder=FixtureQueryEncoder({"cup": [1.0, 0.0, 0.0]}))

