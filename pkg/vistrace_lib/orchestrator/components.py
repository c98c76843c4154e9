"""
Episode records: rounds, traces, the evicted context view and trace (de)serialization.
Serialization keeps a fixed field order so that replays are byte-identical.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from vistrace_lib.ingestion.planner import estimate_text_tokens
from vistrace_lib.tooling.components import ToolCall, ToolResult
from vistrace_lib.utils.common import dumps_json, load_json, save_json

TERMINATIONS = ["answer", "max_rounds", "budget_exhausted", "parse_failure"]
STUB_TEMPLATE = "[earlier rounds omitted: {n}]"


@dataclass(frozen=True)
class FrameRef:
    index: int
    uri: str
    visual_tokens: int

    def to_dict(self) -> Dict[str, Any]:
        return {"index": self.index, "uri": self.uri, "visual_tokens": self.visual_tokens}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FrameRef":
        return cls(int(data["index"]), str(data["uri"]), int(data["visual_tokens"]))


@dataclass
class TraceRound:
    """
    One model turn: its text, the tool call it made (if any) with the tool's result, and the
    token counts of the request that produced it.
    """
    model_text: str
    tool_call: Optional[ToolCall] = None
    tool_result: Optional[ToolResult] = None
    text_tokens_in: int = 0
    text_tokens_out: int = 0
    visual_tokens_in: int = 0

    def __post_init__(self):
        if (self.tool_call is None) != (self.tool_result is None):
            raise ValueError("a round has a tool result exactly when it has a tool call")
        if min(self.text_tokens_in, self.text_tokens_out, self.visual_tokens_in) < 0:
            raise ValueError("token counts must be >= 0")

    def context_cost(self) -> int:
        """Tokens this round occupies when replayed in a later context."""
        cost = estimate_text_tokens(self.model_text)
        if self.tool_result is not None:
            cost += estimate_text_tokens(self.tool_result.describe()) + self.tool_result.token_cost
        return cost

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model_text": self.model_text,
            "tool_call": self.tool_call.to_dict() if self.tool_call else None,
            "tool_result": self.tool_result.to_dict() if self.tool_result else None,
            "text_tokens_in": self.text_tokens_in,
            "text_tokens_out": self.text_tokens_out,
            "visual_tokens_in": self.visual_tokens_in,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TraceRound":
        return cls(
            model_text=data["model_text"],
            tool_call=ToolCall.from_dict(data["tool_call"]) if data.get("tool_call") else None,
            tool_result=ToolResult.from_dict(data["tool_result"]) if data.get("tool_result") else None,
            text_tokens_in=int(data.get("text_tokens_in", 0)),
            text_tokens_out=int(data.get("text_tokens_out", 0)),
            visual_tokens_in=int(data.get("visual_tokens_in", 0)),
        )


@dataclass
class Trace:
    """A whole episode: question, initial frames, rounds and how it ended."""
    episode_id: str
    question: str
    initial_frames: List[FrameRef]
    rounds: List[TraceRound] = field(default_factory=list)
    final_answer: Optional[str] = None
    terminated_by: Optional[str] = None
    mode: str = "multi_turn"
    tools: List[str] = field(default_factory=list)
    suppressed_calls: int = 0

    @property
    def tool_calls(self) -> List[ToolCall]:
        return [r.tool_call for r in self.rounds if r.tool_call is not None]

    @property
    def n_tool_calls(self) -> int:
        return len(self.tool_calls)

    @property
    def n_successful_tool_calls(self) -> int:
        return sum(1 for r in self.rounds if r.tool_result is not None and not r.tool_result.is_error)

    def base_cost(self) -> int:
        """Irreducible context: question text plus the initial frames."""
        return estimate_text_tokens(self.question) + sum(f.visual_tokens for f in self.initial_frames)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "episode_id": self.episode_id,
            "question": self.question,
            "initial_frames": [f.to_dict() for f in self.initial_frames],
            "rounds": [r.to_dict() for r in self.rounds],
            "final_answer": self.final_answer,
            "terminated_by": self.terminated_by,
            "mode": self.mode,
            "tools": list(self.tools),
            "suppressed_calls": self.suppressed_calls,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Trace":
        return cls(
            episode_id=str(data["episode_id"]),
            question=data["question"],
            initial_frames=[FrameRef.from_dict(f) for f in data.get("initial_frames", [])],
            rounds=[TraceRound.from_dict(r) for r in data.get("rounds", [])],
            final_answer=data.get("final_answer"),
            terminated_by=data.get("terminated_by"),
            mode=data.get("mode", "multi_turn"),
            tools=list(data.get("tools", [])),
            suppressed_calls=int(data.get("suppressed_calls", 0)),
        )

    def to_json(self) -> str:
        return dumps_json(self.to_dict())


@dataclass
class ContextView:
    """What the model sees after eviction: never drops the question, frames or latest round."""
    question: str
    initial_frames: List[FrameRef]
    rounds: List[TraceRound]
    omitted: int
    total_tokens: int
    show_stub: bool = True

    @property
    def stub(self) -> Optional[str]:
        return STUB_TEMPLATE.format(n=self.omitted) if self.omitted and self.show_stub else None

    @property
    def visual_tokens(self) -> int:
        visual = sum(f.visual_tokens for f in self.initial_frames)
        return visual + sum(r.tool_result.token_cost for r in self.rounds if r.tool_result is not None)


def write_trace(trace: Trace, path: Union[str, Path]):
    save_json(path, trace.to_dict())


def read_trace(path: Union[str, Path]) -> Trace:
    return Trace.from_dict(load_json(path))
