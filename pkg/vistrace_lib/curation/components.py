"""
Types of the curation pipeline: source samples, retained training samples, per-sample
outcomes and the mergeable corpus statistics.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional

from vistrace_lib.ingestion.components import VideoManifest
from vistrace_lib.orchestrator.components import Trace
from vistrace_lib.utils.common import round_floats
from vistrace_lib.utils.errors import InputFormatError
from vistrace_lib.utils.logger import logger

TEXT_COT = "text_cot"
VISUAL_TRAJECTORY = "visual_trajectory"
DISCARD = "discard"
STATUSES = [TEXT_COT, VISUAL_TRAJECTORY, DISCARD]

# Source dataset tag -> media type of the training mix.
SOURCE_TYPES = {
    "llava_video": "video",
    "scanqa": "3d_scene",
    "sqa3d": "3d_scene",
    "cogcom": "image",
    "deepeyes": "image",
}


def source_type(tag: str) -> str:
    if tag not in SOURCE_TYPES:
        logger.warning("Unknown source tag '%s'; treating it as video.", tag)
        return "video"
    return SOURCE_TYPES[tag]


@dataclass(frozen=True)
class SourceSample:
    id: str
    question: str
    answer: str
    media: VideoManifest
    source: str = "llava_video"

    def __post_init__(self):
        if not str(self.answer).strip():
            raise InputFormatError(f"sample {self.id}: answer key must be nonempty")

    @property
    def modality(self) -> str:
        return "image" if source_type(self.source) == "image" else "video"


@dataclass(frozen=True)
class TrainingSample:
    """A retained trajectory. Text-CoT samples carry no tool call, visual ones at least one."""
    id: str
    kind: str
    trace: Trace
    source: str = "llava_video"
    verdict: str = "correct"

    def __post_init__(self):
        if self.kind == TEXT_COT and self.trace.n_tool_calls != 0:
            raise ValueError(f"text_cot sample {self.id} has {self.trace.n_tool_calls} tool calls")
        if self.kind == VISUAL_TRAJECTORY and self.trace.n_tool_calls < 1:
            raise ValueError(f"visual_trajectory sample {self.id} has no tool call")
        if self.kind not in (TEXT_COT, VISUAL_TRAJECTORY):
            raise ValueError(f"unknown training sample kind '{self.kind}'")
        if self.verdict != "correct":
            raise ValueError(f"sample {self.id}: only correct trajectories are retained")

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "kind": self.kind, "source": self.source, "verdict": self.verdict,
                "trace": self.trace.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainingSample":
        return cls(id=str(data["id"]), kind=data["kind"], trace=Trace.from_dict(data["trace"]),
                   source=data.get("source", "llava_video"), verdict=data.get("verdict", "correct"))


@dataclass(frozen=True)
class Outcome:
    sample_id: str
    status: str
    source: str
    sample: Optional[TrainingSample] = None
    reason: Optional[str] = None

    @property
    def retained(self) -> bool:
        return self.sample is not None

    def discard_record(self) -> Dict[str, Any]:
        return {"id": self.sample_id, "source": self.source, "reason": self.reason}


@dataclass(frozen=True)
class CorpusStats:
    """
    Counts per status and per source plus the tool-call sum over visual trajectories.
    ``merge`` is associative and commutative, so worker order cannot change the result.
    """
    counts: Mapping[str, int] = field(default_factory=dict)
    per_source: Mapping[str, Mapping[str, int]] = field(default_factory=dict)
    visual_tool_calls: int = 0
    discard_reasons: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def of(cls, outcome: Outcome) -> "CorpusStats":
        calls = outcome.sample.trace.n_tool_calls if outcome.status == VISUAL_TRAJECTORY else 0
        reasons = {outcome.reason.split(":", 1)[0]: 1} if outcome.status == DISCARD and outcome.reason else {}
        return cls({outcome.status: 1}, {outcome.source: {outcome.status: 1}}, calls, reasons)

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[Outcome]) -> "CorpusStats":
        stats = cls()
        for outcome in outcomes:
            stats = stats.merge(cls.of(outcome))
        return stats

    def merge(self, other: "CorpusStats") -> "CorpusStats":
        per_source: Dict[str, Counter] = {}
        for table in (self.per_source, other.per_source):
            for source, counts in table.items():
                per_source.setdefault(source, Counter()).update(counts)
        return CorpusStats(
            counts=dict(Counter(self.counts) + Counter(other.counts)),
            per_source={source: dict(counts) for source, counts in per_source.items()},
            visual_tool_calls=self.visual_tool_calls + other.visual_tool_calls,
            discard_reasons=dict(Counter(self.discard_reasons) + Counter(other.discard_reasons)),
        )

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> Dict[str, Any]:
        visual = self.counts.get(VISUAL_TRAJECTORY, 0)
        total = self.total
        return round_floats({
            "total": total,
            TEXT_COT: self.counts.get(TEXT_COT, 0),
            VISUAL_TRAJECTORY: visual,
            DISCARD: self.counts.get(DISCARD, 0),
            "discard_rate": self.counts.get(DISCARD, 0) / total if total else 0.0,
            "mean_tool_calls": self.visual_tool_calls / visual if visual else 0.0,
            "mean_tool_calls_defined": visual > 0,
            "per_source": {
                source: {status: self.per_source[source].get(status, 0) for status in STATUSES}
                for source in sorted(self.per_source)
            },
            "discard_reasons": dict(sorted(self.discard_reasons.items())),
        })

    def summary(self) -> str:
        data = self.to_dict()
        return (f"text_cot={data[TEXT_COT]} visual_trajectory={data[VISUAL_TRAJECTORY]} "
                f"discard={data[DISCARD]} mean_tool_calls={data['mean_tool_calls']:.4g}")
