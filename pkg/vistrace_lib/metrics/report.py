"""
Evaluation reports: per-benchmark answer metrics joined with tool usage and token
statistics from the episode traces, plus a bar chart of tool usage.
"""

from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from vistrace_lib.metrics.scores import (
    MRA_THRESHOLDS, OPTION_LETTER_VERSION, em1, em_r1, mca_correct, mra, parse_number,
)
from vistrace_lib.orchestrator.components import Trace
from vistrace_lib.orchestrator.stats import trace_stats
from vistrace_lib.tooling.components import TOOL_SPECS
from vistrace_lib.utils.common import read_jsonl, round_floats
from vistrace_lib.utils.errors import EmptyInput, IdMismatch, InputFormatError
from vistrace_lib.utils.logger import logger

TASK_KINDS = ["open", "multiple_choice", "numerical"]


@dataclass(frozen=True)
class EvalRecord:
    id: str
    prediction: str
    ground_truth: Union[str, float]
    kind: str = "open"
    benchmark: str = "default"

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise InputFormatError(f"record {self.id}: unknown task kind '{self.kind}'")
        if self.kind == "numerical" and parse_number(self.ground_truth) is None:
            raise InputFormatError(f"record {self.id}: numerical ground truth {self.ground_truth!r} is not a finite real")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EvalRecord":
        try:
            return cls(id=str(data["id"]), prediction=str(data.get("prediction") or ""),
                       ground_truth=data["ground_truth"], kind=data.get("kind", "open"),
                       benchmark=data.get("benchmark", "default"))
        except KeyError as exc:
            raise InputFormatError(f"evaluation record is missing field {exc}") from exc

    def with_prediction(self, prediction: Optional[str]) -> "EvalRecord":
        return EvalRecord(self.id, prediction or "", self.ground_truth, self.kind, self.benchmark)


def load_eval_records(path: Union[str, Path]) -> List[EvalRecord]:
    return [EvalRecord.from_dict(data) for data in read_jsonl(path)]


def score_record(record: EvalRecord) -> Dict[str, float]:
    """Per-record indicators (or MRA value) for the metrics of its task kind."""
    if record.kind == "open":
        gt = str(record.ground_truth)
        return {"em1": em1(record.prediction, gt), "em_r1": em_r1(record.prediction, gt)}
    if record.kind == "multiple_choice":
        return {"accuracy": mca_correct(record.prediction, str(record.ground_truth))}
    pred = parse_number(record.prediction)
    gt = parse_number(record.ground_truth)
    return {"mra": mra(pred, gt) if pred is not None else 0.0}


def benchmark_metrics(records: Sequence[EvalRecord]) -> Dict[str, Dict[str, Any]]:
    """Metric means per benchmark and task kind, benchmarks and kinds in sorted/declared order."""
    grouped: Dict[str, Dict[str, List[Dict[str, float]]]] = {}
    for record in records:
        grouped.setdefault(record.benchmark, {}).setdefault(record.kind, []).append(score_record(record))

    metrics: Dict[str, Dict[str, Any]] = OrderedDict()
    for benchmark in sorted(grouped):
        entry: Dict[str, Any] = OrderedDict()
        for kind in TASK_KINDS:
            scores = grouped[benchmark].get(kind)
            if not scores:
                continue
            entry[kind] = {"count": len(scores)}
            for name in scores[0]:
                entry[kind][name] = float(np.mean([s[name] for s in scores]))
        metrics[benchmark] = entry
    return metrics


def report(traces: Optional[Sequence[Trace]], records: Sequence[EvalRecord]) -> Dict[str, Any]:
    """
    Build the evaluation report.
    Args:
        traces (Optional[Sequence[Trace]]): Episodes whose ids match the record ids (None skips tool stats).
        records (Sequence[EvalRecord]): Scored records.
    Returns:
        Dict[str, Any]: metrics per benchmark, tool usage, tool-call distribution and token means.
    """
    if not records:
        raise EmptyInput("report needs at least one evaluation record")
    ids = [record.id for record in records]
    if len(set(ids)) != len(ids):
        raise IdMismatch("evaluation records contain duplicate ids")

    document: Dict[str, Any] = OrderedDict()
    document["count"] = len(records)
    document["option_letter_regex"] = OPTION_LETTER_VERSION
    document["mra_thresholds"] = list(MRA_THRESHOLDS)
    document["metrics"] = benchmark_metrics(records)

    if traces is not None:
        trace_ids = [trace.episode_id for trace in traces]
        if sorted(trace_ids) != sorted(ids):
            missing = sorted(set(ids) ^ set(trace_ids))
            raise IdMismatch(f"trace and record ids differ: {missing[:5]}")
        stats = trace_stats(traces)
        document["mean_tool_calls"] = stats["mean_tool_calls"]
        document["tool_usage"] = stats["tool_usage"]
        document["tool_call_distribution"] = stats["tool_call_distribution"]
        document["mean_tokens"] = stats["mean_tokens"]
    logger.info("Report over %d records in %d benchmarks.", len(records), len(document["metrics"]))
    return round_floats(document)


def attach_predictions(records: Sequence[EvalRecord], traces: Sequence[Trace]) -> List[EvalRecord]:
    """Fill empty record predictions with the final answers of the matching traces."""
    answers = {trace.episode_id: trace.final_answer for trace in traces}
    return [record.with_prediction(answers.get(record.id)) if not record.prediction else record
            for record in records]


def plot_tool_usage(document: Mapping[str, Any], path: Union[str, Path], title: str = "Tool usage"):
    """
    Bar chart of the per-tool usage percentages of a report.
    Args:
        document (Mapping[str, Any]): Report with a ``tool_usage`` section.
        path (Union[str, Path]): Output image file.
        title (str): Figure title.
    """
    usage = document.get("tool_usage") or {}
    if not usage:
        raise EmptyInput("report has no tool usage to plot")
    names = list(usage)
    labels = [TOOL_SPECS[name].abbreviation if name in TOOL_SPECS else name for name in names]

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, [usage[name] for name in names], color="tab:blue")
    ax.set_ylabel("share of tool calls (%)")
    ax.set_title(title)
    ax.set_ylim(0, 100)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    logger.info("Tool usage plot saved at: %s", path)
