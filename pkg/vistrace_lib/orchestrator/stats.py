"""Aggregate statistics over episode traces: tool-call counts, usage shares and token totals."""

from collections import Counter
from typing import Any, Dict, Sequence

import numpy as np

from vistrace_lib.orchestrator.components import Trace
from vistrace_lib.tooling.components import TOOL_SPECS
from vistrace_lib.utils.common import round_floats
from vistrace_lib.utils.errors import EmptyInput


def _ordered_tools(counts: Counter) -> list:
    known = [name for name in TOOL_SPECS if name in counts]
    return known + sorted(name for name in counts if name not in TOOL_SPECS)


def trace_stats(traces: Sequence[Trace]) -> Dict[str, Any]:
    """
    Summarize a set of traces.
    Args:
        traces (Sequence[Trace]): Episodes to summarize.
    Returns:
        Dict[str, Any]: count, mean_tool_calls, tool_usage (percent of all calls per tool),
            tool_call_distribution (number of traces per call count), token totals and
            per-trace means split into input-text, input-visual and output-text.
    """
    if not traces:
        raise EmptyInput("trace_stats needs at least one trace")

    calls_per_trace = np.array([trace.n_tool_calls for trace in traces], dtype=float)
    usage = Counter(call.tool for trace in traces for call in trace.tool_calls)
    total_calls = sum(usage.values())
    distribution = Counter(int(n) for n in calls_per_trace if n > 0)

    tokens = {"input_text": 0, "input_visual": 0, "output_text": 0}
    for trace in traces:
        for r in trace.rounds:
            tokens["input_text"] += r.text_tokens_in
            tokens["input_visual"] += r.visual_tokens_in
            tokens["output_text"] += r.text_tokens_out

    return round_floats({
        "count": len(traces),
        "mean_tool_calls": float(calls_per_trace.mean()),
        "tool_usage": {name: 100.0 * usage[name] / total_calls for name in _ordered_tools(usage)},
        "tool_call_distribution": {str(n): distribution[n] for n in sorted(distribution)},
        "terminated_by": dict(sorted(Counter(str(t.terminated_by) for t in traces).items())),
        "tokens": tokens,
        "mean_tokens": {key: value / len(traces) for key, value in tokens.items()},
    })
