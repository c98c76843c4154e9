"""
The episode loop: assemble the (evicted) context, query the model, parse, dispatch tools and
record rounds until the model answers or a limit is hit.
"""

import hashlib
from typing import Any, Callable, Dict, List, Optional

from vistrace_lib.ingestion.components import VideoManifest
from vistrace_lib.ingestion.planner import estimate_text_tokens
from vistrace_lib.llms_feat.client import MODE_TEXT_COT, MODE_TOOLS, ChatRequest, ModelClient
from vistrace_lib.method.config.configuration import EpisodeConfig
from vistrace_lib.orchestrator.components import ContextView, FrameRef, Trace, TraceRound, STUB_TEMPLATE
from vistrace_lib.orchestrator.parser import extract_final_answer, parse_tool_call
from vistrace_lib.tooling.backends import safe_dispatch
from vistrace_lib.tooling.components import ToolContext, ToolResult
from vistrace_lib.tooling.registry import ToolRegistry
from vistrace_lib.tooling.render import FrameStore
from vistrace_lib.utils.errors import BudgetTooSmall, EmptyManifest, MalformedCall
from vistrace_lib.utils.logger import logger

TOOL_SYSTEM_PROMPT = (
    "You answer questions about a video (or image). You may call one tool per turn by writing a block\n"
    "```tool\n{{\"tool\": <name>, \"arguments\": {{...}}}}\n```\n"
    "Available tools:\n{tools}\n"
    "When you are ready, reply without a tool block and end with 'Answer: <answer>'."
)
TEXT_SYSTEM_PROMPT = (
    "You answer questions about a video (or image). Think step by step, then end with 'Answer: <answer>'."
)
ANSWER_NOW = "Tool limit reached: answer the question now without calling tools."


def _stub_cost(omitted: int) -> int:
    return estimate_text_tokens(STUB_TEMPLATE.format(n=omitted)) if omitted else 0


def _context_total(trace: Trace, omitted: int, with_stub: bool = True) -> int:
    stub = _stub_cost(omitted) if with_stub else 0
    return trace.base_cost() + stub + sum(r.context_cost() for r in trace.rounds[omitted:])


def evict_to_budget(trace: Trace, budget: int) -> ContextView:
    """
    Drop whole rounds, oldest first, until the estimated context fits ``budget``.
    The omission stub is left out when only the latest round fits without it.
    Args:
        trace (Trace): Episode so far.
        budget (int): Token budget.
    Returns:
        ContextView: Question, initial frames, surviving rounds and the omission count.
    Raises:
        BudgetTooSmall: Question, initial frames and the latest round alone exceed the budget.
    """
    n_rounds = len(trace.rounds)
    floor_omitted = max(n_rounds - 1, 0)
    floor = _context_total(trace, floor_omitted, with_stub=False)
    if floor > budget:
        raise BudgetTooSmall(f"irreducible context of {floor} tokens exceeds budget {budget}")

    omitted = 0
    total = _context_total(trace, omitted)
    while total > budget and omitted < floor_omitted:
        omitted += 1
        total = _context_total(trace, omitted)
    show_stub = total <= budget
    if not show_stub:
        total = floor
    if omitted:
        logger.debug("Episode %s: evicted %d of %d rounds (%d tokens).", trace.episode_id, omitted, n_rounds, total)
    return ContextView(trace.question, list(trace.initial_frames), list(trace.rounds[omitted:]), omitted, total,
                       show_stub)



def _result_images(result: ToolResult) -> List[str]:
    payload = result.payload
    if result.kind == "annotated_frames":
        return [f"{frame['uri']}#{frame['digest']}" for frame in payload.get("frames", [])]
    if result.kind in ("new_frame_set", "segment"):
        return [f"frame:{index}" for index in payload.get("frames", [])]
    if result.kind == "cropped_image":
        return [f"crop:{payload['digest']}"]
    if result.kind == "depth_map":
        return [f"depth:{payload['frame']}"]
    return []


def assemble_messages(view: ContextView, system_prompt: str, answer_now: bool = False) -> List[Dict[str, Any]]:
    """Interleaved text/image chat messages for one model query."""
    user = [{"type": "text", "text": view.question}]
    user += [{"type": "image", "ref": frame.uri} for frame in view.initial_frames]
    messages = [
        {"role": "system", "content": [{"type": "text", "text": system_prompt}]},
        {"role": "user", "content": user},
    ]
    if view.stub:
        messages.append({"role": "user", "content": [{"type": "text", "text": view.stub}]})
    for r in view.rounds:
        messages.append({"role": "assistant", "content": [{"type": "text", "text": r.model_text}]})
        if r.tool_result is not None:
            content = [{"type": "text", "text": r.tool_result.describe()}]
            content += [{"type": "image", "ref": ref} for ref in _result_images(r.tool_result)]
            messages.append({"role": "tool", "content": content})
    if answer_now:
        messages.append({"role": "user", "content": [{"type": "text", "text": ANSWER_NOW}]})
    return messages


def count_text_tokens(messages: List[Dict[str, Any]]) -> int:
    return sum(estimate_text_tokens(item["text"]) for message in messages
               for item in message["content"] if item["type"] == "text")


def _episode_id(question: str, frames: VideoManifest) -> str:
    digest = hashlib.sha256(f"{frames.source}\n{question}".encode("utf-8")).hexdigest()
    return digest[:12]


def run_episode(model_client: ModelClient,
                registry: ToolRegistry,
                question: str,
                frames: VideoManifest,
                cfg: EpisodeConfig,
                context: Optional[ToolContext] = None,
                episode_id: Optional[str] = None) -> Trace:
    """
    Run one question to completion.

    An empty registry runs the text-only chain-of-thought mode: any tool block the model
    writes is then malformed. Tool errors become error observations and the episode goes on.
    In single-turn mode a second tool call is dropped and the model is asked again; every
    query counts toward ``max_rounds``.
    Args:
        model_client (ModelClient): Model to query.
        registry (ToolRegistry): Tools offered to the model.
        question (str): Question text.
        frames (VideoManifest): Initial frames shown with the question.
        cfg (EpisodeConfig): Round limit, context budget, single-turn flag and decoding.
        context (Optional[ToolContext]): Tool state; built over ``frames`` when None.
        episode_id (Optional[str]): Id stored in the trace; derived from the inputs when None.
    Returns:
        Trace: The recorded episode.
    """
    frames.require_frames()
    if context is None:
        context = ToolContext.for_video(frames, FrameStore())
    mode = MODE_TOOLS if len(registry) else MODE_TEXT_COT
    system_prompt = TOOL_SYSTEM_PROMPT.format(tools=registry.describe()) if len(registry) else TEXT_SYSTEM_PROMPT

    trace = Trace(
        episode_id=episode_id or _episode_id(question, frames),
        question=question,
        initial_frames=[FrameRef(meta.index, meta.uri, context.frame_tokens(meta)) for meta in frames.frames],
        mode="single_turn" if cfg.single_turn else "multi_turn",
        tools=registry.names,
    )
    if trace.base_cost() >= cfg.context_budget:
        raise BudgetTooSmall(f"question and initial frames need {trace.base_cost()} tokens, "
                             f"budget is {cfg.context_budget}")

    tools_used = 0
    answer_now = False
    for turn in range(cfg.max_rounds):
        try:
            view = evict_to_budget(trace, cfg.context_budget)
        except BudgetTooSmall as exc:
            logger.warning("Episode %s: %s", trace.episode_id, exc)
            trace.terminated_by = "budget_exhausted"
            break

        messages = assemble_messages(view, system_prompt, answer_now)
        request = ChatRequest(messages, dict(cfg.decoding), turn, mode, question)
        text = model_client.chat(request)
        counts = dict(text_tokens_in=count_text_tokens(messages),
                      text_tokens_out=estimate_text_tokens(text),
                      visual_tokens_in=view.visual_tokens)

        try:
            call = parse_tool_call(text, registry, round_no=len(trace.rounds) + 1)
        except MalformedCall as exc:
            logger.warning("Episode %s: malformed tool call: %s", trace.episode_id, exc)
            trace.rounds.append(TraceRound(text, **counts))
            trace.terminated_by = "parse_failure"
            break

        if call is None:
            trace.rounds.append(TraceRound(text, **counts))
            trace.final_answer = extract_final_answer(text)
            trace.terminated_by = "answer"
            break

        if cfg.single_turn and tools_used >= 1:
            logger.info("Episode %s: suppressed extra '%s' call in single-turn mode.", trace.episode_id, call.tool)
            trace.suppressed_calls += 1
            answer_now = True
            continue

        result = safe_dispatch(registry, call, context)
        tools_used += 1
        answer_now = False
        trace.rounds.append(TraceRound(text, call, result, **counts))
    else:
        trace.terminated_by = "max_rounds"

    logger.info("Episode %s finished: %s after %d rounds (%d tool calls).",
                trace.episode_id, trace.terminated_by, len(trace.rounds), trace.n_tool_calls)
    return trace


def compare_modes(model_client: ModelClient,
                  registry: ToolRegistry,
                  question: str,
                  frames: VideoManifest,
                  cfg: EpisodeConfig,
                  context_factory: Optional[Callable[[], ToolContext]] = None) -> Dict[str, Any]:
    """
    Run the same scenario in multi-turn and single-turn mode and diff the traces.
    ``context_factory`` must return a fresh context per call since tools mutate it.
    """
    traces = {}
    for name, single in (("multi_turn", False), ("single_turn", True)):
        mode_cfg = EpisodeConfig(max_rounds=cfg.max_rounds, context_budget=cfg.context_budget,
                                 single_turn=single, decoding=dict(cfg.decoding))
        context = context_factory() if context_factory else None
        traces[name] = run_episode(model_client, registry, question, frames, mode_cfg, context)

    multi, single = traces["multi_turn"], traces["single_turn"]
    return {
        "multi_turn": multi,
        "single_turn": single,
        "same_answer": multi.final_answer == single.final_answer,
        "tool_calls": {"multi_turn": multi.n_tool_calls, "single_turn": single.n_tool_calls},
        "tools": {"multi_turn": [c.tool for c in multi.tool_calls],
                  "single_turn": [c.tool for c in single.tool_calls]},
        "suppressed_calls": single.suppressed_calls,
    }
