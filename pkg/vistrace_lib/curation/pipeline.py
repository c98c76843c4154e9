"""
Two-stage curation: keep a text-only chain of thought when it already answers correctly,
otherwise try again with tools and keep the visual trajectory when that one is correct.
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

from vistrace_lib.curation.components import (
    DISCARD, TEXT_COT, VISUAL_TRAJECTORY, CorpusStats, Outcome, SourceSample, TrainingSample,
)
from vistrace_lib.curation.judges import Judge, auto_judge
from vistrace_lib.ingestion.manifest import load_manifest
from vistrace_lib.ingestion.planner import preprocess_manifest
from vistrace_lib.llms_feat.client import ModelClient
from vistrace_lib.method.config.configuration import EpisodeConfig, IngestionConfig
from vistrace_lib.orchestrator.episode import run_episode
from vistrace_lib.tooling.components import IMAGE_TOOLS, ToolContext
from vistrace_lib.tooling.registry import ToolRegistry
from vistrace_lib.tooling.render import FrameStore
from vistrace_lib.utils.common import read_jsonl
from vistrace_lib.utils.errors import EmptyInput, InputFormatError, VisTraceError
from vistrace_lib.utils.logger import logger

ContextFactory = Callable[[SourceSample], ToolContext]


def default_context(sample: SourceSample) -> ToolContext:
    return ToolContext.for_video(sample.media, FrameStore())


def curate_sample(model_client: ModelClient,
                  registry: ToolRegistry,
                  s: SourceSample,
                  judge: Judge = auto_judge,
                  cfg: Optional[EpisodeConfig] = None,
                  context_factory: ContextFactory = default_context) -> Outcome:
    """
    Curate one sample.
    Args:
        model_client (ModelClient): Model producing both stages.
        registry (ToolRegistry): Full tool registry for stage two (restricted to image tools for images).
        s (SourceSample): Sample with preprocessed media.
        judge (Judge): Correctness check of an answer against the key.
        cfg (Optional[EpisodeConfig]): Episode settings shared by both stages.
        context_factory (ContextFactory): Fresh tool context per stage.
    Returns:
        Outcome: text_cot, visual_trajectory or discard (with a reason).
    """
    cfg = cfg or EpisodeConfig()
    try:
        trace = run_episode(model_client, ToolRegistry.empty(), s.question, s.media, cfg,
                            context_factory(s), episode_id=s.id)
        if judge(trace.final_answer, s.answer):
            logger.info("Sample %s kept as text chain of thought.", s.id)
            return Outcome(s.id, TEXT_COT, s.source, TrainingSample(s.id, TEXT_COT, trace, s.source))

        tools = registry.restricted_to(IMAGE_TOOLS) if s.modality == "image" else registry
        trace = run_episode(model_client, tools, s.question, s.media, cfg, context_factory(s), episode_id=s.id)
        correct = judge(trace.final_answer, s.answer)
        if trace.n_tool_calls == 0:
            reason = "no_tool_call" if correct else "wrong_answer"
        elif not correct:
            reason = "wrong_answer"
        elif trace.n_successful_tool_calls == 0:
            reason = "tool_errors_only"
        else:
            logger.info("Sample %s kept as visual trajectory (%d tool calls).", s.id, trace.n_tool_calls)
            return Outcome(s.id, VISUAL_TRAJECTORY, s.source, TrainingSample(s.id, VISUAL_TRAJECTORY, trace, s.source))
    except (VisTraceError, ValueError) as exc:
        reason = f"{type(exc).__name__}: {exc}"
    logger.info("Sample %s discarded: %s", s.id, reason)
    return Outcome(s.id, DISCARD, s.source, reason=reason)


def curate_corpus(samples: Sequence[SourceSample],
                  model_client: ModelClient,
                  registry: ToolRegistry,
                  judge: Judge = auto_judge,
                  cfg: Optional[EpisodeConfig] = None,
                  workers: int = 4,
                  context_factory: ContextFactory = default_context) -> Tuple[List[Outcome], CorpusStats]:
    """
    Curate every sample with a bounded worker pool.
    Returns:
        Tuple[List[Outcome], CorpusStats]: Outcomes in corpus order and the merged statistics.
    """
    if not samples:
        raise EmptyInput("curate_corpus needs at least one sample")

    def work(sample: SourceSample) -> Outcome:
        return curate_sample(model_client, registry, sample, judge, cfg, context_factory)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        outcomes = list(executor.map(work, samples))
    stats = CorpusStats.from_outcomes(outcomes)
    logger.info("Curated %d samples: %s", len(outcomes), stats.summary())
    return outcomes, stats


def retained_samples(outcomes: Sequence[Outcome]) -> List[TrainingSample]:
    return [outcome.sample for outcome in outcomes if outcome.retained]


def load_corpus(path: Union[str, Path],
                ingestion: Optional[IngestionConfig] = None) -> Tuple[List[SourceSample], List[Outcome]]:
    """
    Read a corpus file of ``{id, question, answer, manifest, source}`` records. Manifest paths
    are relative to the corpus file; every manifest is preprocessed on load.

    A record whose manifest cannot be read or preprocessed becomes a ``bad_input`` discard
    instead of aborting the run. A record missing a field is a corpus format error.

    Returns:
        Tuple[List[SourceSample], List[Outcome]]: Loadable samples and the rejected records.
    """
    path = Path(path)
    samples, rejected = [], []
    for data in read_jsonl(path):
        try:
            sample_id, manifest_path = str(data["id"]), path.parent / data["manifest"]
            question, answer = data["question"], str(data["answer"])
        except KeyError as exc:
            raise InputFormatError(f"{path}: corpus record is missing field {exc}") from exc
        source = data.get("source", "llava_video")
        try:
            media = preprocess_manifest(load_manifest(manifest_path), ingestion)
        except (VisTraceError, ValueError) as exc:
            logger.warning("Sample %s discarded: bad manifest %s (%s)", sample_id, manifest_path, exc)
            rejected.append(Outcome(sample_id, DISCARD, source, reason=f"bad_input: {exc}"))
            continue
        samples.append(SourceSample(id=sample_id, question=question, answer=answer, media=media, source=source))
    return samples, rejected

