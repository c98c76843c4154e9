"""
Command-line front end.

Sub-commands: ``select`` (frame selection on an embedding file), ``episode`` (one tool
episode written as a trace), ``curate`` (two-stage data curation), ``eval`` (metrics
report) and ``audit`` (greedy-versus-exact determinant ratios on random instances).
Every command is a thin adapter over the library; errors map to exit codes 2 (input
format), 3 (context budget), 4 (id alignment) and 1 (anything else).
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from vistrace_lib.cli.formats import read_embeddings, read_query_embedding
from vistrace_lib.curation.components import CorpusStats, SourceSample
from vistrace_lib.curation.judges import make_judge
from vistrace_lib.curation.pipeline import curate_corpus, load_corpus, retained_samples
from vistrace_lib.curation.records import export_training_records, load_training_records
from vistrace_lib.ingestion.components import VideoManifest
from vistrace_lib.ingestion.manifest import load_manifest
from vistrace_lib.ingestion.planner import preprocess_manifest
from vistrace_lib.llms_feat.client import (
    FixtureQueryEncoder, ModelClient, RemoteChatClient, RemoteEmbeddingClient, ScriptedModelClient,
)
from vistrace_lib.method.config.configuration import AppConfig
from vistrace_lib.method.kernel.solver import build_kernel, normalize
from vistrace_lib.method.selection.explain import (
    format_selection_report, greedy_optimality_report, plot_gains, plot_ratio_histogram,
)
from vistrace_lib.method.selection.main import run_selection, selection_report
from vistrace_lib.method.selection.solver import uniform_sample
from vistrace_lib.metrics.report import EvalRecord, attach_predictions, load_eval_records, plot_tool_usage, report
from vistrace_lib.orchestrator.components import Trace, read_trace
from vistrace_lib.orchestrator.episode import run_episode
from vistrace_lib.tooling.backends import ToolScript, build_registry
from vistrace_lib.tooling.components import ToolContext
from vistrace_lib.tooling.registry import ToolRegistry
from vistrace_lib.tooling.render import FrameStore
from vistrace_lib.utils.common import create_directories, dumps_json, load_json, read_jsonl, save_json
from vistrace_lib.utils.errors import ConfigError, InputFormatError, VisTraceError
from vistrace_lib.utils.logger import logger


def _emit(text: str):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_config(args: argparse.Namespace, overrides: Optional[Dict[str, Dict[str, Any]]] = None) -> AppConfig:
    return AppConfig.load(getattr(args, "config", None), overrides)


def _normalized_rows(matrix: np.ndarray) -> np.ndarray:
    return np.vstack([normalize(row).values for row in matrix])


def cmd_select(args: argparse.Namespace) -> int:
    config = _load_config(args, {"selection": {
        "k": args.k, "pool_multiplier": args.pool_multiplier, "epsilon": args.epsilon,
        "method": args.method, "pad": args.pad,
    }})
    frames = read_embeddings(args.embeddings)
    query = read_query_embedding(args.query_embedding) if args.query_embedding else None
    result = run_selection(frames, query, config.selection)

    _emit(format_selection_report(result))
    if args.out:
        save_json(args.out, selection_report(result, frames.shape[0], config.selection))
    if args.plot:
        plot_gains(result, args.plot)
    return 0


class Session:
    """Model client, tool registry and query encoder for one command invocation."""

    def __init__(self, model: ModelClient, registry: ToolRegistry, query_encoder: Optional[Callable],
                 scenario: Dict[str, Any]):
        self.model = model
        self.registry = registry
        self.query_encoder = query_encoder
        self.scenario = scenario

    @classmethod
    def create(cls, config: AppConfig, fixtures: Optional[str], live: bool, modality: str = "video") -> "Session":
        endpoints = config.endpoints
        if live:
            missing = [key for key in ("model_url", "tools_url") if not endpoints.get(key)]
            if missing:
                raise ConfigError(f"--live needs endpoints {missing} (config file or LAST_ variables)")
            model = RemoteChatClient(endpoints["model_url"], timeout=float(endpoints["timeout"]),
                                     retries=int(endpoints["retries"]))
            encoder = RemoteEmbeddingClient(endpoints["embed_url"]) if endpoints.get("embed_url") else None
            registry = build_registry(tools_url=endpoints["tools_url"], selection=config.selection,
                                      disabled=config.disabled_tools, modality=modality,
                                      timeout=float(endpoints["timeout"]), retries=int(endpoints["retries"]))
            return cls(model, registry, encoder, {})

        fixtures = fixtures or config.paths.get("fixtures")
        if not fixtures:
            raise ConfigError("offline runs need --fixtures (or paths.fixtures in the config file)")
        scenario = load_json(fixtures)
        if "model" not in scenario:
            raise InputFormatError(f"{fixtures}: scenario has no 'model' section")
        script = ToolScript(scenario.get("tools") or {})
        embeddings = script.section("query_embeddings")
        encoder = FixtureQueryEncoder(embeddings) if embeddings else None
        registry = build_registry(script, selection=config.selection, disabled=config.disabled_tools,
                                  modality=modality)
        return cls(ScriptedModelClient(scenario["model"]), registry, encoder, scenario)

    def context(self, config: AppConfig, video: VideoManifest, active: VideoManifest,
                embeddings: Optional[np.ndarray] = None, root: Optional[str] = None) -> ToolContext:
        return ToolContext(video=video, active=active, frame_store=FrameStore(root),
                           embeddings=embeddings, query_encoder=self.query_encoder,
                           selection=config.selection, ingestion=config.ingestion,
                           marker_radius=int(config.tools["marker_radius"]))


def initial_frames(video: VideoManifest, count: int) -> VideoManifest:
    """Evenly spaced initial observation frames."""
    positions = uniform_sample(len(video), count)
    return video.with_frames([video.frames[p] for p in positions])


def cmd_episode(args: argparse.Namespace) -> int:
    config = _load_config(args, {
        "selection": {"k": args.k},
        "episode": {"max_rounds": args.max_rounds, "context_budget": args.budget,
                    "single_turn": True if args.single_turn else None},
    })
    manifest_path = args.manifest or config.paths.get("manifest")
    if not manifest_path:
        raise ConfigError("episode needs --manifest (or paths.manifest in the config file)")
    video = preprocess_manifest(load_manifest(manifest_path), config.ingestion)
    modality = "image" if len(video) == 1 else "video"
    session = Session.create(config, args.fixtures, args.live, modality)

    question = args.question or session.scenario.get("question")
    if not question:
        raise ConfigError("episode needs --question (or a 'question' in the scenario)")
    embeddings_path = args.embeddings or config.paths.get("embeddings")
    embeddings = _normalized_rows(read_embeddings(embeddings_path)) if embeddings_path else None

    start = initial_frames(video, args.initial_frames or config.selection.k)
    context = session.context(config, video, start, embeddings, str(Path(manifest_path).parent))
    trace = run_episode(session.model, session.registry, question, start, config.episode, context,
                        episode_id=args.id)
    if args.out:
        save_json(args.out, trace.to_dict())
    else:
        _emit(trace.to_json())
    logger.info("Episode %s: %s", trace.episode_id, trace.terminated_by)
    return 0


def cmd_curate(args: argparse.Namespace) -> int:
    config = _load_config(args, {"curation": {"workers": args.workers, "judge": args.judge}})
    corpus_path = args.corpus or config.paths.get("corpus")
    if not corpus_path:
        raise ConfigError("curate needs --corpus (or paths.corpus in the config file)")
    samples, rejected = load_corpus(corpus_path, config.ingestion)
    out_dir = Path(args.out)
    create_directories([str(out_dir)])
    dataset_path, stats_path = out_dir / "dataset.jsonl", out_dir / "stats.json"

    outcomes = list(rejected)
    if not samples:
        logger.warning("Corpus %s has no curatable sample.", corpus_path)
    else:
        session = Session.create(config, args.fixtures, args.live)
        image_session = Session.create(config, args.fixtures, args.live, "image")

        def context_factory(sample: SourceSample) -> ToolContext:
            return session.context(config, sample.media, sample.media, root=str(Path(corpus_path).parent))

        for group, group_session in (([s for s in samples if s.modality == "video"], session),
                                     ([s for s in samples if s.modality == "image"], image_session)):
            if not group:
                continue
            group_outcomes, _ = curate_corpus(
                group, group_session.model, group_session.registry, make_judge(config.curation["judge"]),
                config.episode, int(config.curation["workers"]), context_factory)
            outcomes += group_outcomes
    order = {str(data["id"]): position for position, data in enumerate(read_jsonl(corpus_path))}
    outcomes.sort(key=lambda outcome: order[outcome.sample_id])
    stats = CorpusStats.from_outcomes(outcomes)
    export_training_records(retained_samples(outcomes), dataset_path,
                            [o.discard_record() for o in outcomes if not o.retained])

    save_json(stats_path, stats.to_dict())
    _emit(stats.summary())
    return 0


def _read_traces(paths: Sequence[str]) -> List[Trace]:
    traces: List[Trace] = []
    for path in paths:
        if str(path).endswith(".jsonl"):
            dataset, _ = load_training_records(path)
            traces += [sample.trace for sample in dataset]
        else:
            traces.append(read_trace(path))
    return traces


def cmd_eval(args: argparse.Namespace) -> int:
    records = load_eval_records(args.records)
    if args.kind:
        records = [EvalRecord(r.id, r.prediction, r.ground_truth, args.kind, r.benchmark) for r in records]
    traces = _read_traces(args.traces) if args.traces else None
    if traces is not None:
        records = attach_predictions(records, traces)
    document = report(traces, records)
    if args.out:
        save_json(args.out, document)
    _emit(dumps_json(document))
    if args.plot:
        plot_tool_usage(document, args.plot)
    return 0


def random_instances(count: int, seed: int, max_t: int, max_k: int, max_d: int = 8) -> List[Tuple[Any, int]]:
    """Seeded random (kernel, K) pairs over unit embeddings."""
    rng = np.random.default_rng(seed)
    instances = []
    for _ in range(count):
        T = int(rng.integers(2, max_t + 1))
        K = int(rng.integers(1, min(max_k, T) + 1))
        d = int(rng.integers(2, max_d + 1))
        frames = _normalized_rows(rng.normal(size=(T, d)))
        instances.append((build_kernel(frames), K))
    return instances


def cmd_audit(args: argparse.Namespace) -> int:
    audit = greedy_optimality_report(random_instances(args.instances, args.seed, args.max_t, args.max_k),
                                     args.epsilon)
    summary = {key: value for key, value in audit.items() if key != "ratios"}
    summary["below_half"] = sum(1 for ratio in audit["ratios"] if ratio < 0.5)
    _emit(dumps_json(summary))
    if args.plot:
        plot_ratio_histogram(audit, args.plot)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vistrace", description="Query-aware frame selection and tool episodes.")
    sub = parser.add_subparsers(dest="command", required=True)

    select = sub.add_parser("select", help="select frames from an embedding file")
    select.add_argument("--embeddings", required=True, help="frame embedding file ('d T' header)")
    select.add_argument("--query-embedding", help="query embedding file (one row)")
    select.add_argument("--k", type=int)
    select.add_argument("--pool-multiplier", type=int)
    select.add_argument("--epsilon", type=float)
    select.add_argument("--method", choices=["uniform", "relevance", "dpp", "combined"])
    select.add_argument("--pad", choices=["uniform"])
    select.add_argument("--config")
    select.add_argument("--out", help="write the selection report as JSON")
    select.add_argument("--plot", help="write a plot of the pivot gains")
    select.set_defaults(func=cmd_select)

    episode = sub.add_parser("episode", help="run one tool episode and write its trace")
    episode.add_argument("--config")
    episode.add_argument("--question")
    episode.add_argument("--manifest")
    episode.add_argument("--embeddings", help="frame embeddings for the frame_selection tool")
    mode = episode.add_mutually_exclusive_group()
    mode.add_argument("--fixtures", help="scenario JSON with scripted model and tool outputs")
    mode.add_argument("--live", action="store_true", help="use the configured remote endpoints")
    episode.add_argument("--single-turn", action="store_true")
    episode.add_argument("--max-rounds", type=int)
    episode.add_argument("--budget", type=int, help="context budget in tokens")
    episode.add_argument("--k", type=int, help="frames per selection")
    episode.add_argument("--initial-frames", type=int, help="initial frames shown (defaults to K)")
    episode.add_argument("--id", help="episode id stored in the trace")
    episode.add_argument("--out", help="trace file (stdout when omitted)")
    episode.set_defaults(func=cmd_episode)

    curate = sub.add_parser("curate", help="curate text and visual trajectories from a corpus")
    curate.add_argument("--corpus")
    curate.add_argument("--config")
    mode = curate.add_mutually_exclusive_group()
    mode.add_argument("--fixtures")
    mode.add_argument("--live", action="store_true")
    curate.add_argument("--workers", type=int)
    curate.add_argument("--judge", choices=["auto", "exact", "option"])
    curate.add_argument("--out", required=True, help="output directory")
    curate.set_defaults(func=cmd_curate)

    evaluate = sub.add_parser("eval", help="score predictions and summarize tool usage")
    evaluate.add_argument("--records", required=True)
    evaluate.add_argument("--traces", nargs="*", help="trace JSON files or training-record files")
    evaluate.add_argument("--kind", choices=["open", "multiple_choice", "numerical"])
    evaluate.add_argument("--out")
    evaluate.add_argument("--plot", help="write a tool-usage bar chart")
    evaluate.set_defaults(func=cmd_eval)

    audit = sub.add_parser("audit", help="greedy vs exact determinant ratios on random instances")
    audit.add_argument("--instances", type=int, default=50)
    audit.add_argument("--seed", type=int, default=0)
    audit.add_argument("--max-t", type=int, default=10)
    audit.add_argument("--max-k", type=int, default=4)
    audit.add_argument("--epsilon", type=float, default=1e-5)
    audit.add_argument("--plot")
    audit.set_defaults(func=cmd_audit)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VisTraceError as exc:
        logger.error("%s failed: %s", args.command, exc)
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except ValueError as exc:
        logger.error("%s failed: %s", args.command, exc)
        sys.stderr.write(f"error: {exc}\n")
        return InputFormatError.exit_code
