import numpy as np
import pytest

from conftest import make_manifest, tool_call_text
from vistrace_lib.ingestion.components import VideoManifest
from vistrace_lib.llms_feat.client import FixtureQueryEncoder, ScriptedModelClient
from vistrace_lib.method.config.configuration import EpisodeConfig
from vistrace_lib.orchestrator.components import (
    FrameRef, Trace, TraceRound, read_trace, write_trace,
)
from vistrace_lib.orchestrator.episode import (
    ANSWER_NOW, assemble_messages, compare_modes, evict_to_budget, run_episode,
)
from vistrace_lib.orchestrator.parser import extract_final_answer, parse_tool_call
from vistrace_lib.orchestrator.stats import trace_stats
from vistrace_lib.tooling.components import ToolCall, ToolContext, ToolResult
from vistrace_lib.tooling.registry import ToolRegistry
from vistrace_lib.tooling.render import FrameStore
from vistrace_lib.utils.errors import BudgetTooSmall, EmptyInput, EmptyManifest, MalformedCall

QUESTION = "How many cups are on the table?"
TRACK = tool_call_text("object_tracking", {"object": "cup"}, "I will track the cups.")
DEPTH = tool_call_text("depth_estimation", {}, "How far away are they?")
ANSWER = "Three cups appear. Answer: 3"


class RecordingClient(ScriptedModelClient):
    def __init__(self, responses):
        super().__init__({"*": list(responses)})
        self.requests = []

    def chat(self, request):
        self.requests.append(request)
        return super().chat(request)


def fresh_context(video):
    embeddings = np.eye(3)[[i % 3 for i in range(len(video))]]
    return ToolContext.for_video(video, FrameStore(), embeddings=embeddings,
                                 query_encoder=FixtureQueryEncoder({"cup": [1.0, 0.0, 0.0]}))


def text_round(n_tokens):
    return TraceRound("x" * (4 * n_tokens))


def call_round(tool):
    result = ToolResult(tool, "cropped_image", {"digest": "d"}, 6)
    return TraceRound(f"calling {tool}", ToolCall(tool, {}), result)


def trace_with(calls, terminated_by="answer"):
    rounds = [call_round(tool) for tool in calls] + [TraceRound("Answer: 1")]
    return Trace("t", "q", [FrameRef(0, "u", 10)], rounds, "1", terminated_by)


class TestParser:
    def test_no_block_is_answer(self, registry):
        assert parse_tool_call("Answer: 4", registry) is None

    def test_valid_block(self, registry):
        call = parse_tool_call(TRACK, registry, round_no=3)
        assert call == ToolCall("object_tracking", {"object": "cup"}, 3)

    def test_first_block_wins(self, registry):
        call = parse_tool_call(TRACK + "\n" + DEPTH, registry)
        assert call.tool == "object_tracking"

    @pytest.mark.parametrize("text", [
        "```tool\n{not json}\n```",
        "```tool\n[\"zoom\"]\n```",
        "```tool\n{\"arguments\": {}}\n```",
        "```tool\n{\"tool\": \"teleport\", \"arguments\": {}}\n```",
        "```tool\n{\"tool\": \"zoom\", \"arguments\": {\"bbox\": [1, 2]}}\n```",
    ])
    def test_malformed(self, registry, text):
        with pytest.raises(MalformedCall):
            parse_tool_call(text, registry)

    def test_without_registry_uses_known_tools(self):
        assert parse_tool_call(TRACK).tool == "object_tracking"
        with pytest.raises(MalformedCall):
            parse_tool_call("```tool\n{\"tool\": \"teleport\"}\n```")

    def test_empty_registry_rejects_every_call(self):
        with pytest.raises(MalformedCall):
            parse_tool_call(TRACK, ToolRegistry.empty())

    def test_final_answer(self):
        assert extract_final_answer("Two rooms. Answer: 2") == "2"
        assert extract_final_answer("answer: a\nANSWER:  b ") == "b"
        assert extract_final_answer("  just text ") == "just text"


class TestRecords:
    def test_round_needs_result_with_call(self):
        with pytest.raises(ValueError):
            TraceRound("x", tool_call=ToolCall("zoom", {}))
        with pytest.raises(ValueError):
            TraceRound("x", text_tokens_in=-1)

    def test_context_cost_counts_result(self):
        r = call_round("zoom")
        assert r.context_cost() > text_round(3).context_cost()
        assert r.context_cost() >= 6

    def test_write_and_read(self, tmp_path):
        trace = trace_with(["zoom", "object_tracking"])
        write_trace(trace, tmp_path / "trace.json")
        assert read_trace(tmp_path / "trace.json").to_json() == trace.to_json()


class TestEviction:
    @pytest.fixture
    def trace(self):
        rounds = [text_round(10) for _ in range(5)]
        return Trace("e", "q", [FrameRef(0, "u", 100)], rounds)

    def test_identity_under_budget(self, trace):
        view = evict_to_budget(trace, 1000)
        assert view.omitted == 0
        assert view.stub is None
        assert view.rounds == trace.rounds
        assert view.total_tokens == 1 + 100 + 50

    def test_drops_oldest_rounds(self, trace):
        view = evict_to_budget(trace, 140)
        assert view.omitted == 2
        assert view.rounds == trace.rounds[2:]
        assert view.stub == "[earlier rounds omitted: 2]"
        assert view.total_tokens == 101 + 7 + 30
        assert view.total_tokens <= 140

    def test_latest_round_never_dropped(self, trace):
        view = evict_to_budget(trace, 118)
        assert view.rounds == trace.rounds[-1:]
        assert view.stub == "[earlier rounds omitted: 4]"
        assert view.total_tokens == 118

    @pytest.mark.parametrize("budget", [111, 117])
    def test_stub_left_out_when_only_latest_round_fits(self, trace, budget):
        view = evict_to_budget(trace, budget)
        assert view.rounds == trace.rounds[-1:]
        assert view.omitted == 4
        assert view.stub is None
        assert view.total_tokens == 111

    def test_budget_too_small(self, trace):
        with pytest.raises(BudgetTooSmall):
            evict_to_budget(trace, 110)

    def test_messages_carry_stub_and_images(self):
        result = ToolResult("temporal_grounding", "segment", {"frames": [2, 3]}, 40)
        rounds = [text_round(10), TraceRound("trim", ToolCall("temporal_grounding", {"query": "pour"}), result)]
        trace = Trace("e", "q", [FrameRef(0, "synthetic:", 20)], rounds)
        view = evict_to_budget(trace, 21 + 7 + rounds[1].context_cost())
        messages = assemble_messages(view, "system", answer_now=True)
        roles = [m["role"] for m in messages]
        assert roles == ["system", "user", "user", "assistant", "tool", "user"]
        assert messages[2]["content"][0]["text"] == "[earlier rounds omitted: 1]"
        assert [item["ref"] for item in messages[4]["content"][1:]] == ["frame:2", "frame:3"]
        assert messages[-1]["content"][0]["text"] == ANSWER_NOW
        assert view.visual_tokens == 60


class TestRunEpisode:
    def test_immediate_answer(self, registry, small_video):
        trace = run_episode(ScriptedModelClient.single([ANSWER]), registry, QUESTION, small_video,
                            EpisodeConfig(), fresh_context(small_video))
        assert len(trace.rounds) == 1
        assert trace.terminated_by == "answer"
        assert trace.final_answer == "3"
        assert trace.n_tool_calls == 0
        assert len(trace.episode_id) == 12

    def test_tool_then_answer(self, registry, small_video):
        trace = run_episode(ScriptedModelClient.single([TRACK, ANSWER]), registry, QUESTION, small_video,
                            EpisodeConfig(), fresh_context(small_video), episode_id="cups")
        assert trace.episode_id == "cups"
        assert [c.tool for c in trace.tool_calls] == ["object_tracking"]
        assert trace.rounds[0].tool_call.round == 1
        assert trace.rounds[0].tool_result.kind == "annotated_frames"
        assert trace.rounds[1].visual_tokens_in == 8 * 20 + trace.rounds[0].tool_result.token_cost
        assert trace.tools == registry.names

    def test_replay_is_byte_identical(self, registry, small_video):
        client = ScriptedModelClient.single([TRACK, DEPTH, ANSWER])
        first = run_episode(client, registry, QUESTION, small_video, EpisodeConfig(), fresh_context(small_video))
        second = run_episode(client, registry, QUESTION, small_video, EpisodeConfig(), fresh_context(small_video))
        assert first.to_json() == second.to_json()

    def test_default_context(self, registry, small_video):
        trace = run_episode(ScriptedModelClient.single([DEPTH, ANSWER]), registry, QUESTION, small_video,
                            EpisodeConfig())
        assert trace.rounds[0].tool_result.kind == "depth_map"

    def test_tool_errors_become_observations(self, registry, small_video):
        bad = tool_call_text("image_grounding", {"label": "dog"})
        trace = run_episode(ScriptedModelClient.single([bad, ANSWER]), registry, QUESTION, small_video,
                            EpisodeConfig(), fresh_context(small_video))
        assert trace.rounds[0].tool_result.is_error
        assert trace.terminated_by == "answer"

    def test_parse_failure(self, registry, small_video):
        trace = run_episode(ScriptedModelClient.single(["```tool\n{oops\n```"]), registry, QUESTION, small_video,
                            EpisodeConfig(), fresh_context(small_video))
        assert trace.terminated_by == "parse_failure"
        assert trace.final_answer is None
        assert len(trace.rounds) == 1

    def test_text_mode_has_no_tools(self, small_video):
        client = RecordingClient([TRACK])
        trace = run_episode(client, ToolRegistry.empty(), QUESTION, small_video, EpisodeConfig())
        assert trace.terminated_by == "parse_failure"
        assert client.requests[0].mode == "text_cot"

    def test_max_rounds(self, registry, small_video):
        trace = run_episode(ScriptedModelClient.single([DEPTH]), registry, QUESTION, small_video,
                            EpisodeConfig(max_rounds=3), fresh_context(small_video))
        assert trace.terminated_by == "max_rounds"
        assert len(trace.rounds) == 3
        assert trace.final_answer is None

    def test_single_turn_suppresses_second_call(self, registry, small_video):
        client = RecordingClient([TRACK, DEPTH, ANSWER])
        trace = run_episode(client, registry, QUESTION, small_video, EpisodeConfig(single_turn=True),
                            fresh_context(small_video))
        assert trace.mode == "single_turn"
        assert trace.n_tool_calls == 1
        assert trace.suppressed_calls == 1
        assert len(trace.rounds) == 2
        assert trace.final_answer == "3"
        assert client.requests[2].messages[-1]["content"][0]["text"] == ANSWER_NOW
        assert [r.turn for r in client.requests] == [0, 1, 2]

    def test_single_turn_counts_suppressed_queries(self, registry, small_video):
        trace = run_episode(ScriptedModelClient.single([TRACK, DEPTH]), registry, QUESTION, small_video,
                            EpisodeConfig(max_rounds=3, single_turn=True), fresh_context(small_video))
        assert trace.terminated_by == "max_rounds"
        assert trace.suppressed_calls == 2

    def test_initial_frames_over_budget(self, registry, small_video):
        with pytest.raises(BudgetTooSmall):
            run_episode(ScriptedModelClient.single([ANSWER]), registry, QUESTION, small_video,
                        EpisodeConfig(context_budget=100), fresh_context(small_video))

    def test_budget_exhausted(self, registry, small_video):
        budget = 8 * 20 + 8 + 10
        trace = run_episode(ScriptedModelClient.single([TRACK, ANSWER]), registry, QUESTION, small_video,
                            EpisodeConfig(context_budget=budget), fresh_context(small_video))
        assert trace.terminated_by == "budget_exhausted"
        assert len(trace.rounds) == 1

    def test_no_frames(self, registry):
        empty = VideoManifest(frames=(), native_fps=4.0, duration=0.0)
        with pytest.raises(EmptyManifest):
            run_episode(ScriptedModelClient.single([ANSWER]), registry, QUESTION, empty, EpisodeConfig())

    def test_compare_modes(self, registry):
        video = make_manifest(8)
        report = compare_modes(ScriptedModelClient.single([TRACK, DEPTH, ANSWER]), registry, QUESTION, video,
                               EpisodeConfig(), context_factory=lambda: fresh_context(video))
        assert report["tool_calls"] == {"multi_turn": 2, "single_turn": 1}
        assert report["tools"]["multi_turn"] == ["object_tracking", "depth_estimation"]
        assert report["suppressed_calls"] == 1
        assert report["same_answer"]


class TestTraceStats:
    def test_mean_and_distribution(self):
        traces = [trace_with(["zoom"]), trace_with(["zoom", "object_tracking"]),
                  trace_with(["zoom", "zoom"]), trace_with(["object_tracking", "zoom"])]
        stats = trace_stats(traces)
        assert stats["mean_tool_calls"] == 1.75
        assert stats["tool_call_distribution"] == {"1": 1, "2": 3}
        assert list(stats["tool_usage"]) == ["object_tracking", "zoom"]
        assert stats["tool_usage"]["zoom"] == pytest.approx(100 * 5 / 7, abs=1e-4)
        assert sum(stats["tool_usage"].values()) == pytest.approx(100.0, abs=1e-3)

    def test_no_tool_calls(self):
        stats = trace_stats([trace_with([]), trace_with([], "max_rounds")])
        assert stats["mean_tool_calls"] == 0
        assert stats["tool_call_distribution"] == {}
        assert stats["tool_usage"] == {}
        assert stats["terminated_by"] == {"answer": 1, "max_rounds": 1}

    def test_token_totals(self, registry, small_video):
        trace = run_episode(ScriptedModelClient.single([TRACK, ANSWER]), registry, QUESTION, small_video,
                            EpisodeConfig(), fresh_context(small_video))
        stats = trace_stats([trace])
        assert stats["tokens"]["input_visual"] == sum(r.visual_tokens_in for r in trace.rounds)
        assert stats["mean_tokens"]["output_text"] == stats["tokens"]["output_text"]

    def test_empty(self):
        with pytest.raises(EmptyInput):
            trace_stats([])
