import pytest

from conftest import make_manifest, tool_call_text
from vistrace_lib.curation.components import (
    DISCARD, TEXT_COT, VISUAL_TRAJECTORY, CorpusStats, Outcome, SourceSample, TrainingSample, source_type,
)
from vistrace_lib.curation.judges import auto_judge, exact_judge, make_judge, option_judge
from vistrace_lib.curation.pipeline import curate_corpus, curate_sample, load_corpus, retained_samples
from vistrace_lib.curation.records import (
    export_training_records, load_training_records, stats_from_file,
)
from vistrace_lib.llms_feat.client import ScriptedModelClient
from vistrace_lib.orchestrator.components import FrameRef, Trace
from vistrace_lib.tooling.backends import ToolScript, build_registry
from vistrace_lib.utils.common import load_json, write_jsonl
from vistrace_lib.utils.errors import ConfigError, EmptyInput, InputFormatError

DEPTH = tool_call_text("depth_estimation", {})


def sample(i, answer="yes", source="llava_video"):
    return SourceSample(f"s{i:02d}", f"question {i}", answer, make_manifest(4), source)


def synthetic_corpus():
    """12 text_cot, 15 visual trajectories (10 with two calls), 3 discards."""
    samples, scripts = [], {}
    for i in range(30):
        s = sample(i)
        samples.append(s)
        if i < 12:
            scripts[s.question] = {"text_cot": ["Easy. Answer: yes"], "tools": ["Answer: yes"]}
        elif i < 22:
            scripts[s.question] = {"text_cot": ["Answer: no"], "tools": [DEPTH, DEPTH, "Answer: yes"]}
        elif i < 27:
            scripts[s.question] = {"text_cot": ["Answer: no"], "tools": [DEPTH, "Answer: yes"]}
        else:
            scripts[s.question] = {"text_cot": ["Answer: no"], "tools": ["Still no. Answer: no"]}
    return samples, ScriptedModelClient(scripts)


class TestJudges:
    def test_exact(self):
        assert exact_judge("The Living Room.", "living room")
        assert not exact_judge(None, "x")
        assert not exact_judge("kitchen", "living room")

    def test_option(self):
        assert option_judge("(B) lamp", "B")
        assert not option_judge("A", "B")

    def test_auto(self):
        assert auto_judge("I pick C.", "c")
        assert auto_judge("two", "Two")
        assert not auto_judge(None, "B")

    def test_make_judge(self):
        assert make_judge("exact") is exact_judge
        with pytest.raises(ConfigError):
            make_judge("lenient")


class TestTypes:
    def test_empty_answer_rejected(self):
        with pytest.raises(InputFormatError):
            SourceSample("x", "q", "  ", make_manifest(1))

    def test_modality(self):
        assert sample(0, source="deepeyes").modality == "image"
        assert sample(0, source="scanqa").modality == "video"
        assert source_type("mystery") == "video"

    def test_training_sample_invariants(self):
        trace = Trace("t", "q", [FrameRef(0, "u", 1)], final_answer="a", terminated_by="answer")
        TrainingSample("t", TEXT_COT, trace)
        with pytest.raises(ValueError):
            TrainingSample("t", VISUAL_TRAJECTORY, trace)
        with pytest.raises(ValueError):
            TrainingSample("t", DISCARD, trace)
        with pytest.raises(ValueError):
            TrainingSample("t", TEXT_COT, trace, verdict="incorrect")

    def test_merge_is_associative(self):
        a = CorpusStats.of(Outcome("a", DISCARD, "scanqa", reason="wrong_answer"))
        b = CorpusStats.of(Outcome("b", DISCARD, "llava_video", reason="ToolFailure: down"))
        c = CorpusStats.of(Outcome("c", DISCARD, "scanqa", reason="wrong_answer"))
        assert a.merge(b).merge(c) == a.merge(b.merge(c))
        assert a.merge(b) == b.merge(a)
        assert a.merge(b).merge(c).discard_reasons == {"wrong_answer": 2, "ToolFailure": 1}


class TestCurateSample:
    def test_text_cot_kept(self, registry):
        s = sample(1)
        client = ScriptedModelClient({s.question: {"text_cot": ["Answer: yes"]}})
        outcome = curate_sample(client, registry, s)
        assert outcome.status == TEXT_COT
        assert outcome.sample.trace.n_tool_calls == 0
        assert outcome.sample.trace.episode_id == s.id

    def test_visual_trajectory_kept(self, registry):
        s = sample(2)
        client = ScriptedModelClient({s.question: {"text_cot": ["Answer: no"], "tools": [DEPTH, "Answer: yes"]}})
        outcome = curate_sample(client, registry, s)
        assert outcome.status == VISUAL_TRAJECTORY
        assert [c.tool for c in outcome.sample.trace.tool_calls] == ["depth_estimation"]

    def test_wrong_after_tools_discarded(self, registry):
        s = sample(3)
        client = ScriptedModelClient({s.question: {"text_cot": ["Answer: no"], "tools": [DEPTH, "Answer: no"]}})
        outcome = curate_sample(client, registry, s)
        assert outcome.status == DISCARD
        assert outcome.reason == "wrong_answer"
        assert not outcome.retained

    def test_correct_without_tools_discarded(self, registry):
        s = sample(4)
        client = ScriptedModelClient({s.question: {"text_cot": ["Answer: no"], "tools": ["Answer: yes"]}})
        assert curate_sample(client, registry, s).reason == "no_tool_call"

    def test_errors_discard(self, registry):
        outcome = curate_sample(ScriptedModelClient({}), registry, sample(5))
        assert outcome.status == DISCARD
        assert outcome.reason.startswith("UnknownLabel")

    def test_image_samples_get_image_tools(self, registry):
        s = sample(6, source="cogcom")
        track = tool_call_text("object_tracking", {"object": "cup"})
        client = ScriptedModelClient({s.question: {"text_cot": ["Answer: no"], "tools": [track, "Answer: yes"]}})
        outcome = curate_sample(client, registry, s)
        assert outcome.status == DISCARD
        assert outcome.reason == "wrong_answer"


    def test_only_failed_tool_calls_discarded(self, registry):
        s = sample(7)
        zoom = tool_call_text("zoom", {"bbox": [0, 0, 999, 999]})
        client = ScriptedModelClient({s.question: {"text_cot": ["Answer: no"], "tools": [zoom, "Answer: yes"]}})
        outcome = curate_sample(client, registry, s)
        assert outcome.status == DISCARD
        assert outcome.reason == "tool_errors_only"

    def test_one_successful_call_is_enough(self, registry):
        s = sample(8)
        zoom = tool_call_text("zoom", {"bbox": [0, 0, 999, 999]})
        client = ScriptedModelClient({s.question: {"text_cot": ["Answer: no"], "tools": [zoom, DEPTH, "Answer: yes"]}})
        trace = curate_sample(client, registry, s).sample.trace
        assert (trace.n_tool_calls, trace.n_successful_tool_calls) == (2, 1)


class TestCurateCorpus:
    def test_counts(self, registry):
        samples, client = synthetic_corpus()
        outcomes, stats = curate_corpus(samples, client, registry, workers=4)
        data = stats.to_dict()
        assert (data[TEXT_COT], data[VISUAL_TRAJECTORY], data[DISCARD]) == (12, 15, 3)
        assert data["mean_tool_calls"] == pytest.approx(25 / 15, abs=1e-5)
        assert data["discard_rate"] == pytest.approx(0.1)
        assert data["discard_reasons"] == {"wrong_answer": 3}
        assert [o.sample_id for o in outcomes] == [s.id for s in samples]
        assert len(retained_samples(outcomes)) == 27

    def test_worker_count_does_not_matter(self, registry):
        samples, client = synthetic_corpus()
        one, stats_one = curate_corpus(samples, client, registry, workers=1)
        many, stats_many = curate_corpus(samples, client, registry, workers=8)
        assert stats_one == stats_many
        assert [s.trace.to_json() for s in retained_samples(one)] == \
               [s.trace.to_json() for s in retained_samples(many)]

    def test_empty_corpus(self, registry):
        with pytest.raises(EmptyInput):
            curate_corpus([], ScriptedModelClient({}), registry)

    def test_no_visual_trajectories(self, registry):
        s = sample(0)
        client = ScriptedModelClient({s.question: {"text_cot": ["Answer: yes"]}})
        data = curate_corpus([s], client, registry)[1].to_dict()
        assert data["mean_tool_calls"] == 0.0
        assert data["mean_tool_calls_defined"] is False


class TestRecords:
    def test_export_and_reload(self, registry, tmp_path):
        samples, client = synthetic_corpus()
        outcomes, stats = curate_corpus(samples, client, registry)
        discards = [o.discard_record() for o in outcomes if o.status == DISCARD]
        dataset = retained_samples(outcomes)
        export_training_records(dataset, tmp_path / "dataset.jsonl", discards)

        loaded, loaded_discards = load_training_records(tmp_path / "dataset.jsonl")
        assert [s.to_dict() for s in loaded] == [s.to_dict() for s in dataset]
        assert loaded_discards == discards
        assert stats_from_file(tmp_path / "dataset.jsonl").to_dict() == stats.to_dict()

    def test_empty_export_keeps_header(self, tmp_path):
        export_training_records([], tmp_path / "empty.jsonl")
        assert load_training_records(tmp_path / "empty.jsonl") == ([], [])
        assert stats_from_file(tmp_path / "empty.jsonl").total == 0

    def test_count_mismatch(self, tmp_path):
        write_jsonl(tmp_path / "bad.jsonl", [{"format": "vistrace-training", "version": 1, "count": 2}])
        with pytest.raises(InputFormatError):
            load_training_records(tmp_path / "bad.jsonl")

    def test_missing_header(self, tmp_path):
        write_jsonl(tmp_path / "bad.jsonl", [{"id": "x"}])
        with pytest.raises(InputFormatError):
            load_training_records(tmp_path / "bad.jsonl")


class TestBundledCorpus:
    def test_outcomes(self, fixtures_dir):
        root = fixtures_dir / "curation"
        samples, rejected = load_corpus(root / "corpus.jsonl")
        assert rejected == []
        assert [(len(s.media), s.media.frames[0].width) for s in samples] == [(4, 298)] * 3 + [(1, 224)]

        client = ScriptedModelClient(load_json(root / "scenario.json")["model"])
        registry = build_registry(ToolScript.load(str(root / "scenario.json")))
        outcomes, stats = curate_corpus(samples, client, registry, workers=2)

        assert [o.status for o in outcomes] == [TEXT_COT, VISUAL_TRAJECTORY, DISCARD, VISUAL_TRAJECTORY]
        data = stats.to_dict()
        assert data["mean_tool_calls"] == 1.0
        assert data["per_source"]["deepeyes"][VISUAL_TRAJECTORY] == 1
        assert data["discard_reasons"] == {"wrong_answer": 1}

    def test_missing_field(self, tmp_path):
        write_jsonl(tmp_path / "corpus.jsonl", [{"id": "x", "question": "q", "manifest": "m.txt"}])
        with pytest.raises(InputFormatError):
            load_corpus(tmp_path / "corpus.jsonl")

    def test_unreadable_manifest_is_a_discard(self, fixtures_dir, tmp_path):
        clip = str(fixtures_dir / "curation" / "clip.txt")
        (tmp_path / "broken.txt").write_text("not a manifest\n", encoding="utf-8")
        write_jsonl(tmp_path / "corpus.jsonl", [
            {"id": "a", "question": "q", "answer": "yes", "manifest": clip},
            {"id": "b", "question": "q", "answer": "yes", "manifest": "missing.txt", "source": "scanqa"},
            {"id": "c", "question": "q", "answer": "yes", "manifest": "broken.txt"},
        ])
        samples, rejected = load_corpus(tmp_path / "corpus.jsonl")
        assert [s.id for s in samples] == ["a"]
        assert [(o.sample_id, o.status, o.source) for o in rejected] == [("b", DISCARD, "scanqa"),
                                                                         ("c", DISCARD, "llava_video")]
        assert CorpusStats.from_outcomes(rejected).discard_reasons == {"bad_input": 2}
