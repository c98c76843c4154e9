import json
import os

import numpy as np
import pytest

from conftest import unit_rows
from vistrace_lib.cli.formats import format_embeddings, parse_embeddings, write_embeddings
from vistrace_lib.cli.main import main, random_instances
from vistrace_lib.curation.records import load_training_records
from vistrace_lib.method.config.configuration import SelectionConfig
from vistrace_lib.method.selection.main import run_selection
from vistrace_lib.utils.common import load_json, write_jsonl
from vistrace_lib.utils.errors import InputFormatError


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in list(os.environ):
        if name.startswith("LAST_"):
            monkeypatch.delenv(name)


@pytest.fixture
def sofa_args(sofa_dir):
    return ["episode", "--manifest", str(sofa_dir / "manifest.txt"), "--embeddings", str(sofa_dir / "embeddings.txt"),
            "--fixtures", str(sofa_dir / "scenario.json"), "--k", "4"]


@pytest.fixture
def curated(fixtures_dir, tmp_path):
    root = fixtures_dir / "curation"
    out = tmp_path / "curated"
    code = main(["curate", "--corpus", str(root / "corpus.jsonl"), "--fixtures", str(root / "scenario.json"),
                 "--out", str(out), "--workers", "2"])
    assert code == 0
    return out


class TestEmbeddingFiles:
    def test_parse(self):
        matrix = parse_embeddings("# two frames\n2 2\n1 0\n0.5 0.5\n")
        assert matrix.shape == (2, 2)

    @pytest.mark.parametrize("text", ["", "2\n1 0\n", "2 3\n1 0\n0 1\n", "2 1\n1 0 0\n", "2 1\n1 nan\n", "a b\n"])
    def test_invalid(self, text):
        with pytest.raises(InputFormatError):
            parse_embeddings(text)

    def test_format_header(self, rng):
        text = format_embeddings(unit_rows(rng, 3, 5))
        assert text.splitlines()[0] == "5 3"
        assert parse_embeddings(text).shape == (3, 5)


class TestSelect:
    def test_matches_library(self, rng, tmp_path, capsys):
        frames, query = unit_rows(rng, 40, 6), rng.normal(size=6)
        write_embeddings(frames, tmp_path / "frames.txt")
        write_embeddings(query[None, :], tmp_path / "query.txt")
        code = main(["select", "--embeddings", str(tmp_path / "frames.txt"), "--query-embedding",
                     str(tmp_path / "query.txt"), "--k", "5", "--out", str(tmp_path / "selection.json")])
        assert code == 0

        stored = load_json(tmp_path / "selection.json")
        expected = run_selection(parse_embeddings(format_embeddings(frames)),
                                 parse_embeddings(format_embeddings(query[None, :]))[0], SelectionConfig(k=5))
        assert stored["indices"] == expected.indices
        assert stored["T"] == 40 and stored["K"] == 5
        assert "presented indices" in capsys.readouterr().out

    def test_plot(self, rng, tmp_path):
        write_embeddings(unit_rows(rng, 12, 4), tmp_path / "frames.txt")
        code = main(["select", "--embeddings", str(tmp_path / "frames.txt"), "--method", "dpp", "--k", "3",
                     "--plot", str(tmp_path / "gains.png")])
        assert code == 0
        assert (tmp_path / "gains.png").exists()

    def test_corrupt_header(self, tmp_path, capsys):
        (tmp_path / "frames.txt").write_text("two 3\n1 0\n", encoding="utf-8")
        assert main(["select", "--embeddings", str(tmp_path / "frames.txt"), "--k", "2"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_combined_needs_query(self, rng, tmp_path):
        write_embeddings(unit_rows(rng, 5, 3), tmp_path / "frames.txt")
        assert main(["select", "--embeddings", str(tmp_path / "frames.txt"), "--k", "2"]) == 2

    def test_zero_row(self, tmp_path):
        (tmp_path / "frames.txt").write_text("2 2\n0 0\n1 0\n", encoding="utf-8")
        assert main(["select", "--embeddings", str(tmp_path / "frames.txt"), "--method", "dpp", "--k", "1"]) == 2


class TestEpisode:
    def test_sofa_counting(self, sofa_args, tmp_path):
        assert main(sofa_args + ["--out", str(tmp_path / "trace.json")]) == 0
        trace = load_json(tmp_path / "trace.json")
        assert trace["terminated_by"] == "answer"
        assert trace["final_answer"] == "2"
        assert [r["tool_call"]["tool"] for r in trace["rounds"] if r["tool_call"]] == \
               ["frame_selection", "object_tracking"]
        assert len(trace["initial_frames"]) == 4
        assert {f["visual_tokens"] for f in trace["initial_frames"]} == {264}
        tracking = trace["rounds"][1]["tool_result"]["payload"]
        assert tracking["objects"] == 2

    def test_replay_is_byte_identical(self, sofa_args, tmp_path):
        assert main(sofa_args + ["--out", str(tmp_path / "a.json"), "--id", "sofa"]) == 0
        assert main(sofa_args + ["--out", str(tmp_path / "b.json"), "--id", "sofa"]) == 0
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_stdout(self, sofa_args, capsys):
        assert main(sofa_args + ["--id", "sofa-1"]) == 0
        assert json.loads(capsys.readouterr().out)["episode_id"] == "sofa-1"

    def test_single_turn(self, sofa_args, tmp_path):
        assert main(sofa_args + ["--single-turn", "--out", str(tmp_path / "trace.json")]) == 0
        trace = load_json(tmp_path / "trace.json")
        assert trace["mode"] == "single_turn"
        assert trace["suppressed_calls"] == 1
        assert trace["final_answer"] == "2"

    def test_budget_too_small(self, sofa_args):
        assert main(sofa_args + ["--budget", "100"]) == 3

    def test_needs_fixtures_or_live(self, sofa_dir):
        assert main(["episode", "--manifest", str(sofa_dir / "manifest.txt"), "--question", "q"]) == 1

    def test_live_needs_endpoints(self, sofa_dir):
        assert main(["episode", "--manifest", str(sofa_dir / "manifest.txt"), "--question", "q", "--live"]) == 1

    def test_fixtures_and_live_exclusive(self, sofa_args):
        with pytest.raises(SystemExit):
            main(sofa_args + ["--live"])


class TestCurate:
    def test_outputs(self, curated):
        stats = load_json(curated / "stats.json")
        assert (stats["text_cot"], stats["visual_trajectory"], stats["discard"]) == (1, 2, 1)
        assert stats["mean_tool_calls"] == 1.0
        dataset, discards = load_training_records(curated / "dataset.jsonl")
        assert [s.id for s in dataset] == ["c1", "c2", "c4"]
        assert discards == [{"id": "c3", "source": "scanqa", "reason": "wrong_answer"}]

    def test_empty_corpus(self, tmp_path):
        (tmp_path / "corpus.jsonl").write_text("", encoding="utf-8")
        assert main(["curate", "--corpus", str(tmp_path / "corpus.jsonl"), "--out", str(tmp_path / "out")]) == 0
        assert load_json(tmp_path / "out" / "stats.json")["total"] == 0
        assert load_training_records(tmp_path / "out" / "dataset.jsonl") == ([], [])


class TestEval:
    def test_numerical(self, tmp_path, capsys):
        write_jsonl(tmp_path / "records.jsonl", [{"id": "a", "prediction": "1.2", "ground_truth": 1.0}])
        code = main(["eval", "--records", str(tmp_path / "records.jsonl"), "--kind", "numerical",
                     "--out", str(tmp_path / "report.json")])
        assert code == 0
        assert load_json(tmp_path / "report.json")["metrics"]["default"]["numerical"]["mra"] == 0.6
        assert json.loads(capsys.readouterr().out)["count"] == 1

    def test_with_curated_traces(self, curated, tmp_path):
        write_jsonl(tmp_path / "records.jsonl", [
            {"id": "c1", "ground_truth": "living room"},
            {"id": "c2", "ground_truth": "2"},
            {"id": "c4", "ground_truth": "exit"},
        ])
        code = main(["eval", "--records", str(tmp_path / "records.jsonl"), "--traces",
                     str(curated / "dataset.jsonl"), "--out", str(tmp_path / "report.json"),
                     "--plot", str(tmp_path / "usage.png")])
        assert code == 0
        document = load_json(tmp_path / "report.json")
        assert document["metrics"]["default"]["open"]["em1"] == 1.0
        assert document["tool_usage"] == {"object_tracking": 50.0, "zoom": 50.0}
        assert (tmp_path / "usage.png").exists()

    def test_id_mismatch(self, curated, tmp_path):
        write_jsonl(tmp_path / "records.jsonl", [{"id": "c1", "ground_truth": "living room"}])
        assert main(["eval", "--records", str(tmp_path / "records.jsonl"), "--traces",
                     str(curated / "dataset.jsonl")]) == 4

    def test_trace_file(self, sofa_args, tmp_path):
        assert main(sofa_args + ["--id", "sofa", "--out", str(tmp_path / "trace.json")]) == 0
        write_jsonl(tmp_path / "records.jsonl", [{"id": "sofa", "ground_truth": "2"}])
        assert main(["eval", "--records", str(tmp_path / "records.jsonl"), "--traces", str(tmp_path / "trace.json"),
                     "--out", str(tmp_path / "report.json")]) == 0
        assert load_json(tmp_path / "report.json")["mean_tool_calls"] == 2.0


class TestAudit:
    def test_summary(self, capsys, tmp_path):
        assert main(["audit", "--instances", "20", "--seed", "3", "--plot", str(tmp_path / "ratios.png")]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["count"] == 20
        assert summary["below_half"] == 0
        assert "ratios" not in summary
        assert (tmp_path / "ratios.png").exists()

    def test_instances_are_seeded(self):
        first = random_instances(5, 9, 8, 3)
        second = random_instances(5, 9, 8, 3)
        assert all(np.array_equal(a.entries, b.entries) and k == l for (a, k), (b, l) in zip(first, second))


class TestRequiredFlagsOnly:
    def test_select(self, rng, tmp_path):
        write_embeddings(unit_rows(rng, 20, 4), tmp_path / "frames.txt")
        write_embeddings(rng.normal(size=(1, 4)), tmp_path / "query.txt")
        assert main(["select", "--embeddings", str(tmp_path / "frames.txt"), "--query-embedding",
                     str(tmp_path / "query.txt"), "--k", "3", "--out", str(tmp_path / "selection.json")]) == 0
        assert load_json(tmp_path / "selection.json")["K"] == 3

    def test_episode(self, sofa_dir, tmp_path):
        assert main(["episode", "--manifest", str(sofa_dir / "manifest.txt"), "--embeddings",
                     str(sofa_dir / "embeddings.txt"), "--fixtures", str(sofa_dir / "scenario.json"),
                     "--out", str(tmp_path / "trace.json")]) == 0
        assert len(load_json(tmp_path / "trace.json")["initial_frames"]) == 8

    def test_curate(self, fixtures_dir, tmp_path):
        root = fixtures_dir / "curation"
        assert main(["curate", "--corpus", str(root / "corpus.jsonl"), "--fixtures", str(root / "scenario.json"),
                     "--out", str(tmp_path / "out")]) == 0
        assert load_json(tmp_path / "out" / "stats.json")["total"] == 4

    def test_curate_with_unreadable_manifest(self, fixtures_dir, tmp_path):
        root = fixtures_dir / "curation"
        records = [{"id": "c1", "question": "What room is shown first?", "answer": "living room",
                    "manifest": str(root / "clip.txt")},
                   {"id": "gone", "question": "q", "answer": "a", "manifest": "missing.txt"},
                   {"id": "c2", "question": "How many sofas are there?", "answer": "2",
                    "manifest": str(root / "clip.txt")}]
        write_jsonl(tmp_path / "corpus.jsonl", records)
        assert main(["curate", "--corpus", str(tmp_path / "corpus.jsonl"), "--fixtures",
                     str(root / "scenario.json"), "--out", str(tmp_path / "out")]) == 0
        dataset, discards = load_training_records(tmp_path / "out" / "dataset.jsonl")
        assert [s.id for s in dataset] == ["c1", "c2"]
        assert discards[0]["id"] == "gone" and discards[0]["reason"].startswith("bad_input")
