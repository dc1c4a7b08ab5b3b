from __future__ import annotations

import json
import wave
from pathlib import Path

import numpy as np
import pytest

from sds.cli import main as cli_main
from sds.corpus import (
    CorpusUtterance,
    InvariantViolation,
    ParseError,
    build_dialogue_contexts,
    drop_contained,
    load_corpus,
)
from sds.evaluation import (
    eval_asr,
    eval_llm,
    eval_tts,
    eval_turn_taking,
    read_wav,
    turn_taking_for_conversation,
)
from sds.metrics.alignment import align, pooled_error_rate
from sds.metrics.textnorm import normalize_text
from sds.metrics.turntaking import SingleChannel, SpeechInterval, analyze_turn_taking
from sds.protocol import WorkerRegistry, default_mock_workers
from sds.protocol.mocks import EchoAsrWorker
from sds.reports import EvalReport, parse_structured, render_report


def write_corpus(path: Path, records) -> Path:
    lines = [json.dumps(r, sort_keys=True) for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def record(conv, channel, start, end, text, audio=None):
    out = {"conversation_id": conv, "channel": channel, "start_s": start, "end_s": end, "text": text}
    if audio:
        out["audio_path"] = audio
    return out


class TestLoadCorpus:
    def test_three_line_toy(self, tmp_path):
        path = write_corpus(
            tmp_path / "c.jsonl",
            [
                record("c1", "A", 2.0, 3.0, "second"),
                record("c1", "B", 0.0, 1.0, "first"),
                record("c1", "A", 4.0, 5.0, "third"),
            ],
        )
        corpus = load_corpus(path)
        assert list(corpus) == ["c1"]
        assert [u.text for u in corpus["c1"]] == ["first", "second", "third"]

    def test_invariant_violation_carries_line(self, tmp_path):
        path = write_corpus(
            tmp_path / "c.jsonl",
            [record("c1", "A", 0.0, 1.0, "ok"), record("c1", "A", 5.0, 4.0, "bad")],
        )
        with pytest.raises(InvariantViolation) as info:
            load_corpus(path)
        assert info.value.line_no == 2

    def test_parse_error_carries_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"conversation_id": "c1"\nnot json\n', encoding="utf-8")
        with pytest.raises(ParseError) as info:
            load_corpus(path)
        assert info.value.line_no == 1

    def test_interleaved_conversations_grouped_sorted(self, tmp_path):
        path = write_corpus(
            tmp_path / "c.jsonl",
            [
                record("c1", "A", 3.0, 4.0, "c1-late"),
                record("c2", "B", 0.0, 1.0, "c2-early"),
                record("c1", "B", 0.0, 1.0, "c1-early"),
                record("c2", "A", 2.0, 3.0, "c2-late"),
            ],
        )
        corpus = load_corpus(path)
        assert [u.text for u in corpus["c1"]] == ["c1-early", "c1-late"]
        assert [u.text for u in corpus["c2"]] == ["c2-early", "c2-late"]

    def test_empty_text_requires_audio(self, tmp_path):
        path = write_corpus(tmp_path / "c.jsonl", [record("c1", "A", 0.0, 1.0, "")])
        with pytest.raises(InvariantViolation):
            load_corpus(path)


def utt(conv, channel, start, end, text="t", order=0):
    return CorpusUtterance(conv, channel, start, end, text, file_order=order)


class TestContainment:
    def test_drops_contained(self):
        utterances = [utt("c", "A", 0, 5, order=1), utt("c", "B", 1, 3, order=2), utt("c", "A", 6, 8, order=3)]
        survivors = drop_contained(utterances)
        assert [(u.start_s, u.end_s) for u in survivors] == [(0, 5), (6, 8)]

    def test_equal_spans_keep_first_in_file_order(self):
        utterances = [utt("c", "A", 0, 5, order=2), utt("c", "B", 0, 5, order=1)]
        survivors = drop_contained(utterances)
        assert len(survivors) == 1
        assert survivors[0].file_order == 1

    def test_order_independent_up_to_tiebreak(self):
        utterances = [utt("c", "A", 0, 5, order=1), utt("c", "B", 1, 3, order=2), utt("c", "A", 2, 9, order=3)]
        forward = {u.file_order for u in drop_contained(utterances)}
        backward = {u.file_order for u in drop_contained(list(reversed(utterances)))}
        assert forward == backward

    def test_chain_containment(self):
        utterances = [
            utt("c", "A", 0, 10, order=1),
            utt("c", "B", 1, 9, order=2),
            utt("c", "A", 2, 3, order=3),
        ]
        survivors = drop_contained(utterances)
        assert [u.file_order for u in survivors] == [1]


class TestContexts:
    def test_single_utterance_context_is_itself(self):
        contexts = build_dialogue_contexts([utt("c", "A", 0, 1, "hello", order=1)])
        assert contexts == [("hello", utt("c", "A", 0, 1, "hello", order=1))]

    def test_tags_relative_to_current_speaker(self):
        conversation = [
            utt("c", "A", 0, 1, "one", order=1),
            utt("c", "B", 2, 3, "two", order=2),
            utt("c", "A", 4, 5, "three", order=3),
        ]
        contexts = build_dialogue_contexts(conversation)
        assert contexts[2][0] == "User: one\nAssistant: two\nthree"
        assert contexts[1][0] == "Assistant: one\ntwo"

    def test_contained_excluded_from_context(self):
        conversation = [
            utt("c", "A", 0, 5, "container", order=1),
            utt("c", "B", 1, 3, "contained", order=2),
            utt("c", "A", 6, 8, "later", order=3),
        ]
        contexts = build_dialogue_contexts(conversation)
        assert len(contexts) == 2
        assert "contained" not in contexts[1][0]


@pytest.fixture
def mock_registry():
    registry = WorkerRegistry()
    for worker in default_mock_workers():
        registry.register_mock(worker)
    yield registry
    registry.close()


class TestEvalAsr:
    def test_pooled_equals_hand_pooling(self, tmp_path, mock_registry, toy_corpus_path):
        corpus = {
            "c1": [
                CorpusUtterance("c1", "A", 0.0, 0.5, "mock transcript", audio_path=_tone_wav(tmp_path, "a", 0.5), file_order=1),
                CorpusUtterance("c1", "B", 1.0, 2.0, "mock transcript 1.00s", audio_path=_tone_wav(tmp_path, "b", 1.0), file_order=2),
                CorpusUtterance("c1", "A", 3.0, 3.25, "something else entirely", audio_path=_tone_wav(tmp_path, "c", 0.25), file_order=3),
            ]
        }
        outcome = eval_asr(corpus, mock_registry)
        row = outcome.report.rows["echo-asr-v1"]
        counts = [
            align(normalize_text("mock transcript"), normalize_text("mock transcript 0.50s")),
            align(normalize_text("mock transcript 1.00s"), normalize_text("mock transcript 1.00s")),
            align(normalize_text("something else entirely"), normalize_text("mock transcript 0.25s")),
        ]
        assert row["wer"] == pytest.approx(pooled_error_rate(counts))
        assert row["skipped"] == 0
        mean_of_ratios = sum(c.errors / c.ref_len for c in counts) / 3
        assert row["wer"] != pytest.approx(mean_of_ratios)

    def test_identical_hypotheses_zero(self, tmp_path, mock_registry):
        corpus = {
            "c1": [
                CorpusUtterance("c1", "A", 0.0, 1.0, "mock transcript 1.00s",
                                audio_path=_tone_wav(tmp_path, "x", 1.0), file_order=1),
            ]
        }
        outcome = eval_asr(corpus, mock_registry)
        row = outcome.report.rows["echo-asr-v1"]
        assert row["wer"] == 0.0
        assert row["cer"] == 0.0

    def test_toy_corpus_runs(self, mock_registry, toy_corpus_path):
        corpus = load_corpus(toy_corpus_path)
        outcome = eval_asr(corpus, mock_registry)
        row = outcome.report.rows["echo-asr-v1"]
        assert row["utterances"] == 10
        assert row["wer"] > 0
        assert set(outcome.report.columns) >= {"wer", "cer"}

    def test_unreadable_audio_counts_as_skip(self, tmp_path, mock_registry):
        bad = tmp_path / "bad.wav"
        bad.write_text("not audio")
        corpus = {
            "c1": [
                CorpusUtterance("c1", "A", 0.0, 1.0, "fine",
                                audio_path=_tone_wav(tmp_path, "ok", 0.5), file_order=1),
                CorpusUtterance("c1", "B", 2.0, 3.0, "broken", audio_path=str(bad), file_order=2),
            ]
        }
        outcome = eval_asr(corpus, mock_registry)
        assert outcome.error_count == 1
        assert outcome.report.rows["echo-asr-v1"]["skipped"] == 1
        assert outcome.report.rows["echo-asr-v1"]["utterances"] == 1


def _tone_wav(tmp_path: Path, name: str, seconds: float) -> str:
    path = tmp_path / f"{name}.wav"
    samples = np.zeros(int(seconds * 16000), dtype=np.int16)
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(16000)
        handle.writeframes(samples.tobytes())
    return str(path)


class TestEvalLlm:
    def test_identical_inputs_self_bleu_100(self, tmp_path, mock_registry):
        corpus = {
            "c1": [CorpusUtterance("c1", "A", 0.0, 1.0, "same words here", file_order=1)],
            "c2": [CorpusUtterance("c2", "A", 0.0, 1.0, "same words here", file_order=2)],
        }
        outcome = eval_llm(corpus, mock_registry)
        row = outcome.report.rows["template-llm-v1"]
        assert row["self_bleu2"] == pytest.approx(100.0, abs=1e-9)
        assert row["perplexity"] == 42.0  # canned judge constant

    def test_report_has_table3_columns(self, mock_registry, toy_corpus_path):
        outcome = eval_llm(load_corpus(toy_corpus_path), mock_registry)
        assert {
            "perplexity",
            "self_bleu2",
            "auto_bleu2",
            "vert",
            "bert_similarity",
            "dialogpt_perplexity",
        } <= set(outcome.report.columns)

    def test_asr_context_source(self, mock_registry, toy_corpus_path):
        corpus = load_corpus(toy_corpus_path)
        ground = eval_llm(corpus, mock_registry, context_source="ground_truth")
        machine = eval_llm(corpus, mock_registry, context_source="asr:echo-asr-v1")
        assert ground.report.rows["template-llm-v1"]["context_source"] == "ground_truth"
        assert machine.report.rows["template-llm-v1"]["context_source"] == "asr:echo-asr-v1"
        # echo transcripts differ from ground truth, so responses differ
        assert (
            machine.report.rows["template-llm-v1"]["self_bleu2"]
            != ground.report.rows["template-llm-v1"]["self_bleu2"]
        )

    def test_no_judges_skips_judge_metrics(self, toy_corpus_path):
        registry = WorkerRegistry()
        for worker in default_mock_workers():
            if worker.task != "judge":
                registry.register_mock(worker)
        outcome = eval_llm(load_corpus(toy_corpus_path), registry)
        row = outcome.report.rows["template-llm-v1"]
        assert row["perplexity"] == "skipped"
        assert isinstance(row["self_bleu2"], float)
        registry.close()


class TestEvalTts:
    def test_mock_composition_deterministic(self, mock_registry, toy_corpus_path):
        corpus = load_corpus(toy_corpus_path)
        first = eval_tts(corpus, mock_registry, asr_judges=("mock-asr",))
        second = eval_tts(corpus, mock_registry, asr_judges=("mock-asr",))
        assert first.report.rows == second.report.rows
        row = first.report.rows["tone-tts-v1"]
        assert isinstance(row["wer[mock-asr]"], float)
        assert row["utmos"] == 4.0

    def test_no_quality_judges_marks_skipped(self, toy_corpus_path):
        registry = WorkerRegistry()
        for worker in default_mock_workers():
            if worker.task != "judge":
                registry.register_mock(worker)
        outcome = eval_tts(load_corpus(toy_corpus_path), registry, asr_judges=("mock-asr",))
        row = outcome.report.rows["tone-tts-v1"]
        assert row["utmos"] == "skipped"
        assert isinstance(row["wer[mock-asr]"], float)
        registry.close()

    def test_llm_input_source(self, mock_registry, toy_corpus_path):
        corpus = load_corpus(toy_corpus_path)
        outcome = eval_tts(corpus, mock_registry, input_source="llm:template-llm-v1")
        row = outcome.report.rows["tone-tts-v1"]
        assert row["input_source"] == "llm:template-llm-v1"
        assert row["inputs"] == 9  # one utterance dropped by containment


class TestEvalTurnTaking:
    def test_matches_analyzer_directly(self, toy_corpus_path):
        corpus = load_corpus(toy_corpus_path)
        outcome = eval_turn_taking(corpus)
        for conversation_id, utterances in corpus.items():
            intervals = [SpeechInterval(u.channel, u.start_s, u.end_s) for u in utterances]
            expected = analyze_turn_taking(intervals, max(u.end_s for u in utterances))
            row = outcome.report.rows[f"conversation:{conversation_id}"]
            for kind in ("ipu", "pause", "gap", "overlap"):
                assert row[f"{kind}_per_min"] == pytest.approx(expected.kind(kind).events_per_minute)
                assert row[f"{kind}_pct"] == pytest.approx(expected.kind(kind).cumulated_duration_pct)

    def test_aggregate_of_identical_equals_single(self):
        utterances = [
            utt("c1", "A", 0, 10, "yeah okay sure", order=1),
            utt("c1", "B", 12, 20, "right you know", order=2),
        ]
        doubled = {
            "c1": utterances,
            "c2": [CorpusUtterance("c2", u.channel, u.start_s, u.end_s, u.text, file_order=u.file_order)
                   for u in utterances],
        }
        outcome = eval_turn_taking(doubled)
        single = outcome.report.rows["conversation:c1"]
        aggregate = outcome.report.rows["aggregate"]
        for column in outcome.report.columns:
            if column == "duration_s":
                continue
            assert aggregate[column] == pytest.approx(single[column])

    def test_single_channel_rejected(self):
        with pytest.raises(SingleChannel):
            turn_taking_for_conversation([utt("c", "A", 0, 1, "hi", order=1)])

    def test_schema_mirrors_event_kinds(self, toy_corpus_path):
        outcome = eval_turn_taking(load_corpus(toy_corpus_path))
        for kind in ("ipu", "pause", "gap", "overlap"):
            assert f"{kind}_per_min" in outcome.report.columns
            assert f"{kind}_pct" in outcome.report.columns


class TestRenderReport:
    def test_same_report_twice_identical(self):
        report = EvalReport(title="t", columns=["x"], rows={"m": {"x": 1.0}})
        assert render_report(report) == render_report(report)

    def test_structured_roundtrip(self):
        report = EvalReport(
            title="t", columns=["x", "y"], rows={"m": {"x": 1.5, "y": "skipped"}},
            provenance={"corpus": "c"},
        )
        payload = render_report(report, format="structured")
        parsed = parse_structured(payload)
        assert render_report(parsed, format="structured") == payload

    def test_empty_report_headers_only(self):
        payload = render_report(EvalReport(title="empty", columns=["a"]), format="text-table")
        text = payload.decode()
        assert "# empty" in text
        assert "a" in text

    def test_rows_sorted_by_id(self):
        report = EvalReport(title="t", columns=["x"], rows={"zz": {"x": 1}, "aa": {"x": 2}})
        text = render_report(report).decode()
        assert text.index("aa") < text.index("zz")


class TestCliEndToEnd:
    def run_cli(self, *args):
        return cli_main(list(args))

    def test_all_deterministic(self, toy_corpus_path, tmp_path):
        out1 = tmp_path / "r1.json"
        out2 = tmp_path / "r2.json"
        for out in (out1, out2):
            code = self.run_cli(
                "all", "--corpus", str(toy_corpus_path), "--mock-workers",
                "--format", "structured", "--out", str(out),
            )
            assert code == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_text_format_deterministic(self, toy_corpus_path, tmp_path):
        outs = []
        for name in ("a.txt", "b.txt"):
            out = tmp_path / name
            assert self.run_cli(
                "turn-taking", "--corpus", str(toy_corpus_path), "--mock-workers",
                "--out", str(out),
            ) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_no_workers_exit_2(self, toy_corpus_path):
        assert self.run_cli("asr", "--corpus", str(toy_corpus_path)) == 2

    def test_partial_failure_exit_codes(self, tmp_path, toy_corpus_path):
        bad = tmp_path / "bad.wav"
        bad.write_text("not a wav")
        corpus_path = write_corpus(
            tmp_path / "c.jsonl",
            [
                record("c1", "A", 0.0, 1.0, "fine", audio=_tone_wav(tmp_path, "ok", 0.5)),
                record("c1", "B", 2.0, 3.0, "broken", audio=str(bad)),
            ],
        )
        args = ("asr", "--corpus", str(corpus_path), "--mock-workers", "--out", str(tmp_path / "o.txt"))
        assert self.run_cli(*args) == 1
        assert self.run_cli(*args, "--allow-partial") == 0

    def test_checked_in_fixture_drops_exactly_one(self, toy_corpus_path):
        corpus = load_corpus(toy_corpus_path)
        total = sum(len(utterances) for utterances in corpus.values())
        survivors = sum(len(drop_contained(utterances)) for utterances in corpus.values())
        assert total == 10
        assert survivors == 9
        dropped = [
            u
            for utterances in corpus.values()
            for u in utterances
            if u not in drop_contained(utterances)
        ]
        assert len(dropped) == 1
        assert dropped[0].conversation_id == "sw-001"
        assert (dropped[0].start_s, dropped[0].end_s) == (5.0, 6.0)
