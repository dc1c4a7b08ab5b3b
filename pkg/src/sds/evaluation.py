"""Batch evaluation drivers over a corpus and attached workers.

Reproduces the per-module evaluation procedure on timestamped conversation
corpora: ASR scoring against reference transcripts with corpus-level pooling,
LLM response collection over dialogue contexts with diversity and judge
metrics, TTS intelligibility/quality via judge workers, and two-channel
turn-taking statistics.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

from sds.corpus import CorpusUtterance, build_dialogue_contexts
from sds.metrics.alignment import AlignmentCounts, align, pooled_error_rate
from sds.metrics.diversity import auto_bleu2, self_bleu2, vert
from sds.metrics.textnorm import characters_of, normalize_text
from sds.metrics.turntaking import (
    BackchannelLexicon,
    SingleChannel,
    SpeechInterval,
    TurnTakingReport,
    aggregate_turn_taking,
    analyze_turn_taking,
    backchannel_rate,
    speaking_rate,
)
from sds.protocol.registry import WorkerRegistry
from sds.reports import SKIPPED, EvalReport

LLM_JUDGE_METRICS = ("perplexity", "bert_similarity", "dialogpt_perplexity")
TTS_JUDGE_METRICS = ("utmos", "dns_overall", "dns_p808", "plcmos", "ssqa")


class MissingAudio(FileNotFoundError):
    pass


@dataclass
class EvalOutcome:
    report: EvalReport
    error_count: int = 0


@dataclass
class _ModelRun:
    """Per-model accumulation with per-utterance error isolation."""

    skipped: list[str] = field(default_factory=list)

    def skip(self, utterance: CorpusUtterance, exc: Exception) -> None:
        self.skipped.append(f"{utterance.conversation_id}@{utterance.start_s}: {exc}")


def read_wav(path: str | Path) -> tuple[bytes, int]:
    path = Path(path)
    if not path.exists():
        raise MissingAudio(str(path))
    with wave.open(str(path), "rb") as wav:
        if wav.getnchannels() != 1 or wav.getsampwidth() != 2:
            raise ValueError(f"{path}: expected mono 16-bit PCM")
        return wav.readframes(wav.getnframes()), wav.getframerate()


def _models_for_task(registry: WorkerRegistry, task: str, only: list[str] | None = None):
    pairs = []
    for descriptor in sorted(registry.workers_for_task(task), key=lambda d: d.worker_id):
        for model in descriptor.models:
            if only and model not in only:
                continue
            pairs.append((descriptor.worker_id, model))
    return pairs


def _utterances_in_order(corpus: dict[str, list[CorpusUtterance]]) -> list[CorpusUtterance]:
    out = []
    for conversation_id in sorted(corpus):
        out.extend(corpus[conversation_id])
    return out


def _transcribe_with(
    registry: WorkerRegistry,
    worker_id: str,
    model: str,
    utterance: CorpusUtterance,
    deadline_ms: int,
) -> str:
    if utterance.audio_path is None:
        raise MissingAudio(f"utterance at line {utterance.file_order} has no audio_path")
    pcm, rate = read_wav(utterance.audio_path)
    registry.load_model(worker_id, model, deadline_ms=deadline_ms)
    result = registry.dispatch_to(
        worker_id, "infer", {}, audio=pcm, audio_rate=rate, deadline_ms=deadline_ms
    )
    return result.body.get("text", "")


def _judge_means(
    registry: WorkerRegistry,
    wanted: tuple[str, ...],
    samples: list[dict],
    deadline_ms: int,
) -> dict[str, float | str]:
    """Average each judge metric over samples; 'skipped' when no judge."""
    out: dict[str, float | str] = {}
    for metric in wanted:
        judges = registry.judges_for_metric(metric)
        if not judges or not samples:
            out[metric] = SKIPPED
            continue
        totals = []
        for judge in judges:
            for sample in samples:
                body = {"metric": metric, **{k: v for k, v in sample.items() if k != "audio"}}
                result = registry.dispatch_to(
                    judge.worker_id, "infer", body, audio=sample.get("audio"), deadline_ms=deadline_ms
                )
                totals.append(float(result.body["value"]))
        out[metric] = sum(totals) / len(totals)
    return out


def eval_asr(
    corpus: dict[str, list[CorpusUtterance]],
    registry: WorkerRegistry,
    models: list[str] | None = None,
    asr_judges: tuple[str, ...] = (),
    deadline_ms: int = 10_000,
) -> EvalOutcome:
    """Pooled WER/CER per ASR model, ground-truth transcripts as reference.

    When an utterance has no transcript and ASR judges are supplied, the
    first judge's transcript stands in as the reference.
    """
    report = EvalReport(title="asr", columns=["worker", "wer", "cer", "utterances", "skipped"])
    utterances = _utterances_in_order(corpus)
    errors = 0
    for worker_id, model in _models_for_task(registry, "asr", models):
        run = _ModelRun()
        word_counts: list[AlignmentCounts] = []
        char_counts: list[AlignmentCounts] = []
        scored = 0
        for utterance in utterances:
            try:
                hyp = _transcribe_with(registry, worker_id, model, utterance, deadline_ms)
                reference = utterance.text
                if not reference and asr_judges:
                    judge_id = asr_judges[0]
                    descriptor = registry.descriptor(judge_id)
                    reference = _transcribe_with(
                        registry, judge_id, descriptor.models[0], utterance, deadline_ms
                    )
                ref_tokens = normalize_text(reference)
                hyp_tokens = normalize_text(hyp)
                word_counts.append(align(ref_tokens, hyp_tokens))
                char_counts.append(align(characters_of(ref_tokens), characters_of(hyp_tokens)))
                scored += 1
            except MissingAudio:
                raise
            except Exception as exc:  # noqa: BLE001 - per-utterance isolation
                run.skip(utterance, exc)
        errors += len(run.skipped)
        row = f"{model}"
        report.set(row, "worker", worker_id)
        report.set(row, "wer", pooled_error_rate(word_counts) if word_counts else None)
        report.set(row, "cer", pooled_error_rate(char_counts) if char_counts else None)
        report.set(row, "utterances", scored)
        report.set(row, "skipped", len(run.skipped))
    return EvalOutcome(report, errors)


def _collect_contexts(
    corpus: dict[str, list[CorpusUtterance]],
    registry: WorkerRegistry,
    context_source: str,
    deadline_ms: int,
) -> list[tuple[str, CorpusUtterance]]:
    text_of = None
    if context_source.startswith("asr:"):
        model = context_source.split(":", 1)[1]
        pairs = _models_for_task(registry, "asr")
        matches = [(w, m) for w, m in pairs if m == model]
        if not matches:
            raise LookupError(f"no registered ASR worker serves {model!r}")
        worker_id, model_id = matches[0]
        cache: dict[int, str] = {}

        def text_of(u: CorpusUtterance) -> str:  # noqa: F811
            if u.file_order not in cache:
                cache[u.file_order] = _transcribe_with(registry, worker_id, model_id, u, deadline_ms)
            return cache[u.file_order]

    elif context_source != "ground_truth":
        raise ValueError(f"context_source must be ground_truth or asr:<model>, got {context_source!r}")

    contexts = []
    for conversation_id in sorted(corpus):
        contexts.extend(build_dialogue_contexts(corpus[conversation_id], text_of=text_of))
    return contexts


def _llm_responses(
    registry: WorkerRegistry,
    worker_id: str,
    model: str,
    contexts: list[tuple[str, CorpusUtterance]],
    deadline_ms: int,
    run: _ModelRun,
) -> list[str]:
    registry.load_model(worker_id, model, deadline_ms=deadline_ms)
    responses = []
    for context_text, current in contexts:
        try:
            result = registry.dispatch_to(
                worker_id, "infer", {"text": context_text}, deadline_ms=deadline_ms
            )
            responses.append(result.body.get("text", ""))
        except Exception as exc:  # noqa: BLE001
            run.skip(current, exc)
    return responses


def eval_llm(
    corpus: dict[str, list[CorpusUtterance]],
    registry: WorkerRegistry,
    models: list[str] | None = None,
    context_source: str = "ground_truth",
    deadline_ms: int = 10_000,
) -> EvalOutcome:
    """Response diversity plus judge-delegated text metrics per LLM."""
    report = EvalReport(
        title="llm",
        columns=[
            "worker",
            "context_source",
            "perplexity",
            "self_bleu2",
            "auto_bleu2",
            "vert",
            "bert_similarity",
            "dialogpt_perplexity",
            "responses",
            "skipped",
        ],
    )
    contexts = _collect_contexts(corpus, registry, context_source, deadline_ms)
    errors = 0
    for worker_id, model in _models_for_task(registry, "llm", models):
        run = _ModelRun()
        responses = _llm_responses(registry, worker_id, model, contexts, deadline_ms, run)
        errors += len(run.skipped)
        tokenized = [t for t in (normalize_text(r) for r in responses) if t]
        row = model
        report.set(row, "worker", worker_id)
        report.set(row, "context_source", context_source)
        if len(tokenized) >= 2:
            s = self_bleu2(tokenized)
            a = auto_bleu2(tokenized)
            report.set(row, "self_bleu2", s)
            report.set(row, "auto_bleu2", a)
            report.set(row, "vert", vert(s, a))
        else:
            for col in ("self_bleu2", "auto_bleu2", "vert"):
                report.set(row, col, None)
        samples = [
            {"context": context_text, "response": response}
            for (context_text, _), response in zip(contexts, responses)
        ]
        for metric, value in _judge_means(registry, LLM_JUDGE_METRICS, samples, deadline_ms).items():
            report.set(row, metric, value)
        report.set(row, "responses", len(responses))
        report.set(row, "skipped", len(run.skipped))
    return EvalOutcome(report, errors)


def eval_tts(
    corpus: dict[str, list[CorpusUtterance]],
    registry: WorkerRegistry,
    models: list[str] | None = None,
    input_source: str = "ground_truth",
    asr_judges: tuple[str, ...] = (),
    deadline_ms: int = 10_000,
) -> EvalOutcome:
    """Intelligibility (judge-ASR WER/CER of synthesized audio against the
    input text) and judge-delegated quality metrics per TTS model."""
    intel_columns = []
    for judge in asr_judges:
        intel_columns.extend([f"wer[{judge}]", f"cer[{judge}]"])
    report = EvalReport(
        title="tts",
        columns=["worker", "input_source", *intel_columns, *TTS_JUDGE_METRICS, "inputs", "skipped"],
    )

    if input_source == "ground_truth":
        inputs = [u.text for u in _utterances_in_order(corpus) if u.text.strip()]
    elif input_source.startswith("llm:"):
        model = input_source.split(":", 1)[1]
        pairs = [(w, m) for w, m in _models_for_task(registry, "llm") if m == model]
        if not pairs:
            raise LookupError(f"no registered LLM worker serves {model!r}")
        contexts = _collect_contexts(corpus, registry, "ground_truth", deadline_ms)
        run = _ModelRun()
        inputs = [r for r in _llm_responses(registry, *pairs[0], contexts, deadline_ms, run) if r.strip()]
    else:
        raise ValueError(f"input_source must be ground_truth or llm:<model>, got {input_source!r}")

    errors = 0
    for worker_id, model in _models_for_task(registry, "tts", models):
        run = _ModelRun()
        registry.load_model(worker_id, model, deadline_ms=deadline_ms)
        synthesized: list[tuple[str, bytes, int]] = []
        for text in inputs:
            try:
                result = registry.dispatch_to(
                    worker_id, "infer", {"text": text}, deadline_ms=deadline_ms
                )
                if result.audio is None:
                    raise ValueError("tts worker returned no audio")
                synthesized.append((text, result.audio, result.audio_rate or 16000))
            except Exception as exc:  # noqa: BLE001
                run.skip(
                    CorpusUtterance("tts-input", "A", 0.0, 1.0, text, file_order=len(run.skipped)), exc
                )
        errors += len(run.skipped)
        row = model
        report.set(row, "worker", worker_id)
        report.set(row, "input_source", input_source)

        for judge in asr_judges:
            descriptor = registry.descriptor(judge)
            registry.load_model(judge, descriptor.models[0], deadline_ms=deadline_ms)
            word_counts: list[AlignmentCounts] = []
            char_counts: list[AlignmentCounts] = []
            for text, audio, rate in synthesized:
                result = registry.dispatch_to(
                    judge, "infer", {}, audio=audio, audio_rate=rate, deadline_ms=deadline_ms
                )
                ref_tokens = normalize_text(text)
                hyp_tokens = normalize_text(result.body.get("text", ""))
                word_counts.append(align(ref_tokens, hyp_tokens))
                char_counts.append(align(characters_of(ref_tokens), characters_of(hyp_tokens)))
            report.set(row, f"wer[{judge}]", pooled_error_rate(word_counts) if word_counts else None)
            report.set(row, f"cer[{judge}]", pooled_error_rate(char_counts) if char_counts else None)

        samples = [{"audio": (audio, rate), "response": text} for text, audio, rate in synthesized]
        for metric, value in _judge_means(registry, TTS_JUDGE_METRICS, samples, deadline_ms).items():
            report.set(row, metric, value)
        report.set(row, "inputs", len(synthesized))
        report.set(row, "skipped", len(run.skipped))
    return EvalOutcome(report, errors)


def turn_taking_for_conversation(
    utterances: list[CorpusUtterance],
    lexicon: BackchannelLexicon | None = None,
) -> TurnTakingReport:
    channels = {u.channel for u in utterances}
    if len(channels) < 2:
        raise SingleChannel(f"need two channels, got {sorted(channels)}")
    total = max(u.end_s for u in utterances)
    intervals = [SpeechInterval(u.channel, u.start_s, u.end_s) for u in utterances]
    base = analyze_turn_taking(intervals, total)
    turns = [(len(normalize_text(u.text)), u.end_s - u.start_s) for u in utterances]
    rate = speaking_rate(turns)
    transcripts = [normalize_text(u.text) for u in utterances]
    backchannels = backchannel_rate(transcripts, total / 60.0, lexicon)
    return base.with_rates(rate, backchannels)


def eval_turn_taking(
    corpus: dict[str, list[CorpusUtterance]],
    lexicon: BackchannelLexicon | None = None,
) -> EvalOutcome:
    """Per-conversation turn-taking stats plus a duration-weighted aggregate."""
    columns = []
    for kind in ("ipu", "pause", "gap", "overlap"):
        columns.extend([f"{kind}_per_min", f"{kind}_pct"])
    columns.extend(["speaking_rate_wpm", "backchannel_per_min", "duration_s"])
    report = EvalReport(title="turn-taking", columns=columns)

    per_conversation = []
    for conversation_id in sorted(corpus):
        tt = turn_taking_for_conversation(corpus[conversation_id], lexicon)
        per_conversation.append(tt)
        _fill_turn_taking_row(report, f"conversation:{conversation_id}", tt)
    if per_conversation:
        _fill_turn_taking_row(report, "aggregate", aggregate_turn_taking(per_conversation))
    return EvalOutcome(report, 0)


def _fill_turn_taking_row(report: EvalReport, row: str, tt: TurnTakingReport) -> None:
    for kind in ("ipu", "pause", "gap", "overlap"):
        stats = tt.kind(kind)
        report.set(row, f"{kind}_per_min", stats.events_per_minute)
        report.set(row, f"{kind}_pct", stats.cumulated_duration_pct)
    report.set(row, "speaking_rate_wpm", tt.speaking_rate_wpm)
    report.set(row, "backchannel_per_min", tt.backchannel_rate_per_min)
    report.set(row, "duration_s", tt.total_duration_s)
