"""Metric records and delegation of neural metrics to judge workers.

Native metrics are computed in-process; anything requiring a model (MOS
predictors, perplexity, embedding similarity) is dispatched to registered
judge workers. A missing judge degrades to a skipped entry, never a failure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from sds.metrics.alignment import cer, wer


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float | None
    source: str  # "native" or "judge:<worker_id>"
    scope: str  # "turn:<n>" or "conversation"
    status: str = "ok"  # ok | skipped | error
    detail: str | None = None

    def to_json_obj(self) -> dict[str, Any]:
        obj: dict[str, Any] = {
            "name": self.name,
            "value": self.value,
            "source": self.source,
            "scope": self.scope,
            "status": self.status,
        }
        if self.detail is not None:
            obj["detail"] = self.detail
        return obj


def judge_referenced_asr(
    hyp: str,
    judge_texts: Sequence[tuple[str, str]],
    scope: str = "turn",
) -> list[MetricValue]:
    """WER and CER of a hypothesis against each judge's reference transcript.

    A failure for one judge (for example an empty reference) is recorded as
    an error entry without affecting the others.
    """
    if not judge_texts:
        raise ValueError("at least one judge text is required")
    values: list[MetricValue] = []
    for judge_id, reference in judge_texts:
        source = f"judge:{judge_id}"
        try:
            values.append(MetricValue("wer", wer(reference, hyp), source, scope))
            values.append(MetricValue("cer", cer(reference, hyp), source, scope))
        except ValueError as exc:
            values.append(MetricValue("wer", None, source, scope, status="error", detail=str(exc)))
            values.append(MetricValue("cer", None, source, scope, status="error", detail=str(exc)))
    return values


def request_judge_metrics(
    registry,
    wanted: Sequence[str],
    *,
    scope: str,
    response_text: str | None = None,
    context_text: str | None = None,
    audio: tuple[bytes, int] | None = None,
    deadline_ms: int = 10_000,
) -> list[MetricValue]:
    """Request one scalar per (metric, judge) from registered judge workers.

    `audio` is (pcm bytes, sample rate) of the audio under evaluation, sent
    along for audio-quality metrics; the judge decides what it needs.
    """
    values: list[MetricValue] = []
    for metric in wanted:
        judges = registry.judges_for_metric(metric)
        if not judges:
            values.append(MetricValue(metric, None, "none", scope, status="skipped", detail="no judge registered"))
            continue
        for descriptor in judges:
            body = {"metric": metric}
            if response_text is not None:
                body["response"] = response_text
            if context_text is not None:
                body["context"] = context_text
            try:
                result = registry.dispatch_to(
                    descriptor.worker_id, "infer", body, audio=audio, deadline_ms=deadline_ms
                )
                values.append(
                    MetricValue(
                        metric,
                        float(result.body["value"]),
                        f"judge:{descriptor.worker_id}",
                        scope,
                    )
                )
            except Exception as exc:  # noqa: BLE001 - per-judge isolation is the contract
                values.append(
                    MetricValue(
                        metric,
                        None,
                        f"judge:{descriptor.worker_id}",
                        scope,
                        status="error",
                        detail=str(exc),
                    )
                )
    return values
