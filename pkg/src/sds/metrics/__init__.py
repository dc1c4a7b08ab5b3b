"""Evaluation metrics: error rates, diversity, turn-taking, judge delegation."""

from sds.metrics.alignment import AlignmentCounts, align, cer, wer
from sds.metrics.diversity import auto_bleu2, bleu2, self_bleu2, vert
from sds.metrics.judges import MetricValue, judge_referenced_asr, request_judge_metrics
from sds.metrics.textnorm import normalize_text
from sds.metrics.turntaking import (
    BackchannelLexicon,
    SpeechInterval,
    TurnTakingReport,
    analyze_turn_taking,
    backchannel_rate,
    speaking_rate,
)

__all__ = [
    "AlignmentCounts",
    "align",
    "wer",
    "cer",
    "normalize_text",
    "bleu2",
    "self_bleu2",
    "auto_bleu2",
    "vert",
    "speaking_rate",
    "backchannel_rate",
    "analyze_turn_taking",
    "SpeechInterval",
    "TurnTakingReport",
    "BackchannelLexicon",
    "MetricValue",
    "judge_referenced_asr",
    "request_judge_metrics",
]
