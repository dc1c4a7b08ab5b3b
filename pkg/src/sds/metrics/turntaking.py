"""Two-channel conversation timeline analysis.

Per-channel speech intervals are merged into interpausal units (IPUs) when
separated by less than a merge threshold. Interior silences on the union
timeline are pauses (same channel on both sides) or gaps (channel change);
simultaneous speech forms overlap events. Leading and trailing silences are
excluded. IPU cumulated duration sums both channels, so it double-counts
overlap and may exceed 100%.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from sds.metrics.textnorm import TokenSequence

EVENT_KINDS = ("ipu", "pause", "gap", "overlap")


class IntervalOutOfRange(ValueError):
    pass


class NegativeDuration(ValueError):
    pass


class ZeroDuration(ValueError):
    pass


class SingleChannel(ValueError):
    pass


@dataclass(frozen=True)
class SpeechInterval:
    channel: str
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if self.end_s <= self.start_s:
            raise NegativeDuration(f"interval [{self.start_s}, {self.end_s}) has no duration")


@dataclass(frozen=True)
class EventKindStats:
    count: int
    total_duration_s: float
    events_per_minute: float
    cumulated_duration_pct: float


@dataclass(frozen=True)
class TurnTakingReport:
    ipu: EventKindStats
    pause: EventKindStats
    gap: EventKindStats
    overlap: EventKindStats
    total_duration_s: float
    speaking_rate_wpm: float = 0.0
    backchannel_rate_per_min: float = 0.0

    def kind(self, name: str) -> EventKindStats:
        if name not in EVENT_KINDS:
            raise KeyError(name)
        return getattr(self, name)

    def with_rates(self, speaking_rate_wpm: float, backchannel_rate_per_min: float) -> "TurnTakingReport":
        return replace(
            self,
            speaking_rate_wpm=speaking_rate_wpm,
            backchannel_rate_per_min=backchannel_rate_per_min,
        )


def _merge_channel(intervals: list[tuple[float, float]], merge_gap_s: float) -> list[tuple[float, float]]:
    if not intervals:
        return []
    intervals = sorted(intervals)
    merged = [intervals[0]]
    for start, end in intervals[1:]:
        last_start, last_end = merged[-1]
        if start - last_end < merge_gap_s:
            merged[-1] = (last_start, max(last_end, end))
        else:
            merged.append((start, end))
    return merged


def _union(intervals: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    ordered = sorted(intervals)
    if not ordered:
        return []
    merged = [ordered[0]]
    for start, end in ordered[1:]:
        last_start, last_end = merged[-1]
        if start <= last_end:
            merged[-1] = (last_start, max(last_end, end))
        else:
            merged.append((start, end))
    return merged


def _intersect(a: list[tuple[float, float]], b: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        start = max(a[i][0], b[j][0])
        end = min(a[i][1], b[j][1])
        if end > start:
            out.append((start, end))
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return _union(out)


def _stats(count: int, duration: float, total_duration_s: float) -> EventKindStats:
    return EventKindStats(
        count=count,
        total_duration_s=duration,
        events_per_minute=count / (total_duration_s / 60.0),
        cumulated_duration_pct=100.0 * duration / total_duration_s,
    )


def analyze_turn_taking(
    intervals: Sequence[SpeechInterval],
    total_duration_s: float,
    merge_gap_s: float = 0.2,
) -> TurnTakingReport:
    """Compute IPU/pause/gap/overlap statistics for one conversation."""
    if total_duration_s <= 0:
        raise NegativeDuration("total duration must be positive")
    per_channel: dict[str, list[tuple[float, float]]] = {}
    for iv in intervals:
        if iv.start_s < 0 or iv.end_s > total_duration_s:
            raise IntervalOutOfRange(f"[{iv.start_s}, {iv.end_s}) outside [0, {total_duration_s}]")
        per_channel.setdefault(iv.channel, []).append((iv.start_s, iv.end_s))

    ipus_by_channel = {ch: _merge_channel(ivs, merge_gap_s) for ch, ivs in per_channel.items()}
    all_ipus = [iv for ivs in ipus_by_channel.values() for iv in ivs]

    ipu_count = len(all_ipus)
    ipu_duration = sum(end - start for start, end in all_ipus)

    channels = list(ipus_by_channel)
    if len(channels) == 2:
        overlaps = _intersect(ipus_by_channel[channels[0]], ipus_by_channel[channels[1]])
    else:
        overlaps = []
    overlap_duration = sum(end - start for start, end in overlaps)

    active = _union(all_ipus)
    pause_count = gap_count = 0
    pause_duration = gap_duration = 0.0
    for left, right in zip(active, active[1:]):
        silence_start, silence_end = left[1], right[0]
        left_channels = {ch for ch, ivs in ipus_by_channel.items() for _, e in ivs if e == silence_start}
        right_channels = {ch for ch, ivs in ipus_by_channel.items() for s, _ in ivs if s == silence_end}
        if left_channels & right_channels:
            pause_count += 1
            pause_duration += silence_end - silence_start
        else:
            gap_count += 1
            gap_duration += silence_end - silence_start

    return TurnTakingReport(
        ipu=_stats(ipu_count, ipu_duration, total_duration_s),
        pause=_stats(pause_count, pause_duration, total_duration_s),
        gap=_stats(gap_count, gap_duration, total_duration_s),
        overlap=_stats(len(overlaps), overlap_duration, total_duration_s),
        total_duration_s=total_duration_s,
    )


def aggregate_turn_taking(reports: Sequence[TurnTakingReport]) -> TurnTakingReport:
    """Duration-weighted mean across conversations."""
    if not reports:
        raise ZeroDuration("no reports to aggregate")
    total = sum(r.total_duration_s for r in reports)

    def mean(getter) -> float:
        return sum(getter(r) * r.total_duration_s for r in reports) / total

    def kind_mean(name: str) -> EventKindStats:
        return EventKindStats(
            count=sum(r.kind(name).count for r in reports),
            total_duration_s=sum(r.kind(name).total_duration_s for r in reports),
            events_per_minute=mean(lambda r: r.kind(name).events_per_minute),
            cumulated_duration_pct=mean(lambda r: r.kind(name).cumulated_duration_pct),
        )

    return TurnTakingReport(
        ipu=kind_mean("ipu"),
        pause=kind_mean("pause"),
        gap=kind_mean("gap"),
        overlap=kind_mean("overlap"),
        total_duration_s=total,
        speaking_rate_wpm=mean(lambda r: r.speaking_rate_wpm),
        backchannel_rate_per_min=mean(lambda r: r.backchannel_rate_per_min),
    )


def speaking_rate(turns: Sequence[tuple[int, float]]) -> float:
    """Words per minute of active speech: total words / total speech time."""
    total_words = sum(words for words, _ in turns)
    total_seconds = sum(duration for _, duration in turns)
    if total_seconds <= 0:
        raise ZeroDuration("no speech time")
    return total_words / (total_seconds / 60.0)


DEFAULT_BACKCHANNEL_PHRASES = (
    "yeah",
    "uh-huh",
    "mm-hmm",
    "right",
    "okay",
    "really",
    "i see",
    "oh yeah",
    "oh okay",
    "uh huh",
)


@dataclass(frozen=True)
class BackchannelLexicon:
    """One- and two-word listener acknowledgment phrases, lowercase."""

    phrases: frozenset[str] = field(default_factory=lambda: frozenset(DEFAULT_BACKCHANNEL_PHRASES))

    def __post_init__(self) -> None:
        for phrase in self.phrases:
            if not 1 <= len(phrase.split()) <= 2:
                raise ValueError(f"backchannel phrase must have 1 or 2 words: {phrase!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "BackchannelLexicon":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        phrases = frozenset(line.strip().lower() for line in lines if line.strip())
        return cls(phrases=phrases)

    def split_by_length(self) -> tuple[frozenset[str], frozenset[tuple[str, str]]]:
        ones = frozenset(p for p in self.phrases if " " not in p)
        twos = frozenset(tuple(p.split()) for p in self.phrases if " " in p)
        return ones, twos  # type: ignore[return-value]


def backchannel_rate(
    transcripts: Sequence[TokenSequence],
    conversation_minutes: float,
    lexicon: BackchannelLexicon | None = None,
) -> float:
    """Backchannel phrase matches per minute, greedy longest match first."""
    if conversation_minutes <= 0:
        raise ZeroDuration("conversation duration must be positive")
    lexicon = lexicon or BackchannelLexicon()
    ones, twos = lexicon.split_by_length()
    matches = 0
    for tokens in transcripts:
        i = 0
        while i < len(tokens):
            if i + 1 < len(tokens) and (tokens[i], tokens[i + 1]) in twos:
                matches += 1
                i += 2
            elif tokens[i] in ones:
                matches += 1
                i += 1
            else:
                i += 1
    return matches / conversation_minutes
