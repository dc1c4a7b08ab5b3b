"""Timestamped two-channel conversation corpora.

Interchange format: one JSON object per line with conversation_id, channel
(A/B), start_s, end_s, text, and an optional audio_path (relative paths are
resolved against the corpus file's directory). Utterances are grouped by
conversation and sorted by start time; fully-contained utterances are dropped
before dialogue contexts are built.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class ParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InvariantViolation(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class CorpusUtterance:
    conversation_id: str
    channel: str
    start_s: float
    end_s: float
    text: str
    audio_path: str | None = None
    file_order: int = 0


def load_corpus(path: str | Path) -> dict[str, list[CorpusUtterance]]:
    """Parse and validate a corpus file; conversations sorted by start time."""
    path = Path(path)
    conversations: dict[str, list[CorpusUtterance]] = {}
    base = path.parent
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ParseError(line_no, "record must be a JSON object")
        try:
            utterance = CorpusUtterance(
                conversation_id=str(obj["conversation_id"]),
                channel=str(obj["channel"]),
                start_s=float(obj["start_s"]),
                end_s=float(obj["end_s"]),
                text=str(obj.get("text", "")),
                audio_path=_resolve_audio(obj.get("audio_path"), base),
                file_order=line_no,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(line_no, f"bad record: {exc}") from exc
        if utterance.channel not in ("A", "B"):
            raise InvariantViolation(line_no, f"channel must be A or B, got {utterance.channel!r}")
        if utterance.end_s <= utterance.start_s:
            raise InvariantViolation(line_no, f"end_s {utterance.end_s} <= start_s {utterance.start_s}")
        if not utterance.text and utterance.audio_path is None:
            raise InvariantViolation(line_no, "text may be empty only when audio_path is present")
        conversations.setdefault(utterance.conversation_id, []).append(utterance)
    for utterances in conversations.values():
        utterances.sort(key=lambda u: u.start_s)  # stable: ties keep file order
    return conversations


def _resolve_audio(audio_path, base: Path) -> str | None:
    if audio_path is None:
        return None
    p = Path(str(audio_path))
    return str(p if p.is_absolute() else base / p)


def drop_contained(utterances: list[CorpusUtterance]) -> list[CorpusUtterance]:
    """Remove utterances fully contained in another utterance's span.

    Two utterances with identical spans contain each other; the one earlier
    in file order survives.
    """
    survivors = []
    for u in utterances:
        contained = False
        for v in utterances:
            if v is u:
                continue
            if v.start_s <= u.start_s and u.end_s <= v.end_s:
                same_span = v.start_s == u.start_s and v.end_s == u.end_s
                if not same_span or v.file_order < u.file_order:
                    contained = True
                    break
        if not contained:
            survivors.append(u)
    return survivors


def build_dialogue_contexts(
    conversation: list[CorpusUtterance],
    text_of=None,
) -> list[tuple[str, CorpusUtterance]]:
    """(context_text, current_utterance) for each surviving utterance.

    The context concatenates all surviving utterances with strictly earlier
    start, tagged User/Assistant relative to the current speaker, with the
    current utterance's transcript as the final untagged line. `text_of`
    substitutes transcripts (for machine-transcript runs).
    """
    if text_of is None:
        text_of = lambda u: u.text  # noqa: E731
    survivors = drop_contained(conversation)
    out = []
    for current in survivors:
        lines = []
        for prior in survivors:
            if prior.start_s >= current.start_s:
                continue
            role = "User" if prior.channel == current.channel else "Assistant"
            lines.append(f"{role}: {text_of(prior)}")
        lines.append(text_of(current))
        out.append(("\n".join(lines), current))
    return out
