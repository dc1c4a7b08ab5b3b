"""Human feedback ratings on a 4-point scale, bound to specific turns."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

DIMENSIONS = ("naturalness", "relevance")

DEFAULT_NATURALNESS_LABELS = {
    1: "Very Natural",
    2: "Somewhat Awkward",
    3: "Unnatural",
    4: "Very Awkward",
}
DEFAULT_RELEVANCE_LABELS = {
    1: "Highly Relevant",
    2: "Partially Relevant",
    3: "Slightly Irrelevant",
    4: "Completely Irrelevant",
}


class UnknownTurn(KeyError):
    pass


class InvalidLevel(ValueError):
    pass


@dataclass(frozen=True)
class FeedbackRating:
    turn_id: int
    dimension: str
    level: int
    timestamp: float = field(default_factory=time.time)

    def __post_init__(self) -> None:
        if self.dimension not in DIMENSIONS:
            raise InvalidLevel(f"unknown dimension {self.dimension!r}")
        if not isinstance(self.level, int) or not 1 <= self.level <= 4:
            raise InvalidLevel(f"level must be an integer in 1..4, got {self.level!r}")


@dataclass(frozen=True)
class FeedbackScales:
    """Rating labels; the 4-point defaults can be replaced from a JSON file."""

    naturalness: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_NATURALNESS_LABELS))
    relevance: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_RELEVANCE_LABELS))

    @classmethod
    def from_file(cls, path: str | Path) -> "FeedbackScales":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            naturalness={int(k): v for k, v in obj["naturalness"].items()},
            relevance={int(k): v for k, v in obj["relevance"].items()},
        )

    def label(self, dimension: str, level: int) -> str:
        return getattr(self, dimension)[level]


def record_feedback(driver, rating: FeedbackRating) -> None:
    """Append a rating to the session; persisted later only if storage is on."""
    known_turns = {t.turn_id for t in driver.history}
    if rating.turn_id not in known_turns:
        raise UnknownTurn(rating.turn_id)
    driver.feedback.append(rating)


def aggregate_feedback(ratings: Sequence[FeedbackRating], dimension: str) -> dict[int, float]:
    """Percentage of ratings per level, rounded to one decimal."""
    relevant = [r for r in ratings if r.dimension == dimension]
    total = len(relevant)
    out = {}
    for level in (1, 2, 3, 4):
        count = sum(1 for r in relevant if r.level == level)
        out[level] = round(100.0 * count / total, 1) if total else 0.0
    return out
