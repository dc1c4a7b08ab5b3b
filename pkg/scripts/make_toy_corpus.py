#!/usr/bin/env python3
"""Regenerate the bundled toy corpus (JSONL + per-utterance WAVs).

Deterministic: fixed utterance table, synthesized sine audio per utterance.
One utterance (sw-001, B at [5.0, 6.0)) is fully contained within another to
exercise containment filtering.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sds.gateway.storage import write_wav  # noqa: E402

RATE = 16000

UTTERANCES = [
    ("sw-001", "A", 0.0, 2.5, "hello there how are you doing today"),
    ("sw-001", "B", 2.8, 4.0, "i'm doing well thanks"),
    ("sw-001", "A", 4.5, 7.0, "did you catch the game last night"),
    ("sw-001", "B", 5.0, 6.0, "oh yeah"),
    ("sw-001", "B", 7.4, 9.5, "yeah it went to overtime i could not believe it"),
    ("sw-001", "A", 9.8, 11.0, "right that was wild"),
    ("sw-002", "A", 0.0, 3.0, "so what do you think about public service for students"),
    ("sw-002", "B", 3.5, 6.5, "i mean yeah i think it would be nice when kids are going to college"),
    ("sw-002", "A", 6.9, 8.0, "part of i- part of it though"),
    ("sw-002", "B", 8.2, 10.0, "uh-huh it builds character i see"),
]


def synth(index: int, duration_s: float) -> np.ndarray:
    hz = 180.0 + 35.0 * index
    t = np.arange(int(duration_s * RATE), dtype=np.float64) / RATE
    return np.round(6000.0 * np.sin(2.0 * math.pi * hz * t)).astype(np.int16)


def main() -> None:
    root = Path(__file__).resolve().parents[1] / "data" / "toy_corpus"
    audio_dir = root / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for index, (conversation_id, channel, start_s, end_s, text) in enumerate(UTTERANCES, start=1):
        wav_name = f"utt_{index:02d}.wav"
        write_wav(audio_dir / wav_name, synth(index, end_s - start_s), RATE)
        lines.append(
            json.dumps(
                {
                    "conversation_id": conversation_id,
                    "channel": channel,
                    "start_s": start_s,
                    "end_s": end_s,
                    "text": text,
                    "audio_path": f"audio/{wav_name}",
                },
                sort_keys=True,
            )
        )
    (root / "corpus.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} utterances under {root}")


if __name__ == "__main__":
    main()
