"""Optional session persistence: append-only logs plus per-turn WAV files.

Disabled by default. With storage off, nothing under the storage root is
created, written, or touched, whatever the session does.
"""

from __future__ import annotations

import json
import os
import tempfile
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class StorageDisabled(RuntimeError):
    pass


class IoFailure(OSError):
    pass


@dataclass(frozen=True)
class StorageConfig:
    enabled: bool = False
    root_path: Path | None = None
    store_audio: bool = True
    privacy_notice_ack_required: bool = True


def write_wav(path: Path, samples: np.ndarray, rate: int) -> None:
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(samples.astype("<i2").tobytes())


def _atomic_write(path: Path, data: bytes) -> None:
    # write-then-rename: a crash mid-write never leaves a partial log
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(str(exc)) from exc


def persist_session(driver, cfg: StorageConfig, metrics: list | None = None) -> list[Path]:
    """Write one JSONL log (one record per turn) and per-turn WAVs.

    Returns the written paths. Raises StorageDisabled without touching the
    filesystem when persistence is off.
    """
    if not cfg.enabled:
        raise StorageDisabled("session persistence is disabled")
    if cfg.root_path is None:
        raise IoFailure("storage enabled but no root path configured")

    session_dir = Path(cfg.root_path) / driver.session_id
    session_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    metrics_by_turn: dict[int, list] = {}
    for value in metrics or []:
        if value.scope.startswith("turn:"):
            metrics_by_turn.setdefault(int(value.scope.split(":", 1)[1]), []).append(value)

    feedback_by_turn: dict[int, list] = {}
    for rating in driver.feedback:
        feedback_by_turn.setdefault(rating.turn_id, []).append(rating)

    lines = []
    for turn in driver.history:
        record = {
            "turn_id": turn.turn_id,
            "asr_text": turn.asr_text,
            "response_text": turn.response_text,
            "latency": turn.latency.to_json_obj(),
            "interrupted": turn.interrupted,
            "error": turn.error,
            "segment": {"start_s": turn.user_segment.start_s, "end_s": turn.user_segment.end_s},
            "metrics": [m.to_json_obj() for m in metrics_by_turn.get(turn.turn_id, [])],
            "feedback": [
                {"dimension": r.dimension, "level": r.level, "timestamp": r.timestamp}
                for r in feedback_by_turn.get(turn.turn_id, [])
            ],
        }
        lines.append(json.dumps(record, sort_keys=True))
    log_path = session_dir / "session.jsonl"
    _atomic_write(log_path, ("\n".join(lines) + "\n").encode("utf-8") if lines else b"")
    written.append(log_path)

    if cfg.store_audio:
        for turn in driver.history:
            user_path = session_dir / f"turn_{turn.turn_id}_user.wav"
            write_wav(user_path, turn.user_segment.samples, turn.user_segment.format.sample_rate_hz)
            written.append(user_path)
            system_path = session_dir / f"turn_{turn.turn_id}_system.wav"
            write_wav(system_path, turn.response_audio, turn.response_rate)
            written.append(system_path)

    return written
