from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from sds.audio import AudioFormat, VadConfig
from sds.protocol import WorkerRegistry, default_mock_workers

REPO_ROOT = Path(__file__).resolve().parents[1]
TOY_CORPUS = REPO_ROOT / "data" / "toy_corpus" / "corpus.jsonl"

RATE = 16000
FMT = AudioFormat(sample_rate_hz=RATE)


def speech_samples(seconds: float, amplitude: int = 8000) -> np.ndarray:
    """Loud constant signal: RMS far above the default VAD threshold."""
    return np.full(int(seconds * RATE), amplitude, dtype=np.int16)


def silence_samples(seconds: float) -> np.ndarray:
    return np.zeros(int(seconds * RATE), dtype=np.int16)


class FakeClock:
    def __init__(self, t: float = 0.0):
        self.t = t

    def now(self) -> float:
        return self.t

    def advance(self, dt: float) -> None:
        self.t += dt


@pytest.fixture
def registry():
    reg = WorkerRegistry()
    for worker in default_mock_workers():
        reg.register_mock(worker)
    yield reg
    reg.close()


@pytest.fixture
def fake_clock():
    return FakeClock()


@pytest.fixture
def toy_corpus_path():
    assert TOY_CORPUS.exists(), "run scripts/make_toy_corpus.py first"
    return TOY_CORPUS
