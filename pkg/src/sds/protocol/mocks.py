"""Deterministic in-process mock workers.

These let the whole harness (orchestrator, gateway, batch CLI) run and be
tested without any neural model: the ASR mock stamps the input duration into
its transcript, the LLM mock echoes its prompt, the TTS mock emits a 440 Hz
tone sized by text length, the end-to-end mock combines both, and the judge
mock returns canned per-metric constants.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

TONE_HZ = 440.0
TONE_RATE = 16000
TONE_SECONDS_PER_10_CHARS = 0.5
TONE_AMPLITUDE = 0.3

CANNED_JUDGE_VALUES = {
    "utmos": 4.0,
    "dns_overall": 3.1,
    "dns_p808": 3.6,
    "plcmos": 4.2,
    "ssqa": 3.8,
    "perplexity": 42.0,
    "dialogpt_perplexity": 118.0,
    "bert_similarity": 61.0,
}


def tone_for_text(text: str) -> bytes:
    """440 Hz tone, 0.5 s per started block of 10 characters, 16 kHz PCM."""
    blocks = math.ceil(len(text) / 10)
    n = int(blocks * TONE_SECONDS_PER_10_CHARS * TONE_RATE)
    t = np.arange(n, dtype=np.float64) / TONE_RATE
    samples = np.round(TONE_AMPLITUDE * 32767.0 * np.sin(2.0 * math.pi * TONE_HZ * t))
    return samples.astype("<i2").tobytes()


def _ok(op: str, request_id: Any, body: dict[str, Any]) -> dict[str, Any]:
    return {"op": op, "request_id": request_id, "status": "ok", "body": body}


def _error(request_id: Any, code: str, message: str) -> dict[str, Any]:
    return {"op": "error", "request_id": request_id, "error": {"code": code, "message": message}}


class MockWorker:
    """Shared op routing; subclasses implement `infer`."""

    task = "asr"
    requires_loaded_model = True

    def __init__(self, worker_id: str, models: list[str], judge_metrics: list[str] | None = None):
        self.worker_id = worker_id
        self.models = list(models)
        self.judge_metrics = list(judge_metrics or [])
        self.loaded_model: str | None = None
        self.load_count = 0

    def hello(self) -> dict[str, Any]:
        header = {
            "op": "hello",
            "worker_id": self.worker_id,
            "task": self.task,
            "models": self.models,
        }
        if self.judge_metrics:
            header["judge_metrics"] = self.judge_metrics
        return header

    def handle_message(
        self, header: dict[str, Any], audio: bytes | None
    ) -> tuple[dict[str, Any], bytes | None, int | None]:
        op = header.get("op")
        request_id = header.get("request_id")
        body = header.get("body") or {}
        if op == "ping":
            return _ok("pong", request_id, {}), None, None
        if op == "load":
            model_id = body.get("model_id")
            if model_id not in self.models:
                return _error(request_id, "UnknownModel", f"{model_id!r} not served here"), None, None
            self.loaded_model = model_id
            self.load_count += 1
            return _ok("load", request_id, {"loaded_model": model_id}), None, None
        if op == "unload":
            self.loaded_model = None
            return _ok("unload", request_id, {}), None, None
        if op == "infer":
            if self.requires_loaded_model and self.loaded_model is None:
                return _error(request_id, "NoModelLoaded", "load a model before infer"), None, None
            meta = header.get("audio")
            rate = meta["sample_rate_hz"] if meta else None
            try:
                resp_body, resp_audio, resp_rate = self.infer(body, audio, rate)
            except Exception as exc:  # noqa: BLE001 - report, do not kill the worker
                return _error(request_id, type(exc).__name__, str(exc)), None, None
            return _ok("infer", request_id, resp_body), resp_audio, resp_rate
        return _error(request_id, "UnknownOp", f"unsupported op {op!r}"), None, None

    def infer(
        self, body: dict[str, Any], audio: bytes | None, rate: int | None
    ) -> tuple[dict[str, Any], bytes | None, int | None]:
        raise NotImplementedError


class EchoAsrWorker(MockWorker):
    """Transcribes any audio to a duration-stamped string."""

    task = "asr"

    def infer(self, body, audio, rate):
        if audio is None or rate is None:
            raise ValueError("asr infer requires audio")
        duration = (len(audio) // 2) / rate
        return {"text": f"mock transcript {duration:.2f}s"}, None, None


class TemplateLlmWorker(MockWorker):
    """Prefix-echoes its prompt."""

    task = "llm"

    def infer(self, body, audio, rate):
        text = body.get("text", "")
        return {"text": f"echo: {text}"}, None, None


class ToneTtsWorker(MockWorker):
    """Synthesizes a fixed tone whose length tracks the input text length."""

    task = "tts"

    def infer(self, body, audio, rate):
        text = body.get("text", "")
        pcm = tone_for_text(text)
        return {}, pcm, TONE_RATE


class MockE2eWorker(MockWorker):
    """Emits a templated text plus tone audio straight from user audio."""

    task = "e2e"

    def infer(self, body, audio, rate):
        if audio is None or rate is None:
            raise ValueError("e2e infer requires audio")
        duration = (len(audio) // 2) / rate
        text = f"mock response {duration:.2f}s"
        return {"text": text}, tone_for_text(text), TONE_RATE


class MockJudgeWorker(MockWorker):
    """Returns canned constants, one per advertised metric."""

    task = "judge"
    requires_loaded_model = False

    def __init__(self, worker_id: str, models: list[str] | None = None,
                 values: dict[str, float] | None = None):
        self.values = dict(values or CANNED_JUDGE_VALUES)
        super().__init__(worker_id, models or ["mock-judge-v1"], judge_metrics=sorted(self.values))

    def infer(self, body, audio, rate):
        metric = body.get("metric")
        if metric not in self.values:
            raise KeyError(f"metric {metric!r} not supported")
        return {"metric": metric, "value": self.values[metric]}, None, None


def default_mock_workers() -> list[MockWorker]:
    return [
        EchoAsrWorker("mock-asr", ["echo-asr-v1"]),
        TemplateLlmWorker("mock-llm", ["template-llm-v1"]),
        ToneTtsWorker("mock-tts", ["tone-tts-v1"]),
        MockE2eWorker("mock-e2e", ["mock-e2e-v1"]),
        MockJudgeWorker("mock-judge"),
    ]
