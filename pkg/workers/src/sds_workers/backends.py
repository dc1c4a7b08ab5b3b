"""Model backends behind the adapter.

Model ids starting with "mock-" (or the harness's built-in mock ids) select
the deterministic mock family, which reproduces the harness's in-process
mock behavior byte-for-byte so adapters can be conformance-checked without
any model weights. Other ids resolve to Hugging Face checkpoints for the asr
and llm tasks; those load lazily and report load failures over the protocol
instead of dying.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

TONE_HZ = 440.0
TONE_RATE = 16000
TONE_SECONDS_PER_10_CHARS = 0.5
TONE_AMPLITUDE = 0.3

MOCK_JUDGE_VALUES = {
    "utmos": 4.0,
    "dns_overall": 3.1,
    "dns_p808": 3.6,
    "plcmos": 4.2,
    "ssqa": 3.8,
    "perplexity": 42.0,
    "dialogpt_perplexity": 118.0,
    "bert_similarity": 61.0,
}

MOCK_MODEL_IDS = ("echo-asr-v1", "template-llm-v1", "tone-tts-v1", "mock-e2e-v1", "mock-judge-v1")


def is_mock_model(model_id: str) -> bool:
    return model_id.startswith("mock-") or model_id in MOCK_MODEL_IDS


def tone_for_text(text: str) -> bytes:
    blocks = math.ceil(len(text) / 10)
    n = int(blocks * TONE_SECONDS_PER_10_CHARS * TONE_RATE)
    t = np.arange(n, dtype=np.float64) / TONE_RATE
    samples = np.round(TONE_AMPLITUDE * 32767.0 * np.sin(2.0 * math.pi * TONE_HZ * t))
    return samples.astype("<i2").tobytes()


class Backend:
    """One loaded model for one task."""

    def __init__(self, task: str):
        self.task = task

    def load(self, model_id: str) -> None:
        raise NotImplementedError

    def unload(self) -> None:
        pass

    def infer(
        self, body: dict[str, Any], audio: bytes | None, rate: int | None
    ) -> tuple[dict[str, Any], bytes | None, int | None]:
        raise NotImplementedError


class MockBackend(Backend):
    """Deterministic stand-ins, one behavior per task, no weights."""

    def load(self, model_id: str) -> None:
        pass

    def infer(self, body, audio, rate):
        if self.task == "asr":
            if audio is None or rate is None:
                raise ValueError("asr infer requires audio")
            duration = (len(audio) // 2) / rate
            return {"text": f"mock transcript {duration:.2f}s"}, None, None
        if self.task == "llm":
            return {"text": f"echo: {body.get('text', '')}"}, None, None
        if self.task == "tts":
            return {}, tone_for_text(body.get("text", "")), TONE_RATE
        if self.task == "e2e":
            if audio is None or rate is None:
                raise ValueError("e2e infer requires audio")
            duration = (len(audio) // 2) / rate
            text = f"mock response {duration:.2f}s"
            return {"text": text}, tone_for_text(text), TONE_RATE
        if self.task == "judge":
            metric = body.get("metric")
            if metric not in MOCK_JUDGE_VALUES:
                raise KeyError(f"metric {metric!r} not supported")
            return {"metric": metric, "value": MOCK_JUDGE_VALUES[metric]}, None, None
        raise ValueError(f"unsupported task {self.task!r}")


class HfAsrBackend(Backend):
    """Hugging Face speech-recognition pipeline over raw PCM."""

    def __init__(self, task: str, device: str = "cpu"):
        super().__init__(task)
        self.device = device
        self._pipeline = None

    def load(self, model_id: str) -> None:
        from transformers import pipeline  # heavy import deferred to load time

        self._pipeline = pipeline("automatic-speech-recognition", model=model_id, device=self.device)

    def unload(self) -> None:
        self._pipeline = None

    def infer(self, body, audio, rate):
        if self._pipeline is None:
            raise RuntimeError("no model loaded")
        if audio is None or rate is None:
            raise ValueError("asr infer requires audio")
        waveform = np.frombuffer(audio, dtype="<i2").astype(np.float32) / 32768.0
        result = self._pipeline({"array": waveform, "sampling_rate": rate})
        return {"text": result.get("text", "").strip()}, None, None


class HfLlmBackend(Backend):
    """Causal language model generation for dialogue responses."""

    def __init__(self, task: str, device: str = "cpu", max_new_tokens: int = 64, temperature: float = 0.0):
        super().__init__(task)
        self.device = device
        self.max_new_tokens = max_new_tokens
        self.temperature = temperature
        self._model = None
        self._tokenizer = None

    def load(self, model_id: str) -> None:
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModelForCausalLM.from_pretrained(model_id).to(self.device)

    def unload(self) -> None:
        self._model = None
        self._tokenizer = None

    def infer(self, body, audio, rate):
        if self._model is None or self._tokenizer is None:
            raise RuntimeError("no model loaded")
        prompt = body.get("text", "")
        inputs = self._tokenizer(prompt, return_tensors="pt").to(self.device)
        do_sample = self.temperature > 0
        output = self._model.generate(
            **inputs,
            max_new_tokens=self.max_new_tokens,
            do_sample=do_sample,
            temperature=self.temperature if do_sample else None,
        )
        text = self._tokenizer.decode(output[0][inputs["input_ids"].shape[1]:], skip_special_tokens=True)
        return {"text": text.strip()}, None, None


def build_backend(task: str, model_id: str, device: str, max_new_tokens: int, temperature: float) -> Backend:
    if is_mock_model(model_id):
        return MockBackend(task)
    if task == "asr":
        return HfAsrBackend(task, device=device)
    if task == "llm":
        return HfLlmBackend(task, device=device, max_new_tokens=max_new_tokens, temperature=temperature)
    raise ValueError(f"no non-mock backend available for task {task!r}")
