"""Session lifecycle and the full-duplex conversation state machine.

A session owns one endpointer and one pipeline configuration. Incoming audio
frames always feed the endpointer, whatever the state: speech onset during
playback is a barge-in (playback cancelled, turn flagged interrupted), a
completed utterance while listening starts a turn. Turn dispatch is not
preemptible mid-stage; onset during Thinking marks the eventual record
interrupted and suppresses its playback. Sessions expire 300 s after
creation.
"""

from __future__ import annotations

import itertools
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

from sds.audio import (
    AudioFormat,
    AudioFrame,
    Endpointer,
    SpeechEnd,
    SpeechSegment,
    SpeechStart,
    VadConfig,
)
from sds.protocol.registry import (
    NoWorkerForTask,
    UnknownModel,
    WorkerError,
    WorkerRegistry,
    WorkerTimeout,
)

SESSION_CAP_S = 300.0
AUDIO_CHUNK_MS = 100

CASCADED_TASKS = ("asr", "llm", "tts")


class SessionExpired(RuntimeError):
    pass


class SessionState(Enum):
    LISTENING = "Listening"
    THINKING = "Thinking"
    SPEAKING = "Speaking"
    LOADING = "Loading"
    EXPIRED = "Expired"


@dataclass(frozen=True)
class PipelineConfig:
    mode: str  # "cascaded" | "e2e"
    asr_model: str | None = None
    llm_model: str | None = None
    tts_model: str | None = None
    e2e_model: str | None = None
    vad: VadConfig = field(default_factory=VadConfig)

    def __post_init__(self) -> None:
        if self.mode == "cascaded":
            if not (self.asr_model and self.llm_model and self.tts_model):
                raise ValueError("cascaded mode requires asr_model, llm_model, and tts_model")
            if self.e2e_model is not None:
                raise ValueError("cascaded mode must not set e2e_model")
        elif self.mode == "e2e":
            if not self.e2e_model:
                raise ValueError("e2e mode requires e2e_model")
            if self.asr_model or self.llm_model or self.tts_model:
                raise ValueError("e2e mode must not set cascaded models")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")

    def required_models(self) -> dict[str, str]:
        if self.mode == "cascaded":
            return {"asr": self.asr_model, "llm": self.llm_model, "tts": self.tts_model}
        return {"e2e": self.e2e_model}

    def to_json_obj(self) -> dict[str, Any]:
        obj: dict[str, Any] = {"mode": self.mode}
        for key in ("asr_model", "llm_model", "tts_model", "e2e_model"):
            value = getattr(self, key)
            if value is not None:
                obj[key] = value
        v = self.vad
        obj["vad"] = {
            "frame_ms": v.frame_ms,
            "energy_floor_dbfs": v.energy_floor_dbfs,
            "activation_ratio": v.activation_ratio,
            "onset_frames": v.onset_frames,
            "hangover_frames": v.hangover_frames,
        }
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict[str, Any]) -> "PipelineConfig":
        vad = VadConfig(**obj.get("vad", {}))
        return cls(
            mode=obj.get("mode", ""),
            asr_model=obj.get("asr_model"),
            llm_model=obj.get("llm_model"),
            tts_model=obj.get("tts_model"),
            e2e_model=obj.get("e2e_model"),
            vad=vad,
        )


@dataclass
class LatencyBreakdown:
    total_ms: float
    asr_ms: float | None = None
    llm_ms: float | None = None
    tts_ms: float | None = None
    e2e_ms: float | None = None

    def to_json_obj(self) -> dict[str, float]:
        out = {"total_ms": self.total_ms}
        for key in ("asr_ms", "llm_ms", "tts_ms", "e2e_ms"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass
class TurnRecord:
    turn_id: int
    user_segment: SpeechSegment
    asr_text: str | None
    response_text: str
    response_audio: np.ndarray
    response_rate: int
    latency: LatencyBreakdown
    interrupted: bool = False
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class VadState:
    speaking: bool


@dataclass(frozen=True)
class BargeIn:
    turn_id: int


@dataclass(frozen=True)
class TurnStarted:
    segment: SpeechSegment


SessionEvent = VadState | BargeIn | TurnStarted


class Playback:
    """Chunked response audio; cancellation stops emission immediately."""

    def __init__(self, samples: np.ndarray, rate: int, chunk_ms: int = AUDIO_CHUNK_MS):
        self._samples = samples
        self._rate = rate
        self._chunk = max(1, rate * chunk_ms // 1000)
        self._offset = 0
        self.cancelled = False
        self.emitted_samples = 0

    def next_chunk(self) -> bytes | None:
        if self.cancelled or self._offset >= len(self._samples):
            return None
        chunk = self._samples[self._offset : self._offset + self._chunk]
        self._offset += len(chunk)
        self.emitted_samples += len(chunk)
        return chunk.astype("<i2").tobytes()

    def cancel(self) -> None:
        self.cancelled = True


def serialize_dialogue_context(pairs: list[tuple[str | None, str]], current: str) -> str:
    """Alternating User/Assistant lines for prior turns, then the current
    transcript as the final line."""
    lines: list[str] = []
    for user_text, assistant_text in pairs:
        lines.append(f"User: {user_text or ''}")
        lines.append(f"Assistant: {assistant_text}")
    lines.append(current)
    return "\n".join(lines)


class SessionDriver:
    """Owns one session's state machine; one logical caller advances it.

    Audio ingestion and turn dispatch may run on different threads, but every
    state mutation happens under the internal lock, so they never interleave
    mid-transition.
    """

    def __init__(
        self,
        registry: WorkerRegistry,
        config: PipelineConfig,
        *,
        session_id: str | None = None,
        clock: Callable[[], float] = time.monotonic,
        deadline_ms: int = 10_000,
    ):
        self.registry = registry
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.deadline_ms = deadline_ms
        self._clock = clock
        self._lock = threading.Lock()
        self.state = SessionState.LOADING
        self.history: list[TurnRecord] = []
        self.feedback: list = []
        self._turn_ids = itertools.count(1)
        self._slots: dict[str, tuple[str, str]] = {}
        self._playback: Playback | None = None
        self._interrupt_inflight = False
        self.config = config
        self.audio_format = AudioFormat()
        self._apply_config(config)
        self.endpointer = Endpointer(config.vad)
        self.started_s = self._clock()
        with self._lock:
            self.state = SessionState.LISTENING

    # -- configuration -----------------------------------------------------

    def _apply_config(self, config: PipelineConfig) -> None:
        wanted = config.required_models()
        # Resolve everything first so a bad config leaves the slots untouched.
        resolved = {
            task: self.registry.worker_for_model(task, model) for task, model in wanted.items()
        }
        for task in list(self._slots):
            worker_id, _ = self._slots[task]
            keep = task in resolved and resolved[task].worker_id == worker_id
            if not keep:
                self.registry.unload_model(worker_id, deadline_ms=self.deadline_ms)
                del self._slots[task]
        for task, descriptor in resolved.items():
            model = wanted[task]
            self.registry.load_model(descriptor.worker_id, model, deadline_ms=self.deadline_ms)
            self._slots[task] = (descriptor.worker_id, model)

    def select_config(self, config: PipelineConfig) -> None:
        """Switch pipelines mid-session: Loading until the swap completes."""
        with self._lock:
            if self.state is SessionState.EXPIRED:
                raise SessionExpired(self.session_id)
            if self._playback is not None:
                self._playback.cancel()
                self._playback = None
            self.state = SessionState.LOADING
        self._apply_config(config)
        self.config = config
        self.endpointer = Endpointer(config.vad)
        with self._lock:
            self.state = SessionState.LISTENING

    # -- audio ingestion ---------------------------------------------------

    def elapsed_s(self) -> float:
        return self._clock() - self.started_s

    def ingest_frame(self, frame: AudioFrame) -> list[SessionEvent]:
        """Feed one frame to the endpointer and react to its events."""
        with self._lock:
            if self.state is SessionState.EXPIRED:
                raise SessionExpired(self.session_id)
            if self.elapsed_s() > SESSION_CAP_S:
                self.state = SessionState.EXPIRED
                if self._playback is not None:
                    self._playback.cancel()
                    self._playback = None
                raise SessionExpired(self.session_id)
        events: list[SessionEvent] = []
        for vad_event in self.endpointer.process(frame):
            if isinstance(vad_event, SpeechStart):
                events.append(VadState(speaking=True))
                with self._lock:
                    if self.state is SessionState.SPEAKING:
                        self._cancel_playback_locked(interrupted=True)
                        events.append(BargeIn(turn_id=self.history[-1].turn_id))
                    elif self.state is SessionState.THINKING:
                        self._interrupt_inflight = True
            elif isinstance(vad_event, SpeechEnd):
                events.append(VadState(speaking=False))
                with self._lock:
                    dispatchable = self.state is SessionState.LISTENING
                if dispatchable:
                    events.append(TurnStarted(segment=vad_event.segment))
        return events

    # -- turn execution ----------------------------------------------------

    def run_turn(self, segment: SpeechSegment) -> TurnRecord:
        if self.config.mode == "cascaded":
            return self.run_cascaded_turn(segment)
        return self.run_e2e_turn(segment)

    def run_cascaded_turn(self, segment: SpeechSegment) -> TurnRecord:
        with self._lock:
            if self.state is SessionState.EXPIRED:
                raise SessionExpired(self.session_id)
            self.state = SessionState.THINKING
            self._interrupt_inflight = False
        turn_id = next(self._turn_ids)
        started = time.perf_counter()
        latency = LatencyBreakdown(total_ms=0.0)
        asr_text: str | None = None
        try:
            asr = self.registry.dispatch(
                "asr", {}, audio=segment.to_bytes(), audio_rate=segment.format.sample_rate_hz,
                deadline_ms=self.deadline_ms,
            )
            latency.asr_ms = asr.latency_ms
            asr_text = asr.body.get("text", "")
            context = serialize_dialogue_context(self._history_pairs(), asr_text)
            llm = self.registry.dispatch("llm", {"text": context}, deadline_ms=self.deadline_ms)
            latency.llm_ms = llm.latency_ms
            response_text = llm.body.get("text", "")
            tts = self.registry.dispatch("tts", {"text": response_text}, deadline_ms=self.deadline_ms)
            latency.tts_ms = tts.latency_ms
            latency.total_ms = (time.perf_counter() - started) * 1000.0
            audio = np.frombuffer(tts.audio or b"", dtype="<i2")
            rate = tts.audio_rate or segment.format.sample_rate_hz
        except (WorkerError, WorkerTimeout, NoWorkerForTask, UnknownModel) as exc:
            latency.total_ms = (time.perf_counter() - started) * 1000.0
            return self._finish_failed_turn(turn_id, segment, asr_text, latency, exc)
        return self._finish_turn(turn_id, segment, asr_text, response_text, audio, rate, latency)

    def run_e2e_turn(self, segment: SpeechSegment) -> TurnRecord:
        with self._lock:
            if self.state is SessionState.EXPIRED:
                raise SessionExpired(self.session_id)
            self.state = SessionState.THINKING
            self._interrupt_inflight = False
        turn_id = next(self._turn_ids)
        started = time.perf_counter()
        latency = LatencyBreakdown(total_ms=0.0)
        try:
            # Prior dialogue context is intentionally not sent in e2e mode;
            # the context field stays empty for workers that ignore history.
            result = self.registry.dispatch(
                "e2e", {"context": ""}, audio=segment.to_bytes(),
                audio_rate=segment.format.sample_rate_hz, deadline_ms=self.deadline_ms,
            )
            latency.e2e_ms = result.latency_ms
            latency.total_ms = (time.perf_counter() - started) * 1000.0
            response_text = result.body.get("text", "")
            audio = np.frombuffer(result.audio or b"", dtype="<i2")
            rate = result.audio_rate or segment.format.sample_rate_hz
        except (WorkerError, WorkerTimeout, NoWorkerForTask, UnknownModel) as exc:
            latency.total_ms = (time.perf_counter() - started) * 1000.0
            return self._finish_failed_turn(turn_id, segment, None, latency, exc)
        return self._finish_turn(turn_id, segment, None, response_text, audio, rate, latency)

    def _history_pairs(self) -> list[tuple[str | None, str]]:
        with self._lock:
            return [(t.asr_text, t.response_text) for t in self.history if t.ok]

    def _finish_turn(
        self,
        turn_id: int,
        segment: SpeechSegment,
        asr_text: str | None,
        response_text: str,
        audio: np.ndarray,
        rate: int,
        latency: LatencyBreakdown,
    ) -> TurnRecord:
        with self._lock:
            record = TurnRecord(
                turn_id=turn_id,
                user_segment=segment,
                asr_text=asr_text,
                response_text=response_text,
                response_audio=audio,
                response_rate=rate,
                latency=latency,
                interrupted=self._interrupt_inflight,
            )
            self.history.append(record)
            if self.state is SessionState.EXPIRED:
                return record
            if record.interrupted:
                self.state = SessionState.LISTENING
            else:
                self._playback = Playback(audio, rate)
                self.state = SessionState.SPEAKING
            return record

    def _finish_failed_turn(
        self,
        turn_id: int,
        segment: SpeechSegment,
        asr_text: str | None,
        latency: LatencyBreakdown,
        exc: Exception,
    ) -> TurnRecord:
        with self._lock:
            record = TurnRecord(
                turn_id=turn_id,
                user_segment=segment,
                asr_text=asr_text,
                response_text="",
                response_audio=np.zeros(0, dtype=np.int16),
                response_rate=segment.format.sample_rate_hz,
                latency=latency,
                interrupted=self._interrupt_inflight,
                error=f"{type(exc).__name__}: {exc}",
            )
            self.history.append(record)
            if self.state is not SessionState.EXPIRED:
                self.state = SessionState.LISTENING
            return record

    # -- playback ----------------------------------------------------------

    def next_audio_chunk(self) -> bytes | None:
        with self._lock:
            if self.state is not SessionState.SPEAKING or self._playback is None:
                return None
            chunk = self._playback.next_chunk()
            if chunk is None:
                self._playback = None
                self.state = SessionState.LISTENING
            return chunk

    def cancel_playback(self) -> bool:
        """Stop response audio; returns False as a no-op outside Speaking."""
        with self._lock:
            if self.state is not SessionState.SPEAKING:
                return False
            self._cancel_playback_locked(interrupted=False)
            return True

    def _cancel_playback_locked(self, interrupted: bool) -> None:
        if self._playback is not None:
            self._playback.cancel()
            self._playback = None
        if interrupted and self.history:
            self.history[-1].interrupted = True
        self.state = SessionState.LISTENING

    # -- introspection -----------------------------------------------------

    def loaded_slots(self) -> dict[str, tuple[str, str]]:
        return dict(self._slots)
