"""Audio framing, adaptive-energy voice activity detection, and endpointing.

Streams are mono signed 16-bit PCM. Incoming audio is cut into fixed-size
frames (10/20/30 ms), each frame is classified speech/nonspeech against an
adaptive noise floor, and a small hysteresis state machine turns the per-frame
decisions into utterance boundaries: a SpeechStart after `onset_frames`
consecutive speech frames, a SpeechEnd (with the accumulated segment) after
`hangover_frames` consecutive nonspeech frames.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SUPPORTED_RATES = (8000, 16000, 32000, 48000)
SUPPORTED_FRAME_MS = (10, 20, 30)

_INT16_FULL_SCALE = 32768.0


class UnsupportedFormat(ValueError):
    """Audio format outside the supported rate/channel envelope."""


@dataclass(frozen=True)
class AudioFormat:
    """Mono 16-bit linear PCM at one of the supported sample rates."""

    sample_rate_hz: int = 16000
    channels: int = 1

    def __post_init__(self) -> None:
        if self.sample_rate_hz not in SUPPORTED_RATES:
            raise UnsupportedFormat(f"unsupported sample rate {self.sample_rate_hz}")
        if self.channels != 1:
            raise UnsupportedFormat(f"only mono audio is supported, got {self.channels} channels")

    def samples_per_frame(self, frame_ms: int) -> int:
        return self.sample_rate_hz * frame_ms // 1000


@dataclass
class AudioFrame:
    """One fixed-duration slice of a PCM stream.

    `padding` counts trailing zero samples appended to a short final frame;
    such frames carry `terminal=True`.
    """

    samples: np.ndarray
    start_time_s: float
    format: AudioFormat
    terminal: bool = False
    padding: int = 0

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.format.sample_rate_hz

    def rms(self) -> float:
        """Root-mean-square amplitude on a 0..1 linear scale (1.0 = full scale)."""
        if len(self.samples) == 0:
            return 0.0
        x = self.samples.astype(np.float64) / _INT16_FULL_SCALE
        return float(np.sqrt(np.mean(x * x)))


@dataclass(frozen=True)
class VadConfig:
    """Adaptive-energy VAD and endpointing settings.

    A frame is speech when its RMS exceeds both the absolute floor
    (`energy_floor_dbfs`, converted to linear) and `activation_ratio` times
    the tracked noise floor. Hangover of 25 frames at 20 ms gives the default
    500 ms end-of-utterance silence.
    """

    frame_ms: int = 20
    energy_floor_dbfs: float = -50.0
    activation_ratio: float = 3.0
    onset_frames: int = 3
    hangover_frames: int = 25

    def __post_init__(self) -> None:
        if self.frame_ms not in SUPPORTED_FRAME_MS:
            raise ValueError(f"frame_ms must be one of {SUPPORTED_FRAME_MS}")
        if self.onset_frames < 1 or self.hangover_frames < 1:
            raise ValueError("onset_frames and hangover_frames must be >= 1")
        if self.activation_ratio <= 1.0:
            raise ValueError("activation_ratio must be > 1")

    @property
    def energy_floor_linear(self) -> float:
        return 10.0 ** (self.energy_floor_dbfs / 20.0)


@dataclass
class SpeechSegment:
    """A contiguous user utterance delimited by the endpointer."""

    samples: np.ndarray
    start_s: float
    end_s: float
    format: AudioFormat

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def to_bytes(self) -> bytes:
        return self.samples.astype("<i2").tobytes()


class Phase(enum.Enum):
    IDLE = "Idle"
    MAYBE_SPEECH = "MaybeSpeech"
    IN_SPEECH = "InSpeech"
    MAYBE_END = "MaybeEnd"


# Noise-floor tracker: floor <- 0.95*floor + 0.05*rms on nonspeech frames only.
NOISE_TRACK_KEEP = 0.95
NOISE_TRACK_ADAPT = 0.05
INITIAL_NOISE_FLOOR = 10.0 ** (-50.0 / 20.0)


@dataclass
class EndpointerState:
    """Mutable endpointing state; advanced by exactly one caller at a time."""

    phase: Phase = Phase.IDLE
    consecutive_count: int = 0
    noise_floor_rms: float = INITIAL_NOISE_FLOOR
    segment_start_s: float | None = None
    # Working buffers for the in-progress segment (not part of the public
    # contract, but SpeechEnd must carry the accumulated samples).
    run_start_s: float | None = None
    buffer: list[np.ndarray] = field(default_factory=list)
    end_candidate_s: float | None = None
    end_candidate_frames: int | None = None


@dataclass(frozen=True)
class SpeechStart:
    time_s: float


@dataclass(frozen=True)
class SpeechEnd:
    segment: SpeechSegment


VadEvent = SpeechStart | SpeechEnd


def vad_classify_frame(frame: AudioFrame, cfg: VadConfig, state: EndpointerState) -> bool:
    """Classify one frame as speech (True) / nonspeech (False).

    Updates `state.noise_floor_rms` in place: the exponential tracker follows
    nonspeech frames only, so sustained speech cannot drag the floor up.
    """
    expected = frame.format.samples_per_frame(cfg.frame_ms)
    if len(frame.samples) != expected:
        raise ValueError(f"frame has {len(frame.samples)} samples, expected {expected} for {cfg.frame_ms} ms")
    rms = frame.rms()
    threshold = max(cfg.energy_floor_linear, cfg.activation_ratio * state.noise_floor_rms)
    if rms > threshold:
        return True
    state.noise_floor_rms = NOISE_TRACK_KEEP * state.noise_floor_rms + NOISE_TRACK_ADAPT * rms
    return False


def endpoint_step(
    state: EndpointerState, decision: bool, frame: AudioFrame, cfg: VadConfig
) -> tuple[EndpointerState, list[VadEvent]]:
    """Advance the endpointer by one frame decision.

    SpeechStart fires after `onset_frames` consecutive speech frames and is
    stamped with the first frame of the run; SpeechEnd fires after
    `hangover_frames` consecutive nonspeech frames and yields the segment up
    to the first silent frame. Runs broken by the opposite decision reset
    silently.
    """
    events: list[VadEvent] = []

    if state.phase is Phase.IDLE:
        if decision:
            state.phase = Phase.MAYBE_SPEECH
            state.consecutive_count = 1
            state.run_start_s = frame.start_time_s
            state.buffer = [frame.samples]
            _maybe_onset(state, cfg, events)
    elif state.phase is Phase.MAYBE_SPEECH:
        if decision:
            state.consecutive_count += 1
            state.buffer.append(frame.samples)
            _maybe_onset(state, cfg, events)
        else:
            _reset_run(state)
    elif state.phase is Phase.IN_SPEECH:
        state.buffer.append(frame.samples)
        if not decision:
            state.phase = Phase.MAYBE_END
            state.consecutive_count = 1
            state.end_candidate_s = frame.start_time_s
            state.end_candidate_frames = len(state.buffer) - 1
            _maybe_end(state, cfg, frame.format, events)
    elif state.phase is Phase.MAYBE_END:
        state.buffer.append(frame.samples)
        if decision:
            state.phase = Phase.IN_SPEECH
            state.consecutive_count = 0
            state.end_candidate_s = None
            state.end_candidate_frames = None
        else:
            state.consecutive_count += 1
            _maybe_end(state, cfg, frame.format, events)

    return state, events


def _maybe_onset(state: EndpointerState, cfg: VadConfig, events: list[VadEvent]) -> None:
    if state.consecutive_count >= cfg.onset_frames:
        state.phase = Phase.IN_SPEECH
        state.segment_start_s = state.run_start_s
        state.consecutive_count = 0
        events.append(SpeechStart(time_s=state.run_start_s))


def _maybe_end(
    state: EndpointerState, cfg: VadConfig, fmt: AudioFormat, events: list[VadEvent]
) -> None:
    if state.consecutive_count < cfg.hangover_frames:
        return
    samples = (
        np.concatenate(state.buffer[: state.end_candidate_frames])
        if state.end_candidate_frames is not None and state.end_candidate_frames > 0
        else np.zeros(0, dtype=np.int16)
    )
    segment = SpeechSegment(
        samples=samples,
        start_s=state.segment_start_s,
        end_s=state.end_candidate_s,
        format=fmt,
    )
    events.append(SpeechEnd(segment=segment))
    state.phase = Phase.IDLE
    state.segment_start_s = None
    _reset_run(state)


def _reset_run(state: EndpointerState) -> None:
    if state.phase in (Phase.MAYBE_SPEECH, Phase.MAYBE_END):
        state.phase = Phase.IDLE
    state.consecutive_count = 0
    state.run_start_s = None
    state.buffer = []
    state.end_candidate_s = None
    state.end_candidate_frames = None


class StreamFramer:
    """Incrementally cuts a PCM byte/sample stream into AudioFrames."""

    def __init__(self, fmt: AudioFormat, frame_ms: int):
        if frame_ms not in SUPPORTED_FRAME_MS:
            raise ValueError(f"frame_ms must be one of {SUPPORTED_FRAME_MS}")
        self.format = fmt
        self.frame_ms = frame_ms
        self.frame_samples = fmt.samples_per_frame(frame_ms)
        self._pending = np.zeros(0, dtype=np.int16)
        self._emitted_samples = 0

    def push(self, data: bytes | np.ndarray) -> list[AudioFrame]:
        if isinstance(data, (bytes, bytearray, memoryview)):
            samples = np.frombuffer(bytes(data), dtype="<i2")
        else:
            samples = np.asarray(data, dtype=np.int16)
        self._pending = np.concatenate([self._pending, samples])
        frames = []
        rate = self.format.sample_rate_hz
        while len(self._pending) >= self.frame_samples:
            chunk, self._pending = (
                self._pending[: self.frame_samples],
                self._pending[self.frame_samples :],
            )
            frames.append(
                AudioFrame(
                    samples=chunk,
                    start_time_s=self._emitted_samples / rate,
                    format=self.format,
                )
            )
            self._emitted_samples += self.frame_samples
        return frames

    def flush(self) -> AudioFrame | None:
        """Zero-pad and emit any trailing partial frame, flagged terminal."""
        if len(self._pending) == 0:
            return None
        pad = self.frame_samples - len(self._pending)
        chunk = np.concatenate([self._pending, np.zeros(pad, dtype=np.int16)])
        frame = AudioFrame(
            samples=chunk,
            start_time_s=self._emitted_samples / self.format.sample_rate_hz,
            format=self.format,
            terminal=True,
            padding=pad,
        )
        self._pending = np.zeros(0, dtype=np.int16)
        self._emitted_samples += self.frame_samples
        return frame


def frame_audio(stream: np.ndarray | bytes, fmt: AudioFormat, frame_ms: int) -> list[AudioFrame]:
    """Partition a whole stream into frames; a short tail is zero-padded.

    Concatenating the result (dropping terminal padding) reproduces the
    input exactly.
    """
    framer = StreamFramer(fmt, frame_ms)
    frames = framer.push(stream)
    tail = framer.flush()
    if tail is not None:
        frames.append(tail)
    if not frames:
        raise ValueError("stream is empty")
    return frames


class Endpointer:
    """Convenience wrapper chaining VAD classification and endpointing."""

    def __init__(self, cfg: VadConfig | None = None):
        self.cfg = cfg or VadConfig()
        self.state = EndpointerState()

    def process(self, frame: AudioFrame) -> list[VadEvent]:
        decision = vad_classify_frame(frame, self.cfg, self.state)
        _, events = endpoint_step(self.state, decision, frame, self.cfg)
        return events

    @property
    def in_speech(self) -> bool:
        return self.state.phase in (Phase.IN_SPEECH, Phase.MAYBE_END)
