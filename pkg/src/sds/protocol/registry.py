"""Worker registry: registration, model load/unload, request dispatch.

Workers attach either in-process (mock objects driven through the codec) or
over a stream socket. Requests to one worker are serialized by its handle;
dispatch to distinct workers may proceed concurrently. Responses are matched
to requests by id, so out-of-order responses re-associate correctly.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from sds.protocol.framing import (
    Message,
    ProtocolError,
    decode_message,
    encode_message,
    read_message,
)

TASKS = ("asr", "llm", "tts", "e2e", "judge")

DEFAULT_DEADLINE_MS = 10_000


class MalformedHello(ProtocolError):
    pass


class EmptyModelList(ProtocolError):
    pass


class UnknownWorker(KeyError):
    pass


class UnknownModel(KeyError):
    pass


class NoWorkerForTask(LookupError):
    pass


class WorkerTimeout(TimeoutError):
    pass


class WorkerError(RuntimeError):
    """Failure reported by the worker itself, surfaced verbatim."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass
class WorkerDescriptor:
    worker_id: str
    task: str
    models: list[str]
    judge_metrics: list[str] = field(default_factory=list)
    loaded_model: str | None = None


class DispatchResult(NamedTuple):
    body: dict[str, Any]
    audio: bytes | None
    audio_rate: int | None
    latency_ms: float


def parse_hello(header: dict[str, Any]) -> WorkerDescriptor:
    if header.get("op") != "hello":
        raise MalformedHello(f"expected hello, got {header.get('op')!r}")
    worker_id = header.get("worker_id")
    task = header.get("task")
    models = header.get("models")
    judge_metrics = header.get("judge_metrics") or []
    if not isinstance(worker_id, str) or not worker_id:
        raise MalformedHello("hello must carry a non-empty worker_id")
    if task not in TASKS:
        raise MalformedHello(f"unknown task {task!r}")
    if not isinstance(models, list) or not all(isinstance(m, str) for m in models) or not models:
        raise EmptyModelList("hello must list at least one model")
    if task == "judge" and not judge_metrics:
        raise EmptyModelList("judge workers must list at least one metric")
    if task != "judge" and judge_metrics:
        raise MalformedHello("judge_metrics is only valid for judge workers")
    return WorkerDescriptor(
        worker_id=worker_id,
        task=task,
        models=list(models),
        judge_metrics=list(judge_metrics),
    )


def _raise_if_error(message: Message) -> Message:
    if message.header.get("op") == "error":
        err = message.header.get("error") or {}
        raise WorkerError(str(err.get("code", "WorkerError")), str(err.get("message", "")))
    return message


class InProcessHandle:
    """Drives a mock worker object through the real codec, no socket."""

    def __init__(self, worker):
        self.descriptor = parse_hello(worker.hello())
        self._worker = worker
        self._lock = threading.Lock()
        self._request_id = 0

    def request(
        self,
        op: str,
        body: dict[str, Any] | None = None,
        audio: bytes | None = None,
        audio_rate: int | None = None,
        deadline_ms: int = DEFAULT_DEADLINE_MS,
    ) -> Message:
        with self._lock:
            self._request_id += 1
            header = {
                "op": op,
                "request_id": self._request_id,
                "deadline_ms": deadline_ms,
                "body": body or {},
            }
            wire = encode_message(header, audio, audio_rate)
            request, _ = decode_message(wire)
            started = time.perf_counter()
            resp_header, resp_audio, resp_rate = self._worker.handle_message(
                request.header, request.audio
            )
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            if elapsed_ms > deadline_ms:
                raise WorkerTimeout(f"{self.descriptor.worker_id} exceeded {deadline_ms} ms")
            response, _ = decode_message(encode_message(resp_header, resp_audio, resp_rate))
            return _raise_if_error(response)

    def close(self) -> None:
        pass


class SocketHandle:
    """Harness-side endpoint for one connected worker."""

    def __init__(self, descriptor: WorkerDescriptor, conn: socket.socket):
        self.descriptor = descriptor
        self._conn = conn
        self._lock = threading.Lock()
        self._request_id = 0
        self._pending: dict[int, Message] = {}

    def request(
        self,
        op: str,
        body: dict[str, Any] | None = None,
        audio: bytes | None = None,
        audio_rate: int | None = None,
        deadline_ms: int = DEFAULT_DEADLINE_MS,
    ) -> Message:
        deadline = time.perf_counter() + deadline_ms / 1000.0
        with self._lock:
            self._request_id += 1
            request_id = self._request_id
            header = {
                "op": op,
                "request_id": request_id,
                "deadline_ms": deadline_ms,
                "body": body or {},
            }
            try:
                self._conn.sendall(encode_message(header, audio, audio_rate))
                while True:
                    if request_id in self._pending:
                        return _raise_if_error(self._pending.pop(request_id))
                    remaining = deadline - time.perf_counter()
                    if remaining <= 0:
                        raise WorkerTimeout(
                            f"{self.descriptor.worker_id} exceeded {deadline_ms} ms"
                        )
                    self._conn.settimeout(remaining)
                    message = read_message(self._conn)
                    got_id = message.header.get("request_id")
                    if got_id == request_id:
                        return _raise_if_error(message)
                    self._pending[got_id] = message
            except (socket.timeout, TimeoutError) as exc:
                raise WorkerTimeout(
                    f"{self.descriptor.worker_id} exceeded {deadline_ms} ms"
                ) from exc
            except OSError as exc:
                raise WorkerError("Disconnected", str(exc)) from exc

    def close(self) -> None:
        try:
            self._conn.close()
        except OSError:
            pass


class WorkerRegistry:
    """Shared-read/exclusive-write map of attached workers."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._handles: dict[str, InProcessHandle | SocketHandle] = {}

    def register_handle(self, handle) -> WorkerDescriptor:
        with self._lock:
            worker_id = handle.descriptor.worker_id
            old = self._handles.get(worker_id)
            if old is not None:
                old.close()
            self._handles[worker_id] = handle
            return handle.descriptor

    def register_mock(self, worker) -> WorkerDescriptor:
        return self.register_handle(InProcessHandle(worker))

    def register_socket(self, hello_header: dict[str, Any], conn: socket.socket) -> WorkerDescriptor:
        return self.register_handle(SocketHandle(parse_hello(hello_header), conn))

    def remove(self, worker_id: str) -> None:
        with self._lock:
            handle = self._handles.pop(worker_id, None)
        if handle is not None:
            handle.close()

    def close(self) -> None:
        with self._lock:
            handles = list(self._handles.values())
            self._handles.clear()
        for handle in handles:
            handle.close()

    def _handle(self, worker_id: str):
        with self._lock:
            try:
                return self._handles[worker_id]
            except KeyError:
                raise UnknownWorker(worker_id) from None

    def descriptor(self, worker_id: str) -> WorkerDescriptor:
        return self._handle(worker_id).descriptor

    def descriptors(self) -> list[WorkerDescriptor]:
        with self._lock:
            return [h.descriptor for h in self._handles.values()]

    def workers_for_task(self, task: str) -> list[WorkerDescriptor]:
        return [d for d in self.descriptors() if d.task == task]

    def worker_for_model(self, task: str, model_id: str) -> WorkerDescriptor:
        candidates = self.workers_for_task(task)
        if not candidates:
            raise NoWorkerForTask(task)
        for descriptor in candidates:
            if model_id in descriptor.models:
                return descriptor
        raise UnknownModel(model_id)

    def judges_for_metric(self, metric: str) -> list[WorkerDescriptor]:
        return [d for d in self.workers_for_task("judge") if metric in d.judge_metrics]

    # -- model lifecycle ---------------------------------------------------

    def load_model(self, worker_id: str, model_id: str, deadline_ms: int = DEFAULT_DEADLINE_MS) -> None:
        handle = self._handle(worker_id)
        descriptor = handle.descriptor
        if model_id not in descriptor.models:
            raise UnknownModel(model_id)
        if descriptor.loaded_model == model_id:
            return
        handle.request("load", {"model_id": model_id}, deadline_ms=deadline_ms)
        descriptor.loaded_model = model_id

    def unload_model(self, worker_id: str, deadline_ms: int = DEFAULT_DEADLINE_MS) -> None:
        handle = self._handle(worker_id)
        handle.request("unload", {}, deadline_ms=deadline_ms)
        handle.descriptor.loaded_model = None

    def ping(self, worker_id: str, deadline_ms: int = DEFAULT_DEADLINE_MS) -> float:
        handle = self._handle(worker_id)
        started = time.perf_counter()
        handle.request("ping", {}, deadline_ms=deadline_ms)
        return (time.perf_counter() - started) * 1000.0

    # -- inference ---------------------------------------------------------

    def dispatch(
        self,
        task: str,
        body: dict[str, Any],
        audio: bytes | None = None,
        audio_rate: int | None = None,
        deadline_ms: int = DEFAULT_DEADLINE_MS,
    ) -> DispatchResult:
        """Route an infer request to the loaded worker for a task."""
        candidates = self.workers_for_task(task)
        if not candidates:
            raise NoWorkerForTask(task)
        loaded = [d for d in candidates if d.loaded_model is not None]
        if not loaded:
            raise NoWorkerForTask(f"no {task} worker has a loaded model")
        return self.dispatch_to(loaded[0].worker_id, "infer", body, audio=audio,
                                audio_rate=audio_rate, deadline_ms=deadline_ms)

    def dispatch_to(
        self,
        worker_id: str,
        op: str,
        body: dict[str, Any],
        audio: bytes | None | tuple[bytes, int] = None,
        audio_rate: int | None = None,
        deadline_ms: int = DEFAULT_DEADLINE_MS,
    ) -> DispatchResult:
        if isinstance(audio, tuple):
            audio, audio_rate = audio
        handle = self._handle(worker_id)
        started = time.perf_counter()
        response = handle.request(op, body, audio=audio, audio_rate=audio_rate, deadline_ms=deadline_ms)
        latency_ms = (time.perf_counter() - started) * 1000.0
        return DispatchResult(
            body=response.header.get("body", {}),
            audio=response.audio,
            audio_rate=response.audio_rate,
            latency_ms=latency_ms,
        )

    # -- audits ------------------------------------------------------------

    def loaded_models_by_task(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for descriptor in self.descriptors():
            if descriptor.loaded_model is not None:
                out.setdefault(descriptor.task, []).append(descriptor.worker_id)
        return out
