"""Adapter runtime: connect to the harness, register, answer requests.

One task per process. Model-load failures come back as protocol error
responses and the loop keeps serving; only transport loss ends it.
"""

from __future__ import annotations

import logging
import socket
import threading
from dataclasses import dataclass, field
from typing import Any

from sds_workers.backends import MOCK_JUDGE_VALUES, Backend, build_backend, is_mock_model
from sds_workers.wire import WireError, encode_message, read_message

logger = logging.getLogger(__name__)


@dataclass
class AdapterConfig:
    task: str  # asr | llm | tts | e2e | judge
    models: list[str]
    worker_id: str = ""
    device: str = "cpu"
    max_new_tokens: int = 64
    temperature: float = 0.0
    judge_metrics: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.task not in ("asr", "llm", "tts", "e2e", "judge"):
            raise ValueError(f"unknown task {self.task!r}")
        if not self.models:
            raise ValueError("at least one model id is required")
        if not self.worker_id:
            self.worker_id = f"ref-{self.task}"
        if self.task == "judge" and not self.judge_metrics:
            self.judge_metrics = sorted(MOCK_JUDGE_VALUES)


def _ok(op: str, request_id: Any, body: dict[str, Any]) -> dict[str, Any]:
    return {"op": op, "request_id": request_id, "status": "ok", "body": body}


def _error(request_id: Any, code: str, message: str) -> dict[str, Any]:
    return {"op": "error", "request_id": request_id, "error": {"code": code, "message": message}}


class Adapter:
    def __init__(self, config: AdapterConfig):
        self.config = config
        self.loaded_model: str | None = None
        self._backend: Backend | None = None

    def hello(self) -> dict[str, Any]:
        header = {
            "op": "hello",
            "worker_id": self.config.worker_id,
            "task": self.config.task,
            "models": list(self.config.models),
        }
        if self.config.task == "judge":
            header["judge_metrics"] = list(self.config.judge_metrics)
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
            return self._handle_load(request_id, body)
        if op == "unload":
            if self._backend is not None:
                self._backend.unload()
            self.loaded_model = None
            return _ok("unload", request_id, {}), None, None
        if op == "infer":
            return self._handle_infer(header, request_id, body, audio)
        return _error(request_id, "UnknownOp", f"unsupported op {op!r}"), None, None

    def _handle_load(self, request_id, body):
        model_id = body.get("model_id")
        if model_id not in self.config.models:
            return _error(request_id, "UnknownModel", f"{model_id!r} not served here"), None, None
        try:
            backend = build_backend(
                self.config.task,
                model_id,
                device=self.config.device,
                max_new_tokens=self.config.max_new_tokens,
                temperature=self.config.temperature,
            )
            backend.load(model_id)
        except Exception as exc:  # noqa: BLE001 - report and keep serving
            logger.warning("load of %s failed: %s", model_id, exc)
            return _error(request_id, "LoadFailed", str(exc)), None, None
        self._backend = backend
        self.loaded_model = model_id
        return _ok("load", request_id, {"loaded_model": model_id}), None, None

    def _handle_infer(self, header, request_id, body, audio):
        judge_without_load = self.config.task == "judge" and self._backend is None
        if judge_without_load and is_mock_model(self.config.models[0]):
            # judge mocks answer without an explicit load, like the built-ins
            self._backend = build_backend(self.config.task, self.config.models[0], "cpu", 0, 0.0)
        if self._backend is None or (self.loaded_model is None and self.config.task != "judge"):
            return _error(request_id, "NoModelLoaded", "load a model before infer"), None, None
        meta = header.get("audio")
        rate = meta["sample_rate_hz"] if meta else None
        try:
            resp_body, resp_audio, resp_rate = self._backend.infer(body, audio, rate)
        except Exception as exc:  # noqa: BLE001
            return _error(request_id, type(exc).__name__, str(exc)), None, None
        return _ok("infer", request_id, resp_body), resp_audio, resp_rate


def serve(
    config: AdapterConfig,
    host: str = "127.0.0.1",
    port: int = 9500,
    stop_event: threading.Event | None = None,
) -> None:
    """Connect to the harness and answer requests until EOF."""
    adapter = Adapter(config)
    conn = socket.create_connection((host, port))
    try:
        conn.sendall(encode_message(adapter.hello()))
        ack = read_message(conn)
        if ack.header.get("op") == "error":
            raise RuntimeError(f"registration rejected: {ack.header.get('error')}")
        logger.info("registered as %s (%s)", config.worker_id, config.task)
        while stop_event is None or not stop_event.is_set():
            try:
                request = read_message(conn)
            except WireError:
                logger.info("harness closed the connection")
                return
            header, audio, rate = adapter.handle_message(request.header, request.audio)
            conn.sendall(encode_message(header, audio, rate))
    finally:
        conn.close()
