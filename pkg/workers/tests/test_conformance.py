"""Byte-level conformance: the adapter in mock-model mode must produce the
exact same response bytes as the harness's in-process mocks for a canned
request sequence. The harness package is used here only as test tooling (to
bridge its mocks over TCP and to build request bytes)."""

from __future__ import annotations

import json
import os
import socket
import struct
import subprocess
import sys
import threading
import time
from pathlib import Path

import numpy as np
import pytest

from sds.protocol.client import serve_worker
from sds.protocol.framing import encode_message
from sds.protocol.mocks import (
    EchoAsrWorker,
    MockE2eWorker,
    MockJudgeWorker,
    TemplateLlmWorker,
    ToneTtsWorker,
)

from conftest import WORKERS_SRC

REPO_ROOT = Path(__file__).resolve().parents[2]

PCM_1S = np.full(16000, 9000, dtype=np.int16).tobytes()
PCM_THIRD = np.full(5280, -7000, dtype=np.int16).tobytes()


def request_sequence(task: str, model: str) -> list[bytes]:
    def req(request_id, op, body, audio=None, rate=None):
        header = {"op": op, "request_id": request_id, "deadline_ms": 5000, "body": body}
        return encode_message(header, audio, rate)

    if task == "asr":
        return [
            req(1, "ping", {}),
            req(2, "load", {"model_id": model}),
            req(3, "infer", {}, PCM_1S, 16000),
            req(4, "infer", {}, PCM_THIRD, 16000),
            req(5, "infer", {}),  # missing audio -> error path
            req(6, "load", {"model_id": "bogus-model"}),  # UnknownModel
            req(7, "unload", {}),
            req(8, "infer", {}, PCM_1S, 16000),  # NoModelLoaded
            req(9, "ping", {}),
        ]
    if task == "llm":
        return [
            req(1, "ping", {}),
            req(2, "load", {"model_id": model}),
            req(3, "infer", {"text": "hello there"}),
            req(4, "infer", {"text": ""}),
            req(5, "unload", {}),
            req(6, "ping", {}),
        ]
    if task == "tts":
        return [
            req(1, "load", {"model_id": model}),
            req(2, "infer", {"text": "x" * 27}),
            req(3, "infer", {"text": ""}),
            req(4, "unload", {}),
        ]
    if task == "e2e":
        return [
            req(1, "load", {"model_id": model}),
            req(2, "infer", {"context": ""}, PCM_1S, 16000),
            req(3, "unload", {}),
        ]
    if task == "judge":
        return [
            req(1, "infer", {"metric": "utmos"}),
            req(2, "infer", {"metric": "perplexity"}),
            req(3, "infer", {"metric": "nope"}),  # unknown metric -> error
            req(4, "ping", {}),
        ]
    raise ValueError(task)


def _recv_exact(conn: socket.socket, n: int) -> bytes:
    out = b""
    while len(out) < n:
        chunk = conn.recv(n - len(out))
        if not chunk:
            raise ConnectionError("worker closed mid-frame")
        out += chunk
    return out


def read_frame_raw(conn: socket.socket) -> bytes:
    prefix = _recv_exact(conn, 4)
    (total_len,) = struct.unpack("<I", prefix)
    return prefix + _recv_exact(conn, total_len)


def read_response_raw(conn: socket.socket) -> bytes:
    header_frame = read_frame_raw(conn)
    header = json.loads(header_frame[5:].decode("utf-8"))
    raw = header_frame
    if header.get("audio"):
        raw += read_frame_raw(conn)
    return raw


class ConformanceHarness:
    """Plays the harness side: accepts one worker, runs the canned requests,
    records the raw response bytes."""

    def __init__(self):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(1)
        self.port = self.sock.getsockname()[1]

    def run(self, requests: list[bytes], timeout_s: float = 30.0) -> bytes:
        self.sock.settimeout(timeout_s)
        conn, _ = self.sock.accept()
        conn.settimeout(timeout_s)
        try:
            hello_frame = read_frame_raw(conn)
            hello = json.loads(hello_frame[5:].decode("utf-8"))
            conn.sendall(
                encode_message({"op": "hello", "status": "ok", "worker_id": hello["worker_id"]})
            )
            transcript = b""
            for request in requests:
                conn.sendall(request)
                transcript += read_response_raw(conn)
            return transcript
        finally:
            conn.close()
            self.sock.close()


def mock_transcript(worker, requests: list[bytes]) -> bytes:
    harness = ConformanceHarness()
    thread = threading.Thread(
        target=serve_worker, args=(worker, "127.0.0.1", harness.port), daemon=True
    )
    out: dict[str, bytes] = {}

    def run():
        out["transcript"] = harness.run(requests)

    runner = threading.Thread(target=run, daemon=True)
    runner.start()
    time.sleep(0.05)
    thread.start()
    runner.join(timeout=30)
    assert "transcript" in out, "mock transcript did not complete"
    return out["transcript"]


def adapter_transcript(task: str, model: str, requests: list[bytes]) -> bytes:
    harness = ConformanceHarness()
    env = dict(os.environ, PYTHONPATH=str(WORKERS_SRC))
    process = subprocess.Popen(
        [
            sys.executable,
            "-m",
            "sds_workers.cli",
            "--task",
            task,
            "--models",
            model,
            "--connect",
            f"127.0.0.1:{harness.port}",
        ],
        env=env,
        cwd=REPO_ROOT,
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
    )
    try:
        transcript = harness.run(requests)
        return transcript
    finally:
        process.terminate()
        process.wait(timeout=10)


MOCKS = {
    "asr": (EchoAsrWorker("golden-asr", ["echo-asr-v1"]), "echo-asr-v1"),
    "llm": (TemplateLlmWorker("golden-llm", ["template-llm-v1"]), "template-llm-v1"),
    "tts": (ToneTtsWorker("golden-tts", ["tone-tts-v1"]), "tone-tts-v1"),
    "e2e": (MockE2eWorker("golden-e2e", ["mock-e2e-v1"]), "mock-e2e-v1"),
    "judge": (MockJudgeWorker("golden-judge", ["mock-judge-v1"]), "mock-judge-v1"),
}


@pytest.mark.parametrize("task", ["asr", "llm", "tts", "e2e", "judge"])
def test_adapter_matches_mock_transcript_bytes(task):
    worker, model = MOCKS[task]
    requests = request_sequence(task, model)
    golden = mock_transcript(worker, requests)
    observed = adapter_transcript(task, model, requests)
    assert observed == golden, f"{task}: adapter transcript diverges from mock transcript"
    assert len(golden) > 0
