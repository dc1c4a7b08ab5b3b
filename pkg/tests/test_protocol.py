from __future__ import annotations

import socket
import threading
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sds.protocol import (
    BadKind,
    EmptyModelList,
    MalformedHello,
    NoWorkerForTask,
    Truncated,
    UnknownModel,
    UnknownWorker,
    WorkerError,
    WorkerRegistry,
    WorkerServer,
    WorkerTimeout,
    decode_frame,
    default_mock_workers,
    encode_frame,
    serve_worker,
)
from sds.protocol.framing import (
    KIND_AUDIO,
    KIND_HEADER,
    decode_message,
    encode_header,
    encode_message,
    read_message,
)
from sds.protocol.mocks import (
    CANNED_JUDGE_VALUES,
    EchoAsrWorker,
    MockJudgeWorker,
    TemplateLlmWorker,
    ToneTtsWorker,
    tone_for_text,
)
from sds.protocol.registry import parse_hello


class TestFrameCodec:
    def test_ping_frame_bytes(self):
        payload = b'{"op":"ping"}'
        assert len(payload) == 13
        wire = encode_frame(KIND_HEADER, payload)
        assert wire[:5] == bytes([0x0E, 0x00, 0x00, 0x00, 0x00])
        assert wire[5:] == payload

    def test_minimal_audio_frame(self):
        assert encode_frame(KIND_AUDIO, b"") == bytes([0x01, 0x00, 0x00, 0x00, 0x01])

    def test_roundtrip_1mib(self):
        payload = np.random.default_rng(0).integers(0, 256, size=1 << 20, dtype=np.uint8).tobytes()
        frame, consumed = decode_frame(encode_frame(KIND_AUDIO, payload))
        assert frame.kind == KIND_AUDIO
        assert frame.payload == payload
        assert consumed == len(payload) + 5

    def test_truncated(self):
        wire = encode_frame(KIND_HEADER, b"hello")
        with pytest.raises(Truncated):
            decode_frame(wire[:-1])
        with pytest.raises(Truncated):
            decode_frame(wire[:3])

    def test_bad_kind(self):
        wire = bytearray(encode_frame(KIND_HEADER, b"x"))
        wire[4] = 7
        with pytest.raises(BadKind):
            decode_frame(bytes(wire))
        with pytest.raises(BadKind):
            encode_frame(3, b"x")

    def test_decode_consumes_exactly(self):
        wire = encode_frame(KIND_HEADER, b"abc") + b"trailing"
        frame, consumed = decode_frame(wire)
        assert frame.payload == b"abc"
        assert wire[consumed:] == b"trailing"

    @given(st.sampled_from([0, 1]), st.binary(max_size=2048))
    @settings(max_examples=300, deadline=None)
    def test_roundtrip_property(self, kind, payload):
        frame, consumed = decode_frame(encode_frame(kind, payload))
        assert (frame.kind, frame.payload) == (kind, payload)
        assert consumed == 4 + 1 + len(payload)

    def test_message_with_audio_declares_meta(self):
        pcm = b"\x01\x00\x02\x00"
        wire = encode_message({"op": "infer", "body": {}}, pcm, 16000)
        message, consumed = decode_message(wire)
        assert consumed == len(wire)
        assert message.audio == pcm
        assert message.header["audio"] == {"sample_rate_hz": 16000, "sample_count": 2}

    def test_header_canonical(self):
        assert encode_header({"b": 1, "a": 2}) == b'{"a":2,"b":1}'


class TestParseHello:
    def test_basic(self):
        descriptor = parse_hello({"op": "hello", "worker_id": "w", "task": "asr", "models": ["m1", "m2"]})
        assert descriptor.loaded_model is None
        assert descriptor.models == ["m1", "m2"]

    def test_judge_without_metrics_rejected(self):
        with pytest.raises(EmptyModelList):
            parse_hello(
                {"op": "hello", "worker_id": "j", "task": "judge", "models": ["m"], "judge_metrics": []}
            )

    def test_empty_models_rejected(self):
        with pytest.raises(EmptyModelList):
            parse_hello({"op": "hello", "worker_id": "w", "task": "asr", "models": []})

    @pytest.mark.parametrize(
        "header",
        [
            {"op": "infer"},
            {"op": "hello", "worker_id": "", "task": "asr", "models": ["m"]},
            {"op": "hello", "worker_id": "w", "task": "nope", "models": ["m"]},
            {"op": "hello", "worker_id": "w", "task": "asr", "models": ["m"], "judge_metrics": ["x"]},
        ],
    )
    def test_malformed(self, header):
        with pytest.raises(MalformedHello):
            parse_hello(header)


class TestRegistry:
    def test_duplicate_id_supersedes(self):
        registry = WorkerRegistry()
        registry.register_mock(EchoAsrWorker("dup", ["m1"]))
        registry.register_mock(EchoAsrWorker("dup", ["m2"]))
        assert len(registry.descriptors()) == 1
        assert registry.descriptor("dup").models == ["m2"]

    def test_load_idempotent_single_worker_side_load(self, registry):
        worker = EchoAsrWorker("asr2", ["ma"])
        registry.register_mock(worker)
        registry.load_model("asr2", "ma")
        registry.load_model("asr2", "ma")
        assert worker.load_count == 1
        assert registry.descriptor("asr2").loaded_model == "ma"

    def test_switch_unloads_previous(self, registry):
        a = EchoAsrWorker("worker-a", ["m1"])
        b = EchoAsrWorker("worker-b", ["m3"])
        registry.register_mock(a)
        registry.register_mock(b)
        registry.load_model("worker-a", "m1")
        registry.unload_model("worker-a")
        registry.load_model("worker-b", "m3")
        assert a.loaded_model is None
        assert b.loaded_model == "m3"
        loaded = registry.loaded_models_by_task()["asr"]
        assert "worker-a" not in loaded and "worker-b" in loaded

    def test_unknown_worker_and_model(self, registry):
        with pytest.raises(UnknownWorker):
            registry.load_model("ghost", "m")
        with pytest.raises(UnknownModel):
            registry.load_model("mock-asr", "not-served")

    def test_dispatch_without_task(self):
        registry = WorkerRegistry()
        with pytest.raises(NoWorkerForTask):
            registry.dispatch("asr", {})

    def test_worker_error_surfaced_verbatim(self, registry):
        registry.load_model("mock-asr", "echo-asr-v1")
        with pytest.raises(WorkerError) as info:
            registry.dispatch("asr", {})  # no audio attached
        assert "audio" in str(info.value)


class TestMockContracts:
    def test_echo_asr_duration_stamp(self, registry):
        registry.load_model("mock-asr", "echo-asr-v1")
        pcm = np.zeros(16000, dtype=np.int16).tobytes()
        result = registry.dispatch("asr", {}, audio=pcm, audio_rate=16000)
        assert result.body == {"text": "mock transcript 1.00s"}
        assert result.latency_ms > 0

    def test_template_llm(self, registry):
        registry.load_model("mock-llm", "template-llm-v1")
        result = registry.dispatch("llm", {"text": "T"})
        assert result.body == {"text": "echo: T"}

    def test_tone_tts_length_rule(self, registry):
        registry.load_model("mock-tts", "tone-tts-v1")
        result = registry.dispatch("tts", {"text": "x" * 27})
        assert result.audio_rate == 16000
        assert len(result.audio) // 2 == int(1.5 * 16000)

    def test_tone_deterministic(self):
        assert tone_for_text("abc") == tone_for_text("abc")

    def test_mock_judge_canned_value(self, registry):
        judges = registry.judges_for_metric("utmos")
        assert len(judges) == 1
        result = registry.dispatch_to(judges[0].worker_id, "infer", {"metric": "utmos"})
        assert result.body == {"metric": "utmos", "value": 4.0}

    def test_mock_judge_covers_expected_metrics(self):
        judge = MockJudgeWorker("j")
        for metric in ("utmos", "dns_overall", "dns_p808", "plcmos", "ssqa",
                       "perplexity", "dialogpt_perplexity", "bert_similarity"):
            assert metric in judge.judge_metrics
            assert CANNED_JUDGE_VALUES[metric] == pytest.approx(judge.values[metric])

    def test_infer_before_load_fails(self, registry):
        with pytest.raises((WorkerError, NoWorkerForTask)):
            registry.dispatch("tts", {"text": "hi"})

    def test_request_ids_strictly_increase(self):
        seen = []

        class Spy(TemplateLlmWorker):
            def handle_message(self, header, audio):
                seen.append(header["request_id"])
                return super().handle_message(header, audio)

        registry = WorkerRegistry()
        registry.register_mock(Spy("spy", ["m"]))
        registry.load_model("spy", "m")
        for _ in range(5):
            registry.dispatch("llm", {"text": "x"})
        assert seen == sorted(seen)
        assert len(set(seen)) == len(seen)


class SlowLlmWorker(TemplateLlmWorker):
    def __init__(self, worker_id, models, delay_s):
        super().__init__(worker_id, models)
        self.delay_s = delay_s

    def infer(self, body, audio, rate):
        time.sleep(self.delay_s)
        return super().infer(body, audio, rate)


class TestTimeouts:
    def test_slow_in_process_worker_times_out(self):
        registry = WorkerRegistry()
        registry.register_mock(SlowLlmWorker("slow", ["m"], delay_s=0.08))
        registry.load_model("slow", "m")
        with pytest.raises(WorkerTimeout):
            registry.dispatch("llm", {"text": "x"}, deadline_ms=20)

    def test_dead_socket_worker_times_out(self):
        registry = WorkerRegistry()
        with WorkerServer(registry, port=0) as server:
            conn = socket.create_connection((server.host, server.port))
            conn.sendall(
                encode_message(
                    {"op": "hello", "worker_id": "dead", "task": "llm", "models": ["m"]}
                )
            )
            read_message(conn)  # ack
            deadline = time.time() + 2.0
            while not registry.workers_for_task("llm") and time.time() < deadline:
                time.sleep(0.01)
            started = time.perf_counter()
            with pytest.raises(WorkerTimeout):
                registry.dispatch_to("dead", "infer", {"text": "x"}, deadline_ms=100)
            elapsed_ms = (time.perf_counter() - started) * 1000
            assert elapsed_ms >= 95
            conn.close()


class TestSocketPath:
    def test_mock_over_tcp_matches_in_process(self, registry):
        socket_registry = WorkerRegistry()
        with WorkerServer(socket_registry, port=0) as server:
            worker = TemplateLlmWorker("tcp-llm", ["m"])
            thread = threading.Thread(
                target=serve_worker, args=(worker, server.host, server.port), daemon=True
            )
            thread.start()
            deadline = time.time() + 2.0
            while not socket_registry.workers_for_task("llm") and time.time() < deadline:
                time.sleep(0.01)
            socket_registry.load_model("tcp-llm", "m")
            result = socket_registry.dispatch("llm", {"text": "hello"})
            assert result.body == {"text": "echo: hello"}

            registry.load_model("mock-llm", "template-llm-v1")
            in_process = registry.dispatch("llm", {"text": "hello"})
            assert in_process.body == result.body
            socket_registry.close()

    def test_audio_roundtrip_over_tcp(self):
        registry = WorkerRegistry()
        with WorkerServer(registry, port=0) as server:
            worker = ToneTtsWorker("tcp-tts", ["m"])
            threading.Thread(
                target=serve_worker, args=(worker, server.host, server.port), daemon=True
            ).start()
            deadline = time.time() + 2.0
            while not registry.workers_for_task("tts") and time.time() < deadline:
                time.sleep(0.01)
            registry.load_model("tcp-tts", "m")
            result = registry.dispatch("tts", {"text": "0123456789"})
            assert result.audio == tone_for_text("0123456789")
            assert result.audio_rate == 16000
            registry.close()

    def test_out_of_order_responses_reassociated(self):
        registry = WorkerRegistry()
        with WorkerServer(registry, port=0) as server:
            def scripted_worker():
                conn = socket.create_connection((server.host, server.port))
                conn.sendall(
                    encode_message(
                        {"op": "hello", "worker_id": "ooo", "task": "llm", "models": ["m"]}
                    )
                )
                read_message(conn)  # ack
                request = read_message(conn)
                rid = request.header["request_id"]
                # decoy response with a stale id arrives first
                conn.sendall(
                    encode_message({"op": "infer", "request_id": rid - 1000, "status": "ok",
                                    "body": {"text": "stale"}})
                )
                conn.sendall(
                    encode_message({"op": "infer", "request_id": rid, "status": "ok",
                                    "body": {"text": "fresh"}})
                )
                conn.close()

            threading.Thread(target=scripted_worker, daemon=True).start()
            deadline = time.time() + 2.0
            while not registry.workers_for_task("llm") and time.time() < deadline:
                time.sleep(0.01)
            result = registry.dispatch_to("ooo", "infer", {"text": "x"}, deadline_ms=2000)
            assert result.body == {"text": "fresh"}
            registry.close()

    def test_duplicate_socket_registration_closes_old(self):
        registry = WorkerRegistry()
        with WorkerServer(registry, port=0) as server:
            first = socket.create_connection((server.host, server.port))
            first.sendall(
                encode_message({"op": "hello", "worker_id": "dup", "task": "llm", "models": ["m1"]})
            )
            read_message(first)
            second = socket.create_connection((server.host, server.port))
            second.sendall(
                encode_message({"op": "hello", "worker_id": "dup", "task": "llm", "models": ["m2"]})
            )
            read_message(second)
            deadline = time.time() + 2.0
            while time.time() < deadline:
                descriptors = [d for d in registry.descriptors() if d.worker_id == "dup"]
                if descriptors and descriptors[0].models == ["m2"]:
                    break
                time.sleep(0.01)
            assert len(registry.descriptors()) == 1
            assert registry.descriptor("dup").models == ["m2"]
            registry.close()
