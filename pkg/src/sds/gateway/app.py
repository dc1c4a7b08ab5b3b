"""Streaming conversation gateway and REST surface.

One websocket connection drives one session: binary frames carry raw PCM
from the client microphone, text frames carry JSON control messages. Server
messages per turn keep a fixed order on the wire: transcript, response text,
audio chunks (<=100 ms each, so barge-in can cut in), then turn metrics.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from fastapi import FastAPI, WebSocket
from fastapi.responses import JSONResponse
from starlette.websockets import WebSocketDisconnect

from sds.audio import AudioFormat, StreamFramer
from sds.gateway.feedback import (
    FeedbackRating,
    FeedbackScales,
    InvalidLevel,
    UnknownTurn,
    record_feedback,
)
from sds.gateway.storage import StorageConfig, persist_session
from sds.metrics.diversity import auto_bleu2, self_bleu2, vert
from sds.metrics.judges import MetricValue, judge_referenced_asr, request_judge_metrics
from sds.metrics.textnorm import normalize_text
from sds.orchestrator import (
    BargeIn,
    PipelineConfig,
    SessionDriver,
    SessionExpired,
    TurnRecord,
    TurnStarted,
    VadState,
    WorkerRegistry,
)

logger = logging.getLogger(__name__)

DEFAULT_JUDGE_METRICS = (
    "utmos",
    "dns_overall",
    "dns_p808",
    "plcmos",
    "ssqa",
    "perplexity",
    "dialogpt_perplexity",
    "bert_similarity",
)


@dataclass
class GatewayConfig:
    storage: StorageConfig = field(default_factory=StorageConfig)
    feedback_scales: FeedbackScales = field(default_factory=FeedbackScales)
    judge_metrics: tuple[str, ...] = DEFAULT_JUDGE_METRICS
    judge_asr_worker_ids: tuple[str, ...] = ()
    chunk_pace_s: float = 0.0
    clock: Callable[[], float] = time.monotonic


@dataclass
class SessionContext:
    driver: SessionDriver
    metrics: list[MetricValue] = field(default_factory=list)
    privacy_ack: bool = False
    persisted: bool = False


def catalog(registry: WorkerRegistry) -> dict[str, Any]:
    """Registered workers grouped by task, plus the pipeline variation count."""
    tasks: dict[str, list[dict[str, Any]]] = {}
    for descriptor in registry.descriptors():
        tasks.setdefault(descriptor.task, []).append(
            {
                "worker_id": descriptor.worker_id,
                "models": list(descriptor.models),
                "loaded_model": descriptor.loaded_model,
                "judge_metrics": list(descriptor.judge_metrics),
            }
        )
    for entries in tasks.values():
        entries.sort(key=lambda e: e["worker_id"])
    model_count = {
        task: sum(len(e["models"]) for e in tasks.get(task, [])) for task in ("asr", "llm", "tts", "e2e")
    }
    cascaded = model_count["asr"] * model_count["llm"] * model_count["tts"]
    return {"tasks": tasks, "variations": cascaded + model_count["e2e"]}


def compute_turn_metrics(
    registry: WorkerRegistry, ctx: SessionContext, record: TurnRecord, cfg: GatewayConfig
) -> list[MetricValue]:
    """Per-turn metric batch, computed off the audio critical path."""
    scope = f"turn:{record.turn_id}"
    values: list[MetricValue] = [
        MetricValue(name, ms, "native", scope)
        for name, ms in record.latency.to_json_obj().items()
    ]

    if cfg.judge_asr_worker_ids:
        if record.asr_text is None:
            values.append(
                MetricValue("wer", None, "none", scope, status="skipped", detail="no transcript in e2e mode")
            )
        else:
            judge_texts = []
            for worker_id in cfg.judge_asr_worker_ids:
                try:
                    descriptor = registry.descriptor(worker_id)
                    if descriptor.loaded_model is None:
                        registry.load_model(worker_id, descriptor.models[0])
                    result = registry.dispatch_to(
                        worker_id,
                        "infer",
                        {},
                        audio=record.user_segment.to_bytes(),
                        audio_rate=record.user_segment.format.sample_rate_hz,
                    )
                    judge_texts.append((worker_id, result.body.get("text", "")))
                except Exception as exc:  # noqa: BLE001 - judge failures never fail the turn
                    values.append(
                        MetricValue("wer", None, f"judge:{worker_id}", scope, status="error", detail=str(exc))
                    )
            if judge_texts:
                values.extend(judge_referenced_asr(record.asr_text, judge_texts, scope=scope))

    if cfg.judge_metrics:
        audio = None
        if len(record.response_audio):
            audio = (record.response_audio.astype("<i2").tobytes(), record.response_rate)
        values.extend(
            request_judge_metrics(
                registry,
                cfg.judge_metrics,
                scope=scope,
                response_text=record.response_text,
                context_text=record.asr_text,
                audio=audio,
            )
        )

    responses = [
        normalize_text(t.response_text)
        for t in ctx.driver.history
        if t.ok and t.response_text.strip()
    ]
    responses = [r for r in responses if r]
    if len(responses) >= 2:
        s = self_bleu2(responses)
        a = auto_bleu2(responses)
        values.append(MetricValue("self_bleu2", s, "native", "conversation"))
        values.append(MetricValue("auto_bleu2", a, "native", "conversation"))
        values.append(MetricValue("vert", vert(s, a), "native", "conversation"))
    return values


def create_app(registry: WorkerRegistry, config: GatewayConfig | None = None) -> FastAPI:
    cfg = config or GatewayConfig()
    app = FastAPI(title="spoken-dialogue gateway")
    sessions: dict[str, SessionContext] = {}
    sessions_lock = threading.Lock()

    app.state.registry = registry
    app.state.sessions = sessions
    app.state.config = cfg

    def _create_session(pipeline: PipelineConfig, session_id: str | None = None) -> SessionContext:
        driver = SessionDriver(registry, pipeline, session_id=session_id, clock=cfg.clock)
        ctx = SessionContext(driver=driver)
        with sessions_lock:
            sessions[driver.session_id] = ctx
        return ctx

    def _maybe_persist(ctx: SessionContext) -> list[str]:
        if ctx.persisted or not cfg.storage.enabled:
            return []
        if cfg.storage.privacy_notice_ack_required and not ctx.privacy_ack:
            logger.info("session %s not persisted: privacy notice not acknowledged", ctx.driver.session_id)
            return []
        paths = persist_session(ctx.driver, cfg.storage, metrics=ctx.metrics)
        ctx.persisted = True
        return [str(p) for p in paths]

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/models")
    def models() -> dict[str, Any]:
        return catalog(registry)

    @app.post("/sessions")
    def create_session(body: dict[str, Any]) -> JSONResponse:
        try:
            pipeline = PipelineConfig.from_json_obj(body.get("config", body))
            ctx = _create_session(pipeline, session_id=body.get("session_id"))
        except (ValueError, KeyError, LookupError) as exc:
            return JSONResponse({"error": type(exc).__name__, "detail": str(exc)}, status_code=400)
        return JSONResponse({"session_id": ctx.driver.session_id, "state": ctx.driver.state.value})

    @app.get("/sessions/{session_id}/metrics")
    def session_metrics(session_id: str) -> JSONResponse:
        with sessions_lock:
            ctx = sessions.get(session_id)
        if ctx is None:
            return JSONResponse({"error": "UnknownSession"}, status_code=404)
        return JSONResponse(
            {
                "session_id": session_id,
                "state": ctx.driver.state.value,
                "metrics": [m.to_json_obj() for m in ctx.metrics],
                "turns": [
                    {
                        "turn_id": t.turn_id,
                        "asr_text": t.asr_text,
                        "response_text": t.response_text,
                        "interrupted": t.interrupted,
                        "error": t.error,
                        "latency": t.latency.to_json_obj(),
                    }
                    for t in ctx.driver.history
                ],
            }
        )

    async def _send_json(ws: WebSocket, obj: dict[str, Any]) -> None:
        await ws.send_text(json.dumps(obj, sort_keys=True))

    async def _run_turn_flow(ws: WebSocket, ctx: SessionContext, segment) -> None:
        record = await asyncio.to_thread(ctx.driver.run_turn, segment)
        if record.error is not None:
            await _send_json(ws, {"type": "status", "status": "error", "detail": record.error})
            return
        if record.asr_text is not None:
            await _send_json(ws, {"type": "asr_text", "turn_id": record.turn_id, "text": record.asr_text})
        await _send_json(
            ws, {"type": "response_text", "turn_id": record.turn_id, "text": record.response_text}
        )
        first_chunk = True
        while True:
            chunk = ctx.driver.next_audio_chunk()
            if chunk is None:
                break
            await ws.send_bytes(chunk)
            if first_chunk:
                first_chunk = False
            await asyncio.sleep(cfg.chunk_pace_s)
        metrics = await asyncio.to_thread(compute_turn_metrics, registry, ctx, record, cfg)
        ctx.metrics.extend(metrics)
        await _send_json(
            ws,
            {
                "type": "turn_metrics",
                "turn_id": record.turn_id,
                "metrics": [m.to_json_obj() for m in metrics],
            },
        )

    @app.websocket("/ws/session")
    async def ws_session(ws: WebSocket) -> None:
        await ws.accept()
        ctx: SessionContext | None = None
        framer: StreamFramer | None = None
        turn_task: asyncio.Task | None = None

        session_id = ws.query_params.get("session_id")
        if session_id:
            with sessions_lock:
                ctx = sessions.get(session_id)
            if ctx is None:
                await _send_json(ws, {"type": "status", "status": "error", "detail": "UnknownSession"})
                await ws.close()
                return
            framer = StreamFramer(ctx.driver.audio_format, ctx.driver.config.vad.frame_ms)
            await _send_json(ws, {"type": "status", "status": "ready"})

        try:
            while True:
                message = await ws.receive()
                if message["type"] == "websocket.disconnect":
                    break
                data_bytes = message.get("bytes")
                data_text = message.get("text")

                if data_bytes is not None:
                    if ctx is None or framer is None:
                        await _send_json(
                            ws, {"type": "status", "status": "error", "detail": "no session configured"}
                        )
                        continue
                    try:
                        session_events = []
                        for frame in framer.push(data_bytes):
                            session_events.extend(ctx.driver.ingest_frame(frame))
                    except SessionExpired:
                        await _send_json(ws, {"type": "session_expired"})
                        break
                    for event in session_events:
                        if isinstance(event, VadState):
                            await _send_json(
                                ws,
                                {"type": "vad_state", "state": "speaking" if event.speaking else "idle"},
                            )
                        elif isinstance(event, BargeIn):
                            # playback already cancelled; the audio stream just stops
                            logger.info("barge-in on turn %s", event.turn_id)
                        elif isinstance(event, TurnStarted):
                            if turn_task is not None and not turn_task.done():
                                await turn_task
                            turn_task = asyncio.create_task(_run_turn_flow(ws, ctx, event.segment))
                    continue

                if data_text is None:
                    continue
                try:
                    client_message = json.loads(data_text)
                    msg_type = client_message.get("type")
                except json.JSONDecodeError:
                    await _send_json(ws, {"type": "status", "status": "error", "detail": "malformed message"})
                    continue

                if msg_type == "select_config":
                    try:
                        pipeline = PipelineConfig.from_json_obj(client_message["config"])
                    except (ValueError, KeyError) as exc:
                        await _send_json(ws, {"type": "status", "status": "error", "detail": str(exc)})
                        continue
                    await _send_json(ws, {"type": "status", "status": "loading"})
                    try:
                        if ctx is None:
                            ctx = await asyncio.to_thread(_create_session, pipeline)
                        else:
                            await asyncio.to_thread(ctx.driver.select_config, pipeline)
                    except (ValueError, KeyError, LookupError, RuntimeError) as exc:
                        await _send_json(
                            ws,
                            {"type": "status", "status": "error", "detail": f"{type(exc).__name__}: {exc}"},
                        )
                        continue
                    if client_message.get("privacy_ack"):
                        ctx.privacy_ack = True
                    framer = StreamFramer(ctx.driver.audio_format, ctx.driver.config.vad.frame_ms)
                    await _send_json(
                        ws,
                        {"type": "status", "status": "ready", "session_id": ctx.driver.session_id},
                    )
                elif msg_type == "feedback":
                    if ctx is None:
                        await _send_json(ws, {"type": "status", "status": "error", "detail": "no session"})
                        continue
                    try:
                        rating = FeedbackRating(
                            turn_id=client_message.get("turn_id"),
                            dimension=client_message.get("dimension", ""),
                            level=client_message.get("level"),
                        )
                        record_feedback(ctx.driver, rating)
                    except (UnknownTurn, InvalidLevel) as exc:
                        await _send_json(
                            ws,
                            {"type": "status", "status": "error", "detail": f"{type(exc).__name__}: {exc}"},
                        )
                        continue
                    await _send_json(
                        ws,
                        {
                            "type": "status",
                            "status": "ready",
                            "detail": "feedback_recorded",
                            "turn_id": rating.turn_id,
                        },
                    )
                elif msg_type == "end_session":
                    if turn_task is not None and not turn_task.done():
                        await turn_task
                    paths = _maybe_persist(ctx) if ctx is not None else []
                    await _send_json(
                        ws, {"type": "status", "status": "ready", "detail": "session_ended", "stored": paths}
                    )
                    break
                else:
                    await _send_json(
                        ws,
                        {"type": "status", "status": "error", "detail": f"unknown message type {msg_type!r}"},
                    )
        except WebSocketDisconnect:
            pass
        finally:
            if turn_task is not None and not turn_task.done():
                turn_task.cancel()
            if ctx is not None:
                try:
                    _maybe_persist(ctx)
                except Exception:  # noqa: BLE001 - never let teardown kill the handler
                    logger.exception("failed to persist session %s", ctx.driver.session_id)
            try:
                await ws.close()
            except RuntimeError:
                pass

    return app
