"""Worker wire protocol: framing, registry, mock workers, TCP endpoints."""

from sds.protocol.framing import (
    KIND_AUDIO,
    KIND_HEADER,
    BadKind,
    Frame,
    MalformedHeader,
    Message,
    ProtocolError,
    Truncated,
    decode_frame,
    decode_header,
    encode_frame,
    encode_header,
    encode_message,
)
from sds.protocol.mocks import CANNED_JUDGE_VALUES, default_mock_workers
from sds.protocol.registry import (
    DispatchResult,
    EmptyModelList,
    MalformedHello,
    NoWorkerForTask,
    UnknownModel,
    UnknownWorker,
    WorkerDescriptor,
    WorkerError,
    WorkerRegistry,
    WorkerTimeout,
)
from sds.protocol.server import WorkerServer
from sds.protocol.client import serve_worker

__all__ = [
    "KIND_HEADER",
    "KIND_AUDIO",
    "Frame",
    "Message",
    "ProtocolError",
    "Truncated",
    "BadKind",
    "MalformedHeader",
    "encode_frame",
    "decode_frame",
    "encode_header",
    "decode_header",
    "encode_message",
    "WorkerDescriptor",
    "WorkerRegistry",
    "DispatchResult",
    "MalformedHello",
    "EmptyModelList",
    "UnknownWorker",
    "UnknownModel",
    "NoWorkerForTask",
    "WorkerTimeout",
    "WorkerError",
    "WorkerServer",
    "serve_worker",
    "default_mock_workers",
    "CANNED_JUDGE_VALUES",
]
