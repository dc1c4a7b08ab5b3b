"""TCP listener that accepts external worker connections.

Each worker connects, sends a hello message, and is registered; duplicate
worker ids supersede the previous registration (the old socket is closed).
The harness is the only side that sends requests afterwards, so no
per-connection reader thread is needed.
"""

from __future__ import annotations

import logging
import socket
import threading

from sds.protocol.framing import ProtocolError, encode_message, read_message
from sds.protocol.registry import WorkerRegistry

logger = logging.getLogger(__name__)


class WorkerServer:
    def __init__(self, registry: WorkerRegistry, host: str = "127.0.0.1", port: int = 0):
        self.registry = registry
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        self.host, self.port = self._sock.getsockname()
        self._stopping = threading.Event()
        self._thread = threading.Thread(target=self._accept_loop, name="worker-accept", daemon=True)
        self._thread.start()

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                conn, addr = self._sock.accept()
            except OSError:
                return
            try:
                hello = read_message(conn)
                descriptor = self.registry.register_socket(hello.header, conn)
                conn.sendall(
                    encode_message(
                        {"op": "hello", "status": "ok", "worker_id": descriptor.worker_id}
                    )
                )
                logger.info("worker %s (%s) attached from %s", descriptor.worker_id, descriptor.task, addr)
            except ProtocolError as exc:
                logger.warning("rejecting worker from %s: %s", addr, exc)
                try:
                    conn.sendall(
                        encode_message(
                            {"op": "error", "error": {"code": type(exc).__name__, "message": str(exc)}}
                        )
                    )
                finally:
                    conn.close()

    def close(self) -> None:
        self._stopping.set()
        try:
            self._sock.close()
        except OSError:
            pass
        self._thread.join(timeout=2.0)

    def __enter__(self) -> "WorkerServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
