"""Worker-side connection loop: attach a worker object to a harness.

Bridges any object with the mock-worker interface (``hello()`` and
``handle_message()``) onto the wire, so the same logic can run in-process or
as an external process.
"""

from __future__ import annotations

import logging
import socket
import threading

from sds.protocol.framing import Truncated, encode_message, read_message

logger = logging.getLogger(__name__)


def serve_worker(
    worker,
    host: str = "127.0.0.1",
    port: int = 9500,
    stop_event: threading.Event | None = None,
) -> None:
    """Connect, register, then answer requests until EOF or stop."""
    conn = socket.create_connection((host, port))
    try:
        conn.sendall(encode_message(worker.hello()))
        ack = read_message(conn)
        if ack.header.get("op") == "error":
            raise RuntimeError(f"registration rejected: {ack.header.get('error')}")
        while stop_event is None or not stop_event.is_set():
            try:
                request = read_message(conn)
            except Truncated:
                logger.info("harness closed the connection")
                return
            header, audio, rate = worker.handle_message(request.header, request.audio)
            conn.sendall(encode_message(header, audio, rate))
    finally:
        conn.close()


def serve_worker_in_thread(worker, host: str, port: int) -> threading.Thread:
    thread = threading.Thread(
        target=serve_worker, args=(worker, host, port), name=f"worker-{worker.worker_id}", daemon=True
    )
    thread.start()
    return thread
