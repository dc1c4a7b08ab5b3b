#!/usr/bin/env python3
"""Run the conversation gateway.

Example:
    python scripts/run_gateway.py --mock-workers --http-port 8080
External workers attach on --worker-port; the browser console connects to
ws://host:http-port/ws/session.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import uvicorn  # noqa: E402

from sds.gateway.app import GatewayConfig, create_app  # noqa: E402
from sds.gateway.storage import StorageConfig  # noqa: E402
from sds.protocol import WorkerRegistry, WorkerServer, default_mock_workers  # noqa: E402


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--http-port", type=int, default=int(os.environ.get("SDS_HTTP_PORT", 8080)))
    parser.add_argument("--worker-port", type=int, default=int(os.environ.get("SDS_WORKER_PORT", 9500)))
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--storage-root", default=None)
    parser.add_argument("--enable-storage", action="store_true",
                        help="persist sessions under --storage-root (off by default)")
    parser.add_argument("--mock-workers", action="store_true",
                        help="register the built-in deterministic mock workers")
    parser.add_argument("--judge-asr", default="",
                        help="comma-separated asr worker ids used as transcript judges")
    parser.add_argument("--pace", type=float, default=0.1,
                        help="seconds between 100 ms response-audio chunks (0 = as fast as possible)")
    args = parser.parse_args()

    registry = WorkerRegistry()
    if args.mock_workers:
        for worker in default_mock_workers():
            registry.register_mock(worker)
    server = WorkerServer(registry, host=args.host, port=args.worker_port)
    print(f"worker port: {server.port}")

    storage = StorageConfig(
        enabled=args.enable_storage,
        root_path=Path(args.storage_root) if args.storage_root else None,
    )
    config = GatewayConfig(
        storage=storage,
        judge_asr_worker_ids=tuple(x for x in args.judge_asr.split(",") if x),
        chunk_pace_s=args.pace,
    )
    app = create_app(registry, config)
    try:
        uvicorn.run(app, host=args.host, port=args.http_port, log_level="info")
    finally:
        server.close()
        registry.close()


if __name__ == "__main__":
    main()
