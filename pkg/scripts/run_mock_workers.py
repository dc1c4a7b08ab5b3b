#!/usr/bin/env python3
"""Attach the built-in mock workers to a harness over TCP.

Useful for exercising the external-worker path end to end:
    python scripts/run_mock_workers.py --connect 127.0.0.1:9500
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sds.protocol import default_mock_workers  # noqa: E402
from sds.protocol.client import serve_worker_in_thread  # noqa: E402


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--connect", default="127.0.0.1:9500", help="harness worker host:port")
    args = parser.parse_args()
    host, port = args.connect.rsplit(":", 1)

    threads = [serve_worker_in_thread(worker, host, int(port)) for worker in default_mock_workers()]
    print(f"{len(threads)} mock workers attached to {args.connect}; Ctrl-C to stop")
    try:
        while any(t.is_alive() for t in threads):
            time.sleep(1.0)
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()
