"""Run one worker adapter: `sds-worker --task llm --models mock-llm --connect host:port`."""

from __future__ import annotations

import argparse
import logging
import sys

from sds_workers.adapter import AdapterConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sds-worker", description=__doc__)
    parser.add_argument("--task", required=True, choices=["asr", "llm", "tts", "e2e", "judge"])
    parser.add_argument("--models", required=True,
                        help="comma-separated model ids; mock-* ids need no weights")
    parser.add_argument("--connect", default="127.0.0.1:9500", help="harness worker host:port")
    parser.add_argument("--worker-id", default="")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-new-tokens", type=int, default=64)
    parser.add_argument("--temperature", type=float, default=0.0)
    parser.add_argument("--judge-metrics", default="", help="comma-separated metric names (judge task)")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    host, port = args.connect.rsplit(":", 1)
    config = AdapterConfig(
        task=args.task,
        models=[m.strip() for m in args.models.split(",") if m.strip()],
        worker_id=args.worker_id,
        device=args.device,
        max_new_tokens=args.max_new_tokens,
        temperature=args.temperature,
        judge_metrics=[m.strip() for m in args.judge_metrics.split(",") if m.strip()],
    )
    serve(config, host, int(port))
    return 0


if __name__ == "__main__":
    sys.exit(main())
