"""Batch evaluation command line: `sds-eval asr|llm|tts|turn-taking|all`.

Workers come from in-process mocks (`--mock-workers`) or attach over TCP on
`--worker-port` (also honored from SDS_WORKER_PORT). Reports are deterministic
for identical inputs; exit code is nonzero when any utterance-level error
occurred unless `--allow-partial` is set.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from pathlib import Path

import sds
from sds.corpus import load_corpus
from sds.evaluation import EvalOutcome, eval_asr, eval_llm, eval_tts, eval_turn_taking
from sds.metrics.turntaking import BackchannelLexicon
from sds.protocol import WorkerRegistry, WorkerServer, default_mock_workers
from sds.reports import FORMATS, config_digest, render_report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sds-eval", description=__doc__)
    parser.add_argument("command", choices=["asr", "llm", "tts", "turn-taking", "all"])
    parser.add_argument("--corpus", required=True, help="path to a JSONL corpus file")
    parser.add_argument("--context-source", default="ground_truth",
                        help="ground_truth or asr:<model> (llm contexts)")
    parser.add_argument("--input-source", default="ground_truth",
                        help="ground_truth or llm:<model> (tts inputs)")
    parser.add_argument("--judges", default="all",
                        help="comma-separated ASR judge worker ids for tts intelligibility, or all/none")
    parser.add_argument("--models", default=None,
                        help="comma-separated model ids to evaluate (default: all registered)")
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument("--format", default="text-table", choices=list(FORMATS))
    parser.add_argument("--lexicon", default=None, help="backchannel lexicon file, one phrase per line")
    parser.add_argument("--allow-partial", action="store_true",
                        help="exit 0 even when some utterances failed")
    parser.add_argument("--mock-workers", action="store_true",
                        help="register the built-in deterministic mock workers")
    parser.add_argument("--worker-port", type=int,
                        default=int(os.environ.get("SDS_WORKER_PORT", 0)) or None,
                        help="listen for external workers on this port")
    parser.add_argument("--wait-workers-s", type=float, default=0.0,
                        help="grace period for external workers to attach")
    parser.add_argument("--deadline-ms", type=int, default=10_000)
    return parser


def _asr_judge_ids(registry: WorkerRegistry, judges_arg: str) -> tuple[str, ...]:
    if judges_arg == "none":
        return ()
    if judges_arg == "all":
        return tuple(sorted(d.worker_id for d in registry.workers_for_task("asr")))
    return tuple(part.strip() for part in judges_arg.split(",") if part.strip())


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    registry = WorkerRegistry()
    server = None
    try:
        if args.mock_workers:
            for worker in default_mock_workers():
                registry.register_mock(worker)
        if args.worker_port is not None:
            server = WorkerServer(registry, port=args.worker_port)
            if args.wait_workers_s > 0:
                time.sleep(args.wait_workers_s)
        if not registry.descriptors():
            print("no workers registered; use --mock-workers or --worker-port", file=sys.stderr)
            return 2

        corpus = load_corpus(args.corpus)
        models = [m.strip() for m in args.models.split(",")] if args.models else None
        lexicon = BackchannelLexicon.from_file(args.lexicon) if args.lexicon else None
        asr_judges = _asr_judge_ids(registry, args.judges)

        outcomes: list[EvalOutcome] = []
        if args.command in ("asr", "all"):
            outcomes.append(eval_asr(corpus, registry, models, asr_judges=asr_judges,
                                     deadline_ms=args.deadline_ms))
        if args.command in ("llm", "all"):
            outcomes.append(eval_llm(corpus, registry, models, context_source=args.context_source,
                                     deadline_ms=args.deadline_ms))
        if args.command in ("tts", "all"):
            outcomes.append(eval_tts(corpus, registry, models, input_source=args.input_source,
                                     asr_judges=asr_judges, deadline_ms=args.deadline_ms))
        if args.command in ("turn-taking", "all"):
            outcomes.append(eval_turn_taking(corpus, lexicon))

        provenance = {
            "corpus": args.corpus,
            "corpus_sha256": hashlib.sha256(Path(args.corpus).read_bytes()).hexdigest()[:16],
            "config_digest": config_digest(
                {
                    "command": args.command,
                    "context_source": args.context_source,
                    "input_source": args.input_source,
                    "judges": args.judges,
                    "models": args.models,
                }
            ),
            "tool_version": sds.__version__,
        }
        for outcome in outcomes:
            outcome.report.provenance.update(provenance)

        payload = render_report([o.report for o in outcomes], format=args.format)
        if args.out:
            Path(args.out).write_bytes(payload)
        else:
            sys.stdout.buffer.write(payload)

        error_count = sum(o.error_count for o in outcomes)
        if error_count and not args.allow_partial:
            print(f"{error_count} utterance-level errors", file=sys.stderr)
            return 1
        return 0
    finally:
        if server is not None:
            server.close()
        registry.close()


if __name__ == "__main__":
    sys.exit(main())
