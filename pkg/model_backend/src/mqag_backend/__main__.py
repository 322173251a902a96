"""CLI: python -m mqag_backend serve [flags]"""

from __future__ import annotations

import argparse
import sys

from .bundles import StartupError
from .config import BackendConfig, GeneratorMode
from .service import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mqag-backend")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("serve", help="run the mqag/1 service")
    run.add_argument("--host", default="127.0.0.1")
    run.add_argument("--port", type=int, default=8731)
    run.add_argument("--mode", default="two-stage", choices=["two-stage", "zero-shot-prompt"])
    run.add_argument(
        "--models",
        default=None,
        help="shorthand: one identifier for all three roles (e.g. 'lexical')",
    )
    run.add_argument("--question-model", default="lexical", help="G1 / completion model")
    run.add_argument("--distractor-model", default="lexical", help="G2 model")
    run.add_argument("--answer-model", default="lexical", help="answering model")
    run.add_argument("--device", default="cpu")
    run.add_argument("--max-context-tokens", type=int, default=4096)
    run.add_argument("--temperature", type=float, default=1.0)
    run.add_argument("--top-p", type=float, default=0.9)
    args = parser.parse_args(argv)

    question = args.models or args.question_model
    distractor = args.models or args.distractor_model
    answerer = args.models or args.answer_model
    try:
        config = BackendConfig(
            mode=GeneratorMode.parse(args.mode),
            question_model=question,
            distractor_model=distractor,
            answer_model=answerer,
            device=args.device,
            max_context_tokens=args.max_context_tokens,
            temperature=args.temperature,
            top_p=args.top_p,
        )
        serve(config, host=args.host, port=args.port)
    except StartupError as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
