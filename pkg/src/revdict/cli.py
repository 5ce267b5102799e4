"""Command-line interface.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .checkpoint import CheckpointError
from .data import DataFormatError
from .metrics import report_to_json
from .pipeline import (
    ConfigError,
    cmd_align,
    cmd_ensemble_search,
    cmd_eval,
    cmd_lookup,
    cmd_predict,
    cmd_serve,
    cmd_train,
    cmd_translate_test,
    load_config,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _config_from(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    return cfg


def build_parser() -> _Parser:
    parser = _Parser(prog="revdict", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output directory")

    p = sub.add_parser("train", help="train one head per (encoder, target) pair")
    common(p)

    p = sub.add_parser("search", help="exhaustive ensemble subset search on dev")
    common(p)
    p.add_argument("checkpoints", nargs="+", help="head checkpoint files")

    p = sub.add_parser("align", help="train the cross-lingual aligner")
    common(p)
    p.add_argument("--head", required=True, help="source-language head checkpoint")

    p = sub.add_parser("predict", help="run an ensemble on the test set's glosses")
    common(p)
    p.add_argument("--manifest", required=True, help="ensemble manifest JSON")
    p.add_argument("--predictions", default=None, help="output predictions path")

    p = sub.add_parser(
        "translate-test", help="run an ensemble on pre-translated glosses"
    )
    common(p)
    p.add_argument("--manifest", required=True, help="ensemble manifest JSON")
    p.add_argument("--glosses", required=True, help="id->gloss JSONL translations")
    p.add_argument("--allow-partial", action="store_true", help="skip untranslated ids")
    p.add_argument("--predictions", default=None, help="output predictions path")

    p = sub.add_parser("eval", help="score a predictions dump")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dictionary", required=True, help="reference dictionary JSON")
    p.add_argument("--kind", required=True, choices=["electra", "sgns"])
    p.add_argument("--subtask", default="subtask1")
    p.add_argument("--split", default="test")
    p.add_argument("--pool-dictionary", default=None, help="override retrieval pool")
    p.add_argument("--out", default=None, help="write the report JSON here")

    p = sub.add_parser("lookup", help="offline reverse-dictionary lookup")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--definition", required=True)
    p.add_argument("-k", type=int, default=10)

    p = sub.add_parser("serve", help="run the HTTP lookup service")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--port", type=int, default=None, help="overrides REVDICT_PORT")
    p.add_argument("--static", default=None, help="static UI directory")
    return parser


def run(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "train":
        paths = cmd_train(_config_from(args))
        for p in paths:
            print(p)
    elif args.command == "search":
        csv_path, manifest_path = cmd_ensemble_search(_config_from(args), args.checkpoints)
        print(csv_path)
        print(manifest_path)
    elif args.command == "align":
        print(cmd_align(_config_from(args), args.head))
    elif args.command == "predict":
        print(cmd_predict(_config_from(args), args.manifest, args.predictions))
    elif args.command == "translate-test":
        pred_path, report, kind = cmd_translate_test(
            _config_from(args),
            args.glosses,
            args.manifest,
            allow_partial=args.allow_partial,
            out_path=args.predictions,
        )
        print(pred_path)
        print(json.dumps(report_to_json(report, "subtask2", kind, "test")))
    elif args.command == "eval":
        report, text = cmd_eval(
            args.predictions,
            args.dictionary,
            args.kind,
            subtask=args.subtask,
            split=args.split,
            pool_dictionary=args.pool_dictionary,
            out_path=args.out,
        )
        print(text, end="")
    elif args.command == "lookup":
        results = cmd_lookup(_config_from(args), args.manifest, args.definition, args.k)
        for rid, word, score in results:
            print(json.dumps({"id": rid, "word": word, "score": score}))
    elif args.command == "serve":
        cmd_serve(_config_from(args), args.manifest, port=args.port, static_dir=args.static)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, CheckpointError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
