"""Command line: descsel-export {export-store, export-pairs, build-pool}.

Exit codes match descsel: 0 ok, 2 config error, 3 data error, 4 I/O
error. LLM endpoint failures count as data errors; raw socket errors
surface as I/O.
"""
from __future__ import annotations

import argparse
import logging
from pathlib import Path

from . import contrastive, export
from .encoders import make_encoder
from .errors import ConfigError, DataError, LLMError

log = logging.getLogger("descsel_export")


def _encoder_from(args):
    return make_encoder(args.encoder, checkpoint=args.checkpoint, dim=args.dim)


def _add_encoder_flags(p) -> None:
    p.add_argument(
        "--encoder", choices=["hash", "clip"], default="hash",
        help="hash = deterministic digest encoder, clip = transformers checkpoint",
    )
    p.add_argument("--checkpoint", help="checkpoint id for --encoder clip")
    p.add_argument(
        "--dim", type=int, default=64, help="row width for --encoder hash"
    )


def cmd_export_store(args) -> int:
    out = export.export_store(
        args.data,
        args.out,
        _encoder_from(args),
        template=args.template,
        name=args.name,
        pool_file=args.pool,
    )
    log.info("exported store to %s", out)
    return 0


def cmd_export_pairs(args) -> int:
    keys, file_template = export.read_keys_file(args.keys)
    template = args.template or file_template
    rows = export.export_pairs(
        args.store, keys, _encoder_from(args), template=template
    )
    log.info("wrote %d pair rows into %s", rows, args.store)
    return 0


def make_client(args):
    """HTTP chat client wrapped with pacing and retries.

    Module-level so callers embedding the CLI can substitute their own
    client factory.
    """
    if not args.model:
        raise ConfigError("build-pool needs --model for the LLM endpoint")
    return contrastive.RateLimitedClient(
        contrastive.HttpChatClient(args.model),
        min_interval=args.min_interval,
        max_attempts=args.retries,
    )


def cmd_build_pool(args) -> int:
    if args.prompt_file:
        prompt = Path(args.prompt_file).read_text()
    else:
        prompt = contrastive.DEFAULT_PROMPT_TEMPLATE
    texts, origins = contrastive.build_contrastive_pool(
        args.store,
        args.results,
        make_client(args),
        args.out,
        top_k=args.top_k,
        cap=args.cap,
        prompt_template=prompt,
        neutral=args.neutral,
    )
    log.info(
        "pool of %d descriptions over %d classes written to %s",
        len(texts), len(set(origins)), args.out,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="descsel-export",
        description="Export embedding stores, pair tables and contrastive "
        "description pools for descsel.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-store", help="encode a dataset folder into a store")
    p.add_argument("--data", required=True, help="dataset root (train/ + test|val/)")
    p.add_argument("--out", required=True, help="store directory to write")
    p.add_argument("--template", default=export.DEFAULT_PROMPT_TEMPLATE)
    p.add_argument("--name", help="dataset name recorded in the manifest")
    p.add_argument("--pool", help="description pool JSON to embed alongside")
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_export_store)

    p = sub.add_parser(
        "export-pairs", help="encode the pair keys listed by `descsel emit-pairs`"
    )
    p.add_argument("--store", required=True, help="store directory to update")
    p.add_argument("--keys", required=True, help="pairs_keys.json from emit-pairs")
    p.add_argument("--template", help="overrides the template in the keys file")
    _add_encoder_flags(p)
    p.set_defaults(func=cmd_export_pairs)

    p = sub.add_parser(
        "build-pool", help="mine confused pairs and prompt an LLM for descriptors"
    )
    p.add_argument("--store", required=True, help="store directory (classnames)")
    p.add_argument(
        "--results", required=True,
        help="results.json from `descsel eval --setup cls-only`",
    )
    p.add_argument("--out", required=True, help="directory for pool + transcript")
    p.add_argument("--model", help="LLM id passed to the chat endpoint")
    p.add_argument("--top-k", type=int, default=3, help="rivals kept per class")
    p.add_argument("--cap", type=int, default=40, help="max descriptions per class")
    p.add_argument("--prompt-file", help="file with a {cls}/{rival} prompt template")
    p.add_argument("--neutral", default=contrastive.DEFAULT_NEUTRAL)
    p.add_argument("--min-interval", type=float, default=1.0)
    p.add_argument("--retries", type=int, default=3)
    p.set_defaults(func=cmd_build_pool)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except LLMError as exc:
        log.error("llm error: %s", exc)
        return 3
    except DataError as exc:
        log.error("data error: %s", exc)
        return 3
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return 4
