"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 I/O error.
Option precedence: explicit flags beat --config file entries, which beat
built-in defaults.  DESCSEL_STORE_ROOT names a directory that bare store
names are resolved against.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import report as report_mod
from .errors import ConfigError, DataError
from .evaluator import (
    EvalConfig,
    evaluate,
    result_row,
    sweep_wcls,
    write_results_csv,
    write_results_json,
)
from .neighborhood import candidates
from .selector import (
    SelectionConfig,
    assign_llm,
    assign_random,
    dump_distinctiveness,
    select_batch,
)
from .similarity import lookup_for
from .store import (
    DEFAULT_PAIR_TEMPLATE,
    DatasetStore,
    default_probe_count,
    load_store,
    sample_probe_set,
)
from .synthgen import SynthSpec, write_synthetic

log = logging.getLogger("descsel")

STORE_ROOT_ENV = "DESCSEL_STORE_ROOT"

DEFAULTS = {
    "setup": "classname-free",
    "assignment": "selected",
    "aggregation": "mean",
    "scope": "local-k",
    "wcls": None,
    "outer_norm": "full",
    "k": 3,
    "m": 5,
    "mode": "clamp",
    "n": None,
    "seed": 0,
    "assign_seed": None,
    "threads": 1,
}


def _norm(value):
    return value.replace("-", "_") if isinstance(value, str) else value


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _store_dir(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    root = os.environ.get(STORE_ROOT_ENV)
    if root and (Path(root) / arg).exists():
        return Path(root) / arg
    return path


def _merge(args: argparse.Namespace, keys: tuple[str, ...]) -> dict:
    merged = {k: DEFAULTS[k] for k in keys}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            payload = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(payload, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in payload.items():
            norm_key = key.replace("-", "_")
            if norm_key not in merged:
                raise ConfigError(f"unknown config key {key!r}")
            merged[norm_key] = value
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


EVAL_KEYS = (
    "setup", "assignment", "aggregation", "scope", "wcls", "outer_norm",
    "k", "m", "mode", "n", "seed", "assign_seed",
)


def _eval_config(merged: dict, **overrides) -> EvalConfig:
    fields = dict(
        setup=_norm(merged["setup"]),
        assignment=_norm(merged["assignment"]),
        aggregation=_norm(merged["aggregation"]),
        scope=_norm(merged["scope"]),
        w_cls=None if merged["wcls"] is None else float(merged["wcls"]),
        outer_norm=_norm(merged["outer_norm"]),
        k=int(merged["k"]),
        m=int(merged["m"]),
        positivity_mode=_norm(merged["mode"]),
        n=None if merged["n"] is None else int(merged["n"]),
        seed=int(merged["seed"]),
        assign_seed=(
            None if merged["assign_seed"] is None else int(merged["assign_seed"])
        ),
    )
    fields.update(overrides)
    return EvalConfig(**fields)


def _load(args: argparse.Namespace) -> tuple[DatasetStore, Path]:
    store_dir = _store_dir(args.store)
    return load_store(store_dir), store_dir


def _probes(store, merged):
    n = int(merged["n"]) if merged["n"] is not None else default_probe_count(store)
    return sample_probe_set(store, n, int(merged["seed"]))


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_classes=args.classes,
        dim=args.dim,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        pool_size=args.pool_size,
        planted_per_class=args.planted_per_class,
        sigma=args.sigma,
        overlap=args.overlap,
        seed=args.seed,
        dataset_name=args.name,
    )
    root = write_synthetic(spec, args.out)
    print(f"wrote synthetic store to {root}")
    return 0


def cmd_validate(args) -> int:
    store, store_dir = _load(args)
    print(
        f"{store_dir}: dataset={store.name} classes={store.n_classes} "
        f"dim={store.dim} pool={len(store.pool)} images={store.images.shape[0]} "
        f"pairs={'none' if store.pairs is None else len(store.pairs)}"
    )
    return 0


def cmd_lookup(args) -> int:
    store, store_dir = _load(args)
    merged = _merge(args, ("n", "seed"))
    probes = _probes(store, merged)
    lookup = lookup_for(store, probes, cache_dir=store_dir)
    print(
        f"lookup {lookup.values.shape[0]}x{lookup.values.shape[1]} "
        f"n={lookup.n} seed={lookup.seed} cached in {store_dir}"
    )
    return 0


def cmd_select(args) -> int:
    store, store_dir = _load(args)
    merged = _merge(args, ("k", "m", "mode", "n", "seed"))
    probes = _probes(store, merged)
    lookup = lookup_for(store, probes, cache_dir=store_dir)
    test_indices = store.split_indices(1)
    cands = [
        candidates(store.images[i], store.cls_emb, int(merged["k"]), image_index=int(i))
        for i in test_indices
    ]
    sel_cfg = SelectionConfig(m=int(merged["m"]), positivity_mode=_norm(merged["mode"]))
    assignments = select_batch(lookup, cands, sel_cfg)

    images = {}
    for cand, assignment in zip(cands, assignments):
        by_name, by_id = {}, {}
        for cid in (int(c) for c in cand.class_ids):
            entries = [
                {"pool_id": pid, "score": score, "text": store.pool.texts[pid]}
                for pid, score in zip(assignment.selected[cid], assignment.scores[cid])
            ]
            by_name[store.classnames[cid]] = entries
            by_id[str(cid)] = assignment.selected[cid]
        images[f"image_{cand.image_index}"] = {
            "candidates": [int(c) for c in cand.class_ids],
            "selected": by_name,
            "selected_ids": by_id,
        }
    payload = {
        "schema_version": 1,
        "dataset": store.name,
        "config": {
            "k": int(merged["k"]),
            "m": int(merged["m"]),
            "mode": _norm(merged["mode"]),
            "n": probes.n,
            "seed": probes.seed,
        },
        "images": images,
    }
    out = Path(args.out) if args.out else store_dir / "selections.json"
    out.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
    print(f"wrote {out}")
    return 0


def cmd_eval(args) -> int:
    store, store_dir = _load(args)
    merged = _merge(args, EVAL_KEYS + ("threads",))
    config = _eval_config(merged)
    result = evaluate(
        store, config, threads=int(merged["threads"]), cache_dir=store_dir
    )
    out = Path(args.out) if args.out else store_dir / "results.json"
    write_results_json(result, out)
    if args.csv:
        write_results_csv([result_row(store.name, result)], args.csv)
    print(f"top1={result.top1:.4f} ({out})")
    return 0


def cmd_sweep(args) -> int:
    store, store_dir = _load(args)
    merged = _merge(args, EVAL_KEYS + ("threads",))
    grid = args.wcls_grid
    if not grid:
        raise ConfigError("--wcls-grid must list at least one value")
    threads = int(merged["threads"])
    assignments = [a.strip() for a in args.assignments.split(",") if a.strip()]

    curves = []
    rows = []
    for assignment in assignments:
        config = _eval_config(
            merged, setup="classname_free", assignment=_norm(assignment), w_cls=None
        )
        swept = sweep_wcls(store, config, grid, threads=threads, cache_dir=store_dir)
        curves.append({
            "label": assignment,
            "points": [[w, res.top1] for w, res in swept],
        })
        rows.extend(result_row(store.name, res) for _, res in swept)
    baseline_cfg = _eval_config(
        merged, setup="cls_only", scope="global", w_cls=None
    )
    baseline = evaluate(store, baseline_cfg, threads=threads, cache_dir=store_dir)
    rows.append(result_row(store.name, baseline))

    payload = {
        "dataset": store.name,
        "baseline_top1": baseline.top1,
        "curves": curves,
        "config": sweep_config_echo(merged),
    }
    out = Path(args.out) if args.out else store_dir / "sweep.json"
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.csv:
        write_results_csv(rows, args.csv)
    print(f"wrote {out}")
    return 0


def sweep_config_echo(merged: dict) -> dict:
    return {
        "k": int(merged["k"]),
        "m": int(merged["m"]),
        "mode": _norm(merged["mode"]),
        "n": None if merged["n"] is None else int(merged["n"]),
        "seed": int(merged["seed"]),
        "aggregation": _norm(merged["aggregation"]),
        "scope": _norm(merged["scope"]),
        "outer_norm": _norm(merged["outer_norm"]),
    }


def cmd_grid(args) -> int:
    store, store_dir = _load(args)
    merged = _merge(args, EVAL_KEYS + ("threads",))
    k_list, n_list = args.k_list, args.n_list
    if not k_list or not n_list:
        raise ConfigError("--k-list and --n-list must list at least one value")
    threads = int(merged["threads"])

    top1 = []
    rows = []
    for n in n_list:
        probes = sample_probe_set(store, n, int(merged["seed"]))
        lookup = lookup_for(store, probes)  # shared across the k row
        row = []
        for k in k_list:
            config = _eval_config(merged, k=int(k), n=int(n))
            result = evaluate(store, config, threads=threads, lookup=lookup)
            row.append(result.top1)
            rows.append(result_row(store.name, result))
        top1.append(row)
    payload = {
        "dataset": store.name,
        "k_list": [int(k) for k in k_list],
        "n_list": [int(n) for n in n_list],
        "top1": top1,
    }
    out = Path(args.out) if args.out else store_dir / "grid.json"
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.csv:
        write_results_csv(rows, args.csv)
    print(f"wrote {out}")
    return 0


def cmd_distinct(args) -> int:
    store, store_dir = _load(args)
    merged = _merge(args, ("k", "n", "seed"))
    probes = _probes(store, merged)
    lookup = lookup_for(store, probes, cache_dir=store_dir)
    test_indices = [int(i) for i in store.split_indices(1)]
    wanted = args.images if args.images is not None else test_indices[:1]
    images = {}
    for idx in wanted:
        if idx not in test_indices:
            raise DataError(f"image {idx} is not in the test split")
        cand = candidates(
            store.images[idx], store.cls_emb, int(merged["k"]), image_index=idx
        )
        images[f"image_{idx}"] = {
            store.classnames[int(c)]: [
                [pid, score] for pid, score in dump_distinctiveness(lookup, cand, int(c))
            ]
            for c in cand.class_ids
        }
    payload = {"dataset": store.name, "config": {
        "k": int(merged["k"]), "n": probes.n, "seed": probes.seed,
    }, "images": images}
    out = Path(args.out) if args.out else store_dir / "distinct.json"
    out.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
    print(f"wrote {out}")
    return 0


def cmd_report(args) -> int:
    payload = json.loads(Path(args.input).read_text())
    dataset = args.dataset or payload.get("dataset", "dataset")
    out_dir = Path(args.out_dir)
    if args.kind == "sweep":
        paths = report_mod.render_sweep(payload, out_dir, dataset)
    elif args.kind == "grid":
        paths = report_mod.render_grid(payload, out_dir, dataset)
    else:
        paths = report_mod.render_distinctiveness(payload, out_dir, dataset)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return 0


def cmd_emit_pairs(args) -> int:
    store, store_dir = _load(args)
    if bool(args.selections) == bool(args.assignment):
        raise ConfigError("pass exactly one of --selections or --assignment")
    keys: set[tuple[int, int]] = set()
    if args.selections:
        payload = json.loads(Path(args.selections).read_text())
        for image in payload.get("images", {}).values():
            for cid, pool_ids in image.get("selected_ids", {}).items():
                keys.update((int(cid), int(p)) for p in pool_ids)
    elif args.assignment == "llm":
        assignment = assign_llm(store.pool, store.n_classes, cap=None)
        keys.update((c, p) for c, ids in assignment.items() for p in ids)
    else:
        assignment = assign_random(
            len(store.pool), args.m if args.m is not None else DEFAULTS["m"],
            args.seed if args.seed is not None else DEFAULTS["seed"],
            store.n_classes,
        )
        keys.update((c, p) for c, ids in assignment.items() for p in ids)
    template = args.template or (
        store.pairs.template if store.pairs is not None and store.pairs.template
        else DEFAULT_PAIR_TEMPLATE
    )
    payload = {
        "schema_version": 1,
        "dataset": store.name,
        "template": template,
        "keys": [[c, p] for c, p in sorted(keys)],
    }
    out = Path(args.out) if args.out else store_dir / "pairs_keys.json"
    out.write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {len(keys)} keys to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_store(p: argparse.ArgumentParser) -> None:
    p.add_argument("--store", required=True, help="store directory or name under $" + STORE_ROOT_ENV)


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option defaults")


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--setup", choices=["classname-free", "classname-included", "cls-only"])
    p.add_argument("--assignment", choices=["selected", "llm", "random"])
    p.add_argument("--aggregation", choices=["mean", "max"])
    p.add_argument("--scope", choices=["local-k", "global"])
    p.add_argument("--wcls", type=float)
    p.add_argument("--outer-norm", dest="outer_norm", choices=["full", "desc-only"])
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--mode", choices=["clamp", "strict"])
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--assign-seed", dest="assign_seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="descsel",
        description="Distinctive classname-free description selection over embedding stores.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic planted store")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--train-per-class", dest="train_per_class", type=int, default=30)
    p.add_argument("--test-per-class", dest="test_per_class", type=int, default=50)
    p.add_argument("--pool-size", dest="pool_size", type=int, default=100)
    p.add_argument("--planted-per-class", dest="planted_per_class", type=int, default=3)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--name", default="synthetic")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="load and validate a store")
    _add_store(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("lookup", help="build and cache the lookup matrix")
    _add_store(p)
    _add_config(p)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_lookup)

    p = sub.add_parser("select", help="select distinctive descriptions per test image")
    _add_store(p)
    _add_config(p)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--mode", choices=["clamp", "strict"])
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="evaluate accuracy under one configuration")
    _add_store(p)
    _add_config(p)
    _add_eval_flags(p)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate across a w_cls grid")
    _add_store(p)
    _add_config(p)
    _add_eval_flags(p)
    p.add_argument("--wcls-grid", dest="wcls_grid", type=_float_list, required=True)
    p.add_argument("--assignments", default="selected",
                   help="comma list of assignments to sweep (default: selected)")
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("grid", help="evaluate across k and n lists")
    _add_store(p)
    _add_config(p)
    _add_eval_flags(p)
    p.add_argument("--k-list", dest="k_list", type=_int_list, required=True)
    p.add_argument("--n-list", dest="n_list", type=_int_list, required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("distinct", help="dump ranked distinctiveness scores")
    _add_store(p)
    _add_config(p)
    p.add_argument("--images", type=_int_list, help="test image indices (default: first)")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_distinct)

    p = sub.add_parser("report", help="render CSV/SVG from sweep/grid/distinct output")
    p.add_argument("--kind", choices=["sweep", "grid", "distinct"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.add_argument("--dataset")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("emit-pairs", help="list pair keys a selection needs")
    _add_store(p)
    p.add_argument("--selections", help="selections.json produced by `select`")
    p.add_argument("--assignment", choices=["llm", "random"])
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--template")
    p.add_argument("--out")
    p.set_defaults(func=cmd_emit_pairs)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 2
    except DataError as exc:
        log.error("data error: %s", exc)
        return 3
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
