"""Command-line surface: fit, eval, synth, guarantees.

One --seed flag drives every random phase through named sub-seeds, so any
command rerun with identical flags writes byte-identical model, trace, and
metrics files.  The manifest written next to a model records the resolved
configuration, input digests, and per-phase wall-clock timings; its stable
id is embedded in the model and metrics documents (timings vary run to run,
the id does not).  Set FBDE_LOG=INFO or DEBUG for progress on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, seeds
from .engine import KL_HELD_OUT, KL_TRAIN, FitConfig, LeveragingScheme, fbde_fit
from .guarantees import build_report
from .pipeline import (
    MixtureParams,
    build_initial,
    generate_mixture,
    infer_csv_spec,
    kfold,
    load_csv,
    load_csv_with_schema,
    write_mixture_csv,
)
from .serialize import (
    METRICS_FORMAT,
    REPORT_FORMAT,
    build_manifest,
    dump_json,
    load_model,
    load_trace,
    manifest_id,
    save_model,
    save_trace,
    sha256_file,
)
from .tabular import fit_empirical, kl_divergence, representation_rate, statistical_rate
from .tree import TreeConfig

log = logging.getLogger("fairboost")

_LN2 = math.log(2.0)


def _setup_logging() -> None:
    name = os.environ.get("FBDE_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairboost", description="fairness-constrained boosted density estimation")
    sub = p.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model from a CSV file")
    fit.add_argument("--data", required=True, help="training CSV (header row required)")
    fit.add_argument("--sensitive", required=True, help="sensitive column name")
    fit.add_argument("--target", help="class column name (enables statistical-rate metrics)")
    fit.add_argument("--ignore", action="append", default=[], help="column to drop (repeatable)")
    fit.add_argument("--tau", type=float, default=0.9, help="representation-rate target")
    fit.add_argument("--scheme", default="exact", help="exact | relative | const:<v>")
    fit.add_argument("--rounds", type=int, default=10)
    fit.add_argument("--bins", type=int, default=50, help="bins for continuous columns")
    fit.add_argument("--max-depth", type=int, default=8)
    fit.add_argument("--min-leaf", type=int, default=5)
    fit.add_argument("--c-bound", type=float, default=_LN2, help="classifier output bound C")
    fit.add_argument("--smoothing", type=float, default=1.0, help="anchor conditional smoothing")
    fit.add_argument("--folds", type=int, default=0, help="k >= 2 adds k-fold held-out evaluation")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", required=True, help="model JSON path")
    fit.add_argument("--trace", help="per-round trace CSV path")

    ev = sub.add_parser("eval", help="evaluate a model against a CSV file")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--smoothing", type=float, default=0.0, help="empirical-table smoothing")
    ev.add_argument("--y-value", type=int, default=1, help="class code for the statistical rate")
    ev.add_argument("--bits", action="store_true", help="report KL in bits instead of nats")
    ev.add_argument("--out", help="metrics JSON path (stdout when omitted)")

    sy = sub.add_parser("synth", help="generate the two-group Gaussian mixture")
    sy.add_argument("--n", type=int, default=5000)
    sy.add_argument("--s", type=float, default=0.9, help="probability of group a=1")
    sy.add_argument("--mu", type=float, nargs=2, default=(-0.5, 0.7), metavar=("MU0", "MU1"))
    sy.add_argument("--sigma", type=float, nargs=2, default=(0.4, 0.2), metavar=("S0", "S1"))
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--out", required=True)

    gu = sub.add_parser("guarantees", help="evaluate every applicable bound for a fitted model")
    gu.add_argument("--model", required=True)
    gu.add_argument("--trace", required=True)
    gu.add_argument("--out", help="report JSON path (stdout when omitted)")
    return p


def _emit(doc: dict, out) -> None:
    if out:
        dump_json(doc, out)
    else:
        print(json.dumps(doc, indent=2))


def cmd_fit(args) -> int:
    timings = {}
    t0 = time.perf_counter()
    spec = infer_csv_spec(args.data, args.sensitive, args.target, args.bins, args.ignore)
    dataset, schema = load_csv(spec)
    timings["load"] = time.perf_counter() - t0
    log.info("loaded %d rows over %d cells", len(dataset), schema.n_cells)

    scheme = LeveragingScheme.parse(args.scheme, args.tau, args.c_bound)
    tree_cfg = TreeConfig(max_depth=args.max_depth, min_leaf_count=args.min_leaf, c_bound=args.c_bound)
    base_cfg = dict(rounds=args.rounds, scheme=scheme, tree=tree_cfg)

    t0 = time.perf_counter()
    q0 = build_initial(dataset, schema, args.smoothing)
    stack, trace = fbde_fit(dataset, q0, FitConfig(kl_eval=KL_TRAIN, seed=args.seed, **base_cfg))
    timings["fit"] = time.perf_counter() - t0
    if trace:
        log.info("final rr=%.6f kl_train=%s", trace[-1].rr, trace[-1].kl_train)

    fold_summaries = fold_aggregate = None
    if args.folds >= 2:
        t0 = time.perf_counter()
        splits = kfold(dataset, args.folds, seeds.subseed(args.seed, seeds.FOLDS))

        def run_fold(i: int) -> dict:
            train, test = splits[i]
            q0_i = build_initial(train, schema, args.smoothing)
            cfg_i = FitConfig(
                kl_eval=KL_HELD_OUT, seed=seeds.subseed(args.seed, seeds.FOLDS, i), **base_cfg
            )
            _, trace_i = fbde_fit(train, q0_i, cfg_i, test=test)
            first, last = trace_i[0], trace_i[-1]
            return {
                "fold": i,
                "final_rr": last.rr,
                "final_kl_train": last.kl_train,
                "final_kl_test": last.kl_test,
                "anchor_kl_train": first.kl_train,
                "anchor_kl_test": first.kl_test,
            }

        with ThreadPoolExecutor(max_workers=min(args.folds, os.cpu_count() or 1)) as pool:
            fold_summaries = sorted(pool.map(run_fold, range(args.folds)), key=lambda d: d["fold"])
        timings["folds"] = time.perf_counter() - t0

        def agg(key: str) -> dict:
            vals = np.array([f[key] for f in fold_summaries], dtype=np.float64)
            return {"mean": float(vals.mean()), "std": float(vals.std(ddof=1))}

        fold_aggregate = {k: agg(k) for k in ("final_rr", "final_kl_train", "final_kl_test", "anchor_kl_test")}
        log.info(
            "%d-fold: rr %.4f (%.4f), kl_test %.4f (%.4f)",
            args.folds,
            fold_aggregate["final_rr"]["mean"],
            fold_aggregate["final_rr"]["std"],
            fold_aggregate["final_kl_test"]["mean"],
            fold_aggregate["final_kl_test"]["std"],
        )

    t0 = time.perf_counter()
    resolved = {
        "data": args.data,
        "sensitive": args.sensitive,
        "target": args.target,
        "ignore": list(args.ignore),
        "tau": args.tau,
        "scheme": args.scheme,
        "rounds": args.rounds,
        "bins": args.bins,
        "max_depth": args.max_depth,
        "min_leaf": args.min_leaf,
        "c_bound": args.c_bound,
        "smoothing": args.smoothing,
        "folds": args.folds,
        "seed": args.seed,
        "out": args.out,
        "trace": args.trace,
    }
    digests = {args.data: sha256_file(args.data)}
    mid = manifest_id("fit", resolved, digests, __version__)
    save_model(stack, args.out, scheme=scheme, meta={"manifest": mid})
    if args.trace:
        save_trace(trace, args.trace)
    timings["write"] = time.perf_counter() - t0
    extra = {}
    if fold_summaries is not None:
        extra = {"fold_summaries": fold_summaries, "fold_aggregate": fold_aggregate}
    dump_json(
        build_manifest("fit", resolved, digests, __version__, timings, extra),
        args.out + ".manifest.json",
    )
    return 0


def cmd_eval(args) -> int:
    bd, _, doc = load_model(args.model)
    data = load_csv_with_schema(args.data, bd.schema)
    p_hat = fit_empirical(data, args.smoothing)
    joint = bd.joint()
    rr_table = representation_rate(joint)
    rr_norm = bd.representation_rate()
    kl = kl_divergence(p_hat, joint)
    sr = None
    if bd.schema.target_index is not None:
        sr = statistical_rate(joint, args.y_value)
    metrics = {
        "format": METRICS_FORMAT,
        "version": 1,
        "manifest": doc.get("manifest"),
        "n_rows": len(data),
        "units": "bits" if args.bits else "nats",
        "rr_table": rr_table,
        "rr_normalizers": rr_norm,
        "rr_difference": abs(rr_table - rr_norm),
        "kl": kl / _LN2 if args.bits else kl,
        "sr": sr,
    }
    _emit(metrics, args.out)
    return 0


def cmd_synth(args) -> int:
    params = MixtureParams(mu=tuple(args.mu), sigma=tuple(args.sigma), s=args.s, n=args.n, seed=args.seed)
    x, a = generate_mixture(params)
    write_mixture_csv(x, a, args.out)
    log.info("wrote %d rows to %s", params.n, args.out)
    return 0


def cmd_guarantees(args) -> int:
    _, scheme, doc = load_model(args.model)
    if scheme is None:
        raise ValueError("model lacks leveraging-scheme metadata")
    trace = load_trace(args.trace)
    report = build_report(trace, scheme)
    out_doc = {"format": REPORT_FORMAT, "version": 1, "manifest": doc.get("manifest")}
    out_doc.update(report.to_dict())
    _emit(out_doc, args.out)
    return 0


_DISPATCH = {"fit": cmd_fit, "eval": cmd_eval, "synth": cmd_synth, "guarantees": cmd_guarantees}


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
