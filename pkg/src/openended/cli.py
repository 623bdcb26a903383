"""Command line entry point: ``openended <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from .bounds import BoundDomainError, BoundInputs, total_bound
from .data import conflict_profile, mapping_rank, read_jsonl, sample_dataset, write_jsonl
from .metrics import write_eval_csv
from .subjective import load_hypothesis_set, save_hypothesis_set


def _suite_spec(args) -> dict:
    if args.suite == "toy":
        return {"name": "toy", "num_shapes": args.num_shapes, "num_colors": args.num_colors, "noise": args.noise}
    return {"name": "regression"}


def _add_suite_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--suite", choices=["regression", "toy"], default="regression")
    p.add_argument("--num-shapes", type=int, default=10)
    p.add_argument("--num-colors", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.05, help="toy input noise std")


def cmd_gen_data(args) -> int:
    ds = ex.build_suite(_suite_spec(args))
    dataset = sample_dataset(ds, args.m, args.n, np.random.default_rng(args.seed))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(dataset, out)
    print(f"wrote {dataset.m} episodes x {dataset.n} samples to {out}")
    return 0


def _train_settings(args):
    if args.config:
        cfg = ex.load_config(args.config, output_dir=args.out)
        train, suite, ev = cfg.train, cfg.suite, cfg.eval
        if args.method == "vanilla":
            train = cfg.vanilla
    else:
        suite = _suite_spec(args)
        train = ex.TOY_TRAIN if suite["name"] == "toy" else ex.REGRESSION_TRAIN
        if args.method == "vanilla":
            train = ex.VANILLA_TRAIN if suite["name"] == "regression" else replace(train, K=1)
        ev = ex.EvalSettings()
    if args.seed is not None:
        train = replace(train, seed=args.seed)
    if args.K is not None:
        train = replace(train, K=args.K)
    return train, suite, ev


def cmd_train(args) -> int:
    train, suite, ev = _train_settings(args)
    ds = ex.build_suite(suite)
    dataset = read_jsonl(args.data) if args.data else None
    if dataset is not None:
        train = replace(train, m=dataset.m, n=dataset.n)
    H, report = ex.train_method(args.method, ds, train, dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_hypothesis_set(H, out / "checkpoint.json")
    report.write_csv(out / "report.csv")
    summary = {"method": args.method, "suite": suite, "train": train.to_dict(), **report.summary()}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps({"final_global_error": report.final_global_error, "final_alloc": report.final_alloc}))
    return 0


def cmd_eval(args) -> int:
    H = load_hypothesis_set(args.checkpoint)
    ds = ex.build_suite(_suite_spec(args))
    ev = ex.EvalSettings(args.grid_size, args.n_d, args.decision_batch_size)
    rows = ex.evaluate_set(H, ds, ev, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_eval_csv(rows, out)
    for r in rows:
        print(f"domain {r.domain_id}: sub_err={r.sub_err:.6g} mod_err={r.mod_err:.6g}")
    return 0


def cmd_rank(args) -> int:
    pairs = read_jsonl(args.data).pairs()
    print(mapping_rank(pairs))
    if args.profile:
        for x, c in conflict_profile(pairs).items():
            print(f"{json.dumps(list(x) if isinstance(x, tuple) else x)}\t{c}")
    return 0


def cmd_bound(args) -> int:
    try:
        spec = json.loads(Path(args.inputs).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{args.inputs}: line {exc.lineno}: {exc.msg}") from exc
    emp = float(spec.pop("empirical_error", args.empirical_error))
    b = BoundInputs.from_dict(spec)
    print(json.dumps(total_bound(emp, b).to_dict(), indent=2))
    return 0


def cmd_run(args) -> int:
    cfg = ex.load_config(args.config, output_dir=args.out)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    summary = ex.run_experiment(cfg)
    for f in summary.get("failures", []):
        print(f"diverged: {f['tag']}: {f['error']}", file=sys.stderr)
    print(f"results in {cfg.output_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openended", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample an episodic dataset to JSONL")
    _add_suite_args(p)
    p.add_argument("--m", type=int, default=250, help="episodes")
    p.add_argument("--n", type=int, default=2, help="samples per episode")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output .jsonl path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train on a dataset; writes checkpoint.json, report.csv, summary.json")
    _add_suite_args(p)
    p.add_argument("--config", help="experiment config JSON (train/suite sections are used)")
    p.add_argument("--data", help="episodes JSONL from gen-data (default: sample from the suite)")
    p.add_argument("--method", choices=["osl", "vanilla", "oracle"], default="osl")
    p.add_argument("--K", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-domain sub_err/mod_err of a checkpoint as CSV")
    _add_suite_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0, help="seed of the metric sampler")
    p.add_argument("--n-d", type=int, default=300)
    p.add_argument("--decision-batch-size", type=int, default=2)
    p.add_argument("--grid-size", type=int, default=200)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", help="print the mapping rank of a JSONL dataset")
    p.add_argument("data")
    p.add_argument("--profile", action="store_true", help="also print per-input output counts")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("bound", help="evaluate the generalization bound from a JSON file of inputs")
    p.add_argument("inputs")
    p.add_argument("--empirical-error", type=float, default=0.0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("run", help="run a configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="run only this seed")
    p.add_argument("--out", help="override output_dir")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, BoundDomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
