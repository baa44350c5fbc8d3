"""Command-line entry point: generate, train, evaluate, sweep, report."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from ..core import CostMatrix
from ..costmodel import classify, empirical_cost, optimal_threshold
from ..errors import AdaCslError, TrainingDivergedError
from ..nnet import NetworkParams, predict_batch
from .config import METHODS, AdaptiveSettings, ExperimentConfig, TrainSettings, load_config
from .data import SyntheticSpec, generate_synthetic, load_csv, write_csv
from .experiment import emit_series, fit_method, format_table, run_experiment

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("adacsl")


def _synthetic_args(p):
    g = p.add_argument_group("synthetic data")
    g.add_argument("--n-train", type=int)
    g.add_argument("--n-val", type=int)
    g.add_argument("--n-test", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--class-sep", type=float)
    g.add_argument("--imbalance", type=float, dest="imbalance_ratio")
    g.add_argument("--val-shift", type=float)
    g.add_argument("--data-seed", type=int, dest="seed")


def _training_args(p):
    g = p.add_argument_group("training")
    g.add_argument("--lr", type=float, dest="learning_rate")
    g.add_argument("--batch-size", type=int)
    g.add_argument("--weight-decay", type=float)
    g.add_argument("--hidden", type=int, nargs="*")
    g.add_argument("--activation", choices=["relu", "tanh"])
    g = p.add_argument_group("adaptive loop")
    g.add_argument("--t-prime", type=float)
    g.add_argument("--num-bins", type=int)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--epochs", type=int, dest="max_epochs")
    g.add_argument("--min-epochs", type=int)


def _overrides(ns, cls) -> dict:
    names = {f.name for f in dataclasses.fields(cls)}
    return {k: v for k, v in vars(ns).items() if k in names and v is not None}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for divergence here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="adacsl", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write synthetic train/val/test CSV files")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="take the synthetic section of an experiment config")
    _synthetic_args(p)

    p = sub.add_parser("train", help="train one method on CSV data")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--method", choices=METHODS, default="adacsl")
    p.add_argument("--rho", type=float, required=True, help="c_fn / c_fp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    _training_args(p)

    p = sub.add_parser("evaluate", help="cost and accuracy of a checkpoint on a CSV file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--threshold", default="0.5", help="a number, or 'optimal' for c_fp/(c_fp+c_fn)")

    p = sub.add_parser("sweep", help="run a full experiment from a config file")
    p.add_argument("--config")
    p.add_argument("--csv", help="labelled CSV instead of synthetic data")
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--rhos", type=float, nargs="+")
    p.add_argument("--methods", nargs="+", choices=METHODS)
    p.add_argument("--svg", action="store_true", default=None)
    _synthetic_args(p)
    _training_args(p)

    p = sub.add_parser("report", help="render report tables from results.json")
    p.add_argument("--results", required=True)
    p.add_argument("--format", choices=["md", "csv"], default="md")
    return ap


def _sweep_config(ns) -> ExperimentConfig:
    cfg = load_config(ns.config) if ns.config else ExperimentConfig()
    top = {k: getattr(ns, k) for k in ("output_dir", "svg") if getattr(ns, k) is not None}
    for k in ("seeds", "rhos", "methods"):
        if getattr(ns, k):
            top[k] = tuple(getattr(ns, k))
    if ns.csv:
        top["csv"], top["synthetic"] = ns.csv, None
    elif cfg.synthetic is not None:
        top["synthetic"] = dataclasses.replace(cfg.synthetic, **_overrides(ns, SyntheticSpec))
    top["adacsl"] = dataclasses.replace(cfg.adacsl, **_overrides(ns, AdaptiveSettings))
    train = _overrides(ns, TrainSettings)
    if "hidden" in train:
        train["hidden"] = tuple(train["hidden"])
    top["train"] = dataclasses.replace(cfg.train, **train)
    return dataclasses.replace(cfg, **top)


def cmd_generate(ns) -> int:
    spec = load_config(ns.config).synthetic if ns.config else SyntheticSpec()
    if spec is None:
        spec = SyntheticSpec()
    spec = dataclasses.replace(spec, **_overrides(ns, SyntheticSpec))
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, ds in zip(("train", "val", "test"), generate_synthetic(spec)):
        write_csv(ds, out / f"{name}.csv")
    print(json.dumps(dataclasses.asdict(spec)))
    return EXIT_OK


def cmd_train(ns) -> int:
    train, val = load_csv(ns.train), load_csv(ns.val)
    ada_settings = dataclasses.replace(AdaptiveSettings(), **_overrides(ns, AdaptiveSettings))
    tr = _overrides(ns, TrainSettings)
    if "hidden" in tr:
        tr["hidden"] = tuple(tr["hidden"])
    cfg = ExperimentConfig(
        synthetic=SyntheticSpec(), rhos=(ns.rho,), methods=(ns.method,), seeds=(ns.seed,),
        adacsl=ada_settings, train=dataclasses.replace(TrainSettings(), **tr),
    )
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    cm = CostMatrix.from_ratio(ns.rho)
    fit = fit_method(ns.method, train, val, cm, cfg, ns.seed)
    if fit.state is not None:
        emit_series(fit.state, out, ns.svg)
    (out / "checkpoint.json").write_text(fit.params.to_json() + "\n", encoding="utf-8")
    preds = predict_batch(fit.params, val.features)
    summary = {
        "method": ns.method,
        "rho": ns.rho,
        "decision_threshold": fit.decision_threshold,
        "best_epoch": fit.best_epoch,
        "val_cost": empirical_cost(preds, val.labels, fit.decision_threshold, cm),
    }
    if fit.state is not None:
        summary["final_lambda"] = fit.state.lambda_current
        summary["epochs"] = fit.state.epoch_index
    (out / "train_summary.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_evaluate(ns) -> int:
    params = NetworkParams.from_json(Path(ns.checkpoint).read_text(encoding="utf-8"))
    ds = load_csv(ns.data)
    cm = CostMatrix.from_ratio(ns.rho)
    tau = optimal_threshold(cm) if ns.threshold == "optimal" else float(ns.threshold)
    preds = predict_batch(params, ds.features)
    out = {
        "n": len(ds),
        "threshold": tau,
        "cost": empirical_cost(preds, ds.labels, tau, cm),
        "accuracy": float((classify(preds, tau) == ds.labels).mean()),
    }
    print(json.dumps(out))
    return EXIT_OK


def cmd_sweep(ns) -> int:
    cfg = _sweep_config(ns)
    report = run_experiment(cfg)
    print(format_table(report.summary(), cfg.methods))
    failed = [c for c in report.cells if c.error]
    if failed:
        print(f"{len(failed)} cell(s) failed; see results.json", file=sys.stderr)
    return EXIT_OK


def cmd_report(ns) -> int:
    doc = json.loads(Path(ns.results).read_text(encoding="utf-8"))
    methods = doc["config"]["methods"]
    if ns.format == "md":
        print(format_table(doc["summary"], methods))
    else:
        rows = doc["summary"]
        cols = list(rows[0]) if rows else []
        print(",".join(cols))
        for r in rows:
            print(",".join("" if r[c] is None else str(r[c]) for c in cols))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(ns.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[ns.command](ns)
    except TrainingDivergedError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except AdaCslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"error: malformed input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
