"""Experiment orchestration across cost setups, methods and seeds."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..adaptive import AdaCslConfig, adapt_lambda, run_adacsl
from ..baselines import (
    train_resampled,
    train_smote,
    train_standard,
    train_threshold_adjusted,
    train_weighted_ce,
)
from ..core import CostMatrix, LabeledDataset, LambdaState, check_labels, check_probs, partition_by_probability
from ..costmodel import classify, empirical_cost
from ..errors import AdaCslError, InvalidInputError
from ..loss import weighted_ce
from ..nnet import init_network, predict_batch, train_epoch
from .config import ExperimentConfig, config_to_dict, manifest_lines
from .data import generate_synthetic, load_csv, split_dataset

log = logging.getLogger(__name__)


@dataclass
class CellResult:
    rho: float
    method: str
    seed: int
    test_cost: Optional[float] = None
    test_acc: Optional[float] = None
    val_cost: Optional[float] = None
    best_epoch: Optional[int] = None
    decision_threshold: Optional[float] = None
    error: Optional[str] = None
    test_preds: Optional[np.ndarray] = field(default=None, repr=False)
    state: Optional[LambdaState] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "rho", "method", "seed", "test_cost", "test_acc", "val_cost",
            "best_epoch", "decision_threshold", "error",
        )}
        if self.state is not None:
            d["final_lambda"] = self.state.lambda_current
            d["epochs"] = self.state.epoch_index
        return d


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: list
    subgroups: list
    out_dir: Optional[Path] = None

    def summary(self) -> list[dict]:
        return summarize(self.cells, self.config.methods)


def load_splits(cfg: ExperimentConfig, seed: int):
    """(train, val, test) for one seed: regenerated synthetic data or a seeded CSV split."""
    if cfg.synthetic is not None:
        spec = dataclasses.replace(cfg.synthetic, seed=cfg.synthetic.seed + seed)
        return generate_synthetic(spec)
    return split_dataset(load_csv(cfg.csv), cfg.split, seed)


def resolve_rhos(cfg: ExperimentConfig, train: LabeledDataset) -> tuple:
    if cfg.rhos:
        return cfg.rhos
    n_pos = int(train.labels.sum())
    ratio = (len(train) - n_pos) / n_pos
    return tuple(m * ratio for m in cfg.rho_multipliers)


def _accuracy(preds, labels, tau) -> float:
    return float(np.mean(classify(preds, tau) == labels))


@dataclass(frozen=True, eq=False)
class FittedMethod:
    params: object
    decision_threshold: float
    best_epoch: int
    state: Optional[LambdaState] = None


def fit_method(method: str, train, val, cm: CostMatrix, cfg: ExperimentConfig, seed: int) -> FittedMethod:
    """Train one method and return its min-validation-cost model."""
    ada = cfg.adacsl.build(cm, cfg.train.build(cfg.adacsl.max_epochs, seed))
    tc = ada.train_cfg
    if method == "adacsl":
        res = run_adacsl(train, val, ada)
        return FittedMethod(res.best_params, ada.t_prime, res.best_epoch, res.state)
    if method == "standard":
        fit = train_standard(train, val, tc, cm)
    elif method == "ta":
        fit = train_threshold_adjusted(train, val, tc, cm)
    elif method == "wce":
        fit = train_weighted_ce(train, val, tc, cm, ada.t_prime)
    elif method == "resample":
        fit = train_resampled(train, val, tc, cm, ada.t_prime)
    elif method == "smote":
        fit = train_smote(train, val, tc, cm, cfg.smote_k, cfg.smote_ratio)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    return FittedMethod(fit.best_params, fit.decision_threshold, fit.best_epoch)


def run_cell(method: str, rho: float, seed: int, data, cfg: ExperimentConfig) -> CellResult:
    train, val, test = data
    cm = CostMatrix.from_ratio(rho)
    fit = fit_method(method, train, val, cm, cfg, seed)
    preds = predict_batch(fit.params, test.features)
    tau = fit.decision_threshold
    return CellResult(
        rho=rho,
        method=method,
        seed=seed,
        test_cost=empirical_cost(preds, test.labels, tau, cm),
        test_acc=_accuracy(preds, test.labels, tau),
        val_cost=empirical_cost(predict_batch(fit.params, val.features), val.labels, tau, cm),
        best_epoch=fit.best_epoch,
        decision_threshold=tau,
        test_preds=preds,
        state=fit.state,
    )


def subgroup_report(preds_epoch1, labels, preds_a, preds_b, cm: CostMatrix, num_bins: int = 10, tau: float = 0.5) -> list[dict]:
    """Per-bin size, accuracy, mean CE and cost, binned by the epoch-1 probabilities.

    Method A and B are compared on the same bins. ``high_cost`` marks the
    bins with the largest epoch-1 cost (all bins tying for the maximum among
    the top quarter of non-empty bins).
    """
    p1 = check_probs(preds_epoch1)
    y = check_labels(labels, p1.shape[0])
    pa = check_probs(preds_a, p1.shape[0])
    pb = check_probs(preds_b, p1.shape[0])
    part = partition_by_probability(p1, num_bins)
    rows = []
    for m in range(num_bins):
        idx = part.members(m)
        row = {
            "m": m + 1,
            "range_lo": float(part.bin_edges[m]),
            "range_hi": float(part.bin_edges[m + 1]),
            "size": int(idx.size),
        }
        for tag, p in (("epoch1", p1), ("a", pa), ("b", pb)):
            if idx.size == 0:
                row[f"{tag}_acc"] = row[f"{tag}_ce"] = row[f"{tag}_cost"] = None
                continue
            row[f"{tag}_acc"] = _accuracy(p[idx], y[idx], tau)
            row[f"{tag}_ce"] = float(np.mean(weighted_ce(y[idx], p[idx], 1.0)))
            row[f"{tag}_cost"] = empirical_cost(p[idx], y[idx], tau, cm)
        rows.append(row)
    costs = sorted((r["epoch1_cost"] for r in rows if r["size"]), reverse=True)
    n_flag = max(1, len(costs) // 4)
    cutoff = costs[n_flag - 1] if costs else None
    for r in rows:
        r["high_cost"] = bool(r["size"] and cutoff and r["epoch1_cost"] >= cutoff)
    return rows


def illustrate_subgroups(train, val, cfg: AdaCslConfig, report_bins: int = 10):
    """Two-epoch comparison from a shared epoch-1 model.

    Epoch 1 trains the weighted loss with lambda = 1. Epoch 2 is run twice
    from the same weights: once keeping lambda = 1, once with the lambda
    adapted from the epoch-1 validation subgroups (``cfg.num_bins`` bins).
    Returns (rows, preds_epoch1, preds_without, preds_with).
    """
    tc = cfg.train_cfg
    params = init_network(tc.layer_sizes(train.n_features), tc.seed, tc.activation)
    params, _ = train_epoch(params, train, cfg.loss_spec(1.0), tc, 1)
    p1 = predict_batch(params, val.features)
    state = adapt_lambda(LambdaState(), p1, val.labels, cfg)
    without, _ = train_epoch(params, train, cfg.loss_spec(1.0), tc, 2)
    with_, _ = train_epoch(params, train, cfg.loss_spec(state.lambda_current), tc, 2)
    pa = predict_batch(without, val.features)
    pb = predict_batch(with_, val.features)
    rows = subgroup_report(p1, val.labels, pa, pb, cfg.cm, report_bins, cfg.t_prime)
    return rows, p1, pa, pb


def summarize(cells, methods) -> list[dict]:
    rows = []
    for rho in sorted({c.rho for c in cells}):
        row = {"rho": rho}
        for m in methods:
            ok = [c for c in cells if c.rho == rho and c.method == m and c.error is None]
            costs = np.array([c.test_cost for c in ok])
            accs = np.array([c.test_acc for c in ok])
            row[f"{m}_cost_mean"] = float(costs.mean()) if ok else None
            row[f"{m}_cost_std"] = float(costs.std()) if ok else None
            row[f"{m}_acc_mean"] = float(accs.mean()) if ok else None
            row[f"{m}_acc_std"] = float(accs.std()) if ok else None
            row[f"{m}_n"] = len(ok)
        rows.append(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(path, rows: list[dict], columns=None) -> None:
    columns = columns or (list(rows[0]) if rows else [])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def emit_series(state: LambdaState, out_dir, svg: bool = False) -> list[Path]:
    """Write lambda, per-bin threshold and cost trajectories as CSV files."""
    if not state.trajectory:
        raise InvalidInputError("empty trajectory")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj = state.trajectory
    n_bins = len(traj[0].thresholds)
    paths = [out / "series_lambda.csv", out / "series_threshold.csv", out / "series_cost.csv"]
    write_rows(paths[0], [
        {"epoch": r.epoch, "lambda_used": r.lambda_used, "factor": r.factor,
         "lambda": r.lambda_next, "clamped": r.clamped}
        for r in traj
    ])
    write_rows(paths[1], [
        {"epoch": r.epoch, **{f"bin_{m}": r.thresholds[m] for m in range(n_bins)}}
        for r in traj
    ], ["epoch"] + [f"bin_{m}" for m in range(n_bins)])
    write_rows(paths[2], [
        {"epoch": r.epoch, "train_cost": r.train_cost, "val_cost": r.val_cost} for r in traj
    ])
    if svg:
        paths += _render_svg(state, out)
    return paths


def _render_svg(state: LambdaState, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "adacsl"
    traj = state.trajectory
    ep = [r.epoch for r in traj]
    charts = {
        "series_lambda.svg": [("lambda", [r.lambda_next for r in traj])],
        "series_threshold.svg": [
            (f"bin {m}", [np.nan if r.thresholds[m] is None else r.thresholds[m] for r in traj])
            for m in range(len(traj[0].thresholds))
        ],
        "series_cost.svg": [
            ("train", [np.nan if r.train_cost is None else r.train_cost for r in traj]),
            ("validation", [r.val_cost for r in traj]),
        ],
    }
    paths = []
    for name, lines in charts.items():
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for label, ys in lines:
            ax.plot(ep, ys, marker=".", label=label)
        ax.set_xlabel("epoch")
        if len(lines) > 1:
            ax.legend(fontsize="small")
        fig.tight_layout()
        p = out / name
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(p)
    return paths


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Run every (setup, method, seed) cell and write the report files.

    A failing cell is recorded with its error and the run continues.
    """
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells, subgroups, audits = [], [], []
    resolved_rhos = None
    for seed in cfg.seeds:
        data = load_splits(cfg, seed)
        if resolved_rhos is None:
            # one set of setups for every seed, taken from the first split
            resolved_rhos = resolve_rhos(cfg, data[0])
        for rho in resolved_rhos:
            for method in cfg.methods:
                log.info("rho=%g method=%s seed=%d", rho, method, seed)
                try:
                    cell = run_cell(method, rho, seed, data, cfg)
                except AdaCslError as exc:
                    log.error("cell rho=%g %s seed=%d failed: %s", rho, method, seed, exc)
                    cell = CellResult(rho=rho, method=method, seed=seed, error=str(exc))
                if cell.error is None:
                    tau, cm = cell.decision_threshold, CostMatrix.from_ratio(rho)
                    recount = empirical_cost(cell.test_preds, data[2].labels, tau, cm)
                    if recount != cell.test_cost:
                        raise AssertionError(f"cost audit failed for {cell}")
                    audits.append(recount)
                cells.append(cell)
                if cell.state is not None:
                    emit_series(cell.state, out / "series" / f"rho{rho:g}_seed{seed}", cfg.svg)
            if seed == cfg.seeds[0]:
                subgroups += _subgroup_block(cfg, data, rho, seed)

    report = ExperimentReport(cfg, cells, subgroups, out)
    write_outputs(report, extra={"resolved.rhos": list(resolved_rhos or ()),
                                 "audit.cells_checked": len(audits)})
    return report


def _subgroup_block(cfg: ExperimentConfig, data, rho: float, seed: int) -> list[dict]:
    train, val, _ = data
    cm = CostMatrix.from_ratio(rho)
    ada = cfg.adacsl.build(cm, cfg.train.build(cfg.adacsl.max_epochs, seed))
    ada = dataclasses.replace(ada, num_bins=cfg.subgroup_bins)
    rows, p1, pa, pb = illustrate_subgroups(train, val, ada, cfg.subgroup_bins)
    # per-bin costs must add up to the whole-set cost at the same threshold
    for tag, p in (("epoch1", p1), ("a", pa), ("b", pb)):
        total = empirical_cost(p, val.labels, ada.t_prime, cm)
        binned = sum(r[f"{tag}_cost"] for r in rows if r["size"])
        if binned != total:
            raise AssertionError(f"subgroup cost audit failed: {binned} != {total}")
    return [{"rho": rho, "seed": seed, **r} for r in rows]


SUBGROUP_COLUMNS = [
    "rho", "seed", "m", "range_lo", "range_hi", "size",
    "epoch1_acc", "epoch1_ce", "epoch1_cost",
    "a_acc", "a_ce", "a_cost", "b_acc", "b_ce", "b_cost", "high_cost",
]


def write_outputs(report: ExperimentReport, extra: Optional[dict] = None) -> None:
    out = report.out_dir
    cfg = report.config
    summary = report.summary()
    write_rows(out / "report.csv", summary)
    write_rows(out / "subgroups.csv", report.subgroups, SUBGROUP_COLUMNS)
    results = {
        "config": config_to_dict(cfg),
        "cells": [c.to_dict() for c in report.cells],
        "summary": summary,
    }
    (out / "results.json").write_text(json.dumps(results, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out / "manifest.txt").write_text("\n".join(manifest_lines(cfg, extra)) + "\n", encoding="utf-8")


def format_table(summary: list[dict], methods) -> str:
    """Markdown rendering of the setup x method table (cost / accuracy)."""
    head = "| rho | " + " | ".join(f"{m} cost | {m} acc" for m in methods) + " |"
    sep = "|---" * (1 + 2 * len(methods)) + "|"
    lines = [head, sep]
    for r in summary:
        cells = [f"{r['rho']:g}"]
        for m in methods:
            c, a = r.get(f"{m}_cost_mean"), r.get(f"{m}_acc_mean")
            cells.append("-" if c is None else f"{c:.1f} ± {r[f'{m}_cost_std']:.1f}")
            cells.append("-" if a is None else f"{100 * a:.2f}%")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines)
