"""Tabular and graphical summaries of fitted models.

Tables are plain CSV. Figures need matplotlib, which is imported only when a
``plot_*`` function is called; install the ``plots`` extra to use them.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .engine import FitResult
from .io import write_table


def selection_table(fit: FitResult):
    """Rows ``(parameter, covariate, times_selected, first_iteration)`` in selection order."""
    rows = []
    first = {}
    counts = {}
    for e in fit.selection_log:
        key = (e.parameter, e.covariate)
        counts[key] = counts.get(key, 0) + 1
        first.setdefault(key, e.iteration)
    for (par, cov), it in sorted(first.items(), key=lambda kv: (fit.param_names.index(kv[0][0]), kv[1])):
        rows.append((par, cov, counts[(par, cov)], it))
    return rows


def format_selection(fit: FitResult) -> str:
    lines = [f"model: {fit.likelihood.label}  mstop: {fit.mstop}"]
    sel = fit.selected()
    width = max(len(n) for n in fit.param_names)
    for name in fit.param_names:
        covs = ", ".join(sel[name]) if sel[name] else "(none)"
        lines.append(f"  {name:<{width}}  {covs}")
    return "\n".join(lines)


def effect_curves(fit: FitResult, n_grid: int = 101):
    """Partial effects on the predictor scale for every selected (parameter, covariate).

    Returns a list of ``(parameter, covariate, grid, effect)``. The grid spans
    the training range of the covariate; the effect is the accumulated
    contribution of that learner, including its share of the intercept.
    """
    out = []
    ranges = fit.covariate_ranges
    for st in fit.states:
        for j in sorted(st.coefs):
            lrn = fit.learners[j]
            if ranges is not None:
                lo, hi = ranges[lrn.covariate_index]
            else:
                lo, hi = getattr(lrn, "lower", -1.0), getattr(lrn, "upper", 1.0)
            grid = np.linspace(lo, hi, n_grid)
            out.append((st.name, lrn.name, grid, lrn.evaluate(st.coefs[j], grid)))
    return out


def write_effect_curves(fit: FitResult, path, n_grid: int = 101):
    curves = effect_curves(fit, n_grid)
    par = np.array([c[0] for c in curves for _ in c[2]], dtype=object)
    cov = np.array([c[1] for c in curves for _ in c[2]], dtype=object)
    x = np.concatenate([c[2] for c in curves]) if curves else np.array([])
    eff = np.concatenate([c[3] for c in curves]) if curves else np.array([])
    write_table(path, ["parameter", "covariate", "x", "effect"], [par, cov, x, eff])


def write_risk_path(fit: FitResult, path):
    it = np.arange(fit.risk_path.size).astype(object)
    cols = [it, fit.risk_path]
    header = ["iteration", "train_risk"]
    if fit.validation_risk_path is not None:
        cols.append(fit.validation_risk_path)
        header.append("validation_risk")
    write_table(path, header, cols)


def write_risk_curve(curve, path):
    it = np.arange(curve.risk.size).astype(object)
    header, cols = ["iteration", "risk"], [it, curve.risk]
    if curve.fold_risks is not None:
        for f, r in enumerate(curve.fold_risks):
            header.append(f"fold{f + 1}")
            cols.append(r)
    write_table(path, header, cols)


def write_selection(fit: FitResult, path):
    rows = selection_table(fit)
    cols = [np.array([r[i] for r in rows], dtype=object) for i in range(4)]
    write_table(path, ["parameter", "covariate", "times_selected", "first_iteration"], cols)


def write_roc(fpr, tpr, thresholds, path):
    thr = np.concatenate([[np.inf], thresholds])
    write_table(path, ["fpr", "tpr", "threshold"], [fpr, tpr, thr])


# -- figures -----------------------------------------------------------------

def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_effects(fit: FitResult, path, n_grid: int = 101):
    plt = _pyplot()
    curves = effect_curves(fit, n_grid)
    names = [n for n in fit.param_names if any(c[0] == n for c in curves)] or list(fit.param_names)
    fig, axes = plt.subplots(1, len(names), figsize=(3.2 * len(names), 3.0), squeeze=False)
    for ax, name in zip(axes[0], names):
        for par, cov, grid, eff in curves:
            if par == name:
                ax.plot(grid, eff - eff.mean(), label=cov)
        ax.set_title(name)
        ax.set_xlabel("covariate")
        ax.axhline(0.0, color="0.7", lw=0.8)
        if any(c[0] == name for c in curves):
            ax.legend(fontsize=6)
    axes[0][0].set_ylabel("centred effect")
    fig.tight_layout()
    fig.savefig(Path(path))
    plt.close(fig)


def plot_risk_path(fit: FitResult, path):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(fit.risk_path, label="train")
    if fit.validation_risk_path is not None:
        ax.plot(fit.validation_risk_path, label="validation")
        m = int(np.argmin(fit.validation_risk_path))
        ax.axvline(m, color="0.5", ls="--", lw=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean negative log-likelihood")
    ax.legend()
    fig.tight_layout()
    fig.savefig(Path(path))
    plt.close(fig)


def plot_roc(fpr, tpr, path, auc_value=None):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(fpr, tpr, label=None if auc_value is None else f"AUC = {auc_value:.3f}")
    ax.plot([0, 1], [0, 1], color="0.7", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    if auc_value is not None:
        ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(Path(path))
    plt.close(fig)


def write_fit_report(fit: FitResult, directory, plots: bool = False):
    """Write selection, effect-curve and risk-path tables (and figures if ``plots``)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_selection(fit, d / "selection.csv")
    write_effect_curves(fit, d / "effects.csv")
    write_risk_path(fit, d / "risk_path.csv")
    if plots:
        plot_effects(fit, d / "effects.png")
        plot_risk_path(fit, d / "risk_path.png")
