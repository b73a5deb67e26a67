"""Command-line interface: ``copulaboost {simulate,fit,cv,predict,score,select}``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure. Options can also be given in a JSON or YAML file passed
with ``--config``; keys are the long option names with dashes or underscores,
and options given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import io, report, scoring, simgen, tuning
from .copulas import COPULAS, get_copula
from .engine import Booster, BoostConfig, LearnerSettings, ModelSpec, copula_spec, univariate_spec
from .errors import DataError, DomainError, InfeasibleDFError, NumericalError
from .margins import FAMILIES

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# -- argument parsing -----------------------------------------------------------

def _model_options(p):
    g = p.add_argument_group("model")
    g.add_argument("--margins", nargs=2, default=["LogNormal", "LogLogistic"], metavar=("M1", "M2"),
                   help="marginal families of the two responses (default: LogNormal LogLogistic)")
    g.add_argument("--copula", default="Gaussian", help="copula family (default: Gaussian)")
    g.add_argument("--responses", nargs=2, default=["y1", "y2"], metavar=("Y1", "Y2"),
                   help="names of the response columns (default: y1 y2)")
    g.add_argument("--drop", nargs="*", default=[], help="columns to ignore")
    g.add_argument("--linear", nargs="*", default=[], help="covariates that get linear base-learners")
    g.add_argument("--learner", choices=["pspline", "linear"], default="pspline",
                   help="base-learner for continuous covariates (default: pspline)")
    g.add_argument("--knots", type=int, default=20, help="P-spline knots (default: 20)")
    g.add_argument("--df", type=float, default=4.0, help="P-spline degrees of freedom (default: 4)")
    b = p.add_argument_group("boosting")
    b.add_argument("--step-length", type=float, default=0.01, help="step length s (default: 0.01)")
    b.add_argument("--mstop", type=int, default=1000, help="iterations when no tuner is chosen (default: 1000)")
    b.add_argument("--stabilization", choices=["none", "mad"], default="none",
                   help="gradient stabilization (default: none)")
    b.add_argument("--offsets", choices=["mle", "zero"], default="mle", help="offset initialisation (default: mle)")
    b.add_argument("--seed", type=int, default=0, help="seed for fold assignment and scoring (default: 0)")


def _tuner_options(p, required=False):
    t = p.add_argument_group("tuning")
    t.add_argument("--validation", help="validation CSV for hold-out tuning of mstop")
    t.add_argument("--folds", type=int, help="number of cross-validation folds for tuning mstop")
    t.add_argument("--m-max", type=int, default=2000, help="largest mstop considered when tuning (default: 2000)")
    t.add_argument("--threads", type=int, default=1, help="worker processes for cross-validation (default: 1)")
    p.set_defaults(_tuner_required=required)


def build_parser():
    parser = argparse.ArgumentParser(prog="copulaboost", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON or YAML file with option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write synthetic datasets")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=1000, help="training observations (default: 1000)")
    p.add_argument("--n-validation", type=int, default=1500, help="validation observations (default: 1500)")
    p.add_argument("--n-test", type=int, default=0, help="test observations (default: 0, none)")
    p.add_argument("--p", type=int, default=20, help="covariates (default: 20)")
    p.add_argument("--copula", default="Gaussian")
    p.add_argument("--margins", nargs=2, default=["LogNormal", "LogLogistic"], metavar=("M1", "M2"))
    p.add_argument("--truth", choices=sorted(simgen.TRUTHS), default="nonlinear")
    p.add_argument("--independence", action="store_true", help="independent responses")
    p.add_argument("--fixed-theta", type=float, help="constant copula parameter")
    p.add_argument("--replicates", type=int, default=1, help="number of replicates (default: 1)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")

    p = sub.add_parser("fit", help="fit a model and write it as JSON")
    p.add_argument("data", help="training CSV")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report-dir", help="directory for selection, effect-curve and risk-path tables")
    p.add_argument("--plots", action="store_true", help="also render PNG figures into --report-dir")
    p.add_argument("--univariate", type=int, choices=[1, 2],
                   help="fit only the given response with the corresponding margin")
    _model_options(p)
    _tuner_options(p)

    p = sub.add_parser("cv", help="cross-validated risk curve for mstop")
    p.add_argument("data", help="training CSV")
    p.add_argument("--out", help="CSV for the risk curve")
    p.add_argument("--folds-out", help="CSV recording the fold of every row")
    _model_options(p)
    _tuner_options(p)

    p = sub.add_parser("predict", help="fitted parameters, means, Kendall's tau and exceedance probabilities")
    p.add_argument("model", help="model file")
    p.add_argument("data", help="CSV with the covariate columns")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--thresholds", nargs=2, type=float, metavar=("A", "B"),
                   help="also report P(Y1 > A, Y2 > B)")

    p = sub.add_parser("score", help="log score, energy score, predictive risk and AUC on test data")
    p.add_argument("data", help="test CSV")
    p.add_argument("--model", action="append", default=[], help="copula model file (repeatable)")
    p.add_argument("--independent", nargs=2, metavar=("MODEL1", "MODEL2"),
                   help="two univariate model files scored as an independence model")
    p.add_argument("--responses", nargs=2, default=["y1", "y2"], metavar=("Y1", "Y2"))
    p.add_argument("--drop", nargs="*", default=[])
    p.add_argument("--n-samples", type=int, default=1000, help="Monte Carlo draws per observation (default: 1000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thresholds", nargs=2, type=float, metavar=("A", "B"),
                   help="thresholds for the joint-exceedance AUC")
    p.add_argument("--label-column", help="binary label column for the AUC (default: joint exceedance of Y)")
    p.add_argument("--out", help="CSV for the score table")
    p.add_argument("--roc-out", help="CSV for the ROC curve of the first model")
    p.add_argument("--plots", action="store_true", help="render the ROC curve next to --roc-out")

    p = sub.add_parser("select", help="choose margins and copula by predictive risk")
    p.add_argument("data", help="training CSV")
    p.add_argument("--margin-candidates", nargs="+", default=["LogNormal", "LogLogistic"])
    p.add_argument("--copula-candidates", nargs="+", default=["Gaussian", "Clayton", "Gumbel"])
    p.add_argument("--out", help="CSV for the ranking table")
    _model_options(p)
    _tuner_options(p, required=True)
    return parser


def _load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{path}: cannot read config ({exc.strerror})") from exc
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        try:
            cfg = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise UsageError(f"{path}: invalid YAML ({exc})") from exc
    else:
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc.msg})") from exc
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a mapping")
    return {str(k).replace("-", "_"): v for k, v in cfg.items()}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = _load_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config key(s) for {args.command}: {', '.join(unknown)}")
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


# -- helpers ---------------------------------------------------------------------

def _check_family_names(margins=(), copulas=()):
    for m in margins:
        if m.lower() not in {k.lower() for k in FAMILIES}:
            raise UsageError(f"unknown margin {m!r}; choose from {', '.join(FAMILIES)}")
    for c in copulas:
        if c.lower() not in {k.lower() for k in COPULAS} | {"gauss"}:
            raise UsageError(f"unknown copula {c!r}; choose from {', '.join(COPULAS)}")


def _config(args) -> BoostConfig:
    try:
        return BoostConfig(step_length=args.step_length, mstop=args.mstop, stabilization=args.stabilization,
                           offsets=args.offsets, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _read(path, args, responses=None):
    """Read ``path``; the response columns not in ``responses`` are never covariates."""
    responses = args.responses if responses is None else responses
    drop = list(getattr(args, "drop", ())) + [r for r in args.responses if r not in responses]
    return io.read_dataset(path, responses, drop=drop).validate()


def _spec(args, data, likelihood_spec) -> ModelSpec:
    linear = set(io.binary_columns(data))
    for name in args.linear:
        if name not in data.names:
            raise UsageError(f"--linear: no covariate named {name!r}")
        linear.add(data.names.index(name))
    likelihood_spec.learners = LearnerSettings(kind=args.learner, n_knots=args.knots, df=args.df)
    likelihood_spec.linear = tuple(sorted(linear))
    return likelihood_spec


def _tuner(args):
    if args.validation is not None and args.folds is not None:
        raise UsageError("choose either --validation or --folds, not both")
    if args._tuner_required and args.validation is None and args.folds is None:
        raise UsageError("a tuner is required: pass --validation FILE or --folds K")
    if args.folds is not None and args.folds < 2:
        raise UsageError("--folds must be at least 2")
    if args.m_max < 0:
        raise UsageError("--m-max must be non-negative")


def _fit(spec, data, config, args, validation=None):
    """Fit with the tuner chosen on the command line; returns ``(fit, curve)``."""
    if validation is not None:
        return tuning.tuned_fit(spec, data, config, validation=validation, m_max=args.m_max)
    if args.folds is not None:
        return tuning.tuned_fit(spec, data, config, k=args.folds, m_max=args.m_max, seed=config.seed,
                                threads=args.threads)
    return Booster(spec, data, config).run(config.mstop).result(), None


def _print(*a):
    print(*a, flush=True)


# -- commands ---------------------------------------------------------------------

def cmd_simulate(args):
    _check_family_names(args.margins, [args.copula])
    if args.n < 2 or args.n_validation < 0 or args.n_test < 0:
        raise UsageError("--n must be at least 2 and --n-validation/--n-test non-negative")
    if args.replicates < 1:
        raise UsageError("--replicates must be at least 1")
    if args.fixed_theta is not None:
        lo, hi = get_copula(args.copula).theta_domain
        if not lo < args.fixed_theta < hi:
            raise UsageError(f"--fixed-theta must lie in ({lo}, {hi}) for the {args.copula} copula")
    out = Path(args.out)
    try:
        base = simgen.Scenario(copula=args.copula, margins=tuple(args.margins), truth=args.truth,
                               independence=args.independence, fixed_theta=args.fixed_theta, p=args.p,
                               seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sizes = [args.n, args.n_validation] + ([args.n_test] if args.n_test > 0 else [])
    names = ["train", "validation", "test"][: len(sizes)]
    seeds = simgen.replicate_seeds(args.seed, args.replicates) if args.replicates > 1 else [args.seed]
    for r, seed in enumerate(seeds):
        d = out / f"rep{r + 1:03d}" if args.replicates > 1 else out
        scn = replace(base, seed=seed)
        for name, data in zip(names, simgen.generate_split(scn, [s for s in sizes if s > 0])):
            io.write_dataset(d / f"{name}.csv", data)
    manifest = {
        "scenario": {k: v for k, v in asdict(base).items() if k != "seed"},
        "seed": args.seed,
        "replicates": args.replicates,
        "replicate_seeding": "replicate r uses SeedSequence(seed, spawn_key=(r,)) when replicates > 1",
        "split_seeding": "train/validation/test use children 0/1/2 of the replicate seed",
        "sizes": dict(zip(names, sizes)),
        "truth_functions": simgen.TRUTH_DESCRIPTIONS[args.truth],
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    _print(f"wrote {args.replicates} replicate(s) to {out}")


def cmd_fit(args):
    _check_family_names(args.margins, [args.copula])
    _tuner(args)
    config = _config(args)
    if args.univariate:
        d = args.univariate - 1
        data = _read(args.data, args, [args.responses[d]])
        val = _read(args.validation, args, [args.responses[d]]) if args.validation else None
        spec = _spec(args, data, univariate_spec(args.margins[d]))
    else:
        data = _read(args.data, args)
        val = _read(args.validation, args) if args.validation else None
        spec = _spec(args, data, copula_spec(args.margins[0], args.margins[1], args.copula))
    fit, curve = _fit(spec, data, config, args, val)
    io.save_model(fit, args.out)
    _print(report.format_selection(fit))
    if curve is not None:
        _print(f"tuned mstop: {curve.argmin} (risk {curve.minimum:.6f})")
    if args.report_dir:
        report.write_fit_report(fit, args.report_dir, plots=args.plots)
        if curve is not None:
            report.write_risk_curve(curve, Path(args.report_dir) / "tuning_curve.csv")


def cmd_cv(args):
    _check_family_names(args.margins, [args.copula])
    if args.folds is None:
        raise UsageError("cv requires --folds K")
    _tuner(args)
    config = _config(args)
    data = _read(args.data, args)
    spec = _spec(args, data, copula_spec(args.margins[0], args.margins[1], args.copula))
    curve = tuning.tune_mstop_cv(spec, data, config, args.folds, args.m_max, seed=config.seed, threads=args.threads)
    _print(f"cross-validated mstop: {curve.argmin} (risk {curve.minimum:.6f})")
    if args.out:
        report.write_risk_curve(curve, args.out)
    if args.folds_out:
        io.write_table(args.folds_out, ["row", "fold"],
                       [np.arange(1, data.n + 1).astype(object), (curve.folds + 1).astype(object)])


def _covariates(path, fit):
    header, table = io.read_table(path)
    missing = [c for c in fit.covariate_names if c not in header]
    if missing:
        raise DataError(f"{path}: covariate column(s) not found: {', '.join(missing)}")
    return table[:, [header.index(c) for c in fit.covariate_names]]


def predict_table(fit, X, thresholds=None):
    """Columns of the prediction output as ``(header, columns)``."""
    lik = fit.likelihood
    params = fit.predict_params(X)
    header, cols = [], []
    for name in fit.param_names:
        header.append(name)
        cols.append(np.asarray(params[name], dtype=float))
    for d, fam in enumerate(lik.margins):
        mu, sigma = (params["mu"], params["sigma"]) if lik.copula is None else (
            params[f"mu{d + 1}"], params[f"sigma{d + 1}"])
        mean = np.full(len(X), np.nan)
        ok = np.ones(len(X), dtype=bool) if fam.name != "LogLogistic" else np.asarray(sigma) > 1.0
        if np.any(ok):
            mean[ok] = fam.mean(np.asarray(mu)[ok], np.asarray(sigma)[ok])
        header.append("mean" if lik.copula is None else f"mean{d + 1}")
        cols.append(mean)
    if lik.copula is not None:
        header.append("tau")
        cols.append(np.asarray(lik.copula.kendall_tau(params["theta"]), dtype=float))
        if thresholds is not None:
            header.append("exceedance")
            cols.append(scoring.joint_exceedance(fit, X, *thresholds))
    elif thresholds is not None:
        raise UsageError("--thresholds needs a bivariate model")
    return header, cols


def cmd_predict(args):
    fit = io.load_model(args.model)
    X = _covariates(args.data, fit)
    if args.thresholds is not None and min(args.thresholds) <= 0:
        raise UsageError("--thresholds must be positive")
    header, cols = predict_table(fit, X, args.thresholds)
    io.write_table(args.out, header, cols)
    _print(f"wrote {len(X)} predictions to {args.out}")


def cmd_score(args):
    if not args.model and not args.independent:
        raise UsageError("pass at least one --model or --independent pair")
    if args.n_samples < 2:
        raise UsageError("--n-samples must be at least 2")
    drop = list(args.drop) + ([args.label_column] if args.label_column else [])
    data = io.read_dataset(args.data, args.responses, drop=drop).validate()
    candidates = []
    for path in args.model:
        fit = io.load_model(path)
        if fit.likelihood.copula is None:
            raise UsageError(f"{path}: --model expects a bivariate model; use --independent for univariate ones")
        candidates.append((fit.likelihood.label, fit))
    if args.independent:
        f1, f2 = (io.load_model(p) for p in args.independent)
        if f1.likelihood.copula is not None or f2.likelihood.copula is not None:
            raise UsageError("--independent expects two univariate models")
        ind = scoring.IndependentFit(f1, f2)
        candidates.append((ind.label, ind))
    labels = None
    if args.label_column or args.thresholds:
        if args.label_column:
            header, table = io.read_table(args.data)
            if args.label_column not in header:
                raise DataError(f"{args.data}: label column {args.label_column!r} not found")
            labels = table[:, header.index(args.label_column)]
        else:
            a, b = args.thresholds
            labels = ((data.y[0] > a) & (data.y[1] > b)).astype(int)
        if args.thresholds is None:
            raise UsageError("--label-column needs --thresholds to define the score")
    rows = []
    for i, (label, fit) in enumerate(candidates):
        comp = tuning.risk_components(fit, data)
        es = scoring.energy_score(fit, data, args.n_samples, args.seed)
        row = {"model": label, "log_score": comp["total"], "energy_score": es, "predictive_risk": comp["total"],
               "risk_copula": comp["copula"], "risk_margin1": comp["margin1"], "risk_margin2": comp["margin2"],
               "n_eval": data.n}
        if labels is not None:
            p = scoring.joint_exceedance(fit, data.X, *args.thresholds)
            try:
                row["auc"] = scoring.auc(p, labels)
            except ValueError as exc:
                raise DataError(f"AUC: {exc}") from exc
            if i == 0 and args.roc_out:
                fpr, tpr, thr = scoring.roc_curve(p, labels)
                report.write_roc(fpr, tpr, thr, args.roc_out)
                if args.plots:
                    report.plot_roc(fpr, tpr, Path(args.roc_out).with_suffix(".png"), row["auc"])
        rows.append(row)
    keys = list(rows[0])
    for r in rows:
        _print("  ".join(f"{k}={r[k]:.6f}" if isinstance(r[k], float) else f"{k}={r[k]}" for k in keys))
    if args.out:
        io.write_table(args.out, keys, [np.array([r[k] for r in rows], dtype=object if k == "model" else float)
                                        if k != "n_eval" else np.array([r[k] for r in rows], dtype=object)
                                        for k in keys])


def select_models(data, margin_candidates, copula_candidates, config, tune, make_spec):
    """Two-stage selection: margins univariately per response, then copulas with the winning margins.

    ``tune(spec, data_part, response_index)`` returns a :class:`~copulaboost.tuning.RiskCurve`
    whose minimum is the candidate's predictive risk. Returns the ranking rows.
    """
    rows = []
    winners = []
    for d in range(2):
        best = None
        for m in margin_candidates:
            curve = tune(make_spec(univariate_spec(m)), d)
            rows.append({"stage": f"margin{d + 1}", "candidate": m, "mstop": curve.argmin, "risk": curve.minimum})
            if best is None or curve.minimum < best[1]:
                best = (m, curve.minimum)
        winners.append(best[0])
        for r in rows:
            if r["stage"] == f"margin{d + 1}":
                r["winner"] = r["candidate"] == best[0]
    best = None
    for c in copula_candidates:
        curve = tune(make_spec(copula_spec(winners[0], winners[1], c)), None)
        rows.append({"stage": "copula", "candidate": f"{winners[0]}-{winners[1]}-{c}", "mstop": curve.argmin,
                     "risk": curve.minimum})
        if best is None or curve.minimum < best[1]:
            best = (rows[-1]["candidate"], curve.minimum)
    for r in rows:
        if r["stage"] == "copula":
            r["winner"] = r["candidate"] == best[0]
    return rows


def cmd_select(args):
    _check_family_names(args.margin_candidates, args.copula_candidates)
    _tuner(args)
    config = _config(args)
    data = _read(args.data, args)
    val = _read(args.validation, args) if args.validation else None

    def make_spec(s):
        return _spec(args, data, s)

    def tune(spec, d):
        tr = data if d is None else data.response(d)
        if val is not None:
            va = val if d is None else val.response(d)
            return tuning.tune_mstop_holdout(spec, tr, va, config, args.m_max)
        return tuning.tune_mstop_cv(spec, tr, config, args.folds, args.m_max, seed=config.seed, threads=args.threads)

    rows = select_models(data, args.margin_candidates, args.copula_candidates, config, tune, make_spec)
    for r in rows:
        mark = "*" if r["winner"] else " "
        _print(f"{mark} {r['stage']:<8} {r['candidate']:<32} mstop={r['mstop']:<6d} risk={r['risk']:.6f}")
    if args.out:
        keys = ["stage", "candidate", "mstop", "risk", "winner"]
        io.write_table(args.out, keys, [np.array([r[k] for r in rows], dtype=float if k == "risk" else object)
                                        for k in keys])


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "cv": cmd_cv,
    "predict": cmd_predict,
    "score": cmd_score,
    "select": cmd_select,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"copulaboost: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"copulaboost {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleDFError as exc:
        print(f"copulaboost {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError) as exc:
        print(f"copulaboost {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"copulaboost {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ImportError as exc:
        print(f"copulaboost {args.command}: error: {exc} (install the 'plots' extra for figures)", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
