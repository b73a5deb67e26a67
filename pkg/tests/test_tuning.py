from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from copulaboost import simgen, tuning
from copulaboost.cli import select_models
from copulaboost.data import Dataset
from copulaboost.engine import Booster, BoostConfig, copula_spec, fit, univariate_spec
from copulaboost.errors import DataError
from copulaboost.tuning import RiskCurve, cv_folds, predictive_risk, risk_components, select_by_predictive_risk


@pytest.fixture(scope="module")
def split():
    return simgen.generate_split(simgen.Scenario(p=5, copula="Gaussian", seed=21), (300, 300))


CFG = BoostConfig(step_length=0.1)
SPEC = copula_spec()


def test_holdout_curve_length_and_argmin(split):
    tr, va = split
    c0 = tuning.tune_mstop_holdout(SPEC, tr, va, CFG, 0)
    assert c0.risk.shape == (1,) and c0.argmin == 0
    c = tuning.tune_mstop_holdout(SPEC, tr, va, CFG, 60)
    assert c.risk.shape == (61,) and c.m_max == 60
    assert c.risk[c.argmin] == c.risk.min() == c.minimum


def test_holdout_curve_equals_fresh_fit_risk(split):
    tr, va = split
    c = tuning.tune_mstop_holdout(SPEC, tr, va, CFG, 60)
    for m in (0, 17, 60):
        fresh = fit(SPEC, tr, replace(CFG, mstop=m))
        assert abs(c.risk[m] - predictive_risk(fresh, va)) < 1e-10


def test_pure_noise_stops_early():
    for seed in range(5):
        rng = np.random.default_rng(seed)

        def make(n):
            return Dataset((np.exp(rng.standard_normal(n)), np.exp(0.5 * rng.standard_normal(n))),
                           rng.uniform(-1, 1, (n, 5)))

        c = tuning.tune_mstop_holdout(copula_spec("LogNormal", "LogNormal", "Gaussian"), make(500), make(500),
                                      BoostConfig(), 500)
        assert c.argmin < 500 / 4
        assert c.risk[-1] > c.minimum


def test_cv_folds_blocks():
    labels = cv_folds(23, 4, seed=3)
    perm = np.random.default_rng(3).permutation(23)
    assert np.array_equal(labels[perm], np.repeat(np.arange(4), [6, 6, 6, 5]))
    assert np.array_equal(cv_folds(23, 4, seed=3), labels)
    with pytest.raises(ValueError):
        cv_folds(10, 1)
    with pytest.raises(DataError):
        cv_folds(3, 5)


def test_cv_duplicated_halves_identical():
    d = simgen.generate(simgen.Scenario(n=150, p=4, seed=3))
    both = Dataset(tuple(np.concatenate([y, y]) for y in d.y), np.vstack([d.X, d.X]), d.names)
    folds = np.repeat([0, 1], 150)
    c = tuning.tune_mstop_cv(SPEC, both, CFG, m_max=30, folds=folds)
    assert np.array_equal(c.fold_risks[0], c.fold_risks[1])


def test_cv_deterministic_and_thread_independent(split):
    tr, _ = split
    a = tuning.tune_mstop_cv(SPEC, tr, CFG, k=3, m_max=20, seed=5)
    b = tuning.tune_mstop_cv(SPEC, tr, CFG, k=3, m_max=20, seed=5)
    c = tuning.tune_mstop_cv(SPEC, tr, CFG, k=3, m_max=20, seed=5, threads=2)
    assert np.array_equal(a.risk, b.risk) and np.array_equal(a.risk, c.risk)
    assert np.array_equal(a.folds, cv_folds(tr.n, 3, 5))
    assert_allclose(a.risk, a.fold_risks.mean(axis=0))


def test_cv_fold_too_small():
    d = simgen.generate(simgen.Scenario(n=12, p=4, seed=1))
    with pytest.raises(DataError):
        tuning.tune_mstop_cv(SPEC, d, CFG, k=2, m_max=2, folds=np.array([0] * 11 + [1]))


def test_predictive_risk_on_training_data(split):
    tr, _ = split
    res = fit(SPEC, tr, replace(CFG, mstop=40))
    assert_allclose(predictive_risk(res, tr), res.risk_path[-1], rtol=1e-12)


def test_independence_risk_is_sum_of_margins(split):
    tr, va = split
    res = fit(copula_spec(covariates={"theta": []}), tr, replace(CFG, mstop=40))
    res.states[4].offset = 0.0
    p = res.predict_params(va.X)
    m1, m2 = res.likelihood.margins
    manual = -np.mean(m1.logpdf(va.y[0], p["mu1"], p["sigma1"]) + m2.logpdf(va.y[1], p["mu2"], p["sigma2"]))
    assert_allclose(predictive_risk(res, va), manual, rtol=1e-12)


def test_risk_components_sum(split):
    tr, va = split
    res = fit(copula_spec(copula="Clayton"), tr, replace(CFG, mstop=40))
    comp = risk_components(res, va)
    assert abs(comp["copula"] + comp["margin1"] + comp["margin2"] - comp["total"]) < 1e-10


def test_select_ties_and_table(split):
    tr, va = split
    a = fit(SPEC, tr, replace(CFG, mstop=10))
    b = fit(copula_spec(copula="Clayton"), tr, replace(CFG, mstop=10))
    sel = select_by_predictive_risk([("first", a), ("second", a)], va)
    assert sel.winner == "first"
    sel = select_by_predictive_risk([("g", a), ("c", b)], va)
    risks = {r["label"]: r["risk"] for r in sel.table}
    assert sel.winner == min(risks, key=risks.get)
    assert sum(r["winner"] for r in sel.table) == 1


def test_tuned_fit_requires_one_tuner(split):
    tr, va = split
    with pytest.raises(ValueError):
        tuning.tuned_fit(SPEC, tr, CFG)
    with pytest.raises(ValueError):
        tuning.tuned_fit(SPEC, tr, CFG, validation=va, k=3)
    res, curve = tuning.tuned_fit(SPEC, tr, CFG, validation=va, m_max=30)
    assert res.mstop == curve.argmin
    res, curve = tuning.tuned_fit(SPEC, tr, CFG, k=3, m_max=10, seed=1)
    assert res.mstop == curve.argmin and curve.fold_risks.shape == (3, 11)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=40), st.integers(-10**6, 10**6))
def test_argmin_shift_invariant_property(risk, c):
    # integer-valued curves keep the shift exact in floating point
    r = np.array(risk, dtype=float)
    assert RiskCurve(r + c).argmin == RiskCurve(r).argmin


# -- desk-scale Monte Carlo -------------------------------------------------------------

@pytest.mark.slow
def test_two_stage_selection_recovers_loglogistic_gumbel():
    cfg = BoostConfig()
    hits = 0
    for seed in simgen.replicate_seeds(123, 10):
        scn = simgen.Scenario(p=6, copula="Gumbel", margins=("LogLogistic", "LogLogistic"), seed=seed)
        tr, va = simgen.generate_split(scn, (1000, 1500))

        def tune(spec, d):
            if d is None:
                return tuning.tune_mstop_holdout(spec, tr, va, cfg, 1000)
            return tuning.tune_mstop_holdout(spec, tr.response(d), va.response(d), cfg, 1000)

        rows = select_models(tr, ["LogNormal", "LogLogistic"], ["Gaussian", "Clayton", "Gumbel"], cfg, tune,
                             lambda s: s)
        winners = [r["candidate"] for r in rows if r["winner"]]
        hits += winners == ["LogLogistic", "LogLogistic", "LogLogistic-LogLogistic-Gumbel"]
    assert hits >= 9


@pytest.mark.slow
def test_cv_tuned_selection_of_informative_covariates():
    truth = {name: {f"x{j + 1}" for j in cols} for name, cols in simgen.INFORMATIVE.items()}
    hits = 0
    for seed in simgen.replicate_seeds(77, 10):
        d = simgen.generate(simgen.Scenario(n=1000, p=20, copula="Gaussian", seed=seed))
        res, _ = tuning.tuned_fit(copula_spec(), d, BoostConfig(), k=5, m_max=2000, seed=1)
        sel = res.selected()
        hits += all(truth[name] <= set(sel[name]) for name in truth)
    assert hits == 10
