import math

import numpy as np
import pytest

import oracles
from latent_groups.analysis import candidate_models, common_fraction
from latent_groups.data import DOG_LYMPHOMA, Dataset
from latent_groups.design import ModelSpec, SufficientStats, build_model_matrix, sufficient_stats
from latent_groups.errors import ContractViolation, InsufficientDataError
from latent_groups.marginal_flat import (
    FractionalConfig,
    fbf_exponent,
    hetero_log_marginal,
    logq_flat_hetero_laplace,
    logq_flat_hetero_separable,
    logq_flat_homoscedastic,
)
from latent_groups.schemes import GroupingScheme


def _stats(N, P, ss, **kw):
    return SufficientStats(N=N, P=P, ss_resid=ss, sst=ss * 2 + 1, **kw)


def _two_group_data(n1, n2, seed, slope=True):
    rng = np.random.default_rng(seed)
    N = n1 + n2
    level = np.r_[np.resize([1, 2], n1), np.resize([3, 4], n2)]
    x = rng.uniform(0, 5, N)
    sd = np.where(level <= 2, 1.0, 2.0)
    y = 1 + 0.4 * x + 0.8 * (level > 2) + rng.normal(size=N) * sd
    return Dataset(y=y, level=level, level_labels=("a", "b", "c", "d"), covariate=x if slope else None)


S = GroupingScheme.from_label("1,2:3,4")


def test_fbf_exponent_examples():
    s = GroupingScheme.from_label("1,2,5:3,4,6")
    cfg = fbf_exponent(build_model_matrix(DOG_LYMPHOMA, ModelSpec("twoway", "IV", s)), "gprior")
    assert (cfg.m0, cfg.b) == (3, 0.25)
    d = _two_group_data(20, 20, 0)
    cfg = fbf_exponent(build_model_matrix(d, ModelSpec("ancova", "I")), "flat")
    assert (cfg.m0, cfg.b) == (2, 0.05)
    d50 = _two_group_data(25, 25, 1)
    cfg = fbf_exponent(build_model_matrix(d50, ModelSpec("ancova", "II")), "gprior")
    assert (cfg.m0, cfg.b) == (2, 0.04)


def test_fbf_exponent_infeasible():
    # simple regression on three points: m0 = 2 coefficients + 1 variance = N
    d = Dataset(y=[1.0, 2.5, 2.0], level=[1, 2, 1], level_labels=("a", "b"), covariate=[0.0, 1.0, 2.0])
    with pytest.raises(InsufficientDataError):
        fbf_exponent(build_model_matrix(d, ModelSpec("ancova", "II")), "flat")


def test_fraction_bounds():
    with pytest.raises(ContractViolation):
        FractionalConfig(m0=1, b=0.0)
    with pytest.raises(ContractViolation):
        FractionalConfig(m0=1, b=1.5)


def test_homoscedastic_b_one():
    assert logq_flat_homoscedastic(_stats(10, 3, 4.2), FractionalConfig(10, 1.0)) == pytest.approx(0.0, abs=1e-12)


def test_homoscedastic_small_case():
    v = logq_flat_homoscedastic(_stats(4, 1, 1.0), FractionalConfig(2, 0.5))
    assert v == pytest.approx(math.log(0.25 / math.pi), abs=1e-12)


def test_homoscedastic_small_case_oracle():
    # an intercept-only design on 4 points whose residual sum of squares is 1
    y = np.array([0.5, -0.5, 0.5, -0.5])
    X = np.ones((4, 1))
    o = oracles.flat_log_marginal(X, y, None, 1.0) - oracles.flat_log_marginal(X, y, None, 0.5)
    assert o == pytest.approx(math.log(0.25 / math.pi), abs=1e-8)


def test_grouped_uses_total_residual():
    a = logq_flat_homoscedastic(_stats(12, 3, 5.0, ss_resid1=2.0, ss_resid2=3.0), FractionalConfig(4, 1 / 3))
    b = logq_flat_homoscedastic(_stats(12, 3, 5.0), FractionalConfig(4, 1 / 3))
    assert a == b


def test_homoscedastic_infeasible():
    with pytest.raises(InsufficientDataError):
        logq_flat_homoscedastic(_stats(10, 5, 1.0), FractionalConfig(5, 0.5))


def test_separable_b_one():
    st = _stats(10, 4, 3.0, n1=5, n2=5, p1=2, p2=2, ss_resid1=1.0, ss_resid2=2.0, separable=True)
    assert logq_flat_hetero_separable(st, FractionalConfig(10, 1.0)) == pytest.approx(0.0, abs=1e-12)


def test_separable_rejects_shared_design():
    st = _stats(10, 4, 3.0, n1=5, n2=5, p1=2, p2=2, ss_resid1=1.0, ss_resid2=2.0, separable=False)
    with pytest.raises(ContractViolation):
        logq_flat_hetero_separable(st, FractionalConfig(5, 0.5))


def _intercepts(y1, y2):
    y = np.r_[y1, y2]
    n1 = len(y1)
    X = np.zeros((y.size, 2))
    X[:n1, 0] = 1
    X[n1:, 1] = 1
    group = np.r_[np.ones(n1, int), np.full(len(y2), 2)]
    return X, y, group


def _scaled(v, ss):
    v = np.asarray(v, float)
    r = v - v.mean()
    return v.mean() + r * math.sqrt(ss / (r @ r))


def test_separable_small_case_oracle():
    X, y, group = _intercepts(_scaled([0.1, 0.9, 0.4], 1.0), _scaled([2.0, 3.5, 2.4], 2.0))
    st = SufficientStats(N=6, P=2, ss_resid=3.0, sst=10.0, n1=3, n2=3, p1=1, p2=1,
                         ss_resid1=1.0, ss_resid2=2.0, separable=True)
    b = 2 / 3
    o = oracles.flat_log_marginal(X, y, group, 1.0) - oracles.flat_log_marginal(X, y, group, b)
    assert logq_flat_hetero_separable(st, FractionalConfig(4, b)) == pytest.approx(o, abs=1e-8)


def test_separable_identical_groups():
    # with equal groups the value is two one-group closed forms plus the shared pi and b bookkeeping
    n, p, ss, b = 6, 1, 1.7, 0.5
    st = SufficientStats(N=2 * n, P=2 * p, ss_resid=2 * ss, sst=9.0, n1=n, n2=n, p1=p, p2=p,
                         ss_resid1=ss, ss_resid2=ss, separable=True)
    one = logq_flat_homoscedastic(_stats(n, p, ss), FractionalConfig(n * b, b))
    assert logq_flat_hetero_separable(st, FractionalConfig(2 * n * b, b)) == pytest.approx(2 * one, abs=1e-12)
    X, y, group = _intercepts(_scaled([0, 1, 3, 2, 5, 4], ss), _scaled([1, 1.5, 0, 2, 3, 0.2], ss))
    o = oracles.flat_log_marginal(X, y, group, 1.0) - oracles.flat_log_marginal(X, y, group, b)
    assert 2 * one == pytest.approx(o, abs=1e-8)


def test_laplace_b_one_is_zero():
    d = _two_group_data(6, 6, 3)
    dm = build_model_matrix(d, ModelSpec("ancova", "VII", S))
    assert logq_flat_hetero_laplace(dm, None, FractionalConfig(12, 1.0)) == 0.0


def test_laplace_on_separable_design():
    d = _two_group_data(6, 6, 4)
    dm = build_model_matrix(d, ModelSpec("ancova", "VIII", S))
    st = sufficient_stats(dm)
    cfg = FractionalConfig(9, 0.75)
    exact = logq_flat_hetero_separable(st, cfg)
    assert abs(logq_flat_hetero_laplace(dm, None, cfg) - exact) <= 0.05


def test_laplace_vii_vs_cubature():
    # evaluated at the fraction the analysis assigns (shared across the K=4 candidate set)
    d = _two_group_data(8, 8, 5)
    dm = build_model_matrix(d, ModelSpec("ancova", "VII", S))
    b, _ = common_fraction(d, candidate_models(d)[0], "flat")
    cfg = FractionalConfig(b * d.N, b)
    o = oracles.flat_log_marginal(dm.X, dm.y, dm.group, 1.0) - oracles.flat_log_marginal(dm.X, dm.y, dm.group, cfg.b)
    assert abs(logq_flat_hetero_laplace(dm, None, cfg) - o) <= 0.05


def test_laplace_state_invariants():
    d = _two_group_data(8, 8, 6)
    dm = build_model_matrix(d, ModelSpec("ancova", "VII", S))
    _, st = hetero_log_marginal(dm, dm.y, 0.5)
    assert np.all(np.linalg.eigvalsh(st.hessian) < 0)
    f = lambda lam: oracles.flat_log_integrand(lam, dm.X, dm.y, dm.group, 0.5)
    grad = np.array([(f(st.mode + e) - f(st.mode - e)) / 2e-5 for e in np.eye(2) * 1e-5])
    assert np.linalg.norm(grad) <= 1e-5


def test_scaling_keeps_bayes_factor():
    d = _two_group_data(8, 8, 7)
    cfg = FractionalConfig(4, 0.25)
    s2 = GroupingScheme.from_label("1,3:2,4")

    def bf(data):
        a = sufficient_stats(build_model_matrix(data, ModelSpec("ancova", "IV", S)))
        b = sufficient_stats(build_model_matrix(data, ModelSpec("ancova", "IV", s2)))
        return logq_flat_homoscedastic(a, cfg) - logq_flat_homoscedastic(b, cfg)

    scaled = Dataset(y=d.y * 37.0, level=d.level, level_labels=d.level_labels, covariate=d.covariate)
    assert bf(scaled) == pytest.approx(bf(d), abs=1e-8)
