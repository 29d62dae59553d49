import math

import numpy as np
import pytest
from scipy.special import ndtr, ndtri

from steinchaos.breuer_major import BmInstance, bm_bound_exact, rho
from steinchaos.chaos import ChaosVector, malliavin_inner
from steinchaos.simulate import (
    SimulationError,
    chatterjee_weight,
    empirical_kolmogorov,
    empirical_wasserstein,
    sample_fbm_increments,
    sample_Zn,
)
from steinchaos.tensors import GramSpace, tensor_power


def test_fbm_unit_variance_all_h():
    for H in (0.2, 0.5, 0.8):
        batch = sample_fbm_increments(H, 4, 50_000, seed=1)
        var = batch.values.var(axis=0)
        assert np.all(np.abs(var - 1.0) < 3 * math.sqrt(2.0 / 50_000) + 0.01)


def test_fbm_lag_one_correlation():
    batch = sample_fbm_increments(0.75, 8, 100_000, seed=7)
    x = batch.values
    lag1 = float(np.mean(x[:, :-1] * x[:, 1:]))
    assert lag1 == pytest.approx(math.sqrt(2) - 1, abs=3.0 / math.sqrt(100_000) * 1.5)
    iid = sample_fbm_increments(0.5, 8, 100_000, seed=7).values
    assert float(np.mean(iid[:, :-1] * iid[:, 1:])) == pytest.approx(
        0.0, abs=3.0 / math.sqrt(100_000) * 1.5
    )


def test_fbm_reproducible_and_prefix_stable():
    a = sample_fbm_increments(0.7, 8, 9000, seed=13)
    b = sample_fbm_increments(0.7, 8, 9000, seed=13)
    assert np.array_equal(a.values, b.values)
    c = sample_fbm_increments(0.7, 8, 4097, seed=13)
    assert np.array_equal(a.values[:4097], c.values)
    d = sample_fbm_increments(0.7, 8, 9000, seed=14)
    assert not np.array_equal(a.values, d.values)


def test_fbm_circulant_matches_cholesky_covariance():
    H, n, count = 0.7, 1500, 3000
    circ = sample_fbm_increments(H, n, count, seed=3, method="circulant")
    chol = sample_fbm_increments(H, n, count, seed=3, method="cholesky")
    assert circ.meta["generator"] == "circulant-embedding"
    assert not circ.meta["circulant_fallback"]
    tol = 3.0 / math.sqrt(count) * 1.5
    for lag in (0, 1, 5):
        emp_c = float(np.mean(circ.values[:, 0] * circ.values[:, lag]))
        emp_l = float(np.mean(chol.values[:, 0] * chol.values[:, lag]))
        assert emp_c == pytest.approx(rho(H, lag), abs=tol)
        assert emp_l == pytest.approx(rho(H, lag), abs=tol)


def test_fbm_invalid_inputs():
    with pytest.raises(SimulationError):
        sample_fbm_increments(1.5, 4, 10, seed=0)
    with pytest.raises(SimulationError):
        sample_fbm_increments(0.5, 0, 10, seed=0)


def test_zn_closed_form_single_increment():
    batch = sample_Zn(0.5, 2, 1, 512, seed=11)
    xi = sample_fbm_increments(0.5, 1, 512, seed=11).values[:, 0]
    assert np.allclose(batch.values, (xi**2 - 1.0) / math.sqrt(2.0), atol=1e-12)


def test_zn_variance_and_mean():
    batch = sample_Zn(0.5, 2, 64, 100_000, seed=2)
    assert batch.values.mean() == pytest.approx(0.0, abs=3 * 2 / math.sqrt(100_000))
    assert batch.values.var() == pytest.approx(1.0, abs=0.03)


def test_zn_validates_instance():
    with pytest.raises(Exception):
        sample_Zn(0.8, 2, 4, 10, seed=0)


def test_empirical_kolmogorov_exact_values():
    assert empirical_kolmogorov(np.array([-1.0, 0.0, 1.0]), ndtr) == pytest.approx(
        1.0 / 3.0 - float(ndtr(-1.0)), abs=1e-12
    )
    assert empirical_kolmogorov(np.array([0.0]), ndtr) == pytest.approx(0.5)
    with pytest.raises(SimulationError):
        empirical_kolmogorov(np.array([]), ndtr)


def test_empirical_kolmogorov_handles_ties():
    samples = np.array([0.3, 0.3, 0.3, 0.9])
    d = empirical_kolmogorov(samples, ndtr)
    expect = max(
        abs(0.75 - ndtr(0.3)), abs(0.0 - ndtr(0.3)), abs(1.0 - ndtr(0.9)),
        abs(0.75 - ndtr(0.9)),
    )
    assert d == pytest.approx(float(expect))


def test_empirical_wasserstein_values():
    n = 100_000
    assert empirical_wasserstein(np.zeros(n), ndtri) == pytest.approx(
        math.sqrt(2.0 / math.pi), abs=1e-3
    )
    q = ndtri((np.arange(n) + 0.5) / n)
    assert empirical_wasserstein(q, ndtri) == 0.0
    assert empirical_wasserstein(q + 0.25, ndtri) == pytest.approx(0.25, abs=1e-12)
    with pytest.raises(SimulationError):
        empirical_wasserstein(np.array([]), ndtri)


def _grad_quadratic(pts):
    out = np.zeros_like(pts)
    out[:, 0] = 2.0 * pts[:, 0] / math.sqrt(2.0)
    return out


def test_chatterjee_weight_constant_gradient():
    def grad(pts):
        out = np.zeros_like(pts)
        out[:, 0] = 1.0
        return out

    s = chatterjee_weight(grad, np.array([0.4, -1.0]), t_nodes=16, mc_count=2000, seed=5)
    assert s == pytest.approx(1.0, abs=1e-12)


def test_chatterjee_weight_zero_gradient():
    grad = lambda pts: np.zeros_like(pts)
    assert chatterjee_weight(grad, np.array([1.0, 2.0]), 8, 100, 0) == 0.0


def test_chatterjee_weight_matches_malliavin_inner():
    # g(v) = (v1^2 - 1)/sqrt(2) = I_2(e1 x e1)/sqrt(2): S(v) = v1^2 exactly,
    # and <DY, -DL^{-1}Y> evaluated pathwise is the same function
    space = GramSpace.standard(2)
    Y = ChaosVector.single((1.0 / math.sqrt(2.0)) * tensor_power(space, np.array([1.0, 0.0]), 2))
    w = malliavin_inner(Y)
    for v1 in (0.0, 0.7, 1.5, -2.0):
        v = np.array([v1, 0.3])
        s = chatterjee_weight(_grad_quadratic, v, t_nodes=32, mc_count=60_000, seed=9)
        tol = 3.0 * 2.0 * (1.0 + v1 * v1) / math.sqrt(60_000)
        assert s == pytest.approx(v1 * v1, abs=tol + 1e-9)
        assert w.eval(v) == pytest.approx(v1 * v1, abs=1e-12)


def test_chatterjee_identity_for_cosine():
    # E[Y f(Y)] = E[S(V) f'(Y)] with S evaluated through the chaos weight
    rng = np.random.Generator(np.random.Philox(key=np.array([99, 0], dtype=np.uint64)))
    n = 100_000
    v = rng.standard_normal((n, 2))
    y = (v[:, 0] ** 2 - 1.0) / math.sqrt(2.0)
    s = v[:, 0] ** 2  # S(V) for this g, equal to the Malliavin weight
    lhs = y * np.cos(y)
    rhs = s * (-np.sin(y))
    diff = lhs - rhs
    assert abs(diff.mean()) <= 3.0 * diff.std() / math.sqrt(n)


def test_bound_domination_small_grid():
    # empirical Kolmogorov distance below the exact bound plus MC allowance
    allowance = 3.0 * math.sqrt(math.log(2.0 / 0.01) / (2.0 * 20_000))
    for H, n in ((0.5, 16), (0.6, 64)):
        batch = sample_Zn(H, 2, n, 20_000, seed=21)
        ks = empirical_kolmogorov(batch.values, ndtr)
        bound = bm_bound_exact(BmInstance(H, 2, n)).bound
        assert ks <= bound + allowance