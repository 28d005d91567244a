import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from erst.elliptical import EllipticalModel
from erst.errors import DomainError, PoleError, UnreachableTargetError
from erst.loss_driven_solver import (
    most_plausible_scenario,
    profit_scenario,
    secular_f,
    stationarity_residual,
    whiten,
)
from erst.maxerst_solver import PAIR, UNIQUE, continuum, maxerst_quadratic
from erst.oracle import brute_force_loss_scenario
from erst.plausibility import mahalanobis_sq
from erst.pnl_model import LinearPortfolio, QuadraticPortfolio, pnl

from conftest import random_spd

ONE_D = QuadraticPortfolio([[2.0]], [1.0])
HARD = QuadraticPortfolio(np.diag([1.0, -1.0]), [0.0, 0.0])


def check_kkt(p, sigma, l, out):
    w = whiten(p, sigma)
    model = EllipticalModel(None, sigma)
    for s in out.scenarios:
        value = pnl(p, s)
        assert value <= l + 1e-8 * (1 + abs(l))
        if out.mu > 0:
            assert value == pytest.approx(l, abs=1e-8 * (1 + abs(l)))
        assert mahalanobis_sq(s, model) == pytest.approx(out.maha_sq, rel=1e-9, abs=1e-14)
        assert stationarity_residual(w, s, out.mu) <= 1e-8 * (1 + np.linalg.norm(w.Bhat))
    assert out.mu >= -w.lam_min - 1e-10 * (1 + abs(w.lam_min))


class TestSecular:
    def test_zero_linear_part(self):
        w = whiten(QuadraticPortfolio(np.diag([1.0, 2.0]), [0.0, 0.0]), np.eye(2))
        assert secular_f(w, 0.0) == 0.0
        assert secular_f(w, 3.7) == 0.0

    def test_one_dimensional(self):
        w = whiten(ONE_D, np.eye(1))
        assert secular_f(w, 0.0) == pytest.approx(-0.25, abs=1e-15)
        assert secular_f(w, 2.0) == pytest.approx(-0.1875, abs=1e-15)

    @given(st.integers(0, 10_000))
    @settings(max_examples=30)
    def test_nondecreasing(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((3, 3))
        w = whiten(QuadraticPortfolio(A + A.T, rng.standard_normal(3)), random_spd(rng, 3))
        lo = max(0.0, -w.lam_min)
        mus = lo + np.geomspace(1e-3, 1e3, 60)
        f = [secular_f(w, m) for m in mus]
        assert np.all(np.diff(f) >= -1e-12 * (1 + np.abs(f[1:])))
        assert f[-1] <= 0.0

    def test_domain_and_pole(self):
        w = whiten(QuadraticPortfolio(np.diag([-1.0, 1.0]), [1.0, 0.0]), np.eye(2))
        with pytest.raises(DomainError):
            secular_f(w, 0.5)
        with pytest.raises(PoleError):
            secular_f(w, 1.0)

    def test_hard_case_value(self):
        w = whiten(HARD, np.eye(2))
        assert secular_f(w, 1.0) == 0.0
        assert secular_f(w, 1.0, free=[math.sqrt(2.0)]) == pytest.approx(-1.0)


class TestLoss:
    def test_null(self):
        out = most_plausible_scenario(ONE_D, np.eye(1), 0.0)
        assert out.maha_sq == 0.0 and out.pnl == 0.0 and out.mu == math.inf

    def test_one_dimensional(self):
        out = most_plausible_scenario(ONE_D, np.eye(1), -0.1875)
        assert out.mu == pytest.approx(2.0, abs=1e-10)
        assert out.scenario.values[0] == pytest.approx(-0.25, abs=1e-10)
        assert out.maha_sq == pytest.approx(0.0625, abs=1e-10)

    def test_global_minimum(self):
        out = most_plausible_scenario(ONE_D, np.eye(1), -0.25)
        assert out.case == "global-minimum" and out.mu == 0.0
        assert out.scenario.values[0] == pytest.approx(-0.5)

    def test_unreachable(self):
        with pytest.raises(UnreachableTargetError) as info:
            most_plausible_scenario(ONE_D, np.eye(1), -0.3)
        assert info.value.bound == pytest.approx(-0.25)

    def test_linear_unbounded(self):
        out = most_plausible_scenario(LinearPortfolio([3.0, 4.0]), np.eye(2), -10.0)
        assert out.maha_sq == pytest.approx(4.0)
        assert out.scenario.values == pytest.approx([-1.2, -1.6])

    def test_pair(self):
        out = most_plausible_scenario(HARD, np.eye(2), -1.0)
        assert out.multiplicity == PAIR
        assert out.maha_sq == pytest.approx(2.0, abs=1e-9)
        got = sorted(tuple(s.values) for s in out.scenarios)
        assert got[0] == pytest.approx((0.0, -math.sqrt(2)), abs=1e-9)
        assert got[1] == pytest.approx((0.0, math.sqrt(2)), abs=1e-9)

    def test_continuum(self):
        out = most_plausible_scenario(QuadraticPortfolio(-np.eye(2), [0.0, 0.0]), np.eye(2), -1.0)
        assert out.multiplicity == continuum(2)
        assert out.free_radius ** 2 == pytest.approx(2.0, abs=1e-9)
        assert out.maha_sq == pytest.approx(2.0, abs=1e-9)

    def test_positive_rejected(self):
        with pytest.raises(DomainError):
            most_plausible_scenario(ONE_D, np.eye(1), 0.1)

    @given(st.integers(0, 100_000), st.floats(0.01, 5.0))
    @settings(max_examples=150)
    def test_kkt(self, seed, depth):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        A = rng.standard_normal((n, n))
        p = QuadraticPortfolio(A + A.T, rng.standard_normal(n) * rng.choice([0.0, 0.5, 1.0]))
        sigma = random_spd(rng, n, cond=20.0)
        try:
            out = most_plausible_scenario(p, sigma, -depth)
        except UnreachableTargetError as exc:
            assert exc.bound > -depth
            return
        check_kkt(p, sigma, -depth, out)

    @given(st.integers(0, 100_000))
    @settings(max_examples=40)
    def test_monotone_in_target(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((3, 3))
        p = QuadraticPortfolio(A + A.T - 4 * np.eye(3), rng.standard_normal(3))
        sigma = random_spd(rng, 3)
        m = [most_plausible_scenario(p, sigma, l).maha_sq for l in np.linspace(-5.0, 0.0, 21)]
        assert np.all(np.diff(m) <= 1e-10 * (1 + np.abs(m[:-1])))

    @given(st.integers(0, 100_000))
    @settings(max_examples=60)
    def test_duality_with_maxerst(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        A = rng.standard_normal((n, n))
        p = QuadraticPortfolio(A + A.T, rng.standard_normal(n))
        sigma = random_spd(rng, n, cond=20.0)
        q = float(rng.uniform(0.5, 10.0))
        mx = maxerst_quadratic(p, sigma, q)
        if not mx.mu > 1e-8:
            return
        out = most_plausible_scenario(p, sigma, mx.pnl)
        assert out.maha_sq == pytest.approx(q, rel=1e-6)

    @pytest.mark.parametrize("seed", range(6))
    def test_brute_force(self, seed):
        rng = np.random.default_rng(200 + seed)
        n = 2 + seed % 2
        A = rng.standard_normal((n, n))
        p = QuadraticPortfolio(A + A.T - np.eye(n), rng.standard_normal(n))
        sigma = random_spd(rng, n, cond=10.0)
        l = -1.5
        out = most_plausible_scenario(p, sigma, l)
        bf = brute_force_loss_scenario(p, sigma, l, resolution=400_000, seed=seed)
        assert bf.value >= out.maha_sq - 1e-9 * (1 + out.maha_sq)
        assert bf.value == pytest.approx(out.maha_sq, abs=1e-3 * (1 + out.maha_sq))


class TestProfit:
    def test_hard_case(self):
        out = profit_scenario(HARD, np.eye(2), 1.0)
        assert out.multiplicity == PAIR
        assert out.pnl == pytest.approx(1.0)
        got = sorted(tuple(s.values) for s in out.scenarios)
        assert got[0] == pytest.approx((-math.sqrt(2), 0.0), abs=1e-9)
        assert got[1] == pytest.approx((math.sqrt(2), 0.0), abs=1e-9)

    def test_one_dimensional_against_brute_force(self):
        out = profit_scenario(ONE_D, np.eye(1), 0.1875)
        assert out.pnl == pytest.approx(0.1875, abs=1e-10)
        bf = brute_force_loss_scenario(-ONE_D, np.eye(1), -0.1875, resolution=10_000)
        assert out.maha_sq == pytest.approx(bf.value, abs=1e-9)
        # the positive root 0.1614 is closer than the negative one
        assert out.scenario.values[0] == pytest.approx((-1 + math.sqrt(1 + 4 * 0.1875)) / 2, abs=1e-10)
        assert out.multiplicity == UNIQUE

    def test_small_profit_goes_to_zero(self):
        out = profit_scenario(ONE_D, np.eye(1), 1e-12)
        assert abs(out.scenario.values[0]) < 1e-11

    def test_unreachable(self):
        p = QuadraticPortfolio(-np.eye(1), [1.0])
        with pytest.raises(UnreachableTargetError) as info:
            profit_scenario(p, np.eye(1), 1.0)
        assert info.value.bound == pytest.approx(0.5)

    def test_nonpositive_rejected(self):
        with pytest.raises(DomainError):
            profit_scenario(ONE_D, np.eye(1), 0.0)
