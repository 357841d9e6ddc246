import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from gradientless.errors import ParameterError
from gradientless.geometry import (
    BallPair,
    Estimate,
    cap_fraction_exact,
    cap_fraction_mc,
    cap_params,
    descent_probability_mc,
    gaussian_intersection_mc,
    intersection_fraction_exact,
    intersection_fraction_mc,
    large_rung_threshold,
    hypothesis_grid,
    lower_bound_factor,
    lower_bound_probe,
    oracle_grid,
    regularized_incomplete_beta,
    verify_geometry,
)
from gradientless.objectives import ObjectiveOracle
from gradientless.sampling import SeededRng


def slice_cap_fraction(c, r, n):
    """Fraction of an n-ball of radius r with first coordinate >= c, by integrating slice volumes."""
    w = lambda t: (r * r - t * t) ** ((n - 1) / 2)
    total = integrate.quad(w, -r, r)[0]
    return integrate.quad(w, max(c, -r), r)[0] / total


class TestIncompleteBeta:
    def test_endpoints(self):
        assert regularized_incomplete_beta(0.0, 2.5, 0.5) == 0.0
        assert regularized_incomplete_beta(1.0, 2.5, 0.5) == 1.0

    def test_uniform_density(self):
        assert regularized_incomplete_beta(0.37, 1, 1) == pytest.approx(0.37, abs=1e-14)

    def test_closed_form_a1(self):
        assert regularized_incomplete_beta(0.75, 1, 0.5) == pytest.approx(0.5, abs=1e-14)

    def test_worst_case_value(self):
        assert regularized_incomplete_beta(1 - 9 / 16, 1, 0.5) == pytest.approx(0.25, abs=1e-14)

    @settings(max_examples=300)
    @given(x=st.floats(0, 1), a=st.floats(0.05, 200), b=st.floats(0.05, 200))
    def test_matches_scipy(self, x, a, b):
        assert regularized_incomplete_beta(x, a, b) == pytest.approx(special.betainc(a, b, x), abs=1e-10)

    @settings(max_examples=300)
    # dyadic x keeps 1 - x exact in floating point
    @given(x=st.integers(0, 2 ** 30).map(lambda k: k / 2 ** 30), a=st.floats(0.05, 100), b=st.floats(0.05, 100))
    def test_symmetry(self, x, a, b):
        s = regularized_incomplete_beta(x, a, b) + regularized_incomplete_beta(1 - x, b, a)
        assert s == pytest.approx(1.0, abs=1e-10)

    @given(a=st.floats(0.1, 50), b=st.floats(0.1, 50))
    def test_monotone_in_x(self, a, b):
        vals = [regularized_incomplete_beta(x, a, b) for x in np.linspace(0, 1, 101)]
        assert all(v2 >= v1 - 1e-15 for v1, v2 in zip(vals, vals[1:]))

    @pytest.mark.parametrize("args", [(-0.1, 1, 1), (1.1, 1, 1), (0.5, 0, 1), (0.5, 1, -1), (math.nan, 1, 1)])
    def test_rejects(self, args):
        with pytest.raises(ParameterError):
            regularized_incomplete_beta(*args)


class TestCaps:
    def test_one_dim_cap(self):
        pair = BallPair(0.5, 0.75, 1.0, 1)
        assert cap_fraction_exact(pair).fraction == pytest.approx(0.15625, abs=1e-14)

    def test_one_dim_intersection(self):
        assert intersection_fraction_exact(BallPair(0.5, 0.75, 1.0, 1)) == pytest.approx(0.25, abs=1e-14)

    def test_containment(self):
        res = cap_fraction_exact(BallPair(0.5, 1.5, 1.0, 3))
        assert res.fraction == 1.0 and res.degenerate == "b1_inside_b2"
        assert intersection_fraction_exact(BallPair(0.5, 1.5, 1.0, 3)) == 1.0

    def test_approaching_containment(self):
        # the radical plane moves to B1's far edge: the cap swallows B1
        res = cap_fraction_exact(BallPair(0.5, 1.5 - 1e-9, 1.0, 3))
        assert res.complementary and res.fraction == pytest.approx(1.0, abs=1e-6)

    def test_disjoint(self):
        assert cap_fraction_exact(BallPair(0.2, 0.3, 1.0, 4)).fraction == 0.0
        assert intersection_fraction_exact(BallPair(0.2, 0.3, 1.0, 4)) == 0.0

    def test_radical_plane(self):
        assert cap_params(BallPair(0.5, 0.75, 1.0, 1)).c1 == pytest.approx(0.5 * (1 + 0.25 - 0.5625))
        assert cap_params(BallPair(1.0, 2.0, 3.0, 2)).c1 == pytest.approx((9 + 1 - 4) / 6)

    def test_circle_segment(self):
        # area of a circular segment of a unit disk cut at distance c
        c = 0.3
        seg = math.acos(c) - c * math.sqrt(1 - c * c)
        pair = BallPair(1.0, math.sqrt(1 + 4 - 2 * 2 * c), 2.0, 2)  # c1 = c for ell = 2
        assert cap_params(pair).c1 == pytest.approx(c)
        assert cap_fraction_exact(pair).fraction == pytest.approx(seg / math.pi, abs=1e-12)

    def test_sphere_cap(self):
        r, h = 1.0, 0.4
        pair = BallPair(r, math.sqrt(1 + 1 - 2 * (r - h)), 1.0, 3)
        vol = math.pi * h * h * (3 * r - h) / 3
        assert cap_fraction_exact(pair).fraction == pytest.approx(vol / (4 / 3 * math.pi), abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 40), r1=st.floats(0.1, 2), r2=st.floats(0.1, 2), ell=st.floats(0.1, 3))
    def test_matches_quadrature(self, n, r1, r2, ell):
        pair = BallPair(r1, r2, ell, n)
        if not pair.intersects or pair.b1_inside_b2 or pair.b2_inside_b1:
            return
        c1 = cap_params(pair).c1
        assert cap_fraction_exact(pair).fraction == pytest.approx(slice_cap_fraction(c1, r1, n), abs=1e-7)
        c2 = ell - c1
        inter = slice_cap_fraction(c1, r1, n) + slice_cap_fraction(c2, r2, n) * (r2 / r1) ** n
        assert intersection_fraction_exact(pair) == pytest.approx(inter, abs=1e-7)

    def test_ball_pair_validation(self):
        with pytest.raises(ParameterError):
            BallPair(0, 1, 1, 2)
        with pytest.raises(ParameterError):
            BallPair(1, 1, 1, 0)

    def test_intersection_hypothesis(self):
        n = 4
        assert BallPair(0.5 / 2, 1 - 1 / 16, 1.0, n).intersection_hypothesis(4)
        assert not BallPair(0.5 / 2, 1 - 1 / 4, 1.0, n).intersection_hypothesis(4)
        assert BallPair(0.5 / 2, 1 - 1 / 4, 1.0, n).intersection_hypothesis(1)
        assert not BallPair(0.1, 1.0, 1.0, n).intersection_hypothesis()


class TestMonteCarlo:
    def test_containment_exact(self, rng):
        assert intersection_fraction_mc(BallPair(0.5, 2.0, 1.0, 5), 10_000, rng).value == 1.0

    def test_disjoint_exact(self, rng):
        assert intersection_fraction_mc(BallPair(0.2, 0.3, 1.0, 5), 10_000, rng).value == 0.0

    def test_one_dim_interval(self, rng):
        est = intersection_fraction_mc(BallPair(0.5, 0.75, 1.0, 1), 100_000, rng)
        assert abs(est.value - 0.25) <= 3 * est.stderr

    def test_cap_mc_one_dim(self, rng):
        est = cap_fraction_mc(BallPair(0.5, 0.75, 1.0, 1), 100_000, rng)
        assert est.within(0.15625)

    def test_too_few_samples(self, rng):
        with pytest.raises(ParameterError):
            intersection_fraction_mc(BallPair(0.5, 0.75, 1.0, 1), 10, rng)

    def test_reproducible(self):
        pair = BallPair(0.3, 0.9, 1.0, 10)
        assert intersection_fraction_mc(pair, 5000, SeededRng(1)) == intersection_fraction_mc(pair, 5000, SeededRng(1))

    def test_estimate_floor(self):
        e = Estimate(0.0, 0.0, 1000)
        assert e.within(0.003) and not e.within(0.005)
        assert Estimate(0.2, 0.01, 100).at_least(0.24)


class TestGaussianIntersection:
    def test_full_support(self, rng):
        est = gaussian_intersection_mc(BallPair(0.5, 1e6, 1.0, 10), 10_000, rng)
        assert est.value == 1.0

    def test_dimension_free_constant(self, rng):
        n = 10
        est = gaussian_intersection_mc(BallPair(1 / math.sqrt(n), 1 - 1 / n, 1.0, n), 100_000, rng)
        assert est.value > 0.05
        assert "hypothesis_violated" not in est.flags

    def test_dimension_independence(self, rng):
        vals = []
        for n in (100, 1000):
            est = gaussian_intersection_mc(BallPair(1 / math.sqrt(n), 1 - 1 / n, 1.0, n), 20_000, rng)
            vals.append(est.value)
        assert max(vals) <= 3 * min(vals)

    def test_flags(self, rng):
        est = gaussian_intersection_mc(BallPair(0.01, 0.5, 1.0, 4), 1000, rng, floor=0.1)
        assert "hypothesis_violated" in est.flags and "below_floor" in est.flags


def sphere(n):
    return ObjectiveOracle(lambda X: np.sum(X * X, axis=1), n, known_optimum=(np.zeros(n), 0.0))


class TestDescentProbability:
    def test_sphere_best_rung(self, rng):
        o = sphere(2)
        x = np.array([1.0, 0.0])
        best = max(descent_probability_mc(o, x, r, 2, 1.0, 10_000, rng).value
                   for r in (1.0, 0.5, 0.25, 0.125))
        assert best >= 0.20

    def test_oversized_rung(self, rng):
        o = sphere(5)
        x = np.ones(5) / math.sqrt(5)
        assert descent_probability_mc(o, x, 1e6, 5, 1.0, 10_000, rng).value < 0.01

    def test_at_optimum_rejected(self, rng):
        with pytest.raises(ParameterError):
            descent_probability_mc(sphere(2), [1e-13, 0.0], 0.1, 2, 1.0, 1000, rng)

    def test_needs_optimum(self, rng):
        o = ObjectiveOracle(lambda X: np.sum(X * X, axis=1), 2)
        with pytest.raises(ParameterError):
            descent_probability_mc(o, [1.0, 0.0], 0.1, 2, 1.0, 1000, rng)
        est = descent_probability_mc(o, [1.0, 0.0], 0.5, 2, 1.0, 1000, rng, x_star=np.zeros(2), f_star=0.0)
        assert est.value > 0

    def test_gaussian_sampler(self, rng):
        est = descent_probability_mc(sphere(3), [1.0, 0, 0], 0.5, 3, 1.0, 5000, rng, sampler="gaussian")
        assert 0 < est.value < 1


class TestLowerBound:
    def test_large_rung(self, rng):
        est = lower_bound_probe(100, 10, 1.0, 10_000, rng)
        assert est.value <= 0.01 and est.flags == ("regime=large",)

    def test_null_step(self, rng):
        assert lower_bound_probe(100, 10, 0.0, 10_000, rng).value == 0.0

    def test_small_rung_beats_large(self, rng):
        n, Q = 100, 10
        small = lower_bound_probe(n, Q, math.sqrt(math.log(n * Q)) / (Q * n), 10_000, rng)
        large = lower_bound_probe(n, Q, large_rung_threshold(n, Q), 10_000, rng)
        assert small.value > large.value
        assert small.flags == ("regime=small",)

    def test_factor(self):
        assert lower_bound_factor(100, 10) == pytest.approx(1 - math.sqrt(5 * math.log(1000)) / 1000)

    def test_rejects(self, rng):
        with pytest.raises(ParameterError):
            lower_bound_probe(1, 10, 0.1, 100, rng)
        with pytest.raises(ParameterError):
            lower_bound_probe(10, 10, -0.1, 100, rng)


class TestGrids:
    def test_oracle_grid_shape(self):
        grid = oracle_grid()
        assert len(grid) == 20
        assert {p.dim for p in grid} == {1, 2, 5, 10, 50}
        # every cap is at most a hemisphere
        assert all(cap_params(p).c1 >= 0 for p in grid)

    def test_hypothesis_grid_has_hypothesis_points(self):
        grid = hypothesis_grid()
        assert sum(p.intersection_hypothesis() for p in grid) > 50

    def test_verify_rows(self):
        rows = verify_geometry(2000, SeededRng(0))
        assert len(rows) == len(hypothesis_grid()) + 20
        assert {"fraction", "stderr", "bound_satisfied"} <= set(rows[0])
