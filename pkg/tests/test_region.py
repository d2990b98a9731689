import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from remote_rd.errors import Infeasible, InvalidInput
from remote_rd.model import (
    SourceSpec,
    build_circulant4,
    build_equicorrelated,
    common_boundary_rate,
    mmse_trace,
    r_star,
    scale_to_boundary,
)
from remote_rd.oracles import random_distortion, random_spec
from remote_rd.region import (
    RegionBound,
    all_endpoints,
    copolymatroid_violations,
    cyclic_lower_objective,
    endpoint,
    inner_bound,
    j_inner,
    j_outer,
    mask_of,
    members,
    outer_bound,
    parametric_curve,
    point_in_bound,
    subset_label,
    sum_rate_lower_cyclic,
    sum_rate_min,
    sum_rate_objective,
)


def instance(rng, L=None):
    s = random_spec(rng, L or int(rng.integers(1, 5)))
    D = random_distortion(rng, s)
    return s, D, scale_to_boundary(s, rng.uniform(0.1, 1.0, size=s.L), D)


class TestMasks:
    def test_round_trip(self):
        assert mask_of([0, 2]) == 5
        assert members(5, 3) == [0, 2]
        assert subset_label(5, 3) == "{1,3}"
        assert subset_label(0, 3) == "{}"


class TestJInner:
    def test_empty_subset(self, rng):
        s, _, r = instance(rng)
        assert j_inner(s, r, 0) == 0.0

    def test_full_set_is_sum_rate_objective(self, rng):
        s, _, r = instance(rng, 4)
        assert j_inner(s, r, 0b1111) == pytest.approx(sum_rate_objective(s, r), abs=1e-12)

    def test_hand_example(self):
        s = SourceSpec(np.eye(2), 1.0)
        assert j_inner(s, [math.log(2), 0.0], 0b01) == pytest.approx(0.5 * math.log(7), rel=1e-14)

    def test_bad_mask(self):
        s = SourceSpec(np.eye(2), 1.0)
        with pytest.raises(InvalidInput):
            j_inner(s, [1, 1], 4)

    def test_zero_rates_give_zero_bound(self, rng):
        s = random_spec(rng, 3)
        assert np.all(inner_bound(s, np.zeros(3)).values == 0.0)


class TestJOuter:
    def test_empty_subset(self, rng):
        s, D, r = instance(rng)
        assert j_outer(s, r, D, 0) == 0.0

    def test_boundary_equality(self, rng):
        for _ in range(20):
            s, D, r = instance(rng)
            np.testing.assert_allclose(outer_bound(s, D, r).values, inner_bound(s, r).values, atol=1e-8)

    def test_single_subset_matches_full_map(self, rng):
        s, D, r = instance(rng, 3)
        r = r * 1.2
        ob = outer_bound(s, D, r)
        for m in range(8):
            assert j_outer(s, r, D, m) == pytest.approx(ob[m], abs=1e-12)
            assert j_inner(s, r, m) == pytest.approx(inner_bound(s, r)[m], abs=1e-12)

    def test_zeroed_subset_still_feasible(self):
        s = SourceSpec(np.eye(3), 1.0)
        D = 2.6
        r = np.array([0.0, 3.0, 3.0])
        assert mmse_trace(s, r) < D
        assert j_outer(s, r, D, 0b001) == 0.0
        assert abs(j_inner(s, r, 0b001)) <= 1e-9

    def test_outside_B(self):
        s = SourceSpec(np.eye(2), 1.0)
        with pytest.raises(Infeasible):
            j_outer(s, [0.0, 0.0], 1.5, 1)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1.0, 4.0))
    def test_outer_below_inner(self, seed, stretch):
        rng = np.random.default_rng(seed)
        s, D, r = instance(rng)
        r = r * stretch
        gap = inner_bound(s, r).values - outer_bound(s, D, r).values
        assert np.all(gap >= -1e-9)


class TestCopolymatroid:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(1.0, 3.0), st.booleans())
    def test_generated_bounds(self, seed, stretch, outer):
        rng = np.random.default_rng(seed)
        s, D, r = instance(rng, int(rng.integers(1, 6)))
        b = outer_bound(s, D, r * stretch) if outer else inner_bound(s, r * stretch)
        assert all(v == 0 for v in copolymatroid_violations(b.values).values())

    def test_detects_violation(self):
        # f({1}) + f({2}) > f({1,2}) breaks supermodularity
        v = copolymatroid_violations(np.array([0.0, 1.0, 1.0, 1.5]))
        assert v["supermodular"] > 0
        v = copolymatroid_violations(np.array([0.0, 2.0, 0.0, 1.0]))
        assert v["monotone"] > 0


class TestEndpoints:
    def test_single_encoder(self):
        s = SourceSpec(np.eye(1), 1.0)
        b = outer_bound(s, 0.7, [common_boundary_rate(s, 0.7)])
        pts = all_endpoints(b)
        assert len(pts) == 1
        assert pts[0][0] == pytest.approx(b[1])

    def test_two_encoders_identity_order(self, rng):
        s, D, r = instance(rng, 2)
        b = outer_bound(s, D, r)
        np.testing.assert_allclose(endpoint(b, [0, 1]), [b[3] - b[2], b[2]])
        assert len(all_endpoints(b)) <= 2

    def test_three_encoders_chains_tight(self, rng):
        s, D, r = instance(rng, 3)
        b = outer_bound(s, D, r * 1.1)
        for perm in itertools.permutations(range(3)):
            p = endpoint(b, perm)
            assert point_in_bound(b, p)
            tail = 0
            for i in reversed(perm):
                tail |= 1 << i
                assert sum(p[j] for j in members(tail, 3)) == pytest.approx(b[tail], abs=1e-10)

    def test_rejects_bad_permutation(self, rng):
        s, D, r = instance(rng, 3)
        b = outer_bound(s, D, r)
        with pytest.raises(InvalidInput):
            endpoint(b, [0, 0, 1])

    def test_rejects_non_copolymatroid(self):
        b = RegionBound(2, np.array([0.0, 1.0, 1.0, 1.5]), "outer", np.zeros(2))
        with pytest.raises(InvalidInput):
            endpoint(b, [0, 1])
        with pytest.raises(InvalidInput):
            all_endpoints(b)

    def test_symmetric_orbit(self):
        s = build_equicorrelated(3, 0.3, 0.8)
        D = 1.9
        b = outer_bound(s, D, [common_boundary_rate(s, D)] * 3)
        pts = all_endpoints(b)
        for p in pts:
            for perm in itertools.permutations(range(3)):
                q = p[list(perm)]
                assert any(np.max(np.abs(q - x)) <= 1e-9 for x in pts)

    def test_point_in_bound(self, rng):
        zero = RegionBound(2, np.zeros(4), "inner", np.zeros(2))
        assert point_in_bound(zero, [0.0, 3.0])
        s, D, r = instance(rng, 3)
        b = outer_bound(s, D, r)
        p = endpoint(b, [0, 1, 2])
        assert point_in_bound(b, p)
        assert not point_in_bound(b, p - 1e-3)
        with pytest.raises(InvalidInput):
            point_in_bound(b, [1.0, 2.0])


class TestSumRate:
    def test_scalar_matches_boundary(self):
        s = SourceSpec(np.array([[1.3]]), 0.6)
        D = 0.8
        res = sum_rate_min(s, D)
        r = common_boundary_rate(s, D)
        # the objective increases in r, so the minimum sits at the boundary rate
        assert res.argmin[0] == pytest.approx(r, abs=1e-9)
        assert res.value == pytest.approx(sum_rate_objective(s, [r]), abs=1e-10)

    def test_symmetric_independent(self):
        s = SourceSpec(np.eye(3), 0.5)
        res = sum_rate_min(s, 1.5)
        assert np.ptp(res.argmin) <= 1e-6
        assert abs(res.boundary_residual) <= 1e-8

    def test_infeasible(self):
        with pytest.raises(Infeasible):
            sum_rate_min(SourceSpec(np.eye(2), 1.0), 0.99)

    def test_deterministic(self, rng):
        s, D, _ = instance(rng, 3)
        a, b = sum_rate_min(s, D), sum_rate_min(s, D)
        assert a.value == b.value and np.array_equal(a.argmin, b.argmin)

    def test_upper_bounds_every_boundary_point(self, rng):
        s, D, _ = instance(rng, 3)
        res = sum_rate_min(s, D)
        for _ in range(50):
            r = scale_to_boundary(s, rng.uniform(0.01, 1, size=3), D)
            assert res.value <= sum_rate_objective(s, r) + 1e-9


class TestCyclic:
    def test_identity_reduces_to_scalar(self):
        L, sigma2, D = 3, 0.5, 1.8
        s = SourceSpec(np.eye(L), sigma2)
        # scalar remote source: R(d) = 1/2 log(var_est / (d - mmse))
        var_est, mmse = 1 / (1 + sigma2), sigma2 / (1 + sigma2)
        scalar = 0.5 * math.log(var_est / (D / L - mmse))
        assert sum_rate_lower_cyclic(s, D).value == pytest.approx(L * scalar, abs=1e-10)

    def test_circulant_minimiser_at_r_star(self):
        c = build_circulant4(0.2, 2.0)
        for D in (2.7, 3.0, 3.5):
            low = sum_rate_lower_cyclic(c, D)
            assert low.monotone
            assert low.r_min == pytest.approx(r_star(c, D), abs=1e-6)
            assert low.value == pytest.approx(low.value_at_r_star, abs=1e-8)

    def test_vanishes_near_trace(self):
        c = build_circulant4(0.2, 2.0)
        assert sum_rate_lower_cyclic(c, 4.0 - 1e-9).value < 1e-6

    def test_grid_never_beats_reported_minimum(self):
        c = build_circulant4(0.2, 2.0)
        D = 3.0
        low = sum_rate_lower_cyclic(c, D)
        for r in np.linspace(low.r_star, low.r_star + 3, 60):
            assert cyclic_lower_objective(c, D, r) >= low.value - 1e-12

    def test_requires_cyclic(self):
        s = SourceSpec(np.diag([1.0, 2.0]), 1.0)
        with pytest.raises(InvalidInput):
            sum_rate_lower_cyclic(s, 2.0)
        with pytest.raises(InvalidInput):
            parametric_curve(s, [0.1])


class TestParametricCurve:
    def test_origin(self):
        c = build_circulant4(0.2, 2.0)
        (D, R), = parametric_curve(c, [0.0])
        assert D == pytest.approx(c.trace_cov)
        assert abs(R) <= 1e-15

    def test_monotone(self):
        c = build_circulant4(0.2, 2.0)
        pts = np.array(parametric_curve(c, np.linspace(0, 6, 80)))
        assert np.all(np.diff(pts[:, 0]) < 0)
        assert np.all(np.diff(pts[:, 1]) > 0)

    def test_negative_parameter(self):
        with pytest.raises(InvalidInput):
            parametric_curve(build_circulant4(0.1, 1.0), [-0.1])
