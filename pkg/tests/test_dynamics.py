import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrdyn.dynamics import (BigExp, EscapeClass, MapHandle, SurrogateSpec,
                            ball_growth_check, classify_escape,
                            escape_rate_series, fast_escape_test, iterate,
                            log_domain_series, max_modulus_estimate,
                            norm_safe, orbit_csv, rates_csv, tower_step)


@pytest.fixture(scope="module")
def fhandle(fmap):
    return MapHandle("f", lambda p: fmap.eval3(p[0], p[1], p[2]), dim=3,
                     tracks_h0=True, translate=fmap.L_prime)


class TestBigExp:
    def test_roundtrip_small(self):
        for v in (0.0, 1.0, 5.5, 600.0):
            assert BigExp.from_float(v).to_float() == pytest.approx(v)

    def test_canonicalisation(self):
        b = BigExp.from_float(1e200)
        assert b.depth == 1
        assert b.head == pytest.approx(math.log(1e200))

    def test_exp_matches_floats(self):
        b = BigExp.from_float(3.0).exp()
        assert b.to_float() == pytest.approx(math.exp(3.0), rel=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 1e250), st.floats(0.0, 1e250))
    def test_order_agrees_with_floats(self, a, b):
        assert (BigExp.from_float(a) < BigExp.from_float(b)) == (a < b)

    def test_tower_ordering(self):
        t = BigExp.from_float(100.0)
        seq = [t]
        for _ in range(6):
            seq.append(seq[-1].exp())
        assert all(seq[i] < seq[i + 1] for i in range(6))

    def test_tower_step_matches_floats_in_range(self):
        c = 87.0
        t = BigExp.from_float(10.0)
        stepped = tower_step(t, c)
        assert stepped.to_float() == pytest.approx(10 + math.exp(10) - c, rel=1e-12)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            BigExp.from_float(-1.0)


class TestIterate:
    def test_translation_orbit_is_exact(self, fhandle, build):
        lp = build.L_prime
        rec = iterate(fhandle, (3.0, -2.0, -5.0), 1000)
        assert rec.reason == "budget"
        assert rec.h0_step == 0
        for k in (1, 10, 500, 1000):
            expect = np.array([3.0, -2.0, -5.0 - k * lp])
            err = np.linalg.norm(rec.points[k] - expect)
            assert err <= 1e-12 * max(1.0, np.linalg.norm(expect))

    def test_axis_tower_matches_recurrence(self, fhandle, build):
        L, lp = build.constants.L, build.L_prime
        rec = iterate(fhandle, (0.0, 0.0, L + 1), 10)
        t = L + 1
        for k in range(1, len(rec.points)):
            t = t + math.exp(t) - lp
            assert rec.points[k][2] == pytest.approx(t, rel=1e-9)
        assert rec.reason in ("nonfinite", "radius_cap")

    def test_nonfinite_terminates_with_reason(self, fhandle):
        rec = iterate(fhandle, (0.0, 0.0, 800.0), 5)
        assert rec.reason == "nonfinite"
        assert len(rec.points) == 1

    def test_budget_validation(self, fhandle):
        with pytest.raises(ValueError):
            iterate(fhandle, (0, 0, 0), 0)


class TestClassify:
    def test_lower_half_space_is_step_zero(self, fhandle):
        assert classify_escape(fhandle, (0, 0, -1.0), 10) == \
            EscapeClass("quasi_fatou", n=0)

    def test_slab_enters_in_one_step(self, fhandle):
        c = classify_escape(fhandle, (0.3, 1.2, 2.0), 10)
        assert c.kind == "quasi_fatou"
        assert c.n == 1

    def test_axis_tower_escapes_radially(self, fhandle, build):
        c = classify_escape(fhandle, (0, 0, build.constants.L + 1), 50)
        assert c.kind == "radial"

    def test_julia_line_escapes_radially(self, fhandle, build):
        c = classify_escape(fhandle, (2.0, 2.0, build.constants.L + 2), 50)
        assert c.kind == "radial"

    def test_monotone_after_entry(self, fhandle, build):
        rec = iterate(fhandle, (0.7, 0.3, 3.0), 20)
        n = rec.h0_step
        assert n is not None
        for k in range(n, len(rec.points)):
            assert rec.points[k][2] < 0 or k < n

    def test_undecided_budget(self, fmap, build):
        # a frozen translation has no escape and never enters the half-space
        handle = MapHandle("shift", lambda p: (p[0], p[1], p[2]), dim=3,
                           tracks_h0=True)
        c = classify_escape(handle, (0, 0, 1.0), 7)
        assert c == EscapeClass("undecided", budget=7)


class TestRateSeries:
    def test_translation_rate_tends_to_zero(self, fhandle):
        ks, aks, _ = escape_rate_series(fhandle, (0, 0, -1.0), 200)
        assert aks[-1] <= 0.02
        assert aks[-1] < aks[9]

    def test_pure_squaring_closed_form(self):
        rho = log_domain_series("radial-square", 2.0, 10, translate=0.0)
        for k, r in enumerate(rho):
            assert r == pytest.approx(2.0 * 2 ** k, rel=1e-15)

    def test_axis_law_matches_direct_iteration(self, build):
        lp = build.L_prime
        r = 25.0
        rho = [math.log(r)]
        while r * r < 1e306 and len(rho) <= 8:
            r = r * r + lp
            rho.append(math.log(r))
        assert len(rho) >= 7      # overlap window before float overflow
        sur = log_domain_series("radial-square", math.log(25.0), 8, translate=lp)
        for a, b in zip(rho, sur):
            assert a == pytest.approx(b, rel=1e-12)

    def test_surrogate_requires_squaring_regime(self):
        with pytest.raises(ValueError):
            log_domain_series("radial-square", 0.5, 5, translate=100.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            log_domain_series("nope", 1.0, 5)


class TestMaxModulus:
    def test_axis_lower_bound(self, fhandle, build):
        L, lp = build.constants.L, build.L_prime
        r = L + 2
        est = max_modulus_estimate(fhandle, r, samples=2000)
        assert est >= r + math.exp(r) - lp

    def test_transcendental_growth_of_the_log_ratio(self, fhandle):
        vals = [math.log(max_modulus_estimate(fhandle, r, samples=2000)) / math.log(r)
                for r in (10.0, 20.0, 40.0)]
        assert vals[0] < vals[1] < vals[2]

    def test_translation_triangle_bound(self, build):
        lp = build.L_prime
        handle = MapHandle("shift", lambda p: (p[0], p[1], p[2] - lp), dim=3)
        for r in (5.0, 50.0):
            est = max_modulus_estimate(handle, r, samples=1500)
            assert est <= r + lp + 1e-9

    def test_minimum_sample_count(self, fhandle):
        with pytest.raises(ValueError):
            max_modulus_estimate(fhandle, 10.0, samples=10)


class TestFastEscape:
    def test_axis_point_is_fast(self, fhandle, build):
        res = fast_escape_test(fhandle, (0, 0, build.constants.L + 1), R=10.0)
        assert res.kind == "fast"
        assert res.ell <= 2

    def test_translation_orbit_is_not_fast(self, fhandle):
        res = fast_escape_test(fhandle, (0, 0, -1.0), R=10.0)
        assert res.kind == "not_observed"

    def test_julia_line_is_fast(self, fhandle, build):
        res = fast_escape_test(fhandle, (2.0, 2.0, build.constants.L + 2), R=10.0)
        assert res.kind == "fast"

    def test_growth_precondition(self):
        handle = MapHandle("half", lambda p: (p[0] / 2, p[1] / 2, p[2] / 2),
                           dim=3)
        with pytest.raises(ValueError):
            fast_escape_test(handle, (0, 0, -1.0), R=10.0)


class TestBallGrowth:
    def test_beam_ball_expansion(self, fmap, build):
        L = build.constants.L
        ratio = ball_growth_check(fmap, (0.2, 0.1, L + 2), 0.1, samples=400)
        assert ratio >= 32.0

    def test_small_radius_limit_approaches_derivative_floor(self, fmap, build):
        from qrdyn.zorich import F_jacobian
        L = build.constants.L
        xi = (0.2, 0.1, L + 2)
        j, _ = F_jacobian(xi)
        ell = np.linalg.svd(j, compute_uv=False)[-1]
        assert ell >= 32.0
        r1 = ball_growth_check(fmap, xi, 1e-2, samples=400)
        r2 = ball_growth_check(fmap, xi, 1e-3, samples=400)
        assert abs(r2 - ell) < abs(r1 - ell) + 1e-9
        assert r2 == pytest.approx(ell, rel=0.05)

    def test_identity_region_rejected(self, fmap):
        with pytest.raises(ValueError):
            ball_growth_check(fmap, (0.2, 0.1, -5.0), 0.1)

    def test_beam_overflow_rejected(self, fmap, build):
        with pytest.raises(ValueError):
            ball_growth_check(fmap, (0.95, 0.0, build.constants.L + 2), 0.1)


class TestCsv:
    def test_orbit_csv_shape(self, fhandle, build):
        rec = iterate(fhandle, (0, 0, -1.0), 5)
        text = orbit_csv(rec, classify_escape(fhandle, (0, 0, -1.0), 5))
        lines = text.strip().splitlines()
        assert lines[0] == "k,x1,x2,x3,rho,a_k,class"
        assert len(lines) == 7
        row = lines[2].split(",")
        assert row[0] == "1"
        assert float(row[3]) == -1.0 - build.L_prime
        assert row[6] == "H0@0"

    def test_rates_csv_shape(self, fhandle):
        ks, aks, rec = escape_rate_series(fhandle, (0, 0, -1.0), 10)
        text = rates_csv(ks, aks, rec)
        lines = text.strip().splitlines()
        assert lines[0] == "k,rho,a_k,class"
        assert len(lines) == 11


class TestConsistency:
    def test_direct_and_surrogate_overlap(self, build):
        # compare the surrogate continuation against direct floats on the
        # window where both are representable
        lp = build.L_prime
        handle = MapHandle(
            "axis-square",
            lambda p: (0.0, 0.0, -(math.hypot(p[0], math.hypot(p[1], p[2])) ** 2 + lp)),
            dim=3, tracks_h0=True,
            surrogate=SurrogateSpec("radial-square", translate=lp))
        rec = iterate(handle, (0.0, 0.0, -5.0), 12)
        assert rec.surrogate_from is not None
        direct = [math.log(5.0)]
        r = 5.0
        while r * r < 1e306:
            r = r * r + lp
            direct.append(math.log(r))
        assert len(direct) > rec.surrogate_from  # genuine overlap
        for k in range(len(direct)):
            assert rec.rho[k] == pytest.approx(direct[k], rel=1e-6)

    def test_norm_safe_handles_huge_components(self):
        assert norm_safe((3e200, 4e200, 0.0)) == pytest.approx(5e200, rel=1e-12)
        assert math.isinf(norm_safe((float("inf"), 0.0, 0.0)))
