import math

import mpmath
import numpy as np
import pytest

from gaflab import (
    GafEvolution,
    RngStream,
    eval_snapshot,
    eval_snapshot_deriv,
    evolve_on_grid,
    evolve_snapshot,
    sample_snapshot,
    snapshot_from_coeffs,
    translate_evaluator,
    truncation_degree,
    variance_at,
)
from gaflab.gaf import implied_radius, tail_std


def brute_tail(trunc_degree: int, radius: float) -> float:
    """Independent oracle: direct summation of the discarded tail variance."""
    with mpmath.workdps(60):
        lam = mpmath.mpf(radius) ** 2
        total = mpmath.mpf(0)
        for k in range(trunc_degree + 1, trunc_degree + 600):
            total += lam**k / mpmath.factorial(k)
        return float(mpmath.sqrt(total))


class TestTruncationDegree:
    def test_small_radius_small_degree(self):
        assert truncation_degree(1e-4, 1e-8) <= 10

    def test_tail_bound_tight_at_r1(self):
        m = truncation_degree(1.0, 1e-8)
        assert brute_tail(m, 1.0) < 1e-8
        assert brute_tail(m - 1, 1.0) >= 1e-8  # smallest such degree

    def test_tail_bound_tight_at_r2(self):
        m = truncation_degree(2.0, 1e-8)
        assert brute_tail(m, 2.0) < 1e-8
        assert brute_tail(m - 1, 2.0) >= 1e-8

    def test_checker_mode_floor(self):
        assert truncation_degree(2.0, 1e-8, for_condition_checks=True) >= 192

    def test_modal_term_included(self):
        for r in (0.7, 1.3, 2.4, 3.9):
            assert truncation_degree(r, 1e-2) >= math.ceil(r * r)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            truncation_degree(0.0, 1e-8)
        with pytest.raises(ValueError):
            truncation_degree(1.0, 2.0)

    def test_implied_radius_inverts(self):
        m = truncation_degree(1.7, 1e-8)
        r = implied_radius(m, 1e-8)
        assert r >= 1.7
        assert tail_std(m, r) <= 1e-8


class TestSampleSnapshot:
    def test_degenerate_constant(self):
        s = sample_snapshot(0, RngStream(1))
        assert s.trunc_degree == 0
        assert eval_snapshot(s, 0.0) == complex(s.coeffs[0])

    def test_reproducible(self):
        a = sample_snapshot(10, RngStream(2, (5,)))
        b = sample_snapshot(10, RngStream(2, (5,)))
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_coefficients_immutable(self):
        s = sample_snapshot(5, RngStream(3))
        with pytest.raises(ValueError):
            s.coeffs[0] = 0

    def test_variance_at_unit_radius(self):
        # empirical Var f(1) = e (law check over many snapshots)
        m = truncation_degree(1.0, 1e-8)
        gen = RngStream(4).generator()
        n = 100_000
        x = gen.standard_normal(2 * n * (m + 1)) * math.sqrt(0.5)
        coeffs = (x[0::2] + 1j * x[1::2]).reshape(n, m + 1)
        basis = np.array([1.0 / math.sqrt(math.factorial(k)) for k in range(m + 1)])
        vals = coeffs @ basis
        var = np.mean(np.abs(vals) ** 2)
        assert abs(var - math.e) < 0.025

    def test_covariance_kernel(self):
        # E f(z) conj(f(w)) = exp(z conj(w)); brute-force series oracle
        z, w = 1.0, 1.0j
        expected = sum((z * np.conj(w)) ** n / math.factorial(n) for n in range(40))
        assert expected == pytest.approx(np.exp(z * np.conj(w)))
        m = truncation_degree(1.0, 1e-8)
        stream = RngStream(5)
        n = 60_000
        gen = stream.generator()
        x = gen.standard_normal(2 * n * (m + 1)) * math.sqrt(0.5)
        coeffs = (x[0::2] + 1j * x[1::2]).reshape(n, m + 1)
        bz = np.array([z**k / math.sqrt(math.factorial(k)) for k in range(m + 1)])
        bw = np.array([w**k / math.sqrt(math.factorial(k)) for k in range(m + 1)])
        cov = np.mean((coeffs @ bz) * np.conj(coeffs @ bw))
        assert abs(cov - expected) < 0.03
        assert abs(abs(expected) - 1.0) < 1e-12  # |e^{-i}| = 1


class TestEval:
    def test_origin_is_a0(self):
        s = sample_snapshot(8, RngStream(6))
        assert eval_snapshot(s, 0.0) == complex(s.coeffs[0])

    def test_single_term(self):
        k = 7
        coeffs = np.zeros(k + 1, dtype=complex)
        coeffs[k] = 1.0
        s = snapshot_from_coeffs(coeffs, exact=True)
        r = 1.37
        assert eval_snapshot(s, r) == pytest.approx(r**k / math.sqrt(math.factorial(k)), rel=1e-14)

    def test_matches_extended_precision_at_degree_60(self):
        s = sample_snapshot(60, RngStream(7), valid_radius=2.0, tail_eps=1.0)
        z = 2.0 + 0.0j
        got = eval_snapshot(s, z)
        with mpmath.workdps(50):
            acc = mpmath.mpc(0)
            for n, c in enumerate(s.coeffs):
                acc += mpmath.mpc(c) * mpmath.mpc(z) ** n / mpmath.sqrt(mpmath.factorial(n))
            expected = complex(acc)
        assert abs(got - expected) <= 1e-12 * abs(expected)

    def test_domain_error(self):
        s = sample_snapshot(truncation_degree(1.0), RngStream(8), valid_radius=1.0)
        with pytest.raises(ValueError):
            eval_snapshot(s, 1.5)

    def test_vectorized_matches_scalar(self):
        s = sample_snapshot(12, RngStream(9))
        zs = 0.3 * np.exp(1j * np.linspace(0, 6, 7))
        vec = eval_snapshot(s, zs)
        assert np.allclose(vec, [eval_snapshot(s, z) for z in zs], rtol=1e-15)

    def test_derivative_finite_difference(self):
        s = sample_snapshot(15, RngStream(10))
        z = 0.4 - 0.2j
        h = 1e-6
        fd = (eval_snapshot(s, z + h) - eval_snapshot(s, z - h)) / (2 * h)
        assert eval_snapshot_deriv(s, z) == pytest.approx(fd, rel=1e-8)


class TestEvolve:
    def test_dt_zero_identity(self):
        s = sample_snapshot(6, RngStream(11))
        out = evolve_snapshot(s, 0.0, RngStream(12))
        assert np.array_equal(out.coeffs, s.coeffs)

    def test_negative_dt_rejected(self):
        s = sample_snapshot(3, RngStream(13))
        with pytest.raises(ValueError):
            evolve_snapshot(s, -0.5, RngStream(14))

    def test_large_dt_decorrelates(self):
        stream = RngStream(15)
        n = 30_000
        before = np.empty(n, dtype=complex)
        after = np.empty(n, dtype=complex)
        for k in range(n):
            s = sample_snapshot(0, stream.child(0, k))
            e = evolve_snapshot(s, 60.0, stream.child(1, k))
            before[k], after[k] = s.coeffs[0], e.coeffs[0]
        corr = np.mean(before * np.conj(after))
        assert abs(corr) < 3.0 / math.sqrt(n)

    def test_lag_one_coefficient_correlation(self):
        stream = RngStream(16)
        n = 60_000
        before = np.empty(n, dtype=complex)
        after = np.empty(n, dtype=complex)
        for k in range(n):
            s = sample_snapshot(0, stream.child(0, k))
            e = evolve_snapshot(s, 1.0, stream.child(1, k))
            before[k], after[k] = s.coeffs[0], e.coeffs[0]
        corr = np.mean(before * np.conj(after)).real
        assert abs(corr - math.exp(-0.5)) < 0.015

    def test_two_steps_match_one_in_law(self):
        # evolve dt1 then dt2 vs dt1+dt2: coefficient covariance with the start
        stream = RngStream(17)
        n = 40_000
        start = np.empty(n, dtype=complex)
        one_step = np.empty(n, dtype=complex)
        two_step = np.empty(n, dtype=complex)
        for k in range(n):
            s = sample_snapshot(0, stream.child(0, k))
            start[k] = s.coeffs[0]
            one_step[k] = evolve_snapshot(s, 0.7, stream.child(1, k)).coeffs[0]
            mid = evolve_snapshot(s, 0.3, stream.child(2, k))
            two_step[k] = evolve_snapshot(mid, 0.4, stream.child(3, k)).coeffs[0]
        c1 = np.mean(start * np.conj(one_step)).real
        c2 = np.mean(start * np.conj(two_step)).real
        assert c1 == pytest.approx(math.exp(-0.35), abs=0.015)
        assert c2 == pytest.approx(math.exp(-0.35), abs=0.015)
        assert abs(np.mean(np.abs(two_step) ** 2) - 1.0) < 0.015

    def test_evolution_grid(self):
        s = sample_snapshot(5, RngStream(18))
        ev = evolve_on_grid(s, 1.0, 0.3, RngStream(19))
        assert [round(t, 10) for t in ev.times] == [0.0, 0.3, 0.6, 0.9, 1.0]
        assert isinstance(ev, GafEvolution)
        assert ev.snapshots[0] is s

    def test_evolution_rejects_mixed_degrees(self):
        a = sample_snapshot(5, RngStream(20))
        b = sample_snapshot(6, RngStream(21), time=1.0)
        with pytest.raises(ValueError):
            GafEvolution(snapshots=(a, b), grid_step=1.0)


class TestTranslate:
    def test_zero_shift_is_identity(self):
        s = sample_snapshot(12, RngStream(22))
        f = translate_evaluator(s, 0.0)
        zs = 0.3 * np.exp(1j * np.linspace(0, 6, 5))
        assert np.allclose(f(zs), eval_snapshot(s, zs), rtol=1e-14)

    def test_value_at_origin(self):
        s = sample_snapshot(truncation_degree(2.0), RngStream(23), valid_radius=2.0)
        xi = 0.4 + 0.5j
        f = translate_evaluator(s, xi)
        expected = math.exp(-abs(xi) ** 2 / 2.0) * eval_snapshot(s, xi)
        assert f(0.0) == pytest.approx(expected, rel=1e-14)

    def test_radius_budget_enforced(self):
        s = sample_snapshot(truncation_degree(1.0), RngStream(24), valid_radius=1.0)
        f = translate_evaluator(s, 0.7)
        with pytest.raises(ValueError):
            f(0.5)
        with pytest.raises(ValueError):
            translate_evaluator(s, 1.2)

    def test_translated_variance_matches_untranslated(self):
        # law invariance: Var of translated field at |z|=1 is still e
        xi = 0.7
        m = truncation_degree(2.0, 1e-8)
        stream = RngStream(25)
        n = 30_000
        vals = np.empty(n, dtype=complex)
        for k in range(n):
            s = sample_snapshot(m, stream.child(k), valid_radius=2.0)
            vals[k] = translate_evaluator(s, xi)(1.0)
        var = np.mean(np.abs(vals) ** 2)
        assert abs(var - math.e) / math.e < 0.04


class TestVarianceAt:
    def test_values(self):
        assert variance_at(0.0) == 1.0
        assert variance_at(1.0) == pytest.approx(math.e)
        assert variance_at(2.0) == pytest.approx(math.e**4)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            variance_at(-1.0)


class TestRotationInvariance:
    def test_modulus_distribution_angle_free(self):
        from scipy import stats

        m = truncation_degree(1.5, 1e-8)
        gen = RngStream(26).generator()
        n = 40_000
        x = gen.standard_normal(2 * n * (m + 1)) * math.sqrt(0.5)
        coeffs = (x[0::2] + 1j * x[1::2]).reshape(n, m + 1)
        r = 1.5

        def at_angle(alpha):
            z = r * np.exp(1j * alpha)
            basis = np.array([z**k / math.sqrt(math.factorial(k)) for k in range(m + 1)])
            return np.abs(coeffs @ basis)

        ks = stats.ks_2samp(at_angle(0.0), at_angle(1.3))
        assert ks.pvalue > 0.01

    def test_angular_correlation_decay(self):
        # |E f(re^{ia}) conj f(r)| / e^{r^2} = e^{r^2 (cos a - 1)}
        r = 1.5
        m = truncation_degree(r, 1e-8)
        gen = RngStream(27).generator()
        n = 200_000
        x = gen.standard_normal(2 * n * (m + 1)) * math.sqrt(0.5)
        coeffs = (x[0::2] + 1j * x[1::2]).reshape(n, m + 1)
        b0 = np.array([r**k / math.sqrt(math.factorial(k)) for k in range(m + 1)])
        f0 = coeffs @ b0
        for alpha in (0.5, 1.0):
            z = r * np.exp(1j * alpha)
            ba = np.array([z**k / math.sqrt(math.factorial(k)) for k in range(m + 1)])
            fa = coeffs @ ba
            got = abs(np.mean(fa * np.conj(f0))) / math.exp(r * r)
            expected = math.exp(r * r * (math.cos(alpha) - 1.0))
            assert abs(got - expected) < 4.0 / math.sqrt(n) + 0.01
