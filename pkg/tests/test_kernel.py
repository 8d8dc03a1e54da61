import math

import numpy as np
import pytest
from scipy import stats

from gaflab import OuState, RngStream, bm_annulus_exit_prob, ou_path, ou_transition, sample_stationary
from gaflab.kernel import grid_times


def _many_stationary(seed, n):
    return RngStream(seed).standard_complex_normals(n)


def _many_transitions(start_values, dt, seed):
    stream = RngStream(seed)
    out = np.empty(len(start_values), dtype=complex)
    for k, v in enumerate(start_values):
        out[k] = ou_transition(OuState(value=v, time=0.0), dt, stream.child(k)).value
    return out


class TestStationary:
    def test_zero_mean(self):
        z = _many_stationary(1, 1_000_000)
        assert abs(np.mean(z)) < 0.005

    def test_unit_second_moment(self):
        z = _many_stationary(2, 1_000_000)
        assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.005

    def test_modulus_law_exponential(self):
        # |z|^2 ~ Exp(1), so P(|z| < 1) = 1 - 1/e
        z = _many_stationary(3, 1_000_000)
        frac = np.mean(np.abs(z) < 1.0)
        expected = 1.0 - math.exp(-1.0)
        assert abs(frac - expected) < 3.0 * math.sqrt(expected * (1 - expected) / z.size)

    def test_reproducible(self):
        s = RngStream(42, (3,))
        assert sample_stationary(s) == sample_stationary(s)


class TestTransition:
    def test_dt_zero_identity(self):
        state = OuState(value=0.3 - 0.7j, time=1.5)
        out = ou_transition(state, 0.0, RngStream(0))
        assert out.value == state.value
        assert out.time == state.time

    def test_negative_dt_rejected(self):
        with pytest.raises(ValueError):
            ou_transition(OuState(0j, 0.0), -0.1, RngStream(0))

    def test_conditional_variance_from_zero(self):
        # started at 0, variance after dt is 1 - e^{-dt}; dt = log 2 gives 1/2
        n = 200_000
        vals = _many_transitions(np.zeros(n, dtype=complex), math.log(2.0), seed=4)
        second = np.mean(np.abs(vals) ** 2)
        assert abs(second - 0.5) < 0.01

    def test_large_dt_forgets_start(self):
        n = 100_000
        vals = _many_transitions(np.full(n, 5.0 + 5.0j), 50.0, seed=5)
        ref = _many_stationary(6, n)
        # same law as a stationary draw
        ks = stats.ks_2samp(np.abs(vals) ** 2, np.abs(ref) ** 2)
        assert ks.pvalue > 0.01
        assert abs(np.mean(vals)) < 0.02

    def test_chapman_kolmogorov(self):
        # one step of dt1+dt2 has the same law as two chained steps
        n = 100_000
        start = _many_stationary(7, n)
        one = _many_transitions(start, 0.9, seed=8)
        half = _many_transitions(start, 0.4, seed=9)
        two = _many_transitions(half, 0.5, seed=10)
        ks = stats.ks_2samp(np.abs(one), np.abs(two))
        assert ks.pvalue > 0.01
        ks_re = stats.ks_2samp(one.real, two.real)
        assert ks_re.pvalue > 0.01

    def test_stationarity_preserved(self):
        n = 200_000
        start = _many_stationary(11, n)
        out = _many_transitions(start, 0.35, seed=12)
        assert abs(np.mean(out)) < 0.01
        assert abs(np.mean(np.abs(out) ** 2) - 1.0) < 0.01
        assert abs(np.mean(out**2)) < 0.01  # pseudo-covariance stays zero


class TestPath:
    def test_zero_horizon_single_state(self):
        path = ou_path(0.0, 0.5, RngStream(1))
        assert len(path) == 1 and path[0].time == 0.0

    def test_grid_includes_endpoint(self):
        path = ou_path(1.0, 0.3, RngStream(2))
        times = [s.time for s in path]
        assert times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            ou_path(1.0, 0.0, RngStream(0))

    def test_initial_override(self):
        path = ou_path(0.5, 0.25, RngStream(3), initial=2.0 + 1.0j)
        assert path[0].value == 2.0 + 1.0j

    def test_lag_one_autocorrelation(self):
        # covariance at spacing 1 is e^{-1/2}
        stream = RngStream(13)
        n_paths, length = 300, 120
        acc = 0.0
        count = 0
        for k in range(n_paths):
            vals = np.array([s.value for s in ou_path(float(length), 1.0, stream.child(k))])
            acc += float(np.sum(vals[:-1] * np.conj(vals[1:])).real)
            count += vals.size - 1
        corr = acc / count
        assert abs(corr - math.exp(-0.5)) < 0.02

    def test_sup_exceedance_matches_finer_grid(self):
        # P(sup |path| > 2.2 on [0, 4]): op on a delta grid vs a batched
        # fine-grid oracle (delta/10) simulated independently
        horizon, radius, n = 4.0, 2.2, 500
        stream = RngStream(14)
        hits = 0
        for k in range(n):
            vals = np.array([s.value for s in ou_path(horizon, 0.01, stream.child(0, k))])
            hits += bool(np.any(np.abs(vals) > radius))
        coarse = hits / n

        def fine_oracle(step, n_paths, seed):
            gen = RngStream(seed).generator()
            steps = int(round(horizon / step))
            decay = math.exp(-step / 2.0)
            scale = math.sqrt(-math.expm1(-step))
            x = gen.standard_normal(2 * n_paths) * math.sqrt(0.5)
            w = x[0::2] + 1j * x[1::2]
            exceeded = np.abs(w) > radius
            for _ in range(steps):
                x = gen.standard_normal(2 * n_paths) * math.sqrt(0.5)
                w = decay * w + scale * (x[0::2] + 1j * x[1::2])
                exceeded |= np.abs(w) > radius
            return exceeded.mean()

        fine = fine_oracle(0.001, 4_000, seed=77)
        se = math.sqrt(coarse * (1 - coarse) / n + fine * (1 - fine) / 4_000)
        assert abs(coarse - fine) < 2.0 * se + 0.015  # finer grid sees slightly more excursions


class TestGridTimes:
    def test_integral_ratio(self):
        assert np.allclose(grid_times(1.0, 0.25), [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_non_integral_ratio_appends_endpoint(self):
        t = grid_times(1.0, 0.3)
        assert t[-1] == 1.0 and len(t) == 5

    def test_step_larger_than_horizon(self):
        assert np.allclose(grid_times(0.2, 0.5), [0.0, 0.2])


class TestAnnulusExit:
    def test_boundary_start_gives_zero(self):
        assert bm_annulus_exit_prob(1.0, 1.0, 4.0) == 0.0

    def test_log_symmetric_midpoint(self):
        assert bm_annulus_exit_prob(1.0, math.e, math.e**2) == pytest.approx(0.5)

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            bm_annulus_exit_prob(2.0, 1.0, 4.0)
        with pytest.raises(ValueError):
            bm_annulus_exit_prob(0.0, 1.0, 2.0)

    def test_against_brownian_walk_oracle(self):
        # closed form log2/log8 = 1/3 vs a discretized Brownian first-exit walk
        r1, r2, r3 = 0.5, 1.0, 4.0
        expected = bm_annulus_exit_prob(r1, r2, r3)
        assert expected == pytest.approx(math.log(2.0) / math.log(8.0))
        gen = RngStream(15).generator()
        n, dt = 4_000, 2e-4
        scale = math.sqrt(dt / 2.0)
        z = np.full(n, complex(r2, 0.0))
        outcome = np.zeros(n, dtype=np.int8)  # 0 running, 1 outer first, -1 inner first
        active = np.arange(n)
        while active.size:
            x = gen.standard_normal(2 * active.size)
            z[active] += (x[0::2] + 1j * x[1::2]) * scale
            a = np.abs(z[active])
            outcome[active[a >= r3]] = 1
            outcome[active[(a <= r1) & (a < r3)]] = -1
            active = active[(a > r1) & (a < r3)]
        p_mc = float(np.mean(outcome == 1))
        se = math.sqrt(expected * (1 - expected) / n)
        assert abs(p_mc - expected) < 2.0 * se + 0.02  # walk discretization bias allowance
