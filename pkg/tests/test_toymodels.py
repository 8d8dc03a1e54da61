import math

import numpy as np
import pytest
from scipy import stats

from gaflab import LatticeSpec, RngStream, count_in_disk, crowd_path_indicator, hole_path_indicator, simulate_toy
from gaflab.toymodels import CLUSTER_SPACING, SQUARE_SPACING, default_margin, toy_path_arrays


def make_spec(model, window=2.0, horizon=0.5, step=0.1, c=1.0, **kw):
    return LatticeSpec(model=model, window_radius=window, horizon=horizon, grid_step=step, perturb_scale=c, **kw)


class TestSpec:
    def test_margin_defaults_positive(self):
        for model in ("poisson_bm", "perturbed_lattice", "triangular_cluster"):
            assert make_spec(model).margin > 0

    def test_margin_formula_poisson(self):
        spec = make_spec("poisson_bm", horizon=4.0)
        assert spec.margin == pytest.approx(3.0 * 2.0 + 3.0)

    def test_invalid_model(self):
        with pytest.raises(ValueError):
            make_spec("hexagonal")

    def test_invalid_numbers(self):
        with pytest.raises(ValueError):
            make_spec("poisson_bm", window=0.0)
        with pytest.raises(ValueError):
            make_spec("poisson_bm", step=0.0)


class TestFrozenLattice:
    def test_zero_perturbation_sites_exact(self):
        spec = make_spec("perturbed_lattice", c=0.0, margin=1.0)
        cfgs = simulate_toy(spec, RngStream(1))
        for cfg in cfgs:
            pos = cfg.positions()
            k = np.round(pos.real / SQUARE_SPACING)
            l = np.round(pos.imag / SQUARE_SPACING)
            assert np.allclose(pos, SQUARE_SPACING * (k + 1j * l))
        # the origin site is present, so any hole is impossible
        assert not hole_path_indicator(cfgs, 0.25)

    def test_zero_perturbation_counts(self):
        spec = make_spec("perturbed_lattice", c=0.0, margin=1.0)
        cfgs = simulate_toy(spec, RngStream(2))
        # only the origin site within radius 1 (next sites at sqrt(pi) ~ 1.772)
        assert count_in_disk(cfgs[0], 1.0) == 1
        # origin plus 4 nearest neighbours within radius 2
        assert count_in_disk(cfgs[0], 2.0) == 5

    def test_zero_perturbation_crowd(self):
        spec = make_spec("perturbed_lattice", c=0.0, margin=1.0)
        cfgs = simulate_toy(spec, RngStream(3))
        assert crowd_path_indicator(cfgs, 2.0, 5)
        assert not crowd_path_indicator(cfgs, 2.0, 6)
        assert crowd_path_indicator(cfgs, 2.0, 0)  # vacuous threshold


class TestIntensity:
    def test_poisson_mean_count(self):
        spec = make_spec("poisson_bm", window=2.0, horizon=0.1)
        stream = RngStream(4)
        counts = [count_in_disk(simulate_toy(spec, stream.child(k))[0], 2.0) for k in range(800)]
        mean = np.mean(counts)
        se = np.std(counts) / math.sqrt(len(counts))
        assert abs(mean - 4.0) <= 3.0 * se

    def test_cluster_intensity(self):
        # three points per cell of area 3*pi -> 1/pi per unit area; direct count
        spec = make_spec("triangular_cluster", window=6.0, horizon=0.1)
        stream = RngStream(5)
        radius = 5.0
        counts = [count_in_disk(simulate_toy(spec, stream.child(k))[0], radius) for k in range(300)]
        mean = np.mean(counts)
        se = np.std(counts) / math.sqrt(len(counts))
        assert abs(mean - radius**2) <= 3.0 * se + 0.5

    def test_cluster_triads_share_driver(self):
        spec = make_spec("triangular_cluster", window=3.0, horizon=0.0, step=0.1)
        _, labels, positions = toy_path_arrays(spec, RngStream(6))
        pos = positions[0]
        # the three satellites of one site are rotations of a single offset
        base = [i for i, lab in enumerate(labels) if lab.endswith("/0")]
        for i in base[:10]:
            site_label = labels[i].split("/")[0]
            k, l = (int(v) for v in site_label.split(","))
            site = CLUSTER_SPACING * complex(k, l)
            offs = [pos[i] - site, pos[i + 1] - site, pos[i + 2] - site]
            rot = np.exp(2j * math.pi / 3.0)
            assert offs[1] == pytest.approx(offs[0] * rot, rel=1e-12)
            assert offs[2] == pytest.approx(offs[0] * rot**2, rel=1e-12)

    def test_cluster_independent_drivers_switch(self):
        spec = make_spec("triangular_cluster", window=3.0, horizon=0.0, step=0.1, independent_drivers=True)
        _, labels, positions = toy_path_arrays(spec, RngStream(7))
        pos = positions[0]
        site_label = labels[0].split("/")[0]
        k, l = (int(v) for v in site_label.split(","))
        site = CLUSTER_SPACING * complex(k, l)
        offs = [pos[0] - site, pos[1] - site, pos[2] - site]
        rot = np.exp(2j * math.pi / 3.0)
        assert abs(offs[1] - offs[0] * rot) > 1e-6  # no longer a shared rotation


class TestIndicators:
    def test_point_inside_at_start_kills_hole(self):
        spec = make_spec("perturbed_lattice", c=0.0, margin=1.0)
        cfgs = simulate_toy(spec, RngStream(8))
        assert not hole_path_indicator(cfgs, 0.5)

    def test_empty_configuration_counts_zero(self):
        from gaflab.toymodels import PointConfiguration

        cfg = PointConfiguration(time=0.0, points=())
        assert count_in_disk(cfg, 1.0) == 0

    def test_count_boundary_guard(self):
        spec = make_spec("poisson_bm", window=1.0)
        cfg = simulate_toy(spec, RngStream(9))[0]
        with pytest.raises(ValueError):
            count_in_disk(cfg, 1.5)

    def test_hole_indicator_matches_finer_grid(self):
        # poisson_bm hole frequencies at delta vs delta/4 agree within MC error
        radius, horizon = 0.3, 1.0
        stream = RngStream(10)

        def freq(step, child, n=1200):
            spec = make_spec("poisson_bm", window=1.0, horizon=horizon, step=step)
            hits = 0
            for k in range(n):
                _, _, positions = toy_path_arrays(spec, stream.child(child, k))
                hits += bool(np.all(np.min(np.abs(positions), axis=1) > radius))
            return hits / n

        coarse = freq(0.02, 0)
        fine = freq(0.005, 1)
        se = math.sqrt(coarse * (1 - coarse) / 1200 + fine * (1 - fine) / 1200)
        assert abs(coarse - fine) <= 2.0 * se + 0.01

    def test_crowd_indicator_matches_finer_grid(self):
        radius, horizon, want = 1.0, 0.5, 1
        stream = RngStream(11)

        def freq(step, child, n=1200):
            spec = make_spec("poisson_bm", window=2.0, horizon=horizon, step=step)
            hits = 0
            for k in range(n):
                _, _, positions = toy_path_arrays(spec, stream.child(child, k))
                counts = np.sum(np.abs(positions) <= radius, axis=1)
                hits += bool(np.all(counts >= want))
            return hits / n

        coarse = freq(0.02, 0)
        fine = freq(0.005, 1)
        se = math.sqrt(coarse * (1 - coarse) / 1200 + fine * (1 - fine) / 1200)
        assert abs(coarse - fine) <= 2.0 * se + 0.01


class TestStationarity:
    @pytest.mark.parametrize("model", ["perturbed_lattice", "triangular_cluster"])
    def test_counts_same_law_start_and_end(self, model):
        spec = make_spec(model, window=2.5, horizon=1.0, step=0.25)
        stream = RngStream(12)
        start, end = [], []
        for k in range(600):
            cfgs = simulate_toy(spec, stream.child(k))
            start.append(count_in_disk(cfgs[0], 2.0))
            end.append(count_in_disk(cfgs[-1], 2.0))
        tbl_max = max(max(start), max(end)) + 1
        hist0 = np.bincount(start, minlength=tbl_max)
        hist1 = np.bincount(end, minlength=tbl_max)
        keep = (hist0 + hist1) >= 10  # merge sparse bins for a valid chi-squared
        h0 = np.append(hist0[keep], hist0[~keep].sum())
        h1 = np.append(hist1[keep], hist1[~keep].sum())
        chi = stats.chi2_contingency(np.vstack([h0, h1]) + 1)
        assert chi.pvalue > 0.01

    def test_poisson_bm_preserves_mean(self):
        spec = make_spec("poisson_bm", window=2.0, horizon=1.0, step=0.25)
        stream = RngStream(13)
        end = [count_in_disk(simulate_toy(spec, stream.child(k))[-1], 2.0) for k in range(600)]
        mean = np.mean(end)
        se = np.std(end) / math.sqrt(len(end))
        assert abs(mean - 4.0) <= 3.0 * se


class TestMarginSufficiency:
    def test_doubling_margin_stable(self):
        radius, horizon = 0.5, 1.0
        stream = RngStream(14)

        def freq(margin_mult, child, n=1000):
            base = make_spec("perturbed_lattice", window=1.0, horizon=horizon, step=0.05)
            spec = make_spec(
                "perturbed_lattice", window=1.0, horizon=horizon, step=0.05, margin=base.margin * margin_mult
            )
            hits = 0
            for k in range(n):
                _, _, positions = toy_path_arrays(spec, stream.child(child, k))
                hits += bool(np.all(np.min(np.abs(positions), axis=1) > radius))
            return hits / n

        f1 = freq(1.0, 0)
        f2 = freq(2.0, 1)
        se = math.sqrt(f1 * (1 - f1) / 1000 + f2 * (1 - f2) / 1000)
        assert abs(f1 - f2) <= 2.0 * se + 0.01


class TestDeterminism:
    @pytest.mark.parametrize("model", ["poisson_bm", "perturbed_lattice", "triangular_cluster"])
    def test_same_stream_same_output(self, model):
        spec = make_spec(model)
        a = simulate_toy(spec, RngStream(15, (2,)))
        b = simulate_toy(spec, RngStream(15, (2,)))
        assert len(a) == len(b)
        for ca, cb in zip(a, b):
            assert ca == cb
