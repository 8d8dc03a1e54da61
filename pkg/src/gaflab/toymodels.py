"""The three evolving comparison point processes and disk-occupancy functionals.

All three have unit-area intensity 1/pi and admit a time evolution that
preserves their law:

* ``poisson_bm``      -- Poisson points moving as independent complex Brownian
                         motions (B = (B1 + i B2)/sqrt(2), so E|B(t)|^2 = t);
* ``perturbed_lattice`` -- sqrt(pi)(k + i l) + c * zeta_{k,l}(t);
* ``triangular_cluster`` -- sqrt(3 pi)(k + i l) + c e^{2 pi i m/3} zeta_{k,l}(t)
                         for m = 0, 1, 2, the three points of a site sharing
                         one mean-reverting driver (rotated three ways), per
                         the displayed construction; independent drivers are
                         available behind a switch.

Perturbations zeta are stationary CN(0,1) mean-reverting paths from
:mod:`gaflab.kernel`.  Base sites are instantiated out to
window_radius + margin so points wandering into the window from outside are
accounted for; the default margin makes the leftover boundary bias negligible
relative to Monte Carlo resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import grid_times, ou_step_coefficients
from .streams import RngStream

__all__ = [
    "MODELS",
    "LatticeSpec",
    "PointConfiguration",
    "default_margin",
    "simulate_toy",
    "count_in_disk",
    "hole_path_indicator",
    "crowd_path_indicator",
]

MODELS = ("poisson_bm", "perturbed_lattice", "triangular_cluster")

SQUARE_SPACING = math.sqrt(math.pi)          # perturbed lattice: one point per pi area
CLUSTER_SPACING = math.sqrt(3.0 * math.pi)   # cluster sites: three points per 3*pi area


def default_margin(model: str, perturb_scale: float, window_radius: float, horizon: float, grid_step: float) -> float:
    """Padding distance beyond which outside points are ignored.

    For the lattice models this is a sup-tail headroom for the stationary
    perturbations over every (site, grid time) pair; for the Brownian model it
    is a multiple of the horizon's diffusion scale.  Validated empirically by
    the margin-doubling stability property.
    """
    if model == "poisson_bm":
        return 3.0 * math.sqrt(max(horizon, 0.0)) + 3.0
    spacing = SQUARE_SPACING if model == "perturbed_lattice" else CLUSTER_SPACING
    c = max(perturb_scale, 1e-9)
    n_times = max(2.0, horizon / max(grid_step, 1e-12))
    margin = 4.0 * c
    for _ in range(4):  # site count depends on margin; a few fixed-point rounds settle it
        sites = max(1.0, math.pi * (window_radius + margin) ** 2 / spacing**2)
        margin = c * (4.0 + math.sqrt(2.0 * math.log(n_times * sites)))
    return margin


@dataclass(frozen=True)
class LatticeSpec:
    """Parameters of one toy-model simulation."""

    model: str
    window_radius: float
    horizon: float
    grid_step: float
    perturb_scale: float = 1.0  # the paper leaves c free; any fixed c > 0 works
    margin: float | None = None
    independent_drivers: bool = False  # triangular_cluster only

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.window_radius <= 0:
            raise ValueError(f"window_radius must be positive, got {self.window_radius!r}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon!r}")
        if self.grid_step <= 0:
            raise ValueError(f"grid_step must be positive, got {self.grid_step!r}")
        if self.perturb_scale < 0:
            raise ValueError(f"perturb_scale must be nonnegative, got {self.perturb_scale!r}")
        if self.margin is None:
            object.__setattr__(
                self,
                "margin",
                default_margin(self.model, self.perturb_scale, self.window_radius, self.horizon, self.grid_step),
            )
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin!r}")

    @property
    def reach(self) -> float:
        return self.window_radius + self.margin


@dataclass(frozen=True)
class PointConfiguration:
    """Labeled point positions of one model at one time."""

    time: float
    points: tuple[tuple[str, complex], ...]
    window_radius: float | None = None

    def positions(self) -> np.ndarray:
        return np.array([p for _, p in self.points], dtype=np.complex128)


def _lattice_sites(spacing: float, reach: float) -> tuple[list[str], np.ndarray]:
    """All sites spacing*(k + i*l) with |site| <= reach, in deterministic order."""
    kmax = int(math.floor(reach / spacing))
    labels: list[str] = []
    sites: list[complex] = []
    for k in range(-kmax, kmax + 1):
        for l in range(-kmax, kmax + 1):
            site = spacing * complex(k, l)
            if abs(site) <= reach:
                labels.append(f"{k},{l}")
                sites.append(site)
    return labels, np.array(sites, dtype=np.complex128)


def _complex_normals(g: np.random.Generator, n: int) -> np.ndarray:
    x = g.standard_normal(2 * n) * math.sqrt(0.5)
    return x[0::2] + 1j * x[1::2]


def toy_path_arrays(spec: LatticeSpec, stream: RngStream) -> tuple[np.ndarray, list[str], np.ndarray]:
    """Simulate one path; returns (times, labels, positions[(n_times, n_points)]).

    This is the array core behind :func:`simulate_toy`; campaign code uses it
    directly.  All randomness comes from ``stream.generator()`` in a fixed
    draw order, so equal (spec, stream) gives identical output.
    """
    g = stream.generator()
    times = grid_times(spec.horizon, spec.grid_step)
    n_times = times.shape[0]

    if spec.model == "poisson_bm":
        mean_count = spec.reach**2  # intensity 1/pi over a disk of area pi*reach^2
        n_pts = int(g.poisson(mean_count))
        radii = spec.reach * np.sqrt(g.uniform(size=n_pts))
        angles = g.uniform(0.0, 2.0 * math.pi, size=n_pts)
        pos0 = radii * np.exp(1j * angles)
        labels = [str(i) for i in range(n_pts)]
        positions = np.empty((n_times, n_pts), dtype=np.complex128)
        positions[0] = pos0
        for j in range(1, n_times):
            dt = times[j] - times[j - 1]
            positions[j] = positions[j - 1] + math.sqrt(dt) * _complex_normals(g, n_pts)
        return times, labels, positions

    spacing = SQUARE_SPACING if spec.model == "perturbed_lattice" else CLUSTER_SPACING
    site_labels, sites = _lattice_sites(spacing, spec.reach)
    n_sites = sites.shape[0]
    drivers_per_site = 1
    if spec.model == "triangular_cluster" and spec.independent_drivers:
        drivers_per_site = 3
    n_drv = n_sites * drivers_per_site
    zeta = np.empty((n_times, n_drv), dtype=np.complex128)
    zeta[0] = _complex_normals(g, n_drv)
    for j in range(1, n_times):
        decay, scale = ou_step_coefficients(float(times[j] - times[j - 1]))
        zeta[j] = decay * zeta[j - 1] + scale * _complex_normals(g, n_drv)

    if spec.model == "perturbed_lattice":
        positions = sites[None, :] + spec.perturb_scale * zeta
        return times, site_labels, positions

    phases = np.exp(2j * math.pi * np.arange(3) / 3.0)
    labels = [f"{lab}/{m}" for lab in site_labels for m in range(3)]
    positions = np.empty((n_times, 3 * n_sites), dtype=np.complex128)
    for m in range(3):
        drv = zeta[:, m::3] if drivers_per_site == 3 else zeta
        positions[:, m::3] = sites[None, :] + spec.perturb_scale * phases[m] * drv
    return times, labels, positions


def simulate_toy(spec: LatticeSpec, stream: RngStream) -> list[PointConfiguration]:
    """Sample one evolving configuration, reported on the grid times."""
    times, labels, positions = toy_path_arrays(spec, stream)
    return [
        PointConfiguration(
            time=float(t),
            points=tuple(zip(labels, (complex(z) for z in positions[j]))),
            window_radius=spec.window_radius,
        )
        for j, t in enumerate(times)
    ]


def count_in_disk(cfg: PointConfiguration, radius: float) -> int:
    """Number of points with |p| <= radius."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    if cfg.window_radius is not None and radius > cfg.window_radius:
        raise ValueError(
            f"radius {radius!r} exceeds window_radius {cfg.window_radius!r}; counts would be boundary-biased"
        )
    if not cfg.points:
        return 0
    return int(np.count_nonzero(np.abs(cfg.positions()) <= radius))


def hole_path_indicator(cfgs: list[PointConfiguration], radius: float) -> bool:
    """True iff the disk is empty at every grid time."""
    return all(count_in_disk(c, radius) == 0 for c in cfgs)


def crowd_path_indicator(cfgs: list[PointConfiguration], radius: float, min_count: int) -> bool:
    """True iff the disk holds at least min_count points at every grid time."""
    if min_count <= 0:
        return True
    return all(count_in_disk(c, radius) >= min_count for c in cfgs)
