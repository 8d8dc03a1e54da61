"""Truncated planar Gaussian analytic function snapshots.

A snapshot holds the coefficients a_0..a_M of

    f(z, t) = sum_n a_n(t) z^n / sqrt(n!),

where each a_n evolves as an independent complex mean-reverting process with
stationary law CN(0,1).  Truncation at degree M is chosen so the discarded
tail has standard deviation below ``tail_eps`` everywhere on the working disk
|z| <= valid_radius, using the closed identity

    sum_{k>M} R^{2k}/k!  =  e^{R^2} P(Poisson(R^2) > M).

Evaluation uses the multiplicative recurrence term_{n+1} = term_n * z/sqrt(n+1)
and never forms n! or z^n separately, so it stays stable for every degree a
double can express.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import poisson

from .kernel import grid_times, ou_step_coefficients
from .streams import RngStream

__all__ = [
    "GafSnapshot",
    "GafEvolution",
    "truncation_degree",
    "tail_std",
    "implied_radius",
    "sample_snapshot",
    "snapshot_from_coeffs",
    "evolve_snapshot",
    "evolve_on_grid",
    "eval_snapshot",
    "eval_snapshot_deriv",
    "translate_evaluator",
    "variance_at",
]

DEFAULT_TAIL_EPS = 1e-8


def tail_std(trunc_degree: int, radius: float) -> float:
    """Standard deviation of the discarded tail sum at |z| = radius."""
    lam = radius * radius
    return math.sqrt(math.exp(lam) * poisson.sf(trunc_degree, lam))


def truncation_degree(radius: float, eps: float = DEFAULT_TAIL_EPS, *, for_condition_checks: bool = False) -> int:
    """Smallest degree M whose tail standard deviation on |z| <= radius is < eps.

    With ``for_condition_checks`` the result is also forced up to
    ceil(48 * radius^2), the coefficient range the hole/overcrowding
    sufficient-condition checkers need to inspect.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0,1), got {eps!r}")
    lam = radius * radius
    m = int(math.ceil(lam))  # modal term always included
    while math.exp(lam) * poisson.sf(m, lam) >= eps * eps:
        m += 1
    if for_condition_checks:
        m = max(m, int(math.ceil(48.0 * lam)))
    return m


@lru_cache(maxsize=4096)
def implied_radius(trunc_degree: int, eps: float = DEFAULT_TAIL_EPS) -> float:
    """Largest radius at which a degree-M truncation keeps tail std below eps."""
    lo, hi = 0.0, math.sqrt(max(trunc_degree, 1)) + 1.0
    while tail_std(trunc_degree, hi) < eps:
        lo, hi = hi, 2 * hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if tail_std(trunc_degree, mid) < eps:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class GafSnapshot:
    """Truncated coefficient vector of the random analytic function at one time."""

    time: float
    coeffs: np.ndarray  # complex128, length trunc_degree + 1
    trunc_degree: int
    valid_radius: float
    tail_eps: float

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.shape[0] != self.trunc_degree + 1:
            raise ValueError(
                f"coeffs must be a vector of length trunc_degree+1 = {self.trunc_degree + 1}, got shape {c.shape}"
            )
        # tail_eps == 0 marks an exact polynomial (no discarded random tail),
        # for which the truncation invariants are vacuous
        if self.tail_eps > 0:
            if self.trunc_degree < math.floor(self.valid_radius**2):
                raise ValueError(
                    f"trunc_degree {self.trunc_degree} omits the modal term floor(valid_radius^2) = "
                    f"{math.floor(self.valid_radius ** 2)}"
                )
            actual = tail_std(self.trunc_degree, self.valid_radius)
            if actual > self.tail_eps:
                raise ValueError(
                    f"tail std {actual:.3e} at radius {self.valid_radius} exceeds declared tail_eps {self.tail_eps:.3e}"
                )
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)


@dataclass(frozen=True)
class GafEvolution:
    """Time-ordered snapshots on a fixed grid, sharing degree and radius."""

    snapshots: tuple[GafSnapshot, ...]
    grid_step: float

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        if not snaps:
            raise ValueError("evolution needs at least one snapshot")
        m = snaps[0].trunc_degree
        r = snaps[0].valid_radius
        for a, b in zip(snaps, snaps[1:]):
            if b.trunc_degree != m or b.valid_radius != r:
                raise ValueError("snapshots must share trunc_degree and valid_radius")
            if b.time <= a.time:
                raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "snapshots", snaps)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def coefficient_matrix(self) -> np.ndarray:
        """Stacked coefficients, shape (n_times, trunc_degree + 1)."""
        return np.vstack([s.coeffs for s in self.snapshots])


def sample_snapshot(
    trunc_degree: int,
    stream: RngStream,
    time: float = 0.0,
    *,
    valid_radius: float | None = None,
    tail_eps: float = DEFAULT_TAIL_EPS,
) -> GafSnapshot:
    """Draw a snapshot with i.i.d. stationary CN(0,1) coefficients.

    ``valid_radius`` defaults to the largest disk on which the truncation tail
    stays below ``tail_eps``; passing it explicitly tightens ``tail_eps`` to
    the exact tail value at that radius.
    """
    if trunc_degree < 0:
        raise ValueError(f"trunc_degree must be nonnegative, got {trunc_degree!r}")
    coeffs = stream.standard_complex_normals(trunc_degree + 1)
    return snapshot_from_coeffs(coeffs, time, valid_radius=valid_radius, tail_eps=tail_eps)


def snapshot_from_coeffs(
    coeffs,
    time: float = 0.0,
    *,
    valid_radius: float | None = None,
    tail_eps: float = DEFAULT_TAIL_EPS,
    exact: bool = False,
) -> GafSnapshot:
    """Wrap an explicit coefficient vector as a snapshot (fixtures, tests, replay).

    ``exact=True`` marks a hand-built polynomial with no discarded tail
    (tail_eps = 0, entire-plane validity unless a radius is given).
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    trunc_degree = coeffs.shape[0] - 1
    if exact:
        return GafSnapshot(
            time=float(time),
            coeffs=coeffs,
            trunc_degree=int(trunc_degree),
            valid_radius=math.inf if valid_radius is None else float(valid_radius),
            tail_eps=0.0,
        )
    if valid_radius is None:
        valid_radius = implied_radius(trunc_degree, tail_eps)
    else:
        tail_eps = min(tail_eps, tail_std(trunc_degree, valid_radius) * (1 + 1e-12))
    return GafSnapshot(
        time=float(time),
        coeffs=coeffs,
        trunc_degree=int(trunc_degree),
        valid_radius=float(valid_radius),
        tail_eps=float(tail_eps),
    )


def evolve_snapshot(snapshot: GafSnapshot, dt: float, stream: RngStream) -> GafSnapshot:
    """Advance every coefficient by the exact transition over dt.

    Coefficient n consumes ``stream.child(n)``, so the innovations are
    independent streams and the update is exact in distribution at time+dt.
    """
    decay, scale = ou_step_coefficients(dt)
    m = snapshot.trunc_degree
    innov = np.array(
        [stream.child(n).standard_complex_normals(1)[0] for n in range(m + 1)],
        dtype=np.complex128,
    )
    coeffs = decay * snapshot.coeffs + scale * innov
    return GafSnapshot(
        time=snapshot.time + dt,
        coeffs=coeffs,
        trunc_degree=m,
        valid_radius=snapshot.valid_radius,
        tail_eps=snapshot.tail_eps,
    )


def evolve_on_grid(snapshot: GafSnapshot, horizon: float, step: float, stream: RngStream) -> GafEvolution:
    """Chain exact transitions over the grid 0, step, ..., horizon.

    Grid step k consumes ``stream.child(k)``; the input snapshot is the t=0
    entry.  The endpoint is always included (shorter final step if needed).
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step!r}")
    times = grid_times(horizon, step)
    snaps = [snapshot]
    for k, t in enumerate(times[1:], start=1):
        dt = float(t - snaps[-1].time + snapshot.time)  # grid is relative to the start
        snaps.append(evolve_snapshot(snaps[-1], dt, stream.child(k)))
    return GafEvolution(snapshots=tuple(snaps), grid_step=float(step))


def _power_terms(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Evaluate sum_n c_n z^n / sqrt(n!) for a batch of points.

    coeffs: (..., M+1); z: (K,) -> result (..., K).
    """
    m = coeffs.shape[-1] - 1
    term = np.ones_like(z, dtype=np.complex128)
    acc = np.multiply.outer(coeffs[..., 0], term)
    for n in range(m):
        term = term * z / math.sqrt(n + 1)
        acc += np.multiply.outer(coeffs[..., n + 1], term)
    return acc


def eval_snapshot(snapshot: GafSnapshot, z) -> complex | np.ndarray:
    """Value of the truncated series at z (scalar or array), |z| <= valid_radius."""
    zz = np.asarray(z, dtype=np.complex128)
    if np.any(np.abs(zz) > snapshot.valid_radius * (1 + 1e-12)):
        raise ValueError(f"|z| exceeds valid_radius {snapshot.valid_radius}")
    out = _power_terms(snapshot.coeffs, np.atleast_1d(zz).ravel())
    out = out.reshape(zz.shape) if zz.shape else out[0]
    return complex(out) if zz.shape == () else out


def deriv_coeffs(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of f' in the same sqrt-factorial basis.

    d/dz sum a_n z^n/sqrt(n!) = sum_m a_{m+1} sqrt(m+1) z^m/sqrt(m!).
    """
    m = coeffs.shape[-1] - 1
    return coeffs[..., 1:] * np.sqrt(np.arange(1, m + 1))


def eval_snapshot_deriv(snapshot: GafSnapshot, z) -> complex | np.ndarray:
    """Exact derivative of the truncated series at z."""
    zz = np.asarray(z, dtype=np.complex128)
    if np.any(np.abs(zz) > snapshot.valid_radius * (1 + 1e-12)):
        raise ValueError(f"|z| exceeds valid_radius {snapshot.valid_radius}")
    if snapshot.trunc_degree == 0:
        out = np.zeros(zz.shape, dtype=np.complex128)
        return complex(out) if zz.shape == () else out
    out = _power_terms(deriv_coeffs(snapshot.coeffs), np.atleast_1d(zz).ravel())
    out = out.reshape(zz.shape) if zz.shape else out[0]
    return complex(out) if zz.shape == () else out


def translate_evaluator(snapshot: GafSnapshot, xi: complex):
    """Evaluator of the recentered function, distributionally equal to the original.

    Returns z -> exp(-conj(xi) z - |xi|^2 / 2) * f(z + xi).  Implemented as a
    wrapped evaluator rather than a coefficient transform to avoid binomial
    recombination error.  Valid for |xi| + |z| <= valid_radius.
    """
    xi = complex(xi)
    budget = snapshot.valid_radius - abs(xi)
    if budget < 0:
        raise ValueError(f"|xi| = {abs(xi):.6g} exceeds valid_radius {snapshot.valid_radius}")
    half_norm = 0.5 * abs(xi) ** 2

    def evaluator(z):
        zz = np.asarray(z, dtype=np.complex128)
        if np.any(np.abs(zz) > budget * (1 + 1e-12)):
            raise ValueError(f"|z| exceeds translated validity radius {budget:.6g}")
        out = np.exp(-np.conj(xi) * zz - half_norm) * eval_snapshot(snapshot, zz + xi)
        return complex(out) if zz.shape == () else out

    return evaluator


def variance_at(r: float) -> float:
    """Pointwise variance of the field on the circle of radius r: e^{r^2}."""
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r!r}")
    return math.exp(r * r)
