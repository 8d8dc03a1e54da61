"""Monte Carlo estimation of time-interval hole/overcrowding probabilities,
explicit sufficient-condition checkers, mean-reverting-process probes, and
rate fitting.

Campaign determinism
--------------------
Replicate ``k`` of a campaign draws exclusively from ``stream.child(k)``
(initial state first, then innovations in grid order, fetched in fixed-size
blocks).  Totals are integer sums over replicates, so results are identical
for a fixed (seed, spec, n) regardless of chunking, worker count, or
scheduling, and partial campaigns over disjoint replicate ranges merge into
the same report.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .errors import GaflabError, StarvationError, ZeroNearContourError
from .gaf import GafEvolution, truncation_degree
from .kernel import grid_times, ou_step_coefficients
from .streams import RngStream
from .toymodels import MODELS, LatticeSpec
from .zeros import winding_count_batch, CONTOUR_NUDGE

__all__ = [
    "EventSpec",
    "EstimatorReport",
    "RateFit",
    "estimate_event",
    "estimate_event_sweep",
    "merge_reports",
    "check_hole_conditions",
    "check_crowd_conditions",
    "hole_condition_bounds",
    "crowd_condition_bounds",
    "sample_hole_conditioned_evolution",
    "sample_crowd_conditioned_evolution",
    "hole_boundary_fixtures",
    "ou_lemma_probe",
    "ou_lemma_probe_detailed",
    "fit_rate",
]

log = logging.getLogger(__name__)

WILSON_Z = 1.959963984540054  # two-sided 95%
DEFAULT_TAIL_EPS = 1e-8
_BLOCK_STEPS = 64
_CHUNK = 512
_SQRT_HALF = math.sqrt(0.5)

EVENT_KINDS = ("hole", "crowd")
EVENT_MODELS = ("gaf",) + MODELS


@dataclass(frozen=True)
class EventSpec:
    """A time-interval disk-occupancy event for one model."""

    kind: str           # "hole" or "crowd"
    model: str          # "gaf" or a toy model name
    radius: float
    horizon: float
    grid_step: float
    min_count: int | None = None  # crowd only

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"kind must be one of {EVENT_KINDS}, got {self.kind!r}")
        if self.model not in EVENT_MODELS:
            raise ValueError(f"model must be one of {EVENT_MODELS}, got {self.model!r}")
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius!r}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon!r}")
        if self.grid_step <= 0:
            raise ValueError(f"grid_step must be positive, got {self.grid_step!r}")
        if self.kind == "crowd":
            if self.min_count is None or self.min_count < 0:
                raise ValueError(f"crowd events need min_count >= 0, got {self.min_count!r}")


@dataclass(frozen=True)
class EstimatorReport:
    """Event-probability estimate with a 95% Wilson interval."""

    spec: EventSpec
    n_samples: int
    successes: int
    p_hat: float
    ci_low: float
    ci_high: float
    log_p_hat: float
    seed_root: int
    one_sided: bool = False  # zero successes: log_p_hat is the CI upper bound

    def __post_init__(self):
        if not 0 <= self.successes <= self.n_samples:
            raise ValueError("successes must lie in [0, n_samples]")
        if not self.ci_low <= self.p_hat <= self.ci_high:
            raise ValueError("Wilson interval must bracket p_hat")


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log-probability against the horizon."""

    T_values: tuple[float, ...]
    log_p: tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float

    def __post_init__(self):
        if len(self.T_values) < 3:
            raise ValueError("a rate fit needs at least 3 points")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError(f"r_squared must lie in [0,1], got {self.r_squared!r}")


def wilson_interval(successes: int, n: int, z: float = WILSON_Z) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = successes / n
    denom = n + z * z
    center = (successes + z * z / 2.0) / denom
    half = z * math.sqrt(successes * (n - successes) / n + z * z / 4.0) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _make_report(spec: EventSpec, n: int, successes: int, seed_root: int) -> EstimatorReport:
    lo, hi = wilson_interval(successes, n)
    p = successes / n
    if successes == 0:
        return EstimatorReport(
            spec=spec, n_samples=n, successes=0, p_hat=0.0, ci_low=lo, ci_high=hi,
            log_p_hat=math.log(hi), seed_root=seed_root, one_sided=True,
        )
    return EstimatorReport(
        spec=spec, n_samples=n, successes=successes, p_hat=p, ci_low=lo, ci_high=hi,
        log_p_hat=math.log(p), seed_root=seed_root,
    )


def merge_reports(reports: list[EstimatorReport]) -> EstimatorReport:
    """Combine partial reports from disjoint replicate ranges of one campaign."""
    if not reports:
        raise ValueError("nothing to merge")
    first = reports[0]
    for r in reports[1:]:
        if r.spec != first.spec or r.seed_root != first.seed_root:
            raise ValueError("reports to merge must share spec and seed_root")
    n = sum(r.n_samples for r in reports)
    s = sum(r.successes for r in reports)
    return _make_report(first.spec, n, s, first.seed_root)


# ---------------------------------------------------------------------------
# replicate-stream plumbing


class _ReplicateDraws:
    """Sequential CN(0,1) draws for one replicate, fetched in blocks."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, stream: RngStream):
        self._gen = stream.generator()
        self._buf = np.empty(0, dtype=np.complex128)
        self._pos = 0

    def take(self, n: int) -> np.ndarray:
        if self._pos + n > self._buf.shape[0]:
            fetch = max(n, _BLOCK_STEPS * max(n, 1))
            x = self._gen.standard_normal(2 * fetch) * _SQRT_HALF
            fresh = x[0::2] + 1j * x[1::2]
            self._buf = np.concatenate([self._buf[self._pos:], fresh])
            self._pos = 0
        out = self._buf[self._pos : self._pos + n]
        self._pos += n
        return out


def _robust_counts(coeffs: np.ndarray, radius: float) -> np.ndarray:
    """Winding counts for rows of coeffs, nudging the radius for stuck rows."""
    counts, ok = winding_count_batch(coeffs, radius)
    if not np.all(ok):
        for factor in (1.0 - CONTOUR_NUDGE, 1.0 + CONTOUR_NUDGE, 1.0 - 2 * CONTOUR_NUDGE):
            bad = ~ok
            c2, ok2 = winding_count_batch(coeffs[bad], radius * factor)
            idx = np.nonzero(bad)[0]
            counts[idx[ok2]] = c2[ok2]
            ok[idx[ok2]] = True
            if np.all(ok):
                break
        if not np.all(ok):
            raise ZeroNearContourError(radius, 2**16)
    return counts


def _gaf_trunc_degree(spec: EventSpec, tail_eps: float) -> int:
    m = truncation_degree(spec.radius, tail_eps)
    if spec.kind == "crowd":
        # the disk must be able to hold min_count zeros of the truncation
        m = max(m, spec.min_count + int(math.ceil(4.0 * spec.radius**2)) + 8)
    return m


def _gaf_chunk_survival(
    spec: EventSpec,
    stream: RngStream,
    k0: int,
    k1: int,
    trunc_degree: int,
    check_idx: np.ndarray,
    times: np.ndarray,
) -> np.ndarray:
    """Successes per check index from replicates [k0, k1)."""
    m1 = trunc_degree + 1
    want = spec.min_count if spec.kind == "crowd" else 0

    def satisfied(counts: np.ndarray) -> np.ndarray:
        return counts >= want if spec.kind == "crowd" else counts == 0

    draws = np.array([_ReplicateDraws(stream.child(k)) for k in range(k0, k1)], dtype=object)
    coeffs = np.vstack([d.take(m1) for d in draws])
    n_steps = times.shape[0]
    fail_step = np.full(k1 - k0, n_steps, dtype=np.int64)

    counts = _robust_counts(coeffs, spec.radius)
    good = satisfied(counts)
    fail_step[~good] = 0
    alive_idx = np.nonzero(good)[0]
    coeffs, draws = coeffs[good], draws[good]

    j = 1
    while j < n_steps and alive_idx.size:
        block = min(_BLOCK_STEPS, n_steps - j)
        buf = np.stack([d.take(block * m1).reshape(block, m1) for d in draws])
        for b in range(block):
            decay, scale = ou_step_coefficients(float(times[j] - times[j - 1]))
            coeffs = decay * coeffs + scale * buf[:, b, :]
            counts = _robust_counts(coeffs, spec.radius)
            good = satisfied(counts)
            if not good.all():
                fail_step[alive_idx[~good]] = j
                coeffs, draws, buf, alive_idx = coeffs[good], draws[good], buf[good], alive_idx[good]
            j += 1
            if not alive_idx.size:
                break

    return np.array([(fail_step > idx).sum() for idx in check_idx], dtype=np.int64)


def _toy_chunk_survival(
    spec: EventSpec,
    stream: RngStream,
    k0: int,
    k1: int,
    check_idx: np.ndarray,
    times: np.ndarray,
) -> np.ndarray:
    lattice = LatticeSpec(
        model=spec.model,
        window_radius=spec.radius,
        horizon=spec.horizon,
        grid_step=spec.grid_step,
    )
    want = spec.min_count if spec.kind == "crowd" else 0
    n_steps = times.shape[0]
    successes = np.zeros(check_idx.shape[0], dtype=np.int64)
    from .toymodels import toy_path_arrays  # local import avoids cycle at module load

    for k in range(k0, k1):
        _, _, positions = toy_path_arrays(lattice, stream.child(k))
        inside = np.abs(positions) <= spec.radius
        counts = inside.sum(axis=1)
        ok = counts >= want if spec.kind == "crowd" else counts == 0
        bad = np.nonzero(~ok)[0]
        fail = int(bad[0]) if bad.size else n_steps
        successes += fail > check_idx
    return successes


def _run_campaign(
    spec: EventSpec,
    n: int,
    stream: RngStream,
    check_idx: np.ndarray,
    *,
    start_index: int = 0,
    tail_eps: float = DEFAULT_TAIL_EPS,
    threads: int | None = None,
) -> np.ndarray:
    times = grid_times(spec.horizon, spec.grid_step)
    if spec.model == "gaf":
        m = _gaf_trunc_degree(spec, tail_eps)
        task = lambda k0, k1: _gaf_chunk_survival(spec, stream, k0, k1, m, check_idx, times)
    else:
        task = lambda k0, k1: _toy_chunk_survival(spec, stream, k0, k1, check_idx, times)
    edges = list(range(start_index, start_index + n, _CHUNK)) + [start_index + n]
    pairs = list(zip(edges[:-1], edges[1:]))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda p: task(*p), pairs))
    else:
        parts = [task(*p) for p in pairs]
    return np.sum(parts, axis=0)


def estimate_event(
    spec: EventSpec,
    n: int,
    stream: RngStream,
    *,
    start_index: int = 0,
    tail_eps: float = DEFAULT_TAIL_EPS,
    threads: int | None = None,
) -> EstimatorReport:
    """Monte Carlo estimate of P(event holds at every grid time in [0, horizon]).

    For the analytic-function model each replicate samples a truncated
    snapshot, advances it exactly on the grid, and checks the winding count at
    every grid time; toy models use their occupancy indicators.  Replicate
    ``k`` draws only from ``stream.child(start_index + k)``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    if spec.kind == "crowd" and spec.min_count == 0:
        return _make_report(spec, n, n, stream.root_seed)
    times = grid_times(spec.horizon, spec.grid_step)
    check_idx = np.array([times.shape[0] - 1])
    successes = _run_campaign(
        spec, n, stream, check_idx, start_index=start_index, tail_eps=tail_eps, threads=threads
    )
    return _make_report(spec, n, int(successes[0]), stream.root_seed)


def estimate_event_sweep(
    spec: EventSpec,
    horizons: list[float],
    n: int,
    stream: RngStream,
    *,
    start_index: int = 0,
    tail_eps: float = DEFAULT_TAIL_EPS,
    threads: int | None = None,
) -> list[EstimatorReport]:
    """One campaign, reported at several horizons (shared replicate paths).

    Every requested horizon must sit on the grid of ``spec.grid_step``.  The
    event is monotone in the horizon, so a single pass to max(horizons) yields
    a valid estimate at each intermediate horizon.
    """
    if not horizons:
        raise ValueError("horizons must be nonempty")
    t_max = max(horizons)
    full = replace(spec, horizon=float(t_max))
    times = grid_times(full.horizon, full.grid_step)
    check_idx = []
    for t in horizons:
        j = int(np.argmin(np.abs(times - t)))
        if abs(times[j] - t) > 1e-9 * max(1.0, t_max):
            raise ValueError(f"horizon {t!r} is not on the grid with step {spec.grid_step!r}")
        check_idx.append(j)
    check_idx = np.array(check_idx)
    successes = _run_campaign(
        full, n, stream, check_idx, start_index=start_index, tail_eps=tail_eps, threads=threads
    )
    return [
        _make_report(replace(spec, horizon=float(t)), n, int(s), stream.root_seed)
        for t, s in zip(horizons, successes)
    ]


# ---------------------------------------------------------------------------
# explicit sufficient-condition checkers


def hole_condition_bounds(radius: float) -> tuple[int, float, float]:
    """(k_max, a0_floor, ak_ceiling) for the no-zeros sufficient conditions.

    Conditions: |a_0(t)| >= 1 + b, |a_k(t)| <= 1/b for 1 <= k <= 48 R^2, and
    |a_k(t)| <= 2^k beyond, where b = exp((R^2 + log 48R^2)/4).  Together they
    force |f| > 0 on the whole disk of the given radius.
    """
    r2 = radius * radius
    b = math.exp((r2 + math.log(48.0 * r2)) / 4.0)
    return int(math.floor(48.0 * r2)), 1.0 + b, 1.0 / b


def check_hole_conditions(path: GafEvolution, radius: float) -> bool:
    """True iff the three hole-forcing coefficient bounds hold at every grid time."""
    k_max, a0_floor, ak_ceil = hole_condition_bounds(radius)
    m = path.snapshots[0].trunc_degree
    if m < k_max:
        raise ValueError(
            f"insufficient truncation degree: checker at radius {radius} needs trunc_degree >= {k_max}, got {m}"
        )
    coeffs = path.coefficient_matrix()
    mags = np.abs(coeffs)
    cond_i = bool(np.all(mags[:, 0] >= a0_floor))
    cond_ii = bool(np.all(mags[:, 1 : k_max + 1] <= ak_ceil))
    ks = np.arange(k_max + 1, m + 1, dtype=float)
    cond_iii = bool(np.all(mags[:, k_max + 1 :] <= 2.0**ks)) if ks.size else True
    return cond_i and cond_ii and cond_iii


def crowd_condition_bounds(radius: float, min_count: int) -> tuple[float, float]:
    """(low_ceiling, pivot_floor) for the at-least-N-zeros sufficient conditions.

    Conditions: |a_k| < R^N / (e^{R^2} N N!)^{1/4} for k < N,
    |a_N| >= 2 (e^{R^2} N N!)^{1/4}, and |a_k| < 2^{k-N} for k > N; the pivot
    term then dominates the rest of the series on |z| = R, so the zero count
    inside matches the pivot monomial's.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1 for the overcrowding construction")
    quarter_log = (radius * radius + math.log(min_count) + float(gammaln(min_count + 1))) / 4.0
    low_ceiling = math.exp(min_count * math.log(radius) - quarter_log)
    pivot_floor = 2.0 * math.exp(quarter_log)
    return low_ceiling, pivot_floor


def check_crowd_conditions(path: GafEvolution, radius: float, min_count: int) -> bool:
    """True iff the three overcrowding coefficient bounds hold at every grid time.

    Valid for min_count + 1 >= 16 R^2 (the geometric tail bound needs
    2R/sqrt(N+1) <= 1/2); smaller min_count raises.
    """
    if min_count + 1 < 16.0 * radius * radius:
        raise ValueError(
            f"min_count {min_count} below validity threshold 16 R^2 - 1 = {16.0 * radius * radius - 1:.6g}"
        )
    m = path.snapshots[0].trunc_degree
    needed = min_count + int(math.ceil(4.0 * radius * radius)) + 8
    if m < needed:
        raise ValueError(
            f"insufficient truncation degree: checker needs trunc_degree >= {needed}, got {m}"
        )
    low_ceiling, pivot_floor = crowd_condition_bounds(radius, min_count)
    coeffs = path.coefficient_matrix()
    mags = np.abs(coeffs)
    cond_i = bool(np.all(mags[:, :min_count] < low_ceiling))
    cond_ii = bool(np.all(mags[:, min_count] >= pivot_floor))
    ks = np.arange(min_count + 1, m + 1, dtype=float)
    cond_iii = bool(np.all(mags[:, min_count + 1 :] < 2.0 ** (ks - min_count))) if ks.size else True
    return cond_i and cond_ii and cond_iii


# ---------------------------------------------------------------------------
# conditioned coefficient paths for the implication tests
#
# The no-zeros / at-least-N-zeros implications are deterministic per-path
# claims, so any path inside the coefficient box is a valid test vector.  The
# stationary law puts essentially no mass in the pivot boxes (|a_0| >= 1 + b
# has probability exp(-(1+b)^2)), so rejection sampling uses proposals
# recentered or rescaled into each box and rejects the rare escapes at the
# grid times.


def _ou_grid_path(gen: np.random.Generator, times: np.ndarray) -> np.ndarray:
    """One stationary mean-reverting path sampled on the grid."""
    x = gen.standard_normal(2 * times.shape[0]) * _SQRT_HALF
    innov = x[0::2] + 1j * x[1::2]
    path = np.empty(times.shape[0], dtype=np.complex128)
    path[0] = innov[0]
    for j in range(1, times.shape[0]):
        decay, scale = ou_step_coefficients(float(times[j] - times[j - 1]))
        path[j] = decay * path[j - 1] + scale * innov[j]
    return path


_MAX_REJECTION_TRIES = 10_000


def _path_above(gen: np.random.Generator, times: np.ndarray, floor: float, headroom: float = 3.0) -> np.ndarray:
    """Path with |value| >= floor at every grid time (recentered proposal)."""
    for _ in range(_MAX_REJECTION_TRIES):
        phase = math.tau * gen.uniform()
        cand = (floor + headroom) * np.exp(1j * phase) + _ou_grid_path(gen, times)
        if np.min(np.abs(cand)) >= floor:
            return cand
    raise GaflabError(f"rejection sampling for |a| >= {floor} did not accept")


def _path_below(gen: np.random.Generator, times: np.ndarray, ceiling: float, strict: bool) -> np.ndarray:
    """Path with |value| <= ceiling (or <) at every grid time (rescaled proposal)."""
    scale = 1.0 if ceiling >= 4.0 else ceiling / 3.0
    for _ in range(_MAX_REJECTION_TRIES):
        cand = scale * _ou_grid_path(gen, times)
        top = np.max(np.abs(cand))
        if top < ceiling or (not strict and top <= ceiling):
            return cand
    raise GaflabError(f"rejection sampling for |a| < {ceiling} did not accept")


def _evolution_from_paths(paths: np.ndarray, times: np.ndarray, radius: float, step: float) -> GafEvolution:
    from .gaf import snapshot_from_coeffs  # local import keeps module load acyclic

    snaps = tuple(
        snapshot_from_coeffs(paths[:, j], time=float(t), valid_radius=radius)
        for j, t in enumerate(times)
    )
    return GafEvolution(snapshots=snaps, grid_step=float(step))


def sample_hole_conditioned_evolution(
    radius: float,
    horizon: float,
    step: float,
    stream: RngStream,
) -> GafEvolution:
    """Coefficient paths satisfying the hole-forcing bounds at every grid time.

    Coefficient k draws from ``stream.child(k)``.  The returned evolution
    passes :func:`check_hole_conditions` by construction; the point of
    sampling it is to verify the implication (zero winding count throughout)
    on random in-box paths.
    """
    k_max, a0_floor, ak_ceil = hole_condition_bounds(radius)
    times = grid_times(horizon, step)
    m = k_max + 8
    paths = np.empty((m + 1, times.shape[0]), dtype=np.complex128)
    paths[0] = _path_above(stream.child(0).generator(), times, a0_floor)
    for k in range(1, k_max + 1):
        paths[k] = _path_below(stream.child(k).generator(), times, ak_ceil, strict=False)
    for k in range(k_max + 1, m + 1):
        paths[k] = _path_below(stream.child(k).generator(), times, 2.0**k, strict=False)
    return _evolution_from_paths(paths, times, radius, step)


def sample_crowd_conditioned_evolution(
    radius: float,
    min_count: int,
    horizon: float,
    step: float,
    stream: RngStream,
) -> GafEvolution:
    """Coefficient paths satisfying the overcrowding bounds at every grid time."""
    low_ceiling, pivot_floor = crowd_condition_bounds(radius, min_count)
    times = grid_times(horizon, step)
    m = min_count + int(math.ceil(4.0 * radius * radius)) + 8
    paths = np.empty((m + 1, times.shape[0]), dtype=np.complex128)
    for k in range(min_count):
        paths[k] = _path_below(stream.child(k).generator(), times, low_ceiling, strict=True)
    paths[min_count] = _path_above(stream.child(min_count).generator(), times, pivot_floor, headroom=4.0)
    for k in range(min_count + 1, m + 1):
        paths[k] = _path_below(stream.child(k).generator(), times, 2.0 ** (k - min_count), strict=True)
    return _evolution_from_paths(paths, times, radius, step)


def hole_boundary_fixtures(radius: float, horizon: float, step: float) -> list[GafEvolution]:
    """Three deterministic paths hugging the hole-condition boundary.

    Every coefficient sits exactly at its bound (worst allowed magnitude);
    the three fixtures vary the phase alignment, including the maximally
    adversarial all-positive-real case.
    """
    k_max, a0_floor, ak_ceil = hole_condition_bounds(radius)
    times = grid_times(horizon, step)
    n_t = times.shape[0]
    m = k_max + 8
    hug = 1e-12  # relative clearance so unit-phase roundoff cannot cross the bound

    def build(a0_phase, ak_phase) -> GafEvolution:
        """a0_phase(j) and ak_phase(k, j) are unit-modulus phase factors."""
        paths = np.empty((m + 1, n_t), dtype=np.complex128)
        js = np.arange(n_t)
        paths[0] = a0_floor * (1.0 + hug) * a0_phase(js)
        for k in range(1, m + 1):
            mag = ak_ceil if k <= k_max else 2.0**k
            paths[k] = mag * (1.0 - hug) * ak_phase(k, js)
        return _evolution_from_paths(paths, times, radius, step)

    # all bounds aligned on the positive real axis against a negative pivot
    worst = build(lambda j: np.full(j.shape, -1.0 + 0j), lambda k, j: np.ones(j.shape, dtype=complex))
    # phases rotating in time, staggered across coefficients
    rotating = build(lambda j: np.exp(0.2j * j), lambda k, j: np.exp(1j * (0.33 * j + 0.9 * k)))
    # signs alternating across coefficient index, pivot on the imaginary axis
    alternating = build(lambda j: np.full(j.shape, 1j), lambda k, j: np.full(j.shape, complex((-1.0) ** k)))
    return [worst, rotating, alternating]


# ---------------------------------------------------------------------------
# mean-reverting-process survival probes (the four deviation lemmas)

LEMMA_KINDS = ("small_ball", "large_ball", "near_point", "half_plane")


def _lemma_condition(lemma: str, radius: float, rho: float | None):
    if lemma == "small_ball":
        return lambda w: np.abs(w) < radius
    if lemma == "large_ball":
        return lambda w: np.abs(w) > radius
    if lemma == "near_point":
        if rho is None or rho <= 0:
            raise ValueError("near_point needs a positive rho")
        return lambda w: np.abs(w - radius) < rho
    if lemma == "half_plane":
        return lambda w: w.real < radius
    raise ValueError(f"lemma must be one of {LEMMA_KINDS}, got {lemma!r}")


def _ou_chunk_survival(cond, stream: RngStream, k0: int, k1: int, check_idx: np.ndarray, times: np.ndarray) -> np.ndarray:
    draws = np.array([_ReplicateDraws(stream.child(k)) for k in range(k0, k1)], dtype=object)
    w = np.array([d.take(1)[0] for d in draws])
    n_steps = times.shape[0]
    fail_step = np.full(k1 - k0, n_steps, dtype=np.int64)
    good = cond(w)
    fail_step[~good] = 0
    alive_idx = np.nonzero(good)[0]
    w, draws = w[good], draws[good]

    j = 1
    while j < n_steps and alive_idx.size:
        block = min(_BLOCK_STEPS, n_steps - j)
        buf = np.stack([d.take(block) for d in draws])
        for b in range(block):
            decay, scale = ou_step_coefficients(float(times[j] - times[j - 1]))
            w = decay * w + scale * buf[:, b]
            good = cond(w)
            if not good.all():
                fail_step[alive_idx[~good]] = j
                w, draws, buf, alive_idx = w[good], draws[good], buf[good], alive_idx[good]
            j += 1
            if not alive_idx.size:
                break

    return np.array([(fail_step > idx).sum() for idx in check_idx], dtype=np.int64)


def ou_lemma_probe_detailed(
    lemma: str,
    radius: float,
    t_grid: list[float],
    step: float,
    n: int,
    stream: RngStream,
    *,
    rho: float | None = None,
    threads: int | None = None,
    min_successes: int = 20,
) -> tuple[RateFit, list[dict]]:
    """Survival probabilities of one lemma event over a horizon sweep, plus fit.

    A single campaign is run to max(t_grid); the event is monotone in the
    horizon, so each replicate's first exit time yields its indicator at every
    requested horizon.  Horizons whose success count ends below
    ``min_successes`` are dropped from the fit (starvation guard), with a
    warning.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    t_grid = sorted(float(t) for t in t_grid)
    if len(t_grid) < 3:
        raise ValueError("t_grid needs at least 3 horizons")
    if t_grid[0] < 0:
        raise ValueError("horizons must be nonnegative")
    cond = _lemma_condition(lemma, radius, rho)
    times = grid_times(t_grid[-1], step)
    check_idx = []
    for t in t_grid:
        j = int(np.argmin(np.abs(times - t)))
        if abs(times[j] - t) > 1e-9 * max(1.0, t_grid[-1]):
            raise ValueError(f"horizon {t!r} is not on the grid with step {step!r}")
        check_idx.append(j)
    check_idx = np.array(check_idx)

    edges = list(range(0, n, _CHUNK)) + [n]
    pairs = list(zip(edges[:-1], edges[1:]))
    task = lambda p: _ou_chunk_survival(cond, stream, p[0], p[1], check_idx, times)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(task, pairs))
    else:
        parts = [task(p) for p in pairs]
    successes = np.sum(parts, axis=0)

    points = []
    for t, s in zip(t_grid, successes):
        lo, hi = wilson_interval(int(s), n)
        points.append(
            {
                "T": float(t),
                "n_samples": int(n),
                "successes": int(s),
                "p_hat": int(s) / n,
                "ci_low": lo,
                "ci_high": hi,
            }
        )

    kept = list(points)
    while kept and kept[-1]["successes"] < min_successes:
        log.warning(
            "ou_lemma_probe: dropping starved horizon T=%s (%d successes < %d)",
            kept[-1]["T"], kept[-1]["successes"], min_successes,
        )
        kept.pop()
    usable = [p for p in kept if p["successes"] > 0]
    if len(usable) < 3:
        raise StarvationError(
            f"only {len(usable)} usable horizons after starvation trimming; extend n or shrink t_grid"
        )
    fit = _ols_rate(
        np.array([p["T"] for p in usable]),
        np.array([math.log(p["p_hat"]) for p in usable]),
    )
    return fit, points


def ou_lemma_probe(
    lemma: str,
    radius: float,
    t_grid: list[float],
    step: float,
    n: int,
    stream: RngStream,
    *,
    rho: float | None = None,
    threads: int | None = None,
) -> RateFit:
    """Fitted log-survival slope for one of the four lemma events."""
    fit, _ = ou_lemma_probe_detailed(lemma, radius, t_grid, step, n, stream, rho=rho, threads=threads)
    return fit


# ---------------------------------------------------------------------------
# rate fitting


def _ols_rate(t: np.ndarray, log_p: np.ndarray) -> RateFit:
    slope, intercept = np.polyfit(t, log_p, 1)
    resid = log_p - (slope * t + intercept)
    ss_tot = float(np.sum((log_p - log_p.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(
        T_values=tuple(float(x) for x in t),
        log_p=tuple(float(x) for x in log_p),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=min(1.0, max(0.0, r2)),
    )


def fit_rate(reports: list[EstimatorReport]) -> RateFit:
    """Ordinary least squares of log p_hat against the horizon.

    Reports must share everything but the horizon; zero-success reports are
    unusable (their log is one-sided) and are dropped.  Fewer than 3 usable
    points is an error.
    """
    if not reports:
        raise ValueError("no reports to fit")
    base = replace(reports[0].spec, horizon=0.0)
    for r in reports:
        if replace(r.spec, horizon=0.0) != base:
            raise ValueError("reports must share spec fields other than the horizon")
    usable = [r for r in reports if r.successes > 0]
    if len(usable) < 3:
        raise ValueError(f"fewer than 3 usable points ({len(usable)}); cannot fit a rate")
    t = np.array([r.spec.horizon for r in usable])
    log_p = np.array([r.log_p_hat for r in usable])
    return _ols_rate(t, log_p)
