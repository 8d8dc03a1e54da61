"""Complex Gaussian sampling, exact Ornstein-Uhlenbeck transitions, Brownian utilities.

The mean-reverting process used throughout has stationary law CN(0,1) and
covariance E w(t) conj(w(s)) = exp(-|t-s|/2).  Its transition over a step dt
is exact (no discretization error):

    w(t+dt) = exp(-dt/2) * w(t) + sqrt(1 - exp(-dt)) * X,   X ~ CN(0,1).

All operations are pure given an explicit :class:`~gaflab.streams.RngStream`;
calling one twice with the same arguments returns bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .streams import RngStream

__all__ = [
    "OuState",
    "sample_stationary",
    "ou_transition",
    "ou_path",
    "ou_step_coefficients",
    "bm_annulus_exit_prob",
]


@dataclass(frozen=True)
class OuState:
    """One sample of the complex mean-reverting process at a given time."""

    value: complex
    time: float


def sample_stationary(stream: RngStream) -> complex:
    """Draw from the stationary law CN(0,1): Re, Im independent N(0, 1/2)."""
    return complex(stream.standard_complex_normals(1)[0])


def ou_step_coefficients(dt: float) -> tuple[float, float]:
    """Exact transition weights (decay, innovation scale) for a step of dt.

    The innovation scale uses expm1 so tiny steps keep full precision.
    """
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt!r}")
    return math.exp(-dt / 2.0), math.sqrt(-math.expm1(-dt))


def ou_transition(state: OuState, dt: float, stream: RngStream) -> OuState:
    """Advance one state by dt using the exact transition law."""
    decay, scale = ou_step_coefficients(dt)
    x = sample_stationary(stream)
    return OuState(value=decay * state.value + scale * x, time=state.time + dt)


def ou_path(
    horizon: float,
    step: float,
    stream: RngStream,
    initial: complex | None = None,
) -> list[OuState]:
    """Sample the process on the grid 0, step, 2*step, ..., horizon.

    The final time ``horizon`` is always included, via a shorter last step
    when ``horizon/step`` is not integral.  ``initial`` defaults to a
    stationary draw (consuming ``stream.child(0)``); grid step ``k`` uses
    ``stream.child(k)``.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon!r}")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step!r}")
    if initial is None:
        initial = sample_stationary(stream.child(0))
    states = [OuState(value=complex(initial), time=0.0)]
    times = grid_times(horizon, step)
    for k, t in enumerate(times[1:], start=1):
        dt = t - states[-1].time
        states.append(ou_transition(states[-1], dt, stream.child(k)))
    return states


def grid_times(horizon: float, step: float) -> np.ndarray:
    """Grid 0, step, ..., horizon with the endpoint always present."""
    if horizon == 0:
        return np.array([0.0])
    n_full = int(math.floor(horizon / step + 1e-12))
    times = np.arange(n_full + 1) * step
    if times[-1] < horizon - 1e-12 * max(1.0, horizon):
        times = np.append(times, horizon)
    else:
        times[-1] = min(times[-1], horizon)
    return times


def bm_annulus_exit_prob(r1: float, r2: float, r3: float) -> float:
    """Probability a planar Brownian motion started at radius r2 reaches
    radius r3 before radius r1.

    Closed form from the harmonicity of log|z|:
    (log r2 - log r1) / (log r3 - log r1).  Requires 0 < r1 <= r2 <= r3 with
    r1 < r3.
    """
    if not (0 < r1 <= r2 <= r3) or r1 == r3:
        raise ValueError(f"radii must satisfy 0 < r1 <= r2 <= r3 (strict span), got {(r1, r2, r3)!r}")
    return (math.log(r2) - math.log(r1)) / (math.log(r3) - math.log(r1))
