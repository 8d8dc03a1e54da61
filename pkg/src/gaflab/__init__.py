"""gaflab: simulation and verification lab for zeros of a planar Gaussian
analytic function with diffusing coefficients, alongside three comparison
point processes (Brownian Poisson points, perturbed square lattice, triangular
cluster lattice).

Core surfaces: deterministic random streams, exact mean-reverting coefficient
evolution, winding-number and companion-matrix zero extraction, Jensen-formula
consistency checks, single-point modulus reconstruction from zeros, explicit
hole/overcrowding sufficient-condition checkers, and Monte Carlo estimation of
time-interval rare-event probabilities with rate fitting.
"""

from .errors import (
    CountMismatchError,
    DegenerateInputError,
    GaflabError,
    StarvationError,
    ZeroNearContourError,
)
from .estimators import (
    EstimatorReport,
    EventSpec,
    RateFit,
    check_crowd_conditions,
    check_hole_conditions,
    crowd_condition_bounds,
    estimate_event,
    estimate_event_sweep,
    fit_rate,
    hole_boundary_fixtures,
    hole_condition_bounds,
    merge_reports,
    ou_lemma_probe,
    ou_lemma_probe_detailed,
    sample_crowd_conditioned_evolution,
    sample_hole_conditioned_evolution,
    wilson_interval,
)
from .gaf import (
    GafEvolution,
    GafSnapshot,
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
from .kernel import OuState, bm_annulus_exit_prob, ou_path, ou_transition, sample_stationary
from .streams import RngStream
from .toymodels import (
    LatticeSpec,
    PointConfiguration,
    count_in_disk,
    crowd_path_indicator,
    hole_path_indicator,
    simulate_toy,
)
from .zeros import (
    ZeroSet,
    count_zeros_winding,
    find_zeros,
    jensen_residual,
    reconstruct_modulus,
    snapshot_zero_count,
)

__version__ = "0.1.0"
