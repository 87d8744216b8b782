"""Single-shot optical qubit readout through a driven cavity.

Simulates the transmitted-photon signal of a three- or four-level emitter
coupled to a cavity mode, and converts expected photon counts into the
success probability of a Poisson threshold measurement.
"""

from .operators import (
    SpaceLayout,
    annihilation,
    creation,
    expectation,
    kron,
    transition,
)
from .lindblad import IntegratorConfig, LindbladSystem, Trajectory, evolve, evolve_many
from .models import (
    DiffusionSpec,
    PhysicalParams,
    build_four_level,
    build_three_level,
    cooperativity,
    sample_diffusion,
)
from .readout import (
    CountsPair,
    ReadoutCurve,
    analytic_counts,
    calibrate_nin,
    error_probability,
    optimal_threshold,
    ps_curve,
    success_probability,
    success_probability_general,
)

__version__ = "0.1.0"
