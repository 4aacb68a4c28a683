"""1D inelastic granular gas toolkit.

A stochastic particle (DSMC) solver for the scaled kinetic equation, an
exact event-driven sticky-particle solver for the pressureless limit
dynamics, and diagnostics quantifying dissipation, single-velocity
concentration and the one-sided Lipschitz structure of the flow.
"""

from .collision import RestitutionModel, collide, energy_dissipation, restitution
from .core import (
    ConfigError,
    FunctionalParams,
    Grid,
    HydroField,
    InitSpec,
    ParticleEnsemble,
    SimConfig,
    deposit_fields,
    load_config,
    msum,
    sample_initial,
    substream,
)
from .diagnostics import (
    DecayResidual,
    HaffFit,
    Mollifier,
    chi,
    decay_residual,
    haff_fit,
    monokineticity,
    oleinik_functional,
    oleinik_sup,
    shell_trace,
    shell_trace_scan,
    wasserstein1,
)
from .dsmc import (
    DsmcState,
    DsmcTrajectory,
    StepReport,
    TimestepError,
    collision_step,
    run_dsmc,
    transport_step,
    weak_form_audit,
    weak_form_rate_estimate,
)
from .sticky import (
    ClusterState,
    CollisionEvent,
    StickyTrajectory,
    merge,
    next_event,
    run_sticky,
    to_ensemble,
)
from .cli import SweepSpec, check_suite, cli_main, run_sweep, sticky_reference

__version__ = "0.1.0"
