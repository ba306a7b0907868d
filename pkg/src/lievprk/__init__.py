"""Hamilton-Pontryagin variational integrators on the matrix Lie groups SO(3) and SE(3)."""

from .config import DEFAULT_CONFIG, NumericsConfig
from .diagnostics import (
    SectionSpec,
    Trajectory,
    convergence_order,
    drift_series,
    poincare_section,
    run_method,
    simulate,
    spatial_momentum,
    symplecticity_defect,
)
from .errors import LieVPRKError, NoConvergence, OutOfDomain, ReferenceUnconverged, Singular, UnsupportedGroup
from .integrators import (
    TABLEAUS,
    ButcherTableau,
    ep_update,
    make_stepper,
    rk4_baseline_step,
    rkmk_step,
    sv_step,
    ve_backward_step,
    ve_forward_step,
    vprk_step,
)
from .lie import SE3, SO3, get_group
from .models import HeavyTopModel, RigidBodyModel, UnderwaterVehicleModel, make_model
from .retraction import Retraction
from .state import HPState, initial_state

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONFIG",
    "NumericsConfig",
    "SectionSpec",
    "Trajectory",
    "convergence_order",
    "drift_series",
    "poincare_section",
    "run_method",
    "simulate",
    "spatial_momentum",
    "symplecticity_defect",
    "LieVPRKError",
    "NoConvergence",
    "OutOfDomain",
    "ReferenceUnconverged",
    "Singular",
    "UnsupportedGroup",
    "TABLEAUS",
    "ButcherTableau",
    "ep_update",
    "make_stepper",
    "rk4_baseline_step",
    "rkmk_step",
    "sv_step",
    "ve_backward_step",
    "ve_forward_step",
    "vprk_step",
    "SE3",
    "SO3",
    "get_group",
    "HeavyTopModel",
    "RigidBodyModel",
    "UnderwaterVehicleModel",
    "make_model",
    "Retraction",
    "HPState",
    "initial_state",
]
