"""Time steppers and the method-id resolver used by the diagnostics and CLI."""

from __future__ import annotations

from ..config import DEFAULT_CONFIG, NumericsConfig
from ..retraction import Retraction
from .euler_poincare import dlp_residual, ep_step, ep_update, specialized_residual
from .newton import StageData, StepReport, fd_jacobian, solve_implicit
from .rkmk import rk4_baseline_step, rkmk_hp_step, rkmk_step
from .tableau import TABLEAUS, ButcherTableau, get_tableau
from .variational import sv_step, tableau_stepper, ve_backward_step, ve_forward_step, vprk_step

VARIATIONAL_METHODS = ("ve_forward", "ve_backward", "sv")
METHOD_PREFIXES = ("vprk", "ep", "rkmk")


def make_stepper(
    method: str,
    model,
    retraction: str = "exp",
    config: NumericsConfig = DEFAULT_CONFIG,
    tableau: ButcherTableau | None = None,
    debug_stages: bool = False,
):
    """Resolve a method id into ``step(state, h) -> (state, StepReport)``.

    Method ids: ``ve_forward``, ``ve_backward``, ``sv``, ``vprk:<tableau>``,
    ``ep:<retraction>``, ``rkmk:<tableau>`` and ``rk4``.  ``vprk:inline``
    and ``rkmk:inline`` use the ``tableau`` argument.  For ``ep`` the
    retraction named in the id overrides ``retraction``.
    """
    name, _, arg = method.partition(":")
    if name == "ep" and arg:
        retraction = arg
    retr = Retraction.from_config(retraction, model.group, config)

    if name == "rk4" and not arg:
        return lambda state, h: (rk4_baseline_step(model, h, state), StepReport())
    if name in VARIATIONAL_METHODS and not arg:
        fn = {"ve_forward": ve_forward_step, "ve_backward": ve_backward_step, "sv": sv_step}[name]
        return lambda state, h: fn(model, retr, h, state, config)
    if name == "ep":
        if not model.is_left_invariant:
            raise ValueError(f"method {method!r} needs a left-invariant model, {model.name} is not")
        return lambda state, h: ep_step(model, retr, h, state, config)
    if name in ("vprk", "rkmk"):
        if not arg:
            raise ValueError(f"method {name!r} needs a tableau name, e.g. {name}:trapezoidal")
        tab = tableau if arg == "inline" else get_tableau(arg)
        if tab is None:
            raise ValueError(f"method {method!r} needs an inline tableau")
        if name == "vprk":
            return lambda state, h: vprk_step(model, tab, retr, h, state, config, debug_stages)
        return lambda state, h: rkmk_hp_step(model, tab, retr, h, state, config)
    raise ValueError(
        f"unknown method {method!r}; expected one of ve_forward, ve_backward, sv, "
        "vprk:<tableau>, ep:<retraction>, rkmk:<tableau>, rk4"
    )


def is_variational(method: str) -> bool:
    name = method.partition(":")[0]
    return name in VARIATIONAL_METHODS or name in ("vprk", "ep")


__all__ = [
    "ButcherTableau",
    "StageData",
    "StepReport",
    "TABLEAUS",
    "dlp_residual",
    "ep_step",
    "ep_update",
    "fd_jacobian",
    "get_tableau",
    "is_variational",
    "make_stepper",
    "rk4_baseline_step",
    "rkmk_hp_step",
    "rkmk_step",
    "solve_implicit",
    "specialized_residual",
    "sv_step",
    "tableau_stepper",
    "ve_backward_step",
    "ve_forward_step",
    "vprk_step",
]
