"""Numerical constants shared by the integrators and diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

RETRACTION_KINDS = ("exp", "cayley", "skew_sqrt")


def _default_guards() -> dict:
    return {"exp": math.pi - 0.1, "cayley": 10.0, "skew_sqrt": 0.99}


@dataclass(frozen=True)
class NumericsConfig:
    """Solver tolerances, finite-difference steps and retraction domain guards.

    ``domain_guards`` bounds the norm of the (rotational part of the)
    algebra argument ``h * xi`` that a stepper may feed into each
    retraction; see :func:`lievprk.retraction.Retraction.check_domain`.
    """

    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    jacobian_fd_step: float = 1e-7
    fd_step: float = 1e-6
    chart_fd_step: float = 1e-5
    domain_guards: dict = field(default_factory=_default_guards)
    series_q: int = 8

    def replace(self, **changes) -> "NumericsConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["domain_guards"] = dict(self.domain_guards)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NumericsConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown numerics keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "domain_guards" in kwargs:
            guards = _default_guards()
            guards.update(kwargs["domain_guards"])
            kwargs["domain_guards"] = guards
        for name in ("newton_max_iter", "series_q"):
            if name in kwargs and isinstance(kwargs[name], float) and kwargs[name].is_integer():
                kwargs[name] = int(kwargs[name])
        return cls(**kwargs)


DEFAULT_CONFIG = NumericsConfig()


def validate(config: NumericsConfig) -> list[str]:
    """Return a list of violated invariants; an empty list means the config is valid."""
    errors = []
    for name in ("newton_tol", "jacobian_fd_step", "fd_step", "chart_fd_step"):
        value = getattr(config, name)
        if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
            errors.append(f"{name} must be a positive finite number (got {value!r})")
    if not isinstance(config.newton_max_iter, int) or config.newton_max_iter < 1:
        errors.append(f"newton_max_iter must be an integer >= 1 (got {config.newton_max_iter!r})")
    if not isinstance(config.series_q, int) or config.series_q < 0:
        errors.append(f"series_q must be an integer >= 0 (got {config.series_q!r})")
    elif config.series_q > 15:
        errors.append(f"series_q must be <= 15, the size of the Bernoulli table (got {config.series_q})")
    for kind in RETRACTION_KINDS:
        value = config.domain_guards.get(kind)
        if value is None:
            errors.append(f"domain_guards.{kind} is missing")
        elif not value > 0:
            errors.append(f"domain_guards.{kind} must be positive (got {value!r})")
    extra = set(config.domain_guards) - set(RETRACTION_KINDS)
    for kind in sorted(extra):
        errors.append(f"domain_guards.{kind} is not a retraction kind")
    return errors
