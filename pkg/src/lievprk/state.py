"""Phase-space state carried between steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class HPState:
    """A point ``(g, xi, mu)`` at time ``t``.

    ``mu`` is the momentum at the node ``g`` and ``xi`` the velocity obtained
    from it by the inverse Legendre transform, so states built with
    :func:`initial_state` and returned by the steppers satisfy
    ``mu == dell_dxi(g, xi)``.
    """

    g: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    t: float = 0.0

    def legendre_defect(self, model) -> float:
        return float(np.max(np.abs(self.mu - model.dell_dxi(self.g, self.xi)), initial=0.0))

    def replace(self, **changes) -> "HPState":
        values = {"g": self.g, "xi": self.xi, "mu": self.mu, "t": self.t}
        values.update(changes)
        return HPState(**values)


def initial_state(model, g, xi, t: float = 0.0) -> HPState:
    """Build a state from a configuration and velocity; ``mu`` comes from the Legendre transform."""
    g = np.array(g, dtype=float)
    xi = np.array(xi, dtype=float)
    model.group._check_matrix(g)
    model.group._check_coords(xi)
    mu = np.asarray(model.dell_dxi(g, xi), dtype=float)
    return HPState(g, xi, mu, float(t))


def state_from_momentum(model, g, mu, t: float = 0.0) -> HPState:
    g = np.array(g, dtype=float)
    mu = np.array(mu, dtype=float)
    return HPState(g, np.asarray(model.legendre_inv(g, mu), dtype=float), mu, float(t))
