"""Newton iteration with a finite-difference Jacobian."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import NoConvergence


@dataclass
class StageData:
    """Internal stage quantities of one VPRK step (rows are stages).

    ``mu`` holds the internal multipliers that the final scheme eliminates;
    they are rebuilt from ``b_i mu_ext + sum_j a_ji mu_j = b_i M_i``.
    """

    Theta: np.ndarray
    Xi: np.ndarray
    M: np.ndarray
    mu: np.ndarray


@dataclass
class StepReport:
    newton_iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    # velocity and momentum of the interval just stepped over
    xi_interval: Optional[np.ndarray] = field(default=None, repr=False)
    mu_interval: Optional[np.ndarray] = field(default=None, repr=False)
    stages: Optional[StageData] = field(default=None, repr=False)


def fd_jacobian(residual_fn, x, fd_step=1e-7, vectorized=False):
    """Central-difference Jacobian with perturbation ``fd_step * (1 + |x|)``."""
    n = x.size
    delta = fd_step * (1.0 + np.sqrt(x @ x))
    steps = delta * np.eye(n)
    if vectorized:
        values = residual_fn(np.concatenate([x + steps, x - steps]))
        return (values[:n] - values[n:]).T / (2 * delta)
    jac = np.empty((n, n))
    for k in range(n):
        jac[:, k] = (residual_fn(x + steps[k]) - residual_fn(x - steps[k])) / (2 * delta)
    return jac


def solve_implicit(
    residual_fn: Callable,
    initial_guess,
    tol: float = 1e-12,
    max_iter: int = 50,
    fd_step: float = 1e-7,
    vectorized: bool = False,
    refine: bool = True,
):
    """Solve ``residual_fn(x) = 0`` by Newton's method.

    Converged when ``max|residual| <= tol``.  With ``refine`` one more
    correction reusing the last Jacobian is applied after convergence.  It
    costs one linear solve, is not re-checked, and keeps per-step solver
    error from accumulating in long runs; the reported residual is that of
    the last checked iterate.  With ``vectorized=True`` the
    residual is called on a ``(m, n)`` stack of points and must return the
    ``(m, n)`` stack of residuals; the Jacobian stencil is then evaluated
    in a single call.

    Returns ``(x, StepReport)``; raises :class:`NoConvergence` after
    ``max_iter`` iterations.
    """
    x = np.array(initial_guess, dtype=float).ravel()

    def evaluate(z):
        if vectorized:
            return residual_fn(z[None, :])[0]
        return np.asarray(residual_fn(z), dtype=float).ravel()

    r = evaluate(x)
    norm = np.max(np.abs(r), initial=0.0)
    iterations = 0
    jac_inv = None
    while not norm <= tol:
        if iterations >= max_iter or not np.isfinite(norm):
            report = StepReport(iterations, float(norm), False)
            raise NoConvergence(
                f"Newton iteration stalled after {iterations} iterations (residual {norm:.3e})",
                x=x,
                report=report,
            )
        jac = fd_jacobian(residual_fn, x, fd_step, vectorized)
        try:
            jac_inv = np.linalg.inv(jac)
        except np.linalg.LinAlgError:
            jac_inv = np.linalg.pinv(jac)
        x = x - jac_inv @ r
        r = evaluate(x)
        norm = np.max(np.abs(r), initial=0.0)
        iterations += 1
    if refine and jac_inv is not None and norm > 0:
        x = x - jac_inv @ r
    return x, StepReport(iterations, float(norm), True)
