"""Discrete Euler-Poincare momentum updates for left-invariant Lagrangians.

When ``ell`` does not depend on ``g`` every variational stepper reduces to
the momentum recursion::

    (dtau^-1_{h xi_{k+1}})^* mu_{k+1} = (dtau^-1_{-h xi_k})^* mu_k

on interval velocities and momenta.  The module solves it and provides
independent, retraction-specific forms of the same relation for checking.
"""

from __future__ import annotations

import numpy as np

from ..config import DEFAULT_CONFIG, NumericsConfig
from ..lie import SO3
from ..retraction import dexp_inv_series
from ..state import HPState
from .newton import solve_implicit


def _require_left_invariant(model):
    if not model.is_left_invariant:
        raise ValueError(f"{model.name} is not left-invariant; the Euler-Poincare update does not apply")


def _solve(model, retraction, h, target, guess, config):
    """Solve ``dtau^-1(h X)^T dell/dxi(X) = target`` for ``X``."""
    g = model.group.identity()

    def residual(x):
        mu = model.dell_dxi(g, x)
        return np.einsum("...ji,...j->...i", retraction.dtau_inv(h * x), mu) - target

    x, report = solve_implicit(
        residual,
        guess,
        tol=config.newton_tol,
        max_iter=config.newton_max_iter,
        fd_step=config.jacobian_fd_step,
        vectorized=True,
    )
    retraction.check_domain(h * x)
    return x, report


def ep_update(model, retraction, h: float, xi, mu, config: NumericsConfig = DEFAULT_CONFIG):
    """Advance an interval pair ``(xi_k, mu_k)`` to ``(xi_{k+1}, mu_{k+1})``."""
    _require_left_invariant(model)
    xi = np.asarray(xi, dtype=float)
    mu = np.asarray(mu, dtype=float)
    target = retraction.dtau_inv(-h * xi).T @ mu
    x, _ = _solve(model, retraction, h, target, xi, config)
    return x, model.dell_dxi(model.group.identity(), x)


def ep_step(model, retraction, h: float, state: HPState, config: NumericsConfig = DEFAULT_CONFIG):
    """Full state step for a left-invariant model: momentum update then reconstruction."""
    _require_left_invariant(model)
    guess = model.legendre_inv(state.g, state.mu + 0.5 * h * model.group.ad_star(state.xi, state.mu))
    x, report = _solve(model, retraction, h, state.mu, guess, config)
    mu_interval = model.dell_dxi(state.g, x)
    g_new = state.g @ retraction.tau(h * x)
    p_new = retraction.dtau_inv(-h * x).T @ mu_interval
    report.xi_interval = x
    report.mu_interval = mu_interval
    xi_new = np.asarray(model.legendre_inv(g_new, p_new), dtype=float)
    return HPState(g_new, xi_new, p_new, state.t + h), report


def dlp_residual(retraction, h: float, xi, mu, xi_prev, mu_prev) -> float:
    """Max-norm defect of the momentum recursion between consecutive interval pairs."""
    lhs = retraction.dtau_inv(h * np.asarray(xi)).T @ mu
    rhs = retraction.dtau_inv(-h * np.asarray(xi_prev)).T @ mu_prev
    return float(np.max(np.abs(lhs - rhs)))


def exp_residual(group, h: float, xi, mu, xi_prev, mu_prev, q: int = 15):
    """Momentum recursion for the exponential map, with ``dexp^-1`` summed as a Bernoulli series."""
    lhs = dexp_inv_series(group, h * np.asarray(xi), q).T @ mu
    rhs = dexp_inv_series(group, -h * np.asarray(xi_prev), q).T @ mu_prev
    return lhs - rhs


def _sandwich_matrix(group, x):
    """Coordinate matrix of ``y -> vee(X Y X)``."""
    xm = group.hat(x)
    basis = group.hat(np.eye(group.dim))
    return group.vee(xm @ basis @ xm).T


def cayley_residual(group, h: float, xi, mu, xi_prev, mu_prev):
    """Momentum recursion for the Cayley map written out term by term::

        mu - mu_prev - h/2 ad*_xi mu - h/2 ad*_{xi_prev} mu_prev
           - h^2/4 (C(xi)^T mu - C(xi_prev)^T mu_prev),   C(x) y = vee(X Y X)
    """
    xi, mu, xi_prev, mu_prev = (np.asarray(v, dtype=float) for v in (xi, mu, xi_prev, mu_prev))
    quad = _sandwich_matrix(group, xi).T @ mu - _sandwich_matrix(group, xi_prev).T @ mu_prev
    return (
        mu
        - mu_prev
        - 0.5 * h * group.ad_star(xi, mu)
        - 0.5 * h * group.ad_star(xi_prev, mu_prev)
        - 0.25 * h * h * quad
    )


def skew_sqrt_residual(h: float, xi, mu, xi_prev, mu_prev):
    """Momentum recursion for the skew square-root map on SO(3)::

        vee(M S + S M)/2 - vee(M' S' + S' M')/2 - h/2 ad*_xi mu - h/2 ad*_{xi'} mu'

    with ``S = (h^2 X^2 + I)^(1/2)``, ``M = hat(mu)`` and primes on the
    previous interval.
    """

    def projected(x, m):
        xm = SO3.hat(h * np.asarray(x, dtype=float))
        evals, evecs = np.linalg.eigh(xm @ xm + np.eye(3))
        root = (evecs * np.sqrt(evals)) @ evecs.T
        mm = SO3.hat(m)
        return SO3.vee(mm @ root + root @ mm) / 2

    return (
        projected(xi, mu)
        - projected(xi_prev, mu_prev)
        - 0.5 * h * SO3.ad_star(xi, mu)
        - 0.5 * h * SO3.ad_star(xi_prev, mu_prev)
    )


def specialized_residual(retraction, h: float, xi, mu, xi_prev, mu_prev):
    """Dispatch to the retraction-specific form of the momentum recursion."""
    if retraction.kind == "exp":
        return exp_residual(retraction.group, h, xi, mu, xi_prev, mu_prev)
    if retraction.kind == "cayley":
        return cayley_residual(retraction.group, h, xi, mu, xi_prev, mu_prev)
    return skew_sqrt_residual(h, xi, mu, xi_prev, mu_prev)
