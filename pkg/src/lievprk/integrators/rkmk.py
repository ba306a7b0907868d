"""Runge-Kutta-Munthe-Kaas steppers and the plain RK4 comparator."""

from __future__ import annotations

import numpy as np

from ..config import DEFAULT_CONFIG, NumericsConfig
from ..state import HPState
from .newton import StepReport, solve_implicit
from .tableau import ButcherTableau


def _increments(stage_fn, tableau: ButcherTableau, guess, config: NumericsConfig):
    """Solve ``K_i = stage_fn(sum_j a_ij K_j, c_i)`` for the stage increments.

    ``stage_fn`` maps a batch of stage arguments ``(..., s, n)`` and nodes
    ``(s,)`` to increments of the same shape.  Explicit tableaus are
    evaluated stage by stage without iteration.
    """
    a, c = tableau.a, tableau.c
    s, n = tableau.s, guess.shape[-1]
    if tableau.is_explicit:
        k = np.zeros((s, n))
        for i in range(s):
            theta = a[i] @ k
            k[i] = stage_fn(theta[None, :], c[i : i + 1])[0]
        return k, StepReport()

    def residual(x):
        k = x.reshape(x.shape[:-1] + (s, n))
        theta = np.einsum("ij,...jn->...in", a, k)
        return (k - stage_fn(theta, c)).reshape(x.shape)

    x, report = solve_implicit(
        residual,
        np.tile(guess, s),
        tol=config.newton_tol,
        max_iter=config.newton_max_iter,
        fd_step=config.jacobian_fd_step,
        vectorized=True,
    )
    return x.reshape(s, n), report


def rkmk_step(f, tableau: ButcherTableau, retraction, h: float, g, t: float = 0.0, config: NumericsConfig = DEFAULT_CONFIG):
    """One RKMK step for ``dg/dt = g f(t, g)``.

    With ``G_i = g tau(h Theta_i)`` the stage equations are
    ``Theta_i = sum_j a_ij dtau^-1_{-h Theta_j} f(t + c_j h, G_j)`` and the
    update is ``g tau(h sum_j b_j dtau^-1_{-h Theta_j} f(t + c_j h, G_j))``.
    ``f`` must accept batched group elements.

    Returns the new group element.
    """
    g = np.asarray(g, dtype=float)

    def stage_fn(theta, c):
        stage_g = g @ retraction.tau(h * theta)
        vel = np.asarray(f(t + c * h, stage_g), dtype=float)
        return np.einsum("...ij,...j->...i", retraction.dtau_inv(-h * theta), vel)

    guess = np.asarray(f(t, g), dtype=float)
    k, _ = _increments(stage_fn, tableau, guess, config)
    step = h * (tableau.b @ k)
    retraction.check_domain(step)
    return g @ retraction.tau(step)


def rkmk_hp_step(model, tableau: ButcherTableau, retraction, h: float, state: HPState, config: NumericsConfig = DEFAULT_CONFIG):
    """RKMK applied to the left-trivialized equations on ``G x g*``.

    The group factor is advanced through the retraction and the momentum
    factor additively::

        dg/dt = g xi,  dmu/dt = ad*_xi mu + f(g, xi),  xi = legendre_inv(g, mu)

    Not variational; provided as a comparator.
    """
    d = model.group.dim
    g, mu = state.g, state.mu
    ad_matrix = model.group.ad_matrix

    def stage_fn(theta, c):
        th, dm = theta[..., :d], theta[..., d:]
        stage_g = g @ retraction.tau(h * th)
        stage_mu = mu + h * dm
        xi = model.legendre_inv(stage_g, stage_mu)
        dmu = np.einsum("...ji,...j->...i", ad_matrix(xi), stage_mu) + model.body_force(stage_g, xi)
        dth = np.einsum("...ij,...j->...i", retraction.dtau_inv(-h * th), xi)
        return np.concatenate([dth, dmu], axis=-1)

    guess = np.concatenate([state.xi, np.zeros(d)])
    k, report = _increments(stage_fn, tableau, guess, config)
    inc = h * (tableau.b @ k)
    retraction.check_domain(inc[:d])
    g_new = g @ retraction.tau(inc[:d])
    mu_new = mu + inc[d:]
    xi_new = np.asarray(model.legendre_inv(g_new, mu_new), dtype=float)
    return HPState(g_new, xi_new, mu_new, state.t + h), report


def _hp_rhs(model, g, mu):
    xi = model.legendre_inv(g, mu)
    dg = g @ model.group.hat(xi)
    dmu = model.group.ad_star(xi, mu) + model.body_force(g, xi)
    return dg, dmu


def rk4_baseline_step(model, h: float, state: HPState) -> HPState:
    """Classical RK4 on the matrix entries of ``g`` and on ``mu``.

    ``g`` is advanced as an unconstrained matrix, so it leaves the group
    at the method's truncation-error rate; nothing is projected back.
    """
    g, mu = state.g, state.mu
    k1g, k1m = _hp_rhs(model, g, mu)
    k2g, k2m = _hp_rhs(model, g + 0.5 * h * k1g, mu + 0.5 * h * k1m)
    k3g, k3m = _hp_rhs(model, g + 0.5 * h * k2g, mu + 0.5 * h * k2m)
    k4g, k4m = _hp_rhs(model, g + h * k3g, mu + h * k3m)
    g_new = g + h / 6 * (k1g + 2 * k2g + 2 * k3g + k4g)
    mu_new = mu + h / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
    xi_new = np.asarray(model.legendre_inv(g_new, mu_new), dtype=float)
    return HPState(g_new, xi_new, mu_new, state.t + h)
