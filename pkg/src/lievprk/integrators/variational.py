"""Variational partitioned Runge-Kutta steppers on Lie groups.

Every stepper maps a nodal state ``(g_k, xi_k, mu_k)`` to
``(g_{k+1}, xi_{k+1}, mu_{k+1})``.  The nodal momentum is the quantity
``(dtau^-1_{-h xi})^* mu`` transported by the discrete momentum equations;
the velocity ``xi`` and momentum ``mu`` of the interval ``[t_k, t_{k+1}]``
are returned in the :class:`StepReport` as ``xi_interval`` and
``mu_interval``.

Duals of the tangent maps are transposes of their coordinate matrices.
"""

from __future__ import annotations

import numpy as np

from ..config import DEFAULT_CONFIG, NumericsConfig
from ..state import HPState
from .newton import StageData, solve_implicit
from .tableau import TABLEAUS, ButcherTableau


def _tmv(m, v):
    """``m^T v`` over batch dimensions."""
    return np.einsum("...ji,...j->...i", m, v)


def _newton(residual, guess, config):
    return solve_implicit(
        residual,
        guess,
        tol=config.newton_tol,
        max_iter=config.newton_max_iter,
        fd_step=config.jacobian_fd_step,
        vectorized=True,
    )


def _predict(model, state, h, force_weight):
    """Explicit guess for the interval momentum and its velocity.

    ``mu + h/2 ad*_xi mu + force_weight * h * f``; only a Newton starting
    point, but an O(h^2) one where the previous velocity is O(h).
    """
    mu = state.mu + 0.5 * h * model.group.ad_star(state.xi, state.mu)
    if force_weight and not model.is_left_invariant:
        mu = mu + force_weight * h * model.body_force(state.g, state.xi)
    return mu, np.asarray(model.legendre_inv(state.g, mu), dtype=float)


def _advance(model, state, h, g_new, p_new, report, xi_interval, mu_interval):
    report.xi_interval = xi_interval
    report.mu_interval = mu_interval
    xi_new = np.asarray(model.legendre_inv(g_new, p_new), dtype=float)
    return HPState(g_new, xi_new, p_new, state.t + h), report


def vprk_step(
    model,
    tableau: ButcherTableau,
    retraction,
    h: float,
    state: HPState,
    config: NumericsConfig = DEFAULT_CONFIG,
    debug_stages: bool = False,
):
    """One step of the general ``s``-stage VPRK scheme.

    Unknowns are the stage velocities ``Xi_i``.  With
    ``Theta_i = sum_j a_ij Xi_j``, ``G_i = g tau(h Theta_i)`` and
    ``xi' = sum_j b_j Xi_j`` the stage equations read::

        dtau^-1(h xi')^T M_i = p + h sum_j (b_j dtau^-1(h Theta_j)^T
                                 - b_j a_ji / b_i dtau^-1(h xi')^T) dtau(-h Theta_j)^T f_j

    with ``M_i = dell/dxi(G_i, Xi_i)`` and ``f_j`` the body force at stage
    ``j``.  The interval momentum then follows from the external update and
    the new nodal momentum is ``dtau^-1(-h xi')^T mu_interval``.
    """
    group = model.group
    s, d = tableau.s, group.dim
    a, b = tableau.a, tableau.b
    g, p = state.g, state.mu
    forced = not model.is_left_invariant
    need_stage_g = forced or not model.separable

    def parts(x):
        Xi = x.reshape(x.shape[:-1] + (s, d))
        Theta = np.einsum("ij,...jd->...id", a, Xi)
        xi_new = np.einsum("j,...jd->...d", b, Xi)
        G = g @ retraction.tau(h * Theta) if need_stage_g else g
        M = model.dell_dxi(G, Xi)
        Dn = retraction.dtau_inv(h * xi_new)
        if forced:
            f = model.body_force(G, Xi)
            w = _tmv(retraction.dtau(-h * Theta), f)
            u = _tmv(retraction.dtau_inv(h * Theta), w)
            ext = h * np.einsum("j,...jd->...d", b, u)
            coupling = h * np.einsum("j,ji,...jd->...id", b, a, w) / b[:, None]
        else:
            ext = np.zeros(x.shape[:-1] + (d,))
            coupling = np.zeros_like(M)
        return Xi, Theta, xi_new, M, Dn, ext, coupling

    def residual(x):
        _, _, _, M, Dn, ext, coupling = parts(x)
        lhs = _tmv(Dn[..., None, :, :], M + coupling)
        out = lhs - (p + ext)[..., None, :]
        return out.reshape(x.shape)

    guess = np.tile(_predict(model, state, h, 0.5)[1], s)
    x, report = _newton(residual, guess, config)
    Xi, Theta, xi_new, M, Dn, ext, coupling = parts(x)
    retraction.check_domain(h * xi_new)
    retraction.check_domain(h * Theta)

    mu_interval = np.linalg.solve(Dn.T, p + ext)
    p_new = retraction.dtau_inv(-h * xi_new).T @ mu_interval
    g_new = g @ retraction.tau(h * xi_new)
    if debug_stages:
        rhs = b[:, None] * (M - mu_interval)
        multipliers = np.linalg.lstsq(a.T, rhs, rcond=None)[0]
        report.stages = StageData(Theta, Xi, M, multipliers)
    return _advance(model, state, h, g_new, p_new, report, xi_new, mu_interval)


def sv_step(
    model,
    retraction,
    h: float,
    state: HPState,
    config: NumericsConfig = DEFAULT_CONFIG,
    eliminate: bool | None = None,
):
    """Lie-group Stormer-Verlet step.

    Solves for ``(M, Xi1, Xi2)``::

        M = dell/dxi(g_k, Xi1)
        M = dell/dxi(g_{k+1}, Xi2),   g_{k+1} = g_k tau(h (Xi1 + Xi2)/2)
        dtau^-1(h xi')^T M = p_k + h/2 f(g_k, Xi1)

    then updates ``g_{k+1}`` and the interval momentum
    ``M + h/2 dtau(-h xi')^T f(g_{k+1}, Xi2)`` explicitly.

    ``eliminate`` selects whether ``g_{k+1}`` is substituted into the second
    equation; by default this happens only when the Legendre transform
    depends on ``g``.
    """
    d = model.group.dim
    g, p = state.g, state.mu
    forced = not model.is_left_invariant
    if eliminate is None:
        eliminate = not model.separable

    def residual(z):
        M, X1, X2 = z[..., :d], z[..., d : 2 * d], z[..., 2 * d :]
        xi_new = 0.5 * (X1 + X2)
        r1 = M - model.dell_dxi(g, X1)
        g_next = g @ retraction.tau(h * xi_new) if eliminate else g
        r2 = M - model.dell_dxi(g_next, X2)
        r3 = _tmv(retraction.dtau_inv(h * xi_new), M) - p
        if forced:
            r3 = r3 - 0.5 * h * model.body_force(g, X1)
        return np.concatenate([r1, r2, r3], axis=-1)

    mu_guess, xi_guess = _predict(model, state, h, 0.5)
    guess = np.concatenate([mu_guess, xi_guess, xi_guess])
    z, report = _newton(residual, guess, config)
    M, X1, X2 = z[:d], z[d : 2 * d], z[2 * d :]
    xi_new = 0.5 * (X1 + X2)
    retraction.check_domain(h * xi_new)

    g_new = g @ retraction.tau(h * xi_new)
    mu_interval = M
    if forced:
        mu_interval = M + 0.5 * h * retraction.dtau(-h * xi_new).T @ model.body_force(g_new, X2)
    p_new = retraction.dtau_inv(-h * xi_new).T @ mu_interval
    return _advance(model, state, h, g_new, p_new, report, xi_new, mu_interval)


def ve_forward_step(model, retraction, h: float, state: HPState, config: NumericsConfig = DEFAULT_CONFIG):
    """Forward variational Euler: Lagrangian and force sampled at the start node.

    Solves ``dtau^-1(h X)^T dell/dxi(g_k, X) = p_k + h f(g_k, X)`` and sets
    ``g_{k+1} = g_k tau(h X)``.
    """
    g, p = state.g, state.mu
    forced = not model.is_left_invariant

    def residual(x):
        r = _tmv(retraction.dtau_inv(h * x), model.dell_dxi(g, x)) - p
        if forced:
            r = r - h * model.body_force(g, x)
        return r

    x, report = _newton(residual, _predict(model, state, h, 1.0)[1], config)
    retraction.check_domain(h * x)
    mu_interval = model.dell_dxi(g, x)
    g_new = g @ retraction.tau(h * x)
    p_new = retraction.dtau_inv(-h * x).T @ mu_interval
    return _advance(model, state, h, g_new, p_new, report, x, mu_interval)


def ve_backward_step(model, retraction, h: float, state: HPState, config: NumericsConfig = DEFAULT_CONFIG):
    """Backward variational Euler: Lagrangian and force sampled at the end node.

    Solves ``dtau^-1(h X)^T dell/dxi(g_{k+1}, X) = p_k`` with
    ``g_{k+1} = g_k tau(h X)``; the end-node force enters the new nodal
    momentum ``dtau^-1(-h X)^T dell/dxi(g_{k+1}, X) + h f(g_{k+1}, X)``.
    """
    g, p = state.g, state.mu
    forced = not model.is_left_invariant

    def residual(x):
        g_next = g @ retraction.tau(h * x) if not model.separable else g
        return _tmv(retraction.dtau_inv(h * x), model.dell_dxi(g_next, x)) - p

    x, report = _newton(residual, _predict(model, state, h, 0.0)[1], config)
    retraction.check_domain(h * x)
    g_new = g @ retraction.tau(h * x)
    mu_interval = model.dell_dxi(g_new, x)
    p_new = retraction.dtau_inv(-h * x).T @ mu_interval
    if forced:
        p_new = p_new + h * model.body_force(g_new, x)
    return _advance(model, state, h, g_new, p_new, report, x, mu_interval)


def tableau_stepper(tableau: ButcherTableau | str):
    """Bind a tableau into a stepper with the common ``(model, retraction, h, state, config)`` signature."""
    if isinstance(tableau, str):
        tableau = TABLEAUS[tableau]

    def step(model, retraction, h, state, config=DEFAULT_CONFIG, debug_stages=False):
        return vprk_step(model, tableau, retraction, h, state, config, debug_stages)

    step.__name__ = f"vprk_{tableau.name}"
    return step
