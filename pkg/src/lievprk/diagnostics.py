"""Conservation, symplecticity, convergence and Poincare-section diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, NumericsConfig
from .errors import ReferenceUnconverged
from .integrators import make_stepper, rk4_baseline_step
from .retraction import Retraction
from .state import HPState


# -- trajectories -------------------------------------------------------------


@dataclass
class Trajectory:
    """States ``x_0 .. x_N`` at uniform spacing ``h`` and the reports of the ``N`` steps.

    ``reports[k]`` describes the step from ``states[k]`` to ``states[k + 1]``.
    """

    states: list
    reports: list
    h: float
    method_id: str = ""
    model: object = None
    aborted: Exception | None = None

    @property
    def model_id(self) -> str:
        return getattr(self.model, "name", "")

    def __len__(self):
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def g(self) -> np.ndarray:
        return np.array([s.g for s in self.states])

    @property
    def xi(self) -> np.ndarray:
        return np.array([s.xi for s in self.states])

    @property
    def mu(self) -> np.ndarray:
        return np.array([s.mu for s in self.states])

    def energy(self) -> np.ndarray:
        return self.model.energy(self.g, self.xi)

    def group_residual(self) -> np.ndarray:
        return self.model.group.residual(self.g)

    def spatial_momentum(self) -> np.ndarray:
        """``Ad*_{g^-1} mu`` of the stored nodal momenta."""
        return self.model.group.spatial_momentum(self.g, self.mu)


def simulate(
    step: Callable,
    state: HPState,
    h: float,
    n_steps: int,
    method_id: str = "",
    model=None,
    stop_on_error: bool = False,
) -> Trajectory:
    """Fold ``step(state, h) -> (state, report)`` over ``n_steps`` steps.

    With ``stop_on_error`` a solver or domain failure ends the fold and is
    stored on the trajectory instead of propagating, so callers can keep
    the partial result.
    """
    states = [state]
    reports = []
    traj = Trajectory(states, reports, h, method_id, model)
    t0 = state.t
    for k in range(1, n_steps + 1):
        try:
            state, report = step(state, h)
        except Exception as exc:
            if not stop_on_error:
                raise
            traj.aborted = exc
            break
        # t_k = t_0 + k h without accumulated rounding
        state = state.replace(t=t0 + k * h)
        states.append(state)
        reports.append(report)
    return traj


def run_method(method: str, model, state: HPState, h: float, n_steps: int, retraction="exp", config=DEFAULT_CONFIG, **kwargs):
    """Resolve a method id and simulate it."""
    step = make_stepper(method, model, retraction, config, **kwargs)
    return simulate(step, state, h, n_steps, method, model)


# -- drift --------------------------------------------------------------------


@dataclass
class DriftFit:
    times: np.ndarray
    values: np.ndarray
    slope: float
    stderr: float
    intercept: float

    @property
    def excursion(self) -> float:
        """Largest deviation from the initial value."""
        return float(np.max(np.abs(self.values - self.values[0])))

    @property
    def peak_to_peak(self) -> float:
        return float(np.ptp(self.values))


def fit_drift(times, values) -> DriftFit:
    """Least-squares line through ``values(times)`` with the slope's standard error."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    tc = t - t.mean()
    sxx = float(tc @ tc)
    slope = float(tc @ (y - y.mean()) / sxx) if sxx > 0 else 0.0
    intercept = float(y.mean() - slope * t.mean())
    resid = y - (intercept + slope * t)
    n = y.size
    stderr = float(np.sqrt(resid @ resid / (n - 2) / sxx)) if n > 2 and sxx > 0 else 0.0
    return DriftFit(t, y, slope, stderr, intercept)


def drift_series(traj: Trajectory, observable: str = "energy", component: int = 0) -> DriftFit:
    """Fit a drift line to ``energy``, ``group_residual`` or ``momentum_component``."""
    if observable == "energy":
        values = traj.energy()
    elif observable == "group_residual":
        values = traj.group_residual()
    elif observable == "momentum_component":
        values = traj.spatial_momentum()[:, component]
    else:
        raise ValueError(f"unknown observable {observable!r}")
    return fit_drift(traj.times, values)


# -- momentum maps ------------------------------------------------------------


@dataclass
class MomentumCandidates:
    continuous: np.ndarray
    discrete: np.ndarray


def spatial_momentum(state: HPState, retraction, h: float, group=None) -> MomentumCandidates:
    """Both spatial-momentum candidates of ``state``.

    ``continuous`` is ``Ad*_{g^-1} mu``; ``discrete`` transports
    ``(dtau^-1_{-h xi})^* mu`` instead, which is the conserved quantity when
    ``(xi, mu)`` is the velocity and momentum of the interval ending at
    ``g``.  For the nodal states returned by the steppers ``mu`` already is
    the transported vector, so there the continuous candidate is the
    conserved one.
    """
    group = retraction.group if group is None else group
    g_inv = group.inverse(state.g)
    transported = retraction.dtau_inv(-h * np.asarray(state.xi)).T @ state.mu
    return MomentumCandidates(
        group.Ad_star(g_inv, state.mu),
        group.Ad_star(g_inv, transported),
    )


def interval_states(traj: Trajectory) -> list:
    """States ``(g_{k+1}, xi, mu)`` pairing each end node with its interval's velocity and momentum."""
    out = []
    for state, report in zip(traj.states[1:], traj.reports):
        if report.xi_interval is None:
            raise ValueError(f"method {traj.method_id!r} does not report interval quantities")
        out.append(HPState(state.g, report.xi_interval, report.mu_interval, state.t))
    return out


def dlp_residuals(traj: Trajectory, retraction) -> np.ndarray:
    """Momentum-recursion defect between consecutive interval pairs."""
    h = traj.h
    pairs = [(r.xi_interval, r.mu_interval) for r in traj.reports]
    out = np.empty(max(len(pairs) - 1, 0))
    for k in range(1, len(pairs)):
        (xp, mp), (x, m) = pairs[k - 1], pairs[k]
        lhs = retraction.dtau_inv(h * x).T @ m
        rhs = retraction.dtau_inv(-h * xp).T @ mp
        out[k - 1] = np.max(np.abs(lhs - rhs))
    return out


# -- symplecticity ------------------------------------------------------------


def _as_step(stepper, model, retraction, h, config):
    if isinstance(stepper, str):
        fn = make_stepper(stepper, model, retraction.kind, config)
        return lambda state: fn(state, h)[0]
    if stepper is rk4_baseline_step:
        return lambda state: rk4_baseline_step(model, h, state)

    def step(state):
        out = stepper(model, retraction, h, state, config)
        return out[0] if isinstance(out, tuple) else out

    return step


def _one_form_matrix(retraction, z, d, delta):
    """``W[i, j] = d Lambda_j / d z_i`` for ``Lambda(theta, mu) = (dtau_{-theta}^T mu, 0)``."""
    n = z.size
    steps = delta * np.eye(n)
    pts = np.concatenate([z + steps, z - steps])
    theta, mu = pts[:, :d], pts[:, d:]
    lam = np.einsum("kji,kj->ki", retraction.dtau(-theta), mu)
    lam = np.concatenate([lam, np.zeros_like(lam)], axis=1)
    return (lam[:n] - lam[n:]) / (2 * delta)


def symplectic_form(retraction, z, d, delta) -> np.ndarray:
    """Coordinate matrix of ``omega = -d Lambda`` at chart point ``z``."""
    w = _one_form_matrix(retraction, z, d, delta)
    return -(w - w.T)


def symplecticity_defect(
    stepper,
    model,
    retraction,
    h: float,
    state: HPState,
    config: NumericsConfig = DEFAULT_CONFIG,
) -> float:
    """``|J^T omega(z_1) J - omega(z_0)|_F`` for the step map in retraction charts.

    Points near ``state.g`` are written ``g_0 tau(theta)`` and points near
    the image ``g_1`` as ``g_1 tau(theta)``; together with the nodal momentum
    these give chart coordinates ``z = (theta, mu)``.  ``J`` and ``omega``
    are both assembled by central differences with step
    ``config.chart_fd_step * (1 + |z|)``.

    ``stepper`` is a method id, :func:`rk4_baseline_step`, or a callable
    ``(model, retraction, h, state, config)``.
    """
    step = _as_step(stepper, model, retraction, h, config)
    group = model.group
    d = group.dim
    g0 = state.g
    image = step(state)
    g1 = image.g
    g1_inv = group.inverse(g1)

    def to_state(z):
        g = g0 @ retraction.tau(z[:d])
        mu = z[d:]
        return HPState(g, np.asarray(model.legendre_inv(g, mu), dtype=float), mu, state.t)

    def chart_image(z):
        out = step(to_state(z))
        theta = retraction.tau_inv(g1_inv @ out.g)
        return np.concatenate([theta, out.mu])

    z0 = np.concatenate([np.zeros(d), state.mu])
    delta = config.chart_fd_step * (1.0 + np.linalg.norm(z0))
    n = 2 * d
    jac = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = delta
        jac[:, k] = (chart_image(z0 + e) - chart_image(z0 - e)) / (2 * delta)
    z1 = np.concatenate([np.zeros(d), image.mu])
    omega0 = symplectic_form(retraction, z0, d, delta)
    omega1 = symplectic_form(retraction, z1, d, delta)
    return float(np.linalg.norm(jac.T @ omega1 @ jac - omega0))


# -- Poincare sections --------------------------------------------------------


@dataclass(frozen=True)
class SectionSpec:
    """Crossing of ``observable[coordinate] == level`` in direction ``direction``.

    ``coordinate`` is an observable name (``g_ij``, ``xi_k`` or ``mu_k``)
    or an integer column index.
    """

    coordinate: str | int = "mu_0"
    level: float = 0.0
    direction: int = 1

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError(f"section direction must be +1 or -1, got {self.direction!r}")

    def to_dict(self) -> dict:
        return {"coordinate": self.coordinate, "level": self.level, "direction": self.direction}


@dataclass
class SectionPoints:
    names: list
    times: np.ndarray
    points: np.ndarray  # (m, len(names))

    def __len__(self):
        return len(self.times)

    def column(self, name) -> np.ndarray:
        return self.points[:, self.names.index(name)]


def observable_names(group) -> list:
    n, d = group.n, group.dim
    names = [f"g_{i}{j}" for i in range(n) for j in range(n)]
    names += [f"xi_{k}" for k in range(d)]
    names += [f"mu_{k}" for k in range(d)]
    return names


def observables(traj: Trajectory):
    """Names and the ``(N+1, n_obs)`` matrix of per-state observables."""
    g = traj.g
    values = np.concatenate([g.reshape(len(g), -1), traj.xi, traj.mu], axis=1)
    return observable_names(traj.model.group), values


def section_crossings(times, values, column: int, level: float = 0.0, direction: int = 1):
    """Linearly interpolated crossings of ``values[:, column] == level``.

    Returns ``(crossing_times, interpolated_rows)``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    f = values[:, column] - level
    lo, hi = f[:-1], f[1:]
    if direction > 0:
        hits = np.flatnonzero((lo < 0) & (hi >= 0))
    else:
        hits = np.flatnonzero((lo > 0) & (hi <= 0))
    alpha = lo[hits] / (lo[hits] - hi[hits])
    t = times[hits] + alpha * (times[hits + 1] - times[hits])
    rows = values[hits] + alpha[:, None] * (values[hits + 1] - values[hits])
    return t, rows


def poincare_section(traj: Trajectory, spec: SectionSpec) -> SectionPoints:
    names, values = observables(traj)
    column = spec.coordinate if isinstance(spec.coordinate, (int, np.integer)) else names.index(spec.coordinate)
    t, rows = section_crossings(traj.times, values, column, spec.level, spec.direction)
    return SectionPoints(names, t, rows)


def extent_difference(a, b) -> float:
    """Relative Hausdorff distance between the bounding boxes of two point clouds.

    The largest per-coordinate shift of either box edge, divided by the
    largest coordinate range of the first cloud.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        return float("inf")
    shift = np.maximum(np.abs(a.min(0) - b.min(0)), np.abs(a.max(0) - b.max(0)))
    scale = np.max(np.ptp(a, axis=0))
    return float(np.max(shift) / scale) if scale > 0 else float(np.max(shift))


# -- convergence --------------------------------------------------------------


@dataclass
class ConvergenceResult:
    h: np.ndarray
    errors: np.ndarray
    slope: float
    reference_gap: float = 0.0
    final_states: list = field(default_factory=list, repr=False)


def state_distance(group, a: HPState, b: HPState) -> float:
    """``|log(g_b^-1 g_a)| + |mu_a - mu_b|`` with the exponential chart."""
    log = Retraction("exp", group, series_q=15 if group.name == "SE3" else None)
    theta = log.tau_inv(group.inverse(b.g) @ a.g)
    return float(np.linalg.norm(theta) + np.linalg.norm(a.mu - b.mu))


def _final_state(step, state, h, n):
    for _ in range(n):
        state = step(state, h)[0]
    return state


def reference_solution(model, state: HPState, T: float, h_ref: float, tol: float = 1e-10) -> tuple:
    """RK4 solution at ``T`` with step ``h_ref`` refined once by Richardson extrapolation.

    Raises :class:`ReferenceUnconverged` if the ``h_ref`` and ``h_ref/2``
    solutions differ by more than ``tol``.
    """
    step = make_stepper("rk4", model)
    n = int(round(T / h_ref))
    coarse = _final_state(step, state, T / n, n)
    fine = _final_state(step, state, T / (2 * n), 2 * n)
    gap = state_distance(model.group, coarse, fine)
    if gap > tol:
        raise ReferenceUnconverged(
            f"reference solutions at h={T / n:.3g} and h={T / (2 * n):.3g} differ by {gap:.3e} > {tol:.1e}"
        )
    g = fine.g + (fine.g - coarse.g) / 15
    mu = fine.mu + (fine.mu - coarse.mu) / 15
    ref = HPState(g, np.asarray(model.legendre_inv(g, mu)), mu, fine.t)
    return ref, gap


def convergence_order(
    stepper,
    model,
    h_list: Sequence[float],
    T: float,
    state: HPState,
    reference: HPState | None = None,
    tol: float = 1e-10,
) -> ConvergenceResult:
    """Least-squares slope of ``log(error at T)`` against ``log(h)``.

    ``stepper`` is ``step(state, h) -> (state, report)`` or a method id.
    Without an explicit ``reference`` an RK4 solution at
    ``min(h_list) / 32`` is used.
    """
    h_list = np.asarray(sorted(h_list, reverse=True), dtype=float)
    if h_list.size < 4:
        raise ValueError("need >= 4 step sizes")
    if isinstance(stepper, str):
        stepper = make_stepper(stepper, model)
    gap = 0.0
    if reference is None:
        reference, gap = reference_solution(model, state, T, h_list.min() / 32, tol)
    errors = []
    finals = []
    for h in h_list:
        n = int(round(T / h))
        final = _final_state(stepper, state, T / n, n)
        finals.append(final)
        errors.append(state_distance(model.group, final, reference))
    errors = np.array(errors)
    slope = float(np.polyfit(np.log(h_list), np.log(errors), 1)[0])
    return ConvergenceResult(h_list, errors, slope, gap, finals)
