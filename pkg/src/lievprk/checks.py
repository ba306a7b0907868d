"""Invariant and acceptance checks shared by ``lievprk selftest`` and the test suite.

Each ``check_*`` function runs one property over a seeded sample and returns
a :class:`CheckResult`; none of them raise on failure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CONFIG, NumericsConfig
from .diagnostics import (
    convergence_order,
    dlp_residuals,
    drift_series,
    extent_difference,
    interval_states,
    poincare_section,
    reference_solution,
    SectionSpec,
    simulate,
    spatial_momentum,
    symplecticity_defect,
)
from .errors import OutOfDomain
from .integrators import make_stepper
from .lie import SE3, SO3, get_group
from .models import HeavyTopModel, RigidBodyModel, UnderwaterVehicleModel
from .retraction import BERNOULLI, Retraction, _so3_dexp_inv, dexp_inv_series
from .state import initial_state

RETRACTIONS = ("exp", "cayley", "skew_sqrt")
VE_SV = ("ve_forward", "ve_backward", "sv")

# Vehicle scenario used for the section and energy comparison.
VEHICLE_XI0 = (0.5, 0.3, -0.2, 0.3, 0.2, 0.1)
VEHICLE_SECTION = SectionSpec("mu_2", 0.0, 1)
RIGID_BODY_XI0 = (1.0, 0.5, -0.2)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail} ({self.seconds:.1f} s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        result.seconds = time.perf_counter() - start
        return result

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def sample_ball(rng, n: int, dim: int, radius: float = 0.8) -> np.ndarray:
    """``n`` points uniform in the ``dim``-ball of the given radius."""
    direction = rng.standard_normal((n, dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * radius * rng.random((n, 1)) ** (1.0 / dim)


def random_states(model, rng, n: int, xi_scale: float = 1.0) -> list:
    g = model.group.random_element(rng, size=n)
    xi = xi_scale * rng.standard_normal((n, model.group.dim))
    return [initial_state(model, g[k], xi[k]) for k in range(n)]


def _maxabs(a) -> float:
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


# -- retractions --------------------------------------------------------------


def _retraction_cases(groups):
    for name in groups:
        group = get_group(name)
        for kind in RETRACTIONS:
            if kind == "skew_sqrt" and group is not SO3:
                continue
            # the SE(3) exp tangent uses the longest series the table allows
            q = 15 if group is SE3 and kind == "exp" else None
            yield group, Retraction(kind, group, series_q=q)


@_timed
def check_retraction_identities(n: int = 1000, seed: int = 0, groups=("SO3", "SE3")) -> CheckResult:
    """Group, inverse, Lemma and tangent-product identities of every retraction."""
    rng = np.random.default_rng(seed)
    worst = {}
    tolerances = {"inverse_pair": 1e-12, "log_tau": 1e-10, "lemma_a": 1e-11, "lemma_b": 1e-11, "product": 1e-11}
    failed = []
    for group, retr in _retraction_cases(groups):
        x = sample_ball(rng, n, group.dim)
        eye = np.eye(group.n)
        t_plus, t_minus = retr.tau(x), retr.tau(-x)
        d_plus, d_minus = retr.dtau(x), retr.dtau(-x)
        di_plus, di_minus = retr.dtau_inv(x), retr.dtau_inv(-x)
        ad_plus = group.Ad_matrix(t_plus)
        ad_minus = group.Ad_matrix(t_minus)
        errs = {
            "inverse_pair": _maxabs(t_plus @ t_minus - eye),
            "log_tau": _maxabs(retr.tau_inv(t_plus) - x),
            "lemma_a": _maxabs(d_plus - ad_plus @ d_minus),
            "lemma_b": _maxabs(di_plus - di_minus @ ad_minus),
            "product": _maxabs(d_plus @ di_plus - np.eye(group.dim)),
        }
        for key, err in errs.items():
            label = f"{group.name}/{retr.kind}/{key}"
            worst[label] = err
            if not err < tolerances[key]:
                failed.append(f"{label}={err:.2e}")
    detail = "worst " + ", ".join(f"{k}={max(v for kk, v in worst.items() if kk.endswith(k)):.1e}" for k in tolerances)
    if failed:
        detail = "violations: " + ", ".join(failed)
    return CheckResult("retraction_identities", not failed, detail, worst)


@_timed
def check_dexp_inv(n: int = 1000, q: int = 12, seed: int = 1, bernoulli=None) -> CheckResult:
    """Truncated Bernoulli series for ``dexp^-1`` against the so(3) closed form."""
    rng = np.random.default_rng(seed)
    x = sample_ball(rng, n, 3)
    table = BERNOULLI if bernoulli is None else bernoulli
    err = _maxabs(dexp_inv_series(SO3, x, q, table) - _so3_dexp_inv(x))
    ok = err < 1e-12
    return CheckResult("dexp_inv", ok, f"q={q} max error {err:.2e} (tol 1e-12)", {"error": err})


@_timed
def check_skew_sqrt(n: int = 1000, seed: int = 2) -> CheckResult:
    """Skew part, symmetric root and domain guard of the skew square-root map."""
    rng = np.random.default_rng(seed)
    retr = Retraction("skew_sqrt", SO3)
    x = sample_ball(rng, n, 3, 0.98)
    t = retr.tau(x)
    xm = SO3.hat(x)
    skew_err = _maxabs((t - np.swapaxes(t, 1, 2)) / 2 - xm)
    s = t - xm
    sym_err = _maxabs(s - np.swapaxes(s, 1, 2))
    square_err = _maxabs(s @ s - (xm @ xm + np.eye(3)))
    outside = rng.standard_normal((50, 3))
    outside *= (0.99 + rng.random((50, 1))) / np.linalg.norm(outside, axis=1, keepdims=True)
    outside[0] *= 0.99 / np.linalg.norm(outside[0])
    refused = 0
    for v in outside:
        try:
            retr.tau(v)
        except OutOfDomain:
            refused += 1
    # the skew part is reproduced up to rounding of the symmetric root
    ok = skew_err <= 4 * np.finfo(float).eps and sym_err < 1e-12 and square_err < 1e-12 and refused == len(outside)
    detail = (
        f"skew {skew_err:.1e}, symmetric {sym_err:.1e}, square {square_err:.1e}, "
        f"refused {refused}/{len(outside)} with |xi| >= 0.99"
    )
    return CheckResult("skew_sqrt", ok, detail, {"skew": skew_err, "symmetric": sym_err, "square": square_err})


# -- steppers -----------------------------------------------------------------

ORACLE_PAIRS = (("vprk:forward_euler", "ve_forward"), ("vprk:backward_euler", "ve_backward"), ("vprk:trapezoidal", "sv"))


@_timed
def check_oracle_equivalence(n: int = 100, h: float = 0.05, seed: int = 3, model=None, retraction="exp") -> CheckResult:
    """Tableau-driven VPRK against the specialized one-stage steppers."""
    rng = np.random.default_rng(seed)
    model = RigidBodyModel() if model is None else model
    states = random_states(model, rng, n)
    worst = {}
    for general, special in ORACLE_PAIRS:
        a = make_stepper(general, model, retraction)
        b = make_stepper(special, model, retraction)
        err = 0.0
        for s in states:
            x, y = a(s, h)[0], b(s, h)[0]
            err = max(err, _maxabs(x.g - y.g), _maxabs(x.xi - y.xi), _maxabs(x.mu - y.mu))
        worst[special] = err
    ok = all(v < 1e-12 for v in worst.values())
    detail = ", ".join(f"{general} vs {special} {worst[special]:.1e}" for general, special in ORACLE_PAIRS)
    return CheckResult("oracle_equivalence", ok, detail + " (tol 1e-12)", worst)


@_timed
def check_dlp(n_steps: int = 10_000, h: float = 0.01, seed: int = 4) -> CheckResult:
    """Momentum-recursion defect per step for VE/SV on the free rigid body, every retraction."""
    rng = np.random.default_rng(seed)
    model = RigidBodyModel((1.0, 2.0, 3.0))
    state = random_states(model, rng, 1)[0]
    worst = {}
    for kind in RETRACTIONS:
        retr = Retraction.from_config(kind, model.group, DEFAULT_CONFIG)
        for method in VE_SV:
            traj = simulate(make_stepper(method, model, kind), state, h, n_steps, method, model)
            worst[f"{method}/{kind}"] = float(np.max(dlp_residuals(traj, retr)))
    ok = all(v < 1e-10 for v in worst.values())
    top = max(worst, key=worst.get)
    return CheckResult("dlp", ok, f"worst {top} {worst[top]:.1e} over {n_steps} steps (tol 1e-10)", worst)


@_timed
def check_discrete_momentum(n_steps: int = 10_000, h: float = 0.01, seed: int = 5) -> CheckResult:
    """Spatial momentum of the interval pairs under backward VE with the exponential map."""
    rng = np.random.default_rng(seed)
    model = RigidBodyModel((1.0, 2.0, 3.0))
    state = random_states(model, rng, 1)[0]
    retr = Retraction("exp", model.group)
    traj = simulate(make_stepper("ve_backward", model, "exp"), state, h, n_steps, "ve_backward", model)
    pi = np.array([spatial_momentum(s, retr, h).discrete for s in interval_states(traj)])
    err = _maxabs(pi - pi[0])
    return CheckResult("discrete_momentum", err < 1e-10, f"max deviation {err:.2e} (tol 1e-10)", {"deviation": err})


@_timed
def check_symplecticity(n: int = 20, h: float = 0.05, seed: int = 6, config: NumericsConfig = DEFAULT_CONFIG) -> CheckResult:
    """Symplecticity defect of VE/SV below 1e-6 and at least 100x below RK4's."""
    rng = np.random.default_rng(seed)
    model = RigidBodyModel((1.0, 2.0, 3.0))
    retr = Retraction("exp", model.group)
    states = random_states(model, rng, n)
    defects = {m: [symplecticity_defect(m, model, retr, h, s, config) for s in states] for m in VE_SV + ("rk4",)}
    worst = {m: float(np.max(v)) for m, v in defects.items()}
    # ratio per state: rk4 against the worst variational method there
    ratio = float(np.min(np.array(defects["rk4"]) / np.max([defects[m] for m in VE_SV], axis=0)))
    ok = all(worst[m] < 1e-6 for m in VE_SV) and ratio >= 100
    detail = ", ".join(f"{m} {worst[m]:.1e}" for m in VE_SV) + f"; rk4 min {min(defects['rk4']):.1e}; ratio >= {ratio:.0f}"
    return CheckResult("symplecticity", ok, detail, {**worst, "ratio": ratio})


# -- models -------------------------------------------------------------------


def default_models():
    return [RigidBodyModel((1.0, 2.0, 3.0)), HeavyTopModel(), UnderwaterVehicleModel()]


def _relative(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1.0))


@_timed
def check_gradients(n: int = 100, seed: int = 7, config: NumericsConfig = DEFAULT_CONFIG) -> CheckResult:
    """``dell_dxi`` and ``body_force`` against central differences of ``ell`` with step ``config.fd_step``."""
    eps = config.fd_step
    rng = np.random.default_rng(seed)
    worst = {}
    for model in default_models():
        group = model.group
        retr = Retraction("exp", group, series_q=15 if group is SE3 else None)
        err_xi = err_g = 0.0
        eye = np.eye(group.dim)
        for s in random_states(model, rng, n):
            fd_xi = np.array([(model.ell(s.g, s.xi + eps * e) - model.ell(s.g, s.xi - eps * e)) / (2 * eps) for e in eye])
            fd_g = np.array(
                [(model.ell(s.g @ retr.tau(eps * e), s.xi) - model.ell(s.g @ retr.tau(-eps * e), s.xi)) / (2 * eps) for e in eye]
            )
            err_xi = max(err_xi, _relative(model.dell_dxi(s.g, s.xi), fd_xi))
            err_g = max(err_g, _relative(model.body_force(s.g, s.xi), fd_g))
        worst[f"{model.name}/dell_dxi"] = err_xi
        worst[f"{model.name}/body_force"] = err_g
    ok = all(v < 1e-7 for v in worst.values())
    top = max(worst, key=worst.get)
    return CheckResult("gradients", ok, f"worst {top} {worst[top]:.1e} relative (tol 1e-7)", worst)


# -- long runs ----------------------------------------------------------------


def _monotone_fraction(values) -> float:
    """Fraction of steps moving in the direction of the net change."""
    diff = np.diff(values)
    sign = np.sign(values[-1] - values[0])
    return float(np.mean(np.sign(diff) == sign)) if sign != 0 else 0.0


@_timed
def check_long_time_energy(h: float = 0.01, T: float = 1000.0, xi0=RIGID_BODY_XI0) -> CheckResult:
    """Bounded SV energy error against RK4's secular drift on the free rigid body."""
    model = RigidBodyModel((1.0, 2.0, 3.0))
    state = initial_state(model, np.eye(3), np.asarray(xi0, dtype=float))
    n = int(round(T / h))
    sv = drift_series(simulate(make_stepper("sv", model), state, h, n, "sv", model))
    rk = drift_series(simulate(make_stepper("rk4", model), state, h, n, "rk4", model))
    amplitude = sv.peak_to_peak / 2
    c = amplitude / h**2
    rk_drift = abs(rk.values[-1] - rk.values[0])
    monotone = _monotone_fraction(rk.values)
    ok_sv = abs(sv.slope) < 1e-10
    ok_rk = rk_drift >= 10 * sv.excursion
    metrics = {
        "C": c,
        "sv_slope": sv.slope,
        "sv_slope_stderr": sv.stderr,
        "sv_excursion": sv.excursion,
        "rk4_drift": rk_drift,
        "rk4_slope": rk.slope,
        "rk4_monotone_fraction": monotone,
    }
    detail = (
        f"sv amplitude {amplitude:.2e} = C h^2 with C={c:.3g}, slope {sv.slope:.1e}/time; "
        f"rk4 drift {rk_drift:.2e} vs 10x sv excursion {10 * sv.excursion:.2e}"
    )
    return CheckResult("long_time_energy", ok_sv and ok_rk, detail, metrics)


CONVERGENCE_BANDS = {"rk4": (3.8, 4.2), "sv": (1.8, 2.2), "ve_forward": (0.8, np.inf), "ve_backward": (0.8, np.inf)}


@_timed
def check_convergence(h_list=(0.1, 0.05, 0.025, 0.0125), T: float = 1.0, xi0=RIGID_BODY_XI0) -> CheckResult:
    """Observed global order of each method against a Richardson-refined RK4 reference."""
    model = RigidBodyModel((1.0, 2.0, 3.0))
    state = initial_state(model, np.eye(3), np.asarray(xi0, dtype=float))
    reference, gap = reference_solution(model, state, T, min(h_list) / 32)
    slopes = {}
    for method in CONVERGENCE_BANDS:
        slopes[method] = convergence_order(make_stepper(method, model), model, h_list, T, state, reference).slope
    ok = all(lo <= slopes[m] <= hi for m, (lo, hi) in CONVERGENCE_BANDS.items())
    detail = ", ".join(f"{m} {s:.3f}" for m, s in slopes.items()) + f"; reference gap {gap:.1e}"
    return CheckResult("convergence", ok, detail, {**slopes, "reference_gap": gap})


def vehicle_runs(h_values=(0.025, 0.05), T: float = 10_000.0, methods=("ve_backward", "rk4"), xi0=VEHICLE_XI0):
    """Trajectories of the vehicle scenario keyed by ``(method, h)``."""
    model = UnderwaterVehicleModel()
    state = initial_state(model, np.eye(4), np.asarray(xi0, dtype=float))
    out = {}
    for h in h_values:
        n = int(round(T / h))
        for method in methods:
            out[(method, h)] = simulate(make_stepper(method, model), state, h, n, method, model)
    return out


def evaluate_vehicle(runs, section: SectionSpec = VEHICLE_SECTION, fine: float = 0.025, coarse: float = 0.05) -> CheckResult:
    """Section-cloud agreement at the fine step and energy contrast at the coarse one."""
    start = time.perf_counter()
    clouds = {}
    for method in ("ve_backward", "rk4"):
        points = poincare_section(runs[(method, fine)], section)
        mu_cols = [i for i, name in enumerate(points.names) if name.startswith("mu_")]
        clouds[method] = points.points[:, mu_cols]
    extent = extent_difference(clouds["ve_backward"], clouds["rk4"])
    e_ve = drift_series(runs[("ve_backward", coarse)]).excursion
    e_rk = drift_series(runs[("rk4", coarse)]).excursion
    ok = extent < 0.1 and e_rk >= 10 * e_ve
    metrics = {
        "extent_difference": extent,
        "section_points": {m: len(c) for m, c in clouds.items()},
        "energy_excursion_ve_backward": e_ve,
        "energy_excursion_rk4": e_rk,
    }
    detail = (
        f"extent difference at h={fine}: {extent:.3f} (tol 0.1, {len(clouds['ve_backward'])}/{len(clouds['rk4'])} points); "
        f"h={coarse} energy excursion rk4 {e_rk:.2e} vs ve_backward {e_ve:.2e} (need >= 10x)"
    )
    return CheckResult("vehicle_sections", ok, detail, metrics, time.perf_counter() - start)
