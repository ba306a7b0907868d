import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import rz
from lievprk.config import DEFAULT_CONFIG, NumericsConfig
from lievprk.diagnostics import dlp_residuals, interval_states, simulate, spatial_momentum
from lievprk.errors import NoConvergence, OutOfDomain
from lievprk.integrators import (
    TABLEAUS,
    ButcherTableau,
    ep_step,
    ep_update,
    get_tableau,
    make_stepper,
    rk4_baseline_step,
    rkmk_step,
    sv_step,
    tableau_stepper,
    ve_backward_step,
    ve_forward_step,
    vprk_step,
)
from lievprk.integrators.euler_poincare import cayley_residual, specialized_residual
from lievprk.lie import SE3, SO3
from lievprk.models import HeavyTopModel, RigidBodyModel
from lievprk.retraction import Retraction
from lievprk.state import initial_state, state_from_momentum

ALL_METHODS = ["ve_forward", "ve_backward", "sv", "vprk:midpoint", "vprk:lobatto_iiia3", "rkmk:rk4", "rk4"]
ORACLES = [("forward_euler", ve_forward_step), ("backward_euler", ve_backward_step), ("trapezoidal", sv_step)]


def random_state(model, rng, scale=1.0):
    return initial_state(model, model.group.random_element(rng), scale * rng.standard_normal(model.group.dim))


def retractions_for(model):
    kinds = ["exp", "cayley"] + (["skew_sqrt"] if model.group is SO3 else [])
    return [Retraction.from_config(k, model.group, DEFAULT_CONFIG) for k in kinds]


def assert_states_close(a, b, tol):
    assert np.max(np.abs(a.g - b.g)) <= tol
    assert np.max(np.abs(a.xi - b.xi)) <= tol
    assert np.max(np.abs(a.mu - b.mu)) <= tol


# -- tableaus -----------------------------------------------------------------


def test_tableau_invariants():
    for tab in TABLEAUS.values():
        assert np.array_equal(tab.c, tab.a.sum(axis=1))
        assert np.all(tab.b != 0)
    sv = get_tableau("sv")
    assert np.array_equal(sv.a, [[0, 0], [0.5, 0.5]]) and np.array_equal(sv.b, [0.5, 0.5])


@pytest.mark.parametrize(
    "a,b,message",
    [
        ([[0.0]], [0.0], "b_1 = 0"),
        ([[0.5, 0.0], [0.5, 0.5]], [1.0, 0.0], "b_2 = 0"),
        ([[0.0, 1.0]], [1.0], "square"),
        ([[0.0]], [1.0, 2.0], "length 1"),
        ([[np.nan]], [1.0], "finite"),
    ],
)
def test_tableau_rejections(a, b, message):
    with pytest.raises(ValueError, match=message):
        ButcherTableau.from_arrays(a, b)


def test_tableau_c_must_be_row_sums():
    with pytest.raises(ValueError, match="row sums"):
        ButcherTableau.from_arrays([[0.5]], [1.0], c=[0.4])
    with pytest.raises(ValueError, match="unknown tableau"):
        get_tableau("gauss6")


# -- oracle equivalence -------------------------------------------------------


@pytest.mark.parametrize("name,special", ORACLES, ids=[o[0] for o in ORACLES])
def test_vprk_matches_specialized_steppers(any_model, name, special, rng):
    tab = get_tableau(name)
    for retr in retractions_for(any_model):
        for _ in range(5):
            state = random_state(any_model, rng, 0.5)
            x = vprk_step(any_model, tab, retr, 0.05, state)[0]
            y = special(any_model, retr, 0.05, state)[0]
            assert_states_close(x, y, 1e-12)


def test_tableau_stepper_binds_tableau(rigid_body, rng):
    retr = Retraction("exp")
    state = random_state(rigid_body, rng)
    x = tableau_stepper("midpoint")(rigid_body, retr, 0.05, state)[0]
    y = vprk_step(rigid_body, get_tableau("midpoint"), retr, 0.05, state)[0]
    assert_states_close(x, y, 0)


@pytest.mark.parametrize("method", ALL_METHODS + ["ep:exp", "ep:cayley", "ep:skew_sqrt"])
def test_equilibrium_is_fixed(rigid_body, method):
    state = initial_state(rigid_body, rz(0.3), np.zeros(3))
    step = make_stepper(method, rigid_body)
    out = state
    for _ in range(5):
        out = step(out, 0.1)[0]
    assert np.array_equal(out.g, state.g)
    assert np.array_equal(out.mu, state.mu)


def test_heavy_top_upright_is_fixed():
    model = HeavyTopModel((1.0, 2.0, 3.0), mgl=1.0, chi=(0.0, 0.0, 1.0))
    state = initial_state(model, np.eye(3), np.zeros(3))
    for method in ("ve_forward", "ve_backward", "sv"):
        out = make_stepper(method, model)(state, 0.1)[0]
        assert np.array_equal(out.g, state.g) and np.array_equal(out.mu, state.mu)


def test_spherical_body_spins_uniformly():
    model = RigidBodyModel((1.0, 1.0, 1.0))
    state = state_from_momentum(model, np.eye(3), [0.0, 0.0, 1.0])
    h = 0.1
    for method in ("ve_forward", "ve_backward", "sv"):
        out = state
        for k in range(1, 21):
            out = make_stepper(method, model)(out, h)[0]
            assert np.allclose(out.xi, [0, 0, 1], atol=1e-14)
            assert np.allclose(out.g, rz(k * h), atol=1e-13)
        assert abs(model.energy(out.g, out.xi) - 0.5) < 1e-14


def rigid_body_reference(model, g, mu, T):
    inertia = np.asarray(model.inertia)

    def rhs(t, y):
        r, m = y[:9].reshape(3, 3), y[9:]
        w = m / inertia
        return np.concatenate([(r @ SO3.hat(w)).ravel(), np.cross(m, w)])

    sol = solve_ivp(rhs, (0, T), np.concatenate([g.ravel(), mu]), method="DOP853", rtol=1e-13, atol=1e-14)
    y = sol.y[:, -1]
    return y[:9].reshape(3, 3), y[9:]


def test_sv_single_step_residual_and_reference(rigid_body):
    h = 0.1
    retr = Retraction("exp")
    state = state_from_momentum(rigid_body, np.eye(3), [1.0, 1.0, 1.0])
    out, report = sv_step(rigid_body, retr, h, state)
    x, m = report.xi_interval, report.mu_interval
    # the discrete equations, re-evaluated on the output
    assert np.allclose(m, rigid_body.dell_dxi(out.g, x), atol=1e-15)
    assert np.max(np.abs(retr.dtau_inv(h * x).T @ m - state.mu)) < 1e-12
    assert np.allclose(out.g, state.g @ retr.tau(h * x), atol=1e-15)
    assert np.allclose(out.mu, retr.dtau_inv(-h * x).T @ m, atol=1e-15)
    g_ref, mu_ref = rigid_body_reference(rigid_body, state.g, state.mu, h)
    local = np.max(np.abs(out.g - g_ref)) + np.max(np.abs(out.mu - mu_ref))
    assert local < 5 * h**3


def test_sv_separable_paths_agree(rng):
    model = HeavyTopModel((1.0, 2.0, 3.0), mgl=0.8, chi=(0.0, 0.6, 0.8))
    retr = Retraction("exp")
    for _ in range(10):
        state = random_state(model, rng)
        a = sv_step(model, retr, 0.05, state, eliminate=True)[0]
        b = sv_step(model, retr, 0.05, state, eliminate=False)[0]
        assert_states_close(a, b, 1e-12)


def test_sv_time_symmetry(any_model, rng):
    for retr in retractions_for(any_model):
        state = random_state(any_model, rng, 0.5)
        forward = sv_step(any_model, retr, 0.05, state)[0]
        back = sv_step(any_model, retr, -0.05, forward)[0]
        assert_states_close(back, state, 10 * DEFAULT_CONFIG.newton_tol)


@pytest.mark.parametrize("method", ALL_METHODS)
def test_outputs_satisfy_legendre_constraint(any_model, method, rng):
    step = make_stepper(method, any_model)
    state = random_state(any_model, rng)
    for _ in range(10):
        state = step(state, 0.05)[0]
        assert state.legendre_defect(any_model) <= 1e-9


def test_stage_data(rigid_body, rng):
    state = random_state(rigid_body, rng)
    for name in ("midpoint", "backward_euler", "lobatto_iiia3"):
        tab = get_tableau(name)
        _, report = vprk_step(rigid_body, tab, Retraction("exp"), 0.05, state, debug_stages=True)
        data = report.stages
        assert np.allclose(data.Theta, tab.a @ data.Xi, atol=1e-15)
        assert np.allclose(data.M, rigid_body.dell_dxi(state.g, data.Xi), atol=1e-15)
        relation = tab.b[:, None] * report.mu_interval + tab.a.T @ data.mu - tab.b[:, None] * data.M
        if name != "lobatto_iiia3":  # a^T is singular there; the multipliers are a least-squares fit
            assert np.max(np.abs(relation)) < 1e-12
    assert vprk_step(rigid_body, tab, Retraction("exp"), 0.05, state)[1].stages is None


# -- momentum recursion -------------------------------------------------------


@pytest.mark.parametrize("method", ["ve_forward", "ve_backward", "sv"])
def test_left_invariant_collapse(rigid_body, method, rng):
    state = random_state(rigid_body, rng)
    for retr in retractions_for(rigid_body):
        traj = simulate(make_stepper(method, rigid_body, retr.kind), state, 0.01, 200, method, rigid_body)
        assert np.max(dlp_residuals(traj, retr)) < 1e-10
        for prev, cur in zip(traj.reports[:-1], traj.reports[1:]):
            r = specialized_residual(retr, 0.01, cur.xi_interval, cur.mu_interval, prev.xi_interval, prev.mu_interval)
            assert np.max(np.abs(r)) < 1e-10


def test_ve_and_sv_coincide_on_free_rigid_body(rigid_body, rng):
    state = random_state(rigid_body, rng)
    outs = [make_stepper(m, rigid_body)(state, 0.05)[0] for m in ("ve_forward", "ve_backward", "sv")]
    assert_states_close(outs[0], outs[1], 1e-12)
    assert_states_close(outs[0], outs[2], 1e-12)


@pytest.mark.parametrize("method", ["ve_forward", "ve_backward", "sv"])
@pytest.mark.parametrize("kind", ["exp", "cayley", "skew_sqrt"])
def test_discrete_momentum_conserved(rigid_body, method, kind, rng):
    state = random_state(rigid_body, rng)
    retr = Retraction(kind)
    traj = simulate(make_stepper(method, rigid_body, kind), state, 0.01, 1000, method, rigid_body)
    pi = np.array([spatial_momentum(s, retr, 0.01).discrete for s in interval_states(traj)])
    assert np.max(np.abs(pi - pi[0])) < 10 * DEFAULT_CONFIG.newton_tol
    # on nodal states the same vector is the continuous candidate
    assert np.allclose(traj.spatial_momentum()[1:], pi, atol=1e-12)


@pytest.mark.parametrize("kind", ["exp", "cayley", "skew_sqrt"])
def test_nodal_momentum_norm_preserved(rigid_body, kind, rng):
    state = random_state(rigid_body, rng)
    traj = simulate(make_stepper("sv", rigid_body, kind), state, 0.02, 500, "sv", rigid_body)
    norms = np.linalg.norm(traj.mu, axis=1)
    assert np.max(np.abs(norms - norms[0])) < 1e-12


def test_ep_update_principal_axis():
    model = RigidBodyModel((1.0, 2.0, 3.0))
    mu = np.array([0.0, 2.0, 0.0])
    for kind in ("exp", "cayley", "skew_sqrt"):
        xi, mu_new = ep_update(model, Retraction(kind), 0.1, model.legendre_inv(None, mu), mu)
        assert np.array_equal(mu_new, mu)


def test_ep_update_cayley_form(rigid_body, rng):
    retr = Retraction("cayley")
    xi, mu = rigid_body.legendre_inv(None, rng.standard_normal(3)), None
    mu = rigid_body.dell_dxi(None, xi)
    for _ in range(20):
        xi_new, mu_new = ep_update(rigid_body, retr, 0.1, xi, mu)
        assert np.max(np.abs(cayley_residual(SO3, 0.1, xi_new, mu_new, xi, mu))) < 1e-11
        xi, mu = xi_new, mu_new


def test_ep_update_matches_ve_momentum(rigid_body, rng):
    retr = Retraction("exp")
    state = random_state(rigid_body, rng)
    _, report = ve_backward_step(rigid_body, retr, 0.05, state)
    _, first = ve_forward_step(rigid_body, retr, 0.05, state)
    second = ve_forward_step(rigid_body, retr, 0.05, ve_forward_step(rigid_body, retr, 0.05, state)[0])[1]
    xi, mu = ep_update(rigid_body, retr, 0.05, first.xi_interval, first.mu_interval)
    assert np.allclose(xi, second.xi_interval, atol=1e-12)
    assert np.allclose(mu, second.mu_interval, atol=1e-12)
    ep_state = ep_step(rigid_body, retr, 0.05, state)[0]
    assert_states_close(ep_state, ve_backward_step(rigid_body, retr, 0.05, state)[0], 1e-12)


def test_ep_requires_left_invariance():
    with pytest.raises(ValueError, match="left-invariant"):
        make_stepper("ep:exp", HeavyTopModel())


# -- RKMK and RK4 -------------------------------------------------------------


def test_rkmk_zero_and_constant_fields(rng):
    g = SO3.random_element(rng)
    xi0 = np.array([0.3, -0.7, 1.1])
    for name in ("forward_euler", "midpoint", "rk4", "lobatto_iiia3"):
        tab = get_tableau(name)
        for kind in ("exp", "cayley"):
            retr = Retraction(kind)
            assert np.array_equal(rkmk_step(lambda t, x: np.zeros(x.shape[:-2] + (3,)), tab, retr, 0.1, g), g)
        out = rkmk_step(lambda t, x: np.broadcast_to(xi0, x.shape[:-2] + (3,)), tab, Retraction("exp"), 0.1, g)
        assert np.allclose(out, g @ Retraction("exp").tau(0.1 * xi0), atol=1e-12)


def time_dependent_field(t, g):
    t = np.asarray(t, dtype=float)
    vel = np.stack([np.sin(t), np.cos(t), np.full_like(t, 0.3)], axis=-1)
    return np.broadcast_to(vel, np.shape(g)[:-2] + (3,))


def test_rkmk_rk4_order_on_time_dependent_field():
    T = 1.0

    def rhs(t, y):
        return (y.reshape(3, 3) @ SO3.hat(time_dependent_field(t, np.eye(3)))).ravel()

    ref = solve_ivp(rhs, (0, T), np.eye(3).ravel(), method="DOP853", rtol=1e-13, atol=1e-14).y[:, -1].reshape(3, 3)
    tab, retr = get_tableau("rk4"), Retraction("exp")
    hs = np.array([0.2, 0.1, 0.05, 0.025])
    errors = []
    for h in hs:
        g = np.eye(3)
        for k in range(int(round(T / h))):
            g = rkmk_step(time_dependent_field, tab, retr, h, g, t=k * h)
        errors.append(np.linalg.norm(g - ref))
    slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    assert 3.8 <= slope <= 4.2


def test_rk4_baseline_leaves_group_and_is_fourth_order_locally(rigid_body):
    state = state_from_momentum(rigid_body, np.eye(3), [1.0, 1.0, 1.0])
    g_ref, mu_ref = rigid_body_reference(rigid_body, state.g, state.mu, 0.1)
    errs = []
    for h in (0.1, 0.05):
        out = state
        for _ in range(int(round(0.1 / h))):
            out = rk4_baseline_step(rigid_body, h, out)
        errs.append(np.max(np.abs(out.g - g_ref)))
    assert errs[1] < errs[0] / 12
    assert SO3.residual(rk4_baseline_step(rigid_body, 0.1, state).g) > 1e-12


# -- errors -------------------------------------------------------------------


def test_domain_guard_raises(rigid_body):
    state = initial_state(rigid_body, np.eye(3), [0.0, 0.0, 30.0])
    with pytest.raises(OutOfDomain):
        make_stepper("sv", rigid_body, "skew_sqrt")(state, 0.1)
    with pytest.raises(OutOfDomain):
        make_stepper("ve_forward", rigid_body, "exp")(state, 0.11)


def test_no_convergence_is_reported(rigid_body, rng):
    config = NumericsConfig(newton_max_iter=1, newton_tol=1e-300)
    with pytest.raises(NoConvergence) as info:
        make_stepper("sv", rigid_body, config=config)(random_state(rigid_body, rng), 0.1)
    assert info.value.report.converged is False


@pytest.mark.parametrize("method", ["rk5", "vprk", "vprk:gauss", "sv:exp", "vprk:inline"])
def test_make_stepper_rejects(rigid_body, method):
    with pytest.raises(ValueError):
        make_stepper(method, rigid_body)


def test_se3_exp_uses_configured_series(rng):
    from lievprk.models import UnderwaterVehicleModel

    model = UnderwaterVehicleModel()
    state = random_state(model, rng)
    a = make_stepper("sv", model, config=NumericsConfig(series_q=2))(state, 0.1)[0]
    b = make_stepper("sv", model, config=NumericsConfig(series_q=8))(state, 0.1)[0]
    assert np.max(np.abs(a.mu - b.mu)) > 1e-9
