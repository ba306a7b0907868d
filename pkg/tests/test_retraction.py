from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import expm, logm, sqrtm

from conftest import rz
from lievprk.config import NumericsConfig
from lievprk.errors import OutOfDomain, UnsupportedGroup
from lievprk.lie import SE3, SO3
from lievprk.retraction import (
    BERNOULLI,
    Retraction,
    bernoulli_numbers,
    dexp_inv_series,
    dexp_series,
    dtau_inv_by_basis,
    so3_exp,
    so3_log,
)

KINDS = [("SO3", "exp"), ("SO3", "cayley"), ("SO3", "skew_sqrt"), ("SE3", "exp"), ("SE3", "cayley")]


def make(group, kind):
    # the se(3) exp tangent is checked with the longest available series
    q = 15 if (group, kind) == ("SE3", "exp") else None
    return Retraction(kind, group, series_q=q)


def ball(rng, n, dim, radius):
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True) * radius * rng.random((n, 1)) ** (1 / dim)


def rotation_angle(r):
    return np.arccos((np.trace(r) - 1) / 2)


def test_bernoulli_table():
    expected = [1, Fraction(-1, 2), Fraction(1, 6), 0, Fraction(-1, 30), 0, Fraction(1, 42), 0,
                Fraction(-1, 30), 0, Fraction(5, 66), 0, Fraction(-691, 2730), 0, Fraction(7, 6), 0]
    assert list(bernoulli_numbers(16)) == expected
    assert np.array_equal(BERNOULLI, [float(v) for v in expected])


@pytest.mark.parametrize("group,kind", KINDS)
def test_tau_at_zero_is_identity(group, kind):
    retr = make(group, kind)
    zero = np.zeros(retr.group.dim)
    assert np.array_equal(retr.tau(zero), np.eye(retr.group.n))
    assert np.allclose(retr.dtau_inv(zero), np.eye(retr.group.dim), atol=1e-15)
    assert np.allclose(retr.dtau(zero), np.eye(retr.group.dim), atol=1e-15)
    assert np.allclose(retr.tau_inv(np.eye(retr.group.n)), zero, atol=1e-15)


def test_exp_quarter_turn():
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.allclose(Retraction("exp").tau([0, 0, np.pi / 2]), expected, atol=1e-15)


def test_cayley_angle_about_z():
    g = Retraction("cayley").tau([0, 0, 1.0])
    assert np.allclose(g.T @ g, np.eye(3), atol=1e-15)
    assert np.allclose(g, rz(2 * np.arctan(0.5)), atol=1e-15)


def test_skew_sqrt_example():
    retr = Retraction("skew_sqrt")
    xi = np.array([0.0, 0.0, 0.5])
    x = SO3.hat(xi)
    g = retr.tau(xi)
    assert np.array_equal((g - g.T) / 2, x)
    assert np.allclose(g - x, sqrtm(x @ x + np.eye(3)).real, atol=1e-15)
    assert np.allclose(g.T @ g, np.eye(3), atol=1e-12)
    assert np.allclose(retr.tau_inv(g), xi, atol=1e-15)


def test_exp_log_of_rz():
    assert np.allclose(Retraction("exp").tau_inv(rz(0.9)), [0, 0, 0.9], atol=1e-15)


def test_so3_exp_log_against_scipy(rng):
    for w in np.concatenate([ball(rng, 20, 3, 3.0), 1e-6 * rng.standard_normal((5, 3))]):
        assert np.allclose(so3_exp(w), expm(SO3.hat(w)), atol=1e-14)
        assert np.allclose(so3_log(so3_exp(w)), w, atol=1e-13)
        assert np.allclose(SO3.hat(so3_log(so3_exp(w))), logm(expm(SO3.hat(w))).real, atol=1e-8)


def test_se3_exp_against_scipy(rng):
    retr = Retraction("exp", SE3)
    for x in ball(rng, 20, 6, 2.5):
        assert np.allclose(retr.tau(x), expm(SE3.hat(x)), atol=1e-13)
        assert np.allclose(retr.tau_inv(retr.tau(x)), x, atol=1e-12)


def test_small_angle_branches_are_continuous():
    retr = Retraction("exp")
    axis = np.array([0.6, -0.8, 0.0])
    for t in (1e-3, 1.0001e-4, 0.9999e-4, 1e-8):
        w = t * axis
        assert np.allclose(retr.tau(w), expm(SO3.hat(w)), atol=1e-16)
        # just above the switch the closed forms lose a few digits to cancellation
        assert np.allclose(retr.dtau(w) @ retr.dtau_inv(w), np.eye(3), atol=1e-12)
        assert np.allclose(retr.dtau_inv(w), dexp_inv_series(SO3, w, 15), atol=1e-16)


def test_log_near_pi_is_refused():
    with pytest.raises(OutOfDomain):
        so3_log(rz(np.pi))


def test_dexp_inv_series_truncation_at_unit_norm():
    # at |xi| = 1 the q = 12 gap is the omitted B_14 and B_16 terms, about 1.4e-11
    xi = np.array([0.0, 0.0, 1.0])
    closed = Retraction("exp").dtau_inv(xi)
    gap = dexp_inv_series(SO3, xi, 12) - closed
    omitted = float(abs(bernoulli_numbers(15)[14]) / 87178291200 + abs(bernoulli_numbers(17)[16]) / 20922789888000)
    assert np.allclose(np.diag(gap), [omitted, omitted, 0.0], rtol=1e-3, atol=1e-15)
    assert np.max(np.abs(dexp_inv_series(SO3, xi, 14) - closed)) < 1e-12


def test_cayley_dtau_inv_example():
    xi = np.array([0.0, 0.0, 1.0])
    x = SO3.hat(xi)
    cols = [SO3.vee((np.eye(3) - x / 2) @ SO3.hat(y) @ (np.eye(3) + x / 2)) for y in np.eye(3)]
    assert np.allclose(Retraction("cayley").dtau_inv(xi), np.array(cols).T, atol=1e-15)


@pytest.mark.parametrize("group,kind", KINDS)
def test_dtau_is_right_trivialized_derivative(group, kind, rng):
    retr = make(group, kind)
    h_fd = 1e-5
    for xi in ball(rng, 10, retr.group.dim, 0.8):
        g_inv = retr.group.inverse(retr.tau(xi))
        for delta in np.eye(retr.group.dim):
            fd = (retr.tau(xi + h_fd * delta) - retr.tau(xi - h_fd * delta)) / (2 * h_fd)
            assert np.linalg.norm(fd @ g_inv - retr.group.hat(retr.dtau(xi) @ delta)) < 1e-6


def test_dtau_fd_example():
    retr = Retraction("exp")
    xi = np.array([0.3, -0.2, 0.5])
    g_inv = retr.tau(xi).T
    for delta in np.eye(3):
        fd = (retr.tau(xi + 1e-5 * delta) - retr.tau(xi - 1e-5 * delta)) / 2e-5
        assert np.linalg.norm(fd @ g_inv - SO3.hat(retr.dtau(xi) @ delta)) < 1e-6


@pytest.mark.parametrize("group,kind", KINDS)
def test_dtau_inv_matches_basis_reference(group, kind, rng):
    retr = make(group, kind)
    x = ball(rng, 200, retr.group.dim, 0.8)
    assert np.allclose(retr.dtau_inv(x), dtau_inv_by_basis(retr, x), atol=1e-12)


@pytest.mark.parametrize("group,kind", KINDS)
def test_lemmas_and_product_identity(group, kind, rng):
    retr = make(group, kind)
    grp = retr.group
    x = ball(rng, 1000, grp.dim, 0.8)
    d_plus, d_minus = retr.dtau(x), retr.dtau(-x)
    assert np.max(np.abs(d_plus - grp.Ad_matrix(retr.tau(x)) @ d_minus)) < 1e-11
    assert np.max(np.abs(retr.dtau_inv(x) - retr.dtau_inv(-x) @ grp.Ad_matrix(retr.tau(-x)))) < 1e-11
    assert np.max(np.abs(d_plus @ retr.dtau_inv(x) - np.eye(grp.dim))) < 1e-11


@pytest.mark.parametrize("group,kind", KINDS)
@settings(max_examples=50, deadline=None)
@given(v=arrays(float, 6, elements=st.floats(-1, 1, allow_nan=False)))
def test_tau_inverse_pair_property(group, kind, v):
    retr = make(group, kind)
    xi = v[: retr.group.dim]
    if kind == "skew_sqrt" and np.linalg.norm(xi) >= 0.98:
        xi = xi * 0.9 / np.linalg.norm(xi)
    eye = np.eye(retr.group.n)
    assert np.allclose(retr.tau(xi) @ retr.tau(-xi), eye, atol=1e-12)
    assert np.allclose(retr.tau_inv(retr.tau(xi)), xi, atol=1e-10)


def test_series_truncation_converges(rng):
    for group in (SO3, SE3):
        for xi in ball(rng, 100, group.dim, 0.5):
            r = np.linalg.norm(xi)
            for q in (2, 4, 6, 8):
                gap = np.max(np.abs(dexp_inv_series(group, xi, q) - dexp_inv_series(group, xi, q + 4)))
                assert gap < 10 * r ** (q + 1)


def test_dexp_series_inverts_dexp_inv(rng):
    for group in (SO3, SE3):
        x = ball(rng, 50, group.dim, 1.5)
        assert np.allclose(dexp_series(group, x) @ dexp_inv_series(group, x, 15), np.eye(group.dim), atol=1e-5)
        assert np.allclose(dexp_series(SO3, x[:, :3]) @ Retraction("exp").dtau_inv(x[:, :3]), np.eye(3), atol=1e-14)


def test_skew_sqrt_commutes_and_square(rng):
    retr = Retraction("skew_sqrt")
    x = ball(rng, 1000, 3, 0.98)
    t = retr.tau(x)
    xm = SO3.hat(x)
    assert np.max(np.abs(xm @ t - t @ xm)) < 1e-12
    s = retr.sym_root(x)
    assert np.max(np.abs(s - np.swapaxes(s, 1, 2))) < 1e-12
    assert np.max(np.abs(s @ s - xm @ xm - np.eye(3))) < 1e-12


def test_skew_sqrt_domain_and_group():
    retr = Retraction("skew_sqrt")
    for norm in (0.99, 1.0, 2.5):
        with pytest.raises(OutOfDomain):
            retr.tau([0.0, norm, 0.0])
    with pytest.raises(UnsupportedGroup):
        Retraction("skew_sqrt", SE3)
    with pytest.raises(ValueError, match="unknown retraction"):
        Retraction("quaternion")


def test_cayley_lands_on_se3(rng):
    retr = Retraction("cayley", SE3)
    g = retr.tau(ball(rng, 100, 6, 5.0))
    assert np.all(g[:, 3] == [0.0, 0.0, 0.0, 1.0])
    assert np.max(SE3.residual(g)) < 1e-13
    assert np.all(np.linalg.det(g[:, :3, :3]) > 0)


def test_check_domain_guards():
    Retraction("exp").check_domain([0.0, 0.0, 3.0])
    with pytest.raises(OutOfDomain, match="guard"):
        Retraction("exp").check_domain([0.0, 0.0, 3.05])
    with pytest.raises(OutOfDomain):
        Retraction("cayley", SE3).check_domain([10.0, 0, 0, 0, 0, 0])
    # only the rotational part is guarded on SE(3)
    Retraction("cayley", SE3).check_domain([0, 0, 0, 100.0, 0, 0])


def test_series_q_comes_from_config():
    assert Retraction("exp", SE3).series_q == 8
    assert Retraction.from_config("exp", "SE3", NumericsConfig(series_q=3)).series_q == 3
    assert Retraction.from_config("exp", "SO3", NumericsConfig(series_q=3)).series_q is None
    xi = np.array([0.5, -0.4, 0.3, 1.0, 2.0, 3.0])
    low = Retraction.from_config("exp", "SE3", NumericsConfig(series_q=2)).dtau_inv(xi)
    high = Retraction.from_config("exp", "SE3", NumericsConfig(series_q=12)).dtau_inv(xi)
    assert np.max(np.abs(low - high)) > 1e-4
    with pytest.raises(ValueError, match="outside the Bernoulli table"):
        dexp_inv_series(SO3, xi[:3], 16)
