"""Retractions tau: g -> G and their right-trivialized tangents.

Three retractions are provided:

``exp``
    The exponential map (closed-form Rodrigues / screw formulas).
``cayley``
    ``cay(X) = (I - X/2)^-1 (I + X/2)``.  On SE(3) the homogeneous 4x4 form is
    block upper triangular with a Cayley rotation block, so it stays on SE(3).
``skew_sqrt``
    ``tau(X) = X + (X^2 + I)^(1/2)``, the inverse of the skew-symmetric
    projection ``g -> (g - g^T)/2``.  Only defined on SO(3), for ``|xi| < 1``.

The right-trivialized tangent ``dtau_xi`` satisfies
``D tau(xi) . delta = dtau_xi(delta) tau(xi)``; both it and its inverse are
returned as explicit ``d x d`` coordinate matrices, so their duals are plain
transposes.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial

import numpy as np

from .config import DEFAULT_CONFIG, NumericsConfig
from .errors import OutOfDomain, Singular, UnsupportedGroup
from .lie import SE3, SO3, MatrixLieGroup, get_group, skew3, unskew3

# Below this angle the trigonometric coefficients switch to Taylor series.
SMALL_ANGLE = 1e-4
# Exp log is refused this close to angle pi, where the axis is ambiguous.
LOG_PI_MARGIN = 1e-6


def bernoulli_numbers(count: int = 16) -> tuple[Fraction, ...]:
    """Exact Bernoulli numbers ``B_0 .. B_{count-1}`` with ``B_1 = -1/2``."""
    values: list[Fraction] = []
    for m in range(count):
        if m == 0:
            values.append(Fraction(1))
            continue
        acc = sum(comb(m + 1, k) * values[k] for k in range(m))
        values.append(-acc / (m + 1))
    return tuple(values)


BERNOULLI = np.array([float(b) for b in bernoulli_numbers(16)])


def _matvec(m, v):
    return np.einsum("...ij,...j->...i", m, v)


def _horner(x, coeffs, eye):
    out = coeffs[-1] * eye
    for c in coeffs[-2::-1]:
        out = c * eye + x @ out
    return out


def _series_matrix(adx, coeffs):
    """Evaluate ``sum_j coeffs[j] * adx**j`` as ``E(adx^2) + adx O(adx^2)``."""
    eye = np.eye(adx.shape[-1])
    even, odd = list(coeffs[0::2]), list(coeffs[1::2])
    sq = adx @ adx
    out = _horner(sq, even, eye)
    if odd:
        out = out + adx @ _horner(sq, odd, eye)
    return np.broadcast_to(out, adx.shape).copy() if out.shape != adx.shape else out


def dexp_inv_series(group: MatrixLieGroup, x, q: int, bernoulli=None):
    """Coordinate matrix of ``sum_{j<=q} B_j/j! ad_x^j`` (truncated dexp^-1)."""
    table = BERNOULLI if bernoulli is None else np.asarray(bernoulli, dtype=float)
    if not 0 <= q < len(table):
        raise ValueError(f"series truncation q={q} outside the Bernoulli table (0..{len(table) - 1})")
    coeffs = [table[j] / factorial(j) for j in range(q + 1)]
    return _series_matrix(group.ad_matrix(x), coeffs)


def dexp_series(group: MatrixLieGroup, x, tol: float = 1e-17, max_terms: int = 60):
    """Coordinate matrix of ``sum_j ad_x^j / (j+1)!`` summed until the terms vanish."""
    adx = group.ad_matrix(x)
    norm = float(np.max(np.linalg.norm(adx, ord=2, axis=(-2, -1)), initial=0.0))
    n_terms = 1
    term = 1.0
    while n_terms < max_terms:
        term *= norm / (n_terms + 1)
        if term < tol:
            break
        n_terms += 1
    coeffs = [1.0 / factorial(j + 1) for j in range(n_terms + 1)]
    return _series_matrix(adx, coeffs)


def _so3_coefficients(theta, which="abcd"):
    """Return the requested subset of ``sin(t)/t``, ``(1-cos t)/t^2``,
    ``(t-sin t)/t^3`` and ``(1-(t/2)cot(t/2))/t^2`` (keys ``a``-``d``)."""
    theta = np.asarray(theta, dtype=float)
    small = theta < SMALL_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = theta * theta
    t4 = t2 * t2
    out = []
    for key in which:
        if key == "a":
            out.append(np.where(small, 1 - t2 / 6 + t4 / 120, np.sin(t) / t))
        elif key == "b":
            out.append(np.where(small, 0.5 - t2 / 24 + t4 / 720, (1 - np.cos(t)) / (t * t)))
        elif key == "c":
            out.append(np.where(small, 1 / 6 - t2 / 120 + t4 / 5040, (t - np.sin(t)) / (t * t * t)))
        else:
            half = t / 2
            out.append(np.where(small, 1 / 12 + t2 / 720 + t4 / 30240, (1 - half / np.tan(half)) / (t * t)))
    return out


def so3_exp(w):
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w, axis=-1)
    a, b = _so3_coefficients(theta, "ab")
    x = skew3(w)
    return np.eye(3) + a[..., None, None] * x + b[..., None, None] * (x @ x)


def so3_log(r):
    """Rotation vector of ``r`` via ``atan2`` (accurate at small angles)."""
    r = np.asarray(r, dtype=float)
    s_vec = unskew3(r - np.swapaxes(r, -1, -2)) / 2
    s = np.linalg.norm(s_vec, axis=-1)
    c = (np.trace(r, axis1=-2, axis2=-1) - 1) / 2
    theta = np.arctan2(s, c)
    if np.any(theta > np.pi - LOG_PI_MARGIN):
        raise OutOfDomain("rotation log undefined at angle pi")
    small = theta < SMALL_ANGLE
    t2 = theta * theta
    safe_s = np.where(small, 1.0, s)
    factor = np.where(small, 1 + t2 / 6 + 7 * t2 * t2 / 360, theta / safe_s)
    return factor[..., None] * s_vec


def _norm(w):
    return np.sqrt(np.einsum("...i,...i->...", w, w))


def _so3_dexp(w):
    theta = _norm(w)
    b, c = _so3_coefficients(theta, "bc")
    x = skew3(w)
    return np.eye(3) + b[..., None, None] * x + c[..., None, None] * (x @ x)


def _so3_dexp_inv(w):
    theta = _norm(w)
    (d,) = _so3_coefficients(theta, "d")
    x = skew3(w)
    return np.eye(3) - 0.5 * x + d[..., None, None] * (x @ x)


def se3_exp(xi):
    xi = np.asarray(xi, dtype=float)
    w, v = xi[..., :3], xi[..., 3:]
    theta = np.linalg.norm(w, axis=-1)
    a, b, c = _so3_coefficients(theta, "abc")
    x = skew3(w)
    x2 = x @ x
    rot = np.eye(3) + a[..., None, None] * x + b[..., None, None] * x2
    vmat = np.eye(3) + b[..., None, None] * x + c[..., None, None] * x2
    out = np.zeros(xi.shape[:-1] + (4, 4))
    out[..., :3, :3] = rot
    out[..., :3, 3] = _matvec(vmat, v)
    out[..., 3, 3] = 1.0
    return out


def se3_log(g):
    g = np.asarray(g, dtype=float)
    w = so3_log(g[..., :3, :3])
    theta = np.linalg.norm(w, axis=-1)
    (d,) = _so3_coefficients(theta, "d")
    x = skew3(w)
    vinv = np.eye(3) - 0.5 * x + d[..., None, None] * (x @ x)
    return np.concatenate([w, _matvec(vinv, g[..., :3, 3])], axis=-1)


def _basis_matrices(group):
    return group.hat(np.eye(group.dim))  # (d, n, n)


def _columns_from_basis(group, fn, x_mats):
    """Coordinate matrix whose k-th column is ``vee(fn(E_k))`` for basis matrices E_k."""
    basis = _basis_matrices(group)
    images = fn(basis[(slice(None),) + (None,) * (x_mats.ndim - 2)])  # (d, ..., n, n)
    cols = group.vee(images)  # (d, ..., d)
    return np.moveaxis(cols, 0, -1)


class Retraction:
    """A local diffeomorphism ``tau: g -> G`` with ``tau(0) = e`` and ``tau(x) tau(-x) = e``.

    Parameters
    ----------
    kind : {"exp", "cayley", "skew_sqrt"}
    group : MatrixLieGroup or str
    series_q : int or None
        Truncation index of the Bernoulli series for ``dexp^-1``.  ``None``
        selects the closed form (available on SO(3) only; SE(3) falls back
        to ``DEFAULT_CONFIG.series_q``).
    guard : float or None
        Bound on the rotational norm of arguments accepted by
        :meth:`check_domain`.  For ``skew_sqrt`` it is also enforced by
        :meth:`tau` itself.
    bernoulli : array, optional
        Override of the Bernoulli table (used by the self-test sabotage hook).
    """

    def __init__(self, kind: str, group="SO3", series_q=None, guard=None, bernoulli=None):
        if kind not in ("exp", "cayley", "skew_sqrt"):
            raise ValueError(f"unknown retraction kind {kind!r}")
        group = get_group(group)
        if kind == "skew_sqrt" and group is not SO3:
            raise UnsupportedGroup("skew_sqrt retraction is only defined on SO(3)")
        if kind == "exp" and group is SE3 and series_q is None:
            series_q = DEFAULT_CONFIG.series_q
        self.kind = kind
        self.group = group
        self.series_q = series_q
        self.guard = DEFAULT_CONFIG.domain_guards[kind] if guard is None else float(guard)
        self.bernoulli = BERNOULLI if bernoulli is None else np.asarray(bernoulli, dtype=float)

    @classmethod
    def from_config(cls, kind: str, group, config: NumericsConfig = DEFAULT_CONFIG):
        group = get_group(group)
        q = config.series_q if group is SE3 else None
        return cls(kind, group, series_q=q, guard=config.domain_guards[kind])

    def __repr__(self):
        return f"Retraction({self.kind!r}, {self.group.name}, series_q={self.series_q})"

    # -- domain ---------------------------------------------------------------

    def check_domain(self, x):
        """Raise :class:`OutOfDomain` if the rotational part of ``x`` reaches the guard."""
        x = np.asarray(x, dtype=float)
        size = np.linalg.norm(x[..., :3], axis=-1)
        if np.any(~np.isfinite(size)) or np.any(size >= self.guard):
            raise OutOfDomain(
                f"{self.kind} retraction argument norm {np.max(size):.6g} "
                f"reaches guard {self.guard:.6g}; reduce the step size"
            )

    # -- tau and its inverse --------------------------------------------------

    def tau(self, x):
        x = np.asarray(x, dtype=float)
        self.group._check_coords(x)
        if self.kind == "exp":
            return so3_exp(x) if self.group is SO3 else se3_exp(x)
        if self.kind == "cayley":
            xm = self.group.hat(x)
            eye = np.eye(self.group.n)
            return np.linalg.solve(eye - xm / 2, eye + xm / 2)
        return self._skew_sqrt_tau(x)

    def _skew_sqrt_tau(self, x):
        self.check_domain(x)
        xm = skew3(x)
        sym = xm @ xm + np.eye(3)
        sym = (sym + np.swapaxes(sym, -1, -2)) / 2
        evals, evecs = np.linalg.eigh(sym)
        if np.any(evals <= 0):
            raise OutOfDomain("skew_sqrt retraction requires |xi| < 1")
        root = (evecs * np.sqrt(evals)[..., None, :]) @ np.swapaxes(evecs, -1, -2)
        return xm + root

    def sym_root(self, x):
        """Symmetric part ``(X^2 + I)^(1/2)`` of the skew_sqrt retraction."""
        if self.kind != "skew_sqrt":
            raise ValueError("sym_root is specific to the skew_sqrt retraction")
        return self._skew_sqrt_tau(x) - skew3(x)

    def tau_inv(self, g):
        g = np.asarray(g, dtype=float)
        self.group._check_matrix(g)
        if self.kind == "exp":
            return so3_log(g) if self.group is SO3 else se3_log(g)
        if self.kind == "cayley":
            eye = np.eye(self.group.n)
            plus = g + eye
            det = np.linalg.det(plus[..., :3, :3])
            if np.any(np.abs(det) < 1e-12):
                raise OutOfDomain("Cayley inverse undefined: g has eigenvalue -1")
            # X (g + I) = 2 (g - I)
            xt = np.linalg.solve(np.swapaxes(plus, -1, -2), 2 * np.swapaxes(g - eye, -1, -2))
            return self.group.vee(np.swapaxes(xt, -1, -2))
        return unskew3((g - np.swapaxes(g, -1, -2)) / 2)

    # -- tangent maps ---------------------------------------------------------

    def dtau_inv(self, x):
        """Coordinate matrix of ``y -> dtau^-1_x(y)``."""
        x = np.asarray(x, dtype=float)
        self.group._check_coords(x)
        if self.kind == "exp":
            if self.series_q is None:
                return _so3_dexp_inv(x)
            return dexp_inv_series(self.group, x, self.series_q, self.bernoulli)
        if self.kind == "cayley":
            if self.group is SO3:
                return np.eye(3) - 0.5 * skew3(x) + 0.25 * x[..., :, None] * x[..., None, :]
            xm = self.group.hat(x)
            eye = np.eye(self.group.n)
            return _columns_from_basis(self.group, lambda y: (eye - xm / 2) @ y @ (eye + xm / 2), xm)
        # dskew(x)(y) = skew(y tau(x)); on so(3) this is (tr(S) I - S)/2 - X/2
        s = self.sym_root(x)
        tr = np.trace(s, axis1=-2, axis2=-1)
        return 0.5 * (tr[..., None, None] * np.eye(3) - s) - 0.5 * skew3(x)

    def dtau(self, x):
        """Coordinate matrix of ``y -> dtau_x(y)``."""
        x = np.asarray(x, dtype=float)
        self.group._check_coords(x)
        if self.kind == "exp":
            return _so3_dexp(x) if self.group is SO3 else dexp_series(self.group, x)
        if self.kind == "cayley":
            if self.group is SO3:
                scale = 1.0 / (1.0 + 0.25 * np.sum(x * x, axis=-1))
                return scale[..., None, None] * (np.eye(3) + 0.5 * skew3(x))
            xm = self.group.hat(x)
            eye = np.eye(self.group.n)
            left = np.linalg.inv(eye - xm / 2)
            right = np.linalg.inv(eye + xm / 2)
            return _columns_from_basis(self.group, lambda y: left @ y @ right, xm)
        try:
            return np.linalg.inv(self.dtau_inv(x))
        except np.linalg.LinAlgError as exc:
            raise Singular("dskew coordinate matrix is singular") from exc


def dtau_inv_by_basis(retraction: Retraction, x):
    """Reference ``dtau^-1`` evaluated column by column from its matrix definition.

    Exp: truncated Bernoulli series with ``q=15``.  Cayley:
    ``(I - X/2) Y (I + X/2)``.  Skew: ``skew(Y tau(X))``.
    """
    group = retraction.group
    x = np.asarray(x, dtype=float)
    xm = group.hat(x)
    eye = np.eye(group.n)
    if retraction.kind == "exp":
        return dexp_inv_series(group, x, 15)
    if retraction.kind == "cayley":
        return _columns_from_basis(group, lambda y: (eye - xm / 2) @ y @ (eye + xm / 2), xm)
    t = retraction.tau(x)

    def dskew(y):
        m = y @ t
        return (m - np.swapaxes(m, -1, -2)) / 2

    return _columns_from_basis(group, dskew, xm)
