"""Matrix Lie groups SO(3) and SE(3) in coordinates.

Algebra elements are coordinate vectors: ``(3,)`` for so(3) and ``(6,)`` for
se(3), ordered ``(angular, linear)``.  Group elements are ``(3, 3)`` rotation
matrices or ``(4, 4)`` homogeneous transforms.  Every function accepts
arbitrary leading batch dimensions.

Momenta live in the dual of the algebra and are paired with algebra
elements by the coordinate dot product, so every starred operator is the
transpose of the coordinate matrix of its primal map.
"""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedGroup


# _SKEW_BASIS[k] is the cross-product matrix of the k-th unit vector
_SKEW_BASIS = np.zeros((3, 3, 3))
_SKEW_BASIS[0, 2, 1], _SKEW_BASIS[0, 1, 2] = 1.0, -1.0
_SKEW_BASIS[1, 0, 2], _SKEW_BASIS[1, 2, 0] = 1.0, -1.0
_SKEW_BASIS[2, 1, 0], _SKEW_BASIS[2, 0, 1] = 1.0, -1.0
_SKEW_FLAT = _SKEW_BASIS.reshape(3, 9)


def skew3(v):
    """Cross-product matrix of ``v``: ``skew3(a) @ b == cross(a, b)``."""
    v = np.asarray(v, dtype=float)
    return (v @ _SKEW_FLAT).reshape(v.shape[:-1] + (3, 3))


def unskew3(m):
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def _transpose(m):
    return np.swapaxes(m, -1, -2)


def _matvec(m, v):
    return np.einsum("...ij,...j->...i", m, v)


class MatrixLieGroup:
    """Common coordinate operations of a matrix Lie group.

    Subclasses provide ``hat``, ``vee``, ``inverse``, ``ad_matrix`` and
    ``Ad_matrix``; the remaining operations are derived from those.
    """

    name: str
    n: int  # matrix size
    dim: int  # algebra dimension

    def __repr__(self):
        return self.name

    def __reduce__(self):
        return (get_group, (self.name,))

    def identity(self):
        return np.eye(self.n)

    def compose(self, g, h):
        g = np.asarray(g, dtype=float)
        h = np.asarray(h, dtype=float)
        self._check_matrix(g)
        self._check_matrix(h)
        return g @ h

    def _check_matrix(self, g):
        if g.shape[-2:] != (self.n, self.n):
            raise ValueError(
                f"{self.name} element must be {self.n}x{self.n}, got shape {g.shape}"
            )

    def _check_coords(self, v):
        if v.shape[-1] != self.dim:
            raise ValueError(
                f"{self.name} algebra coordinates must have length {self.dim}, got shape {v.shape}"
            )

    def Ad(self, g, xi):
        return _matvec(self.Ad_matrix(g), np.asarray(xi, dtype=float))

    def Ad_star(self, g, mu):
        """Coadjoint action, defined by ``<Ad_star(g, mu), xi> = <mu, Ad(g, xi)>``."""
        return _matvec(_transpose(self.Ad_matrix(g)), np.asarray(mu, dtype=float))

    def ad(self, xi, eta):
        return _matvec(self.ad_matrix(xi), np.asarray(eta, dtype=float))

    def ad_star(self, xi, mu):
        return _matvec(_transpose(self.ad_matrix(xi)), np.asarray(mu, dtype=float))

    def bracket(self, xi, eta):
        """Matrix commutator ``[hat(xi), hat(eta)]`` pulled back to coordinates."""
        x = self.hat(xi)
        y = self.hat(eta)
        return self.vee(x @ y - y @ x)

    def spatial_momentum(self, g, mu):
        """``Ad*_{g^-1} mu``, the momentum map of the left action."""
        return self.Ad_star(self.inverse(g), mu)

    def random_algebra(self, rng, scale=1.0, size=None):
        shape = (self.dim,) if size is None else (size, self.dim)
        return scale * rng.standard_normal(shape)


class _SO3(MatrixLieGroup):
    name = "SO3"
    n = 3
    dim = 3

    def hat(self, v):
        v = np.asarray(v, dtype=float)
        self._check_coords(v)
        return skew3(v)

    def vee(self, m):
        m = np.asarray(m, dtype=float)
        self._check_matrix(m)
        return unskew3(m)

    def inverse(self, g):
        g = np.asarray(g, dtype=float)
        self._check_matrix(g)
        return _transpose(g)

    def ad_matrix(self, xi):
        return self.hat(xi)

    def Ad_matrix(self, g):
        g = np.asarray(g, dtype=float)
        self._check_matrix(g)
        return g.copy()

    def residual(self, g):
        g = np.asarray(g, dtype=float)
        self._check_matrix(g)
        defect = _transpose(g) @ g - np.eye(3)
        return np.sqrt(np.sum(defect**2, axis=(-2, -1)))

    def random_element(self, rng, size=None):
        from scipy.spatial.transform import Rotation

        rot = Rotation.random(1 if size is None else size, random_state=rng).as_matrix()
        return rot[0] if size is None else rot

    def rotation(self, g):
        return np.asarray(g, dtype=float)


# ad matrices of the se(3) basis: [[w, 0], [v, w]] in (angular, linear) blocks
_SE3_AD_BASIS = np.zeros((6, 6, 6))
_SE3_AD_BASIS[:3, :3, :3] = _SKEW_BASIS
_SE3_AD_BASIS[:3, 3:, 3:] = _SKEW_BASIS
_SE3_AD_BASIS[3:, 3:, :3] = _SKEW_BASIS
_SE3_AD_FLAT = _SE3_AD_BASIS.reshape(6, 36)


class _SE3(MatrixLieGroup):
    name = "SE3"
    n = 4
    dim = 6

    def hat(self, v):
        v = np.asarray(v, dtype=float)
        self._check_coords(v)
        out = np.zeros(v.shape[:-1] + (4, 4))
        out[..., :3, :3] = skew3(v[..., :3])
        out[..., :3, 3] = v[..., 3:]
        return out

    def vee(self, m):
        m = np.asarray(m, dtype=float)
        self._check_matrix(m)
        return np.concatenate([unskew3(m[..., :3, :3]), m[..., :3, 3]], axis=-1)

    def inverse(self, g):
        g = np.asarray(g, dtype=float)
        self._check_matrix(g)
        rt = _transpose(g[..., :3, :3])
        out = np.zeros_like(g)
        out[..., :3, :3] = rt
        out[..., :3, 3] = -_matvec(rt, g[..., :3, 3])
        out[..., 3, 3] = 1.0
        return out

    def ad_matrix(self, xi):
        xi = np.asarray(xi, dtype=float)
        self._check_coords(xi)
        return (xi @ _SE3_AD_FLAT).reshape(xi.shape[:-1] + (6, 6))

    def Ad_matrix(self, g):
        g = np.asarray(g, dtype=float)
        self._check_matrix(g)
        r = g[..., :3, :3]
        out = np.zeros(g.shape[:-2] + (6, 6))
        out[..., :3, :3] = r
        out[..., 3:, 3:] = r
        out[..., 3:, :3] = skew3(g[..., :3, 3]) @ r
        return out

    def residual(self, g):
        g = np.asarray(g, dtype=float)
        self._check_matrix(g)
        r = g[..., :3, :3]
        defect = _transpose(r) @ r - np.eye(3)
        bottom = g[..., 3, :] - np.array([0.0, 0.0, 0.0, 1.0])
        return np.sqrt(np.sum(defect**2, axis=(-2, -1))) + np.sqrt(np.sum(bottom**2, axis=-1))

    def random_element(self, rng, size=None):
        rot = SO3.random_element(rng, size)
        out = np.zeros(rot.shape[:-2] + (4, 4))
        out[..., :3, :3] = rot
        out[..., :3, 3] = rng.standard_normal(rot.shape[:-2] + (3,))
        out[..., 3, 3] = 1.0
        return out

    def rotation(self, g):
        return np.asarray(g, dtype=float)[..., :3, :3]


SO3 = _SO3()
SE3 = _SE3()

_GROUPS = {"SO3": SO3, "SE3": SE3}


def get_group(name) -> MatrixLieGroup:
    if isinstance(name, MatrixLieGroup):
        return name
    try:
        return _GROUPS[str(name).upper()]
    except KeyError:
        raise UnsupportedGroup(f"unknown group {name!r}; expected one of {sorted(_GROUPS)}") from None


def is_element(group: MatrixLieGroup, g, tol: float = 1e-9) -> bool:
    """Membership test: orthogonality defect within ``tol`` and positive determinant."""
    g = np.asarray(g, dtype=float)
    if g.shape != (group.n, group.n) or not np.all(np.isfinite(g)):
        return False
    if group is SE3 and not np.array_equal(g[3], [0.0, 0.0, 0.0, 1.0]):
        return False
    return bool(group.residual(g) <= tol and np.linalg.det(group.rotation(g)) > 0)


def pair(mu, xi):
    """Dual pairing ``<mu, xi>`` (coordinate dot product, batched)."""
    return np.einsum("...i,...i->...", np.asarray(mu, dtype=float), np.asarray(xi, dtype=float))
