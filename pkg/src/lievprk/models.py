"""Left-trivialized Lagrangians ``ell(g, xi) = L(g, g xi)``.

All methods broadcast over leading batch dimensions of ``g`` and ``xi``.
Gravity points along the spatial ``-e3`` axis, so the body-frame vertical
is ``Gamma = R^T e3``.
"""

from __future__ import annotations

import numpy as np

from .lie import SE3, SO3, skew3


def _cross(a, b):
    # np.cross is slow for single 3-vectors
    return np.einsum("...ij,...j->...i", skew3(a), b)


def _vertical(rot):
    # R^T e3 is the third row of R
    return rot[..., 2, :]


class Model:
    """Interface of a left-trivialized Lagrangian model.

    ``body_force(g, xi)`` returns the covector ``f`` with
    ``<f, eta> = d/de ell(g tau(e eta), xi)`` at ``e = 0``; it does not
    depend on the retraction because every retraction has ``dtau_0 = I``.
    """

    name = "model"
    group = SO3
    is_left_invariant = False
    # True when dell_dxi does not depend on g, so stage configurations
    # never need to be reconstructed to evaluate the Legendre transform.
    separable = True

    def ell(self, g, xi):
        raise NotImplementedError

    def dell_dxi(self, g, xi):
        raise NotImplementedError

    def body_force(self, g, xi):
        raise NotImplementedError

    def legendre_inv(self, g, mu):
        raise NotImplementedError

    def energy(self, g, xi):
        """Legendre-transform Hamiltonian ``<dell/dxi, xi> - ell``."""
        xi = np.asarray(xi, dtype=float)
        return np.einsum("...i,...i->...", self.dell_dxi(g, xi), xi) - self.ell(g, xi)

    def params(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        args = ", ".join(f"{k}={np.asarray(v).tolist()}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class RigidBodyModel(Model):
    """Free rigid body with principal moments ``inertia`` (kg m^2).

    Triangle inequalities between the moments are not enforced.
    """

    name = "rigid_body"
    group = SO3
    is_left_invariant = True

    def __init__(self, inertia=(1.0, 2.0, 3.0)):
        inertia = np.array(inertia, dtype=float)
        if inertia.shape != (3,) or np.any(inertia <= 0):
            raise ValueError(f"inertia must be three positive numbers, got {inertia}")
        self.inertia = inertia

    def ell(self, g, xi):
        xi = np.asarray(xi, dtype=float)
        return 0.5 * np.sum(self.inertia * xi * xi, axis=-1)

    def dell_dxi(self, g, xi):
        return self.inertia * np.asarray(xi, dtype=float)

    def body_force(self, g, xi):
        return np.zeros(np.broadcast_shapes(np.shape(xi), np.shape(g)[:-2] + (3,)))

    def legendre_inv(self, g, mu):
        return np.asarray(mu, dtype=float) / self.inertia

    def params(self):
        return {"inertia": self.inertia}


class HeavyTopModel(RigidBodyModel):
    """Rigid body in a uniform gravity field.

    ``ell = 1/2 <I Omega, Omega> - mgl <Gamma, chi>`` with ``Gamma = R^T e3``
    and ``chi`` the unit body-frame axis towards the centre of mass.
    """

    name = "heavy_top"

    def __init__(self, inertia=(1.0, 2.0, 3.0), mgl=1.0, chi=(0.0, 0.0, 1.0)):
        super().__init__(inertia)
        chi = np.array(chi, dtype=float)
        if chi.shape != (3,) or abs(np.linalg.norm(chi) - 1) > 1e-12:
            raise ValueError(f"chi must be a unit 3-vector, got {chi}")
        self.mgl = float(mgl)
        self.chi = chi
        self.is_left_invariant = self.mgl == 0.0

    def ell(self, g, xi):
        return super().ell(g, xi) - self.mgl * (_vertical(np.asarray(g, dtype=float)) @ self.chi)

    def body_force(self, g, xi):
        gamma = _vertical(np.asarray(g, dtype=float))
        force = self.mgl * _cross(gamma, self.chi)
        return np.broadcast_to(force, np.broadcast_shapes(force.shape, np.shape(xi))).copy()

    def params(self):
        return {"inertia": self.inertia, "mgl": self.mgl, "chi": self.chi}


class UnderwaterVehicleModel(Model):
    """Neutrally buoyant ellipsoidal vehicle on SE(3) (Kirchhoff equations plus buoyancy).

    Kinetic energy ``1/2 xi^T K xi`` with ``K = [[J, D], [D^T, M]]`` for
    ``xi = (Omega, V)``.  The restoring potential is
    ``buoyancy * <Gamma, r_b>`` where ``r_b`` is the body-frame offset between
    the centres of buoyancy and gravity.

    The defaults are not taken from any published experiment; they were
    picked to give chaotic motion at moderate energy.
    """

    name = "underwater_vehicle"
    group = SE3

    def __init__(
        self,
        J=((1.0, 0, 0), (0, 2.0, 0), (0, 0, 3.0)),
        M=((3.0, 0, 0), (0, 2.0, 0), (0, 0, 1.0)),
        D=None,
        buoyancy=0.1,
        r_b=(0.0, 0.0, 0.05),
    ):
        J = np.array(J, dtype=float)
        M = np.array(M, dtype=float)
        D = np.zeros((3, 3)) if D is None else np.array(D, dtype=float)
        if J.ndim == 1:
            J = np.diag(J)
        if M.ndim == 1:
            M = np.diag(M)
        for label, mat in (("J", J), ("M", M)):
            if mat.shape != (3, 3) or not np.allclose(mat, mat.T):
                raise ValueError(f"{label} must be a symmetric 3x3 matrix")
            if np.linalg.eigvalsh(mat).min() <= 0:
                raise ValueError(f"{label} must be positive definite")
        if D.shape != (3, 3):
            raise ValueError("D must be 3x3")
        self.J, self.M, self.D = J, M, D
        self.buoyancy = float(buoyancy)
        self.r_b = np.array(r_b, dtype=float)
        self.K = np.block([[J, D], [D.T, M]])
        if np.linalg.eigvalsh((self.K + self.K.T) / 2).min() <= 0:
            raise ValueError("block inertia [[J, D], [D^T, M]] must be positive definite")
        self.K_inv = np.linalg.inv(self.K)
        self.is_left_invariant = self.buoyancy == 0.0 or not np.any(self.r_b)

    def ell(self, g, xi):
        xi = np.asarray(xi, dtype=float)
        kinetic = 0.5 * np.einsum("...i,ij,...j->...", xi, self.K, xi)
        return kinetic - self.buoyancy * (_vertical(np.asarray(g, dtype=float)[..., :3, :3]) @ self.r_b)

    def dell_dxi(self, g, xi):
        return np.asarray(xi, dtype=float) @ self.K.T

    def body_force(self, g, xi):
        gamma = _vertical(np.asarray(g, dtype=float)[..., :3, :3])
        torque = self.buoyancy * _cross(gamma, self.r_b)
        shape = np.broadcast_shapes(torque.shape[:-1] + (6,), np.shape(xi))
        out = np.zeros(shape)
        out[..., :3] = torque
        return out

    def legendre_inv(self, g, mu):
        return np.asarray(mu, dtype=float) @ self.K_inv.T

    def params(self):
        return {"J": self.J, "M": self.M, "D": self.D, "buoyancy": self.buoyancy, "r_b": self.r_b}


MODELS = {
    RigidBodyModel.name: RigidBodyModel,
    HeavyTopModel.name: HeavyTopModel,
    UnderwaterVehicleModel.name: UnderwaterVehicleModel,
}


def make_model(model_id: str, **params) -> Model:
    try:
        cls = MODELS[model_id]
    except KeyError:
        raise ValueError(f"unknown model {model_id!r}; expected one of {sorted(MODELS)}") from None
    return cls(**params)
