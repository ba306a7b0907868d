"""Butcher tableaus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficients ``(a, b, c)`` of an ``s``-stage scheme.

    ``c`` is always the row sum of ``a``.  All weights must be nonzero: the
    variational schemes divide by ``b_i``.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = "inline"

    @classmethod
    def from_arrays(cls, a, b, name: str = "inline", c=None) -> "ButcherTableau":
        a = np.array(a, dtype=float)
        b = np.array(b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"tableau a must be a square matrix, got shape {a.shape}")
        if b.shape != (a.shape[0],):
            raise ValueError(f"tableau b must have length {a.shape[0]}, got shape {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("tableau coefficients must be finite")
        zero = np.flatnonzero(b == 0)
        if zero.size:
            raise ValueError(f"tableau weights must be nonzero: b_{zero[0] + 1} = 0")
        row_sums = a.sum(axis=1)
        if c is not None and not np.allclose(np.asarray(c, dtype=float), row_sums, rtol=0, atol=1e-14):
            raise ValueError("tableau c must equal the row sums of a")
        a.setflags(write=False)
        b.setflags(write=False)
        row_sums.setflags(write=False)
        return cls(a, b, row_sums, name)

    @property
    def s(self) -> int:
        return self.b.shape[0]

    @property
    def is_explicit(self) -> bool:
        return not np.any(np.triu(self.a))

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "b": self.b.tolist()}


def _t(a, b, name):
    return ButcherTableau.from_arrays(a, b, name)


TABLEAUS = {
    "forward_euler": _t([[0.0]], [1.0], "forward_euler"),
    "backward_euler": _t([[1.0]], [1.0], "backward_euler"),
    # implicit trapezoidal rule; gives Stormer-Verlet in the variational setting
    "trapezoidal": _t([[0.0, 0.0], [0.5, 0.5]], [0.5, 0.5], "trapezoidal"),
    "midpoint": _t([[0.5]], [1.0], "midpoint"),
    "rk4": _t(
        [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]],
        [1 / 6, 1 / 3, 1 / 3, 1 / 6],
        "rk4",
    ),
    "lobatto_iiia3": _t(
        [[0, 0, 0], [5 / 24, 1 / 3, -1 / 24], [1 / 6, 2 / 3, 1 / 6]],
        [1 / 6, 2 / 3, 1 / 6],
        "lobatto_iiia3",
    ),
}
TABLEAUS["sv"] = TABLEAUS["trapezoidal"]


def get_tableau(name: str) -> ButcherTableau:
    try:
        return TABLEAUS[name]
    except KeyError:
        raise ValueError(f"unknown tableau {name!r}; expected one of {sorted(TABLEAUS)}") from None
