"""Clock-and-shift representation of the rational noncommutative 2-torus.

For theta = p/q, U = diag(1, w, ..., w^{q-1}) and V the cyclic shift with
V U = w U V, w = e^{2 pi i p/q}. This is used only as an independent check of
the cocycle arithmetic in :mod:`nctspin.nc_torus`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .nc_torus import ThetaMatrix, TorusElement


@dataclass(frozen=True)
class RationalTheta:
    p: int
    q: int

    def __post_init__(self):
        if self.q == 0:
            raise ZeroDivisionError("q must be nonzero")
        f = Fraction(self.p, self.q)
        object.__setattr__(self, "p", f.numerator)
        object.__setattr__(self, "q", f.denominator)

    @property
    def value(self) -> float:
        return self.p / self.q

    def theta_matrix(self) -> ThetaMatrix:
        return ThetaMatrix.scalar(self.value)


@dataclass(frozen=True, eq=False)
class FiniteRep:
    t: RationalTheta
    U: np.ndarray
    V: np.ndarray

    @property
    def dim(self) -> int:
        return self.t.q


def build_rep(t: RationalTheta) -> FiniteRep:
    q = t.q
    omega = np.exp(2j * np.pi * np.arange(q) * t.p / q)
    U = np.diag(omega)
    # V e_k = e_{k-1}, which gives V U = w U V
    V = np.roll(np.eye(q, dtype=complex), -1, axis=0)
    return FiniteRep(t, U, V)


def _mpow(M: np.ndarray, k: int) -> np.ndarray:
    if k < 0:
        M = M.conj().T
        k = -k
    return np.linalg.matrix_power(M, k)


def represent(rep: FiniteRep, a: TorusElement) -> np.ndarray:
    if a.n != 2:
        raise ValueError("the clock-and-shift oracle handles N = 2 only")
    if a.theta != rep.t.theta_matrix():
        raise ValueError(
            f"element theta {a.theta[1, 0]!r} does not match representation {rep.t.value!r}"
        )
    q = rep.dim
    out = np.zeros((q, q), dtype=complex)
    for (m1, m2), c in a.terms.items():
        out += c * (_mpow(rep.U, m1 % q) @ _mpow(rep.V, m2 % q))
    return out


def canonical_trace(rep: FiniteRep, M: np.ndarray) -> complex:
    return complex(np.trace(M)) / rep.dim


def frobenius(M: np.ndarray) -> float:
    return float(np.linalg.norm(M))


def check_relations(rep: FiniteRep) -> float:
    """Largest Frobenius residual among the defining relations of the rep."""
    q = rep.dim
    w = np.exp(2j * math.pi * rep.t.p / q)
    eye = np.eye(q)
    U, V = rep.U, rep.V
    return max(
        frobenius(V @ U - w * U @ V),
        frobenius(_mpow(U, q) - eye),
        frobenius(_mpow(V, q) - eye),
        frobenius(U.conj().T @ U - eye),
        frobenius(V.conj().T @ V - eye),
    )
