"""Spin structures on T^N, double coverings of the acting torus, and their theta-deformations.

A spin structure is a bit vector j; the twist set is X = {i : j_i = 1}.
The deformed covering algebra is

* X empty: the trivial double C^inf(T^N_theta) (x) C^2,
* otherwise: C^inf(T^N_theta~)^{G_X}, where theta~ keeps theta off X, halves
  entries with exactly one index in X and quarters entries with both in X.

Covering-algebra basis keys are pairs ``(k, f)``: ``k`` a monomial exponent of
the covering torus and ``f`` a fiber index (0 or 1 for the trivial double,
always 0 for twisted covers).
"""

from __future__ import annotations

import cmath
import enum
import itertools
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .nc_torus import (
    PRUNE_TOL,
    ThetaMatrix,
    TorusElement,
    turn_phase,
)


@dataclass(frozen=True)
class SpinStructure:
    j: tuple[int, ...]

    def __post_init__(self):
        j = tuple(int(x) for x in self.j)
        if not j:
            raise ValueError("spin structure needs at least one loop")
        if any(x not in (0, 1) for x in j):
            raise ValueError(f"spin structure bits must be 0 or 1, got {j}")
        object.__setattr__(self, "j", j)

    @property
    def n(self) -> int:
        return len(self.j)

    @property
    def twist_set(self) -> frozenset[int]:
        """0-based indices of twisted loops."""
        return frozenset(i for i, b in enumerate(self.j) if b)

    @classmethod
    def all(cls, n: int) -> list[SpinStructure]:
        return [cls(bits) for bits in itertools.product((0, 1), repeat=n)]


class CoveringKind(enum.Enum):
    TRIVIAL_DOUBLE = "TrivialDouble"
    ONE_LOOP_TWIST = "OneLoopTwist"
    MULTI_TWIST = "MultiTwist"


@dataclass(frozen=True)
class CoveringDescriptor:
    kind: CoveringKind
    twist_set: tuple[int, ...]
    winding: tuple[int, ...]
    covering_space: str
    covering_map: str

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "twist_set": [i + 1 for i in self.twist_set],
            "winding": list(self.winding),
            "covering_space": self.covering_space,
            "covering_map": self.covering_map,
        }


_N2_COVERS = {
    (0, 0): ("T^2 x Z_2", "(t1, t2, +-1) -> (t1, t2)"),
    (1, 0): ("T^2", "(t1, t2) -> (t1^2, t2)"),
    (0, 1): ("T^2", "(t1, t2) -> (t1, t2^2)"),
    (1, 1): ("T^2 / Z_2^diag", "[t1, t2] -> (t1^2, t2^2)"),
}


def _require_n2(j: SpinStructure) -> None:
    if j.n != 2:
        raise ValueError(f"this operation is defined for N = 2 only, got N = {j.n}")


def classify_covering(j: SpinStructure) -> CoveringDescriptor:
    _require_n2(j)
    X = tuple(sorted(j.twist_set))
    kind = {
        0: CoveringKind.TRIVIAL_DOUBLE,
        1: CoveringKind.ONE_LOOP_TWIST,
        2: CoveringKind.MULTI_TWIST,
    }[len(X)]
    space, cmap = _N2_COVERS[j.j]
    return CoveringDescriptor(kind, X, tuple(b + 1 for b in j.j), space, cmap)


def covering_projection(j: SpinStructure, point: tuple) -> tuple[complex, complex]:
    """Covering map of the N = 2 cover: squares the twisted coordinates, drops the sheet."""
    _require_n2(j)
    t1, t2 = point[:2]
    return (t1 ** (1 + j.j[0]), t2 ** (1 + j.j[1]))


@dataclass(frozen=True)
class KernelAction:
    """Generator of the deck group Z_2' of the covering, geometrically and dually."""

    j: SpinStructure
    description: str

    def on_point(self, point: tuple) -> tuple:
        """Deck transformation of a point of the covering torus.

        Points are ``(t1, t2, sheet)`` for the trivial double and ``(t1, t2)``
        (a representative of the class) otherwise.
        """
        if self.j.j == (0, 0):
            t1, t2, sheet = point
            return (t1, t2, -sheet)
        t1, t2 = point[:2]
        if self.j.j == (0, 1):
            return (t1, -t2)
        return (-t1, t2)

    def on_monomial(self, k: Sequence[int], f: int) -> list[tuple[complex, tuple[int, ...], int]]:
        """Dual action on a covering-algebra basis key, as a list of (coef, k, f)."""
        X = sorted(self.j.twist_set)
        if not X:
            return [(1.0, tuple(k), 1 - f)]
        i = X[0]
        return [(-1.0 if k[i] % 2 else 1.0, tuple(k), f)]


_KERNEL_TEXT = {
    (0, 0): "a (x) (w, z) -> a (x) (z, w)",
    (1, 0): "u1^m u2^n -> (-1)^m u1^m u2^n",
    (0, 1): "u1^m u2^n -> (-1)^n u1^m u2^n",
    (1, 1): "u1^m u2^n -> (-1)^(mn) u1^m u2^n  (m + n even)",
}


def kernel_action(j: SpinStructure) -> KernelAction:
    if j.n == 2:
        return KernelAction(j, _KERNEL_TEXT[j.j])
    X = sorted(j.twist_set)
    if not X:
        return KernelAction(j, "fiber swap")
    return KernelAction(j, f"u^k -> (-1)^(k_{X[0] + 1}) u^k")


def lift_phases(j: SpinStructure, s: Sequence[float]) -> tuple[complex, complex]:
    """The two spinor phases lifting the translation by angles s (radians)."""
    _require_n2(j)
    base = cmath.exp(-0.5j * (j.j[0] * s[0] + j.j[1] * s[1]))
    return (base, -base)


def group_GX(X: Iterable[int], n: int) -> list[tuple[int, ...]]:
    """Sign vectors trivial off X with product 1 (X 0-based)."""
    X = sorted(set(X))
    if any(i < 0 or i >= n for i in X):
        raise ValueError(f"twist set {X} out of range for N = {n}")
    out = []
    for signs in itertools.product((1, -1), repeat=len(X)):
        if math.prod(signs) != 1:
            continue
        eps = [1] * n
        for i, s in zip(X, signs):
            eps[i] = s
        out.append(tuple(eps))
    return out


def is_fixed_monomial(m: Sequence[int], X: Iterable[int]) -> bool:
    parities = {m[i] % 2 for i in X}
    return len(parities) <= 1


def twisted_theta(theta: ThetaMatrix, X: Iterable[int]) -> ThetaMatrix:
    X = set(X)
    n = theta.n
    factors = [
        [1.0 / 2 ** ((k in X) + (l in X)) for l in range(n)] for k in range(n)
    ]
    return theta.scaled(factors)


CoverKey = tuple  # (k: tuple[int, ...], f: int)


@dataclass(frozen=True)
class CoveringAlgebra:
    """Deformed covering algebra attached to (theta, j)."""

    theta: ThetaMatrix
    j: SpinStructure
    theta_tilde: ThetaMatrix
    group: tuple[tuple[int, ...], ...]
    trivial: bool = field(default=False)

    @property
    def n(self) -> int:
        return self.theta.n

    @property
    def twist_set(self) -> frozenset[int]:
        return self.j.twist_set

    @property
    def fibers(self) -> tuple[int, ...]:
        return (0, 1) if self.trivial else (0,)

    def is_basis_key(self, k: Sequence[int], f: int = 0) -> bool:
        if f not in self.fibers:
            return False
        return self.trivial or is_fixed_monomial(k, self.twist_set)

    def mul_keys(self, a: CoverKey, b: CoverKey) -> tuple[complex, CoverKey] | None:
        (k, f), (l, g) = a, b
        if f != g:
            return None
        kl = tuple(x + y for x, y in zip(k, l))
        return self.theta_tilde.cocycle(k, l), (kl, f)

    def star_key(self, a: CoverKey) -> tuple[complex, CoverKey]:
        k, f = a
        neg = tuple(-x for x in k)
        return turn_phase(-self.theta_tilde.cocycle_exponent(neg, k)), (neg, f)

    def weight(self, k: Sequence[int]) -> tuple[float, ...]:
        """Weight of u^k under the canonical covering-torus action (in T^N units)."""
        X = self.twist_set
        return tuple(x / 2 if i in X else float(x) for i, x in enumerate(k))

    def embed_key(self, m: Sequence[int]) -> tuple[int, ...]:
        X = self.twist_set
        return tuple(2 * x if i in X else x for i, x in enumerate(m))

    def basis(self, cutoff: int) -> list[CoverKey]:
        """Basis keys with all covering exponents in [-cutoff, cutoff]."""
        out = []
        for k in itertools.product(range(-cutoff, cutoff + 1), repeat=self.n):
            for f in self.fibers:
                if self.is_basis_key(k, f):
                    out.append((k, f))
        return out

    def element(self, terms: Mapping[CoverKey, complex]) -> CoverElement:
        return CoverElement(self, terms)

    def one(self) -> CoverElement:
        zero = (0,) * self.n
        return CoverElement(self, {(zero, f): 1.0 for f in self.fibers})

    def to_json(self) -> dict:
        return {
            "trivial_double": self.trivial,
            "theta": self.theta.to_list(),
            "theta_tilde": self.theta_tilde.to_list(),
            "group": [list(g) for g in self.group],
        }


def deformed_cover(theta: ThetaMatrix, j: SpinStructure) -> CoveringAlgebra:
    if theta.n != j.n:
        raise ValueError(f"theta is {theta.n}x{theta.n} but spin structure has N = {j.n}")
    X = j.twist_set
    if not X:
        return CoveringAlgebra(theta, j, theta, (tuple([1] * j.n),), trivial=True)
    return CoveringAlgebra(theta, j, twisted_theta(theta, X), tuple(group_GX(X, j.n)))


class CoverElement:
    """Finite combination of covering-algebra basis keys."""

    __slots__ = ("algebra", "_terms")

    def __init__(self, algebra: CoveringAlgebra, terms: Mapping[CoverKey, complex] | None = None):
        self.algebra = algebra
        clean: dict = {}
        for (k, f), c in (terms or {}).items():
            key = (tuple(int(x) for x in k), int(f))
            clean[key] = clean.get(key, 0j) + complex(c)
        self._terms = MappingProxyType({k: c for k, c in clean.items() if abs(c) > PRUNE_TOL})

    @property
    def terms(self):
        return self._terms

    def _check(self, other: CoverElement) -> None:
        if self.algebra != other.algebra:
            raise ValueError("elements belong to different covering algebras")

    def __add__(self, other: CoverElement) -> CoverElement:
        self._check(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0j) + c
        return CoverElement(self.algebra, out)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c: complex) -> CoverElement:
        return CoverElement(self.algebra, {k: c * v for k, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        self._check(other)
        alg = self.algebra
        out: dict = {}
        for a, c in self._terms.items():
            for b, d in other._terms.items():
                r = alg.mul_keys(a, b)
                if r is None:
                    continue
                ph, key = r
                out[key] = out.get(key, 0j) + ph * c * d
        return CoverElement(alg, out)

    def star(self) -> CoverElement:
        out = {}
        for a, c in self._terms.items():
            ph, key = self.algebra.star_key(a)
            out[key] = out.get(key, 0j) + ph * c.conjugate()
        return CoverElement(self.algebra, out)

    def in_algebra(self) -> bool:
        return all(self.algebra.is_basis_key(k, f) for k, f in self._terms)

    def group_action(self, eps: Sequence[int]) -> CoverElement:
        flips = [i for i, e in enumerate(eps) if e == -1]
        return CoverElement(
            self.algebra,
            {
                (k, f): (-c if sum(k[i] for i in flips) % 2 else c)
                for (k, f), c in self._terms.items()
            },
        )

    def kernel(self) -> CoverElement:
        act = kernel_action(self.algebra.j)
        out: dict = {}
        for (k, f), c in self._terms.items():
            for coef, k2, f2 in act.on_monomial(k, f):
                out[(k2, f2)] = out.get((k2, f2), 0j) + coef * c
        return CoverElement(self.algebra, out)

    def as_torus(self, fiber: int = 0) -> TorusElement:
        return TorusElement(
            self.algebra.theta_tilde,
            {k: c for (k, f), c in self._terms.items() if f == fiber},
        )

    def distance(self, other: CoverElement) -> float:
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        return max(
            (abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) for k in keys), default=0.0
        )

    def __repr__(self):
        return f"CoverElement({dict(self._terms)!r})"


def embed_cover(a: TorusElement, algebra: CoveringAlgebra) -> CoverElement:
    """Index-2 inclusion of C^inf(T^N_theta) into the covering algebra.

    u_i -> u_i^2 for twisted loops, u_i -> u_i otherwise; the trivial double
    uses the diagonal a -> a (x) (1, 1). No phase correction is needed: the
    doubled exponents exactly compensate the reduced theta~ entries.
    """
    if a.theta != algebra.theta:
        raise ValueError("element theta does not match the covering algebra")
    out = {}
    for m, c in a.terms.items():
        k = algebra.embed_key(m)
        for f in algebra.fibers:
            out[(k, f)] = c
    return CoverElement(algebra, out)


def pullback(x: CoverElement) -> TorusElement | None:
    """Inverse of :func:`embed_cover` on its image; ``None`` if x is not in the image."""
    alg = x.algebra
    X = alg.twist_set
    out = {}
    for (k, f), c in x.terms.items():
        if any(k[i] % 2 for i in X):
            return None
        m = tuple(v // 2 if i in X else v for i, v in enumerate(k))
        if alg.trivial:
            other = x.terms.get((k, 1 - f), 0j)
            if abs(other - c) > 1e-12:
                return None
        out[m] = c
    return TorusElement(alg.theta, out)


def _image_box(algebra: CoveringAlgebra, cutoff: int) -> list[tuple[int, ...]]:
    """theta-monomials whose embedded exponents lie in [-cutoff, cutoff]."""
    X = algebra.twist_set
    ranges = [
        range(-(cutoff // 2), cutoff // 2 + 1) if i in X else range(-cutoff, cutoff + 1)
        for i in range(algebra.n)
    ]
    return list(itertools.product(*ranges))


def z2prime_fixed_check(j: SpinStructure, cutoff: int = 6, theta: ThetaMatrix | None = None) -> dict:
    """Compare the Z_2'-fixed subspace with the embedded image, grade by grade.

    Both sides are computed per covering grade k: the kernel generator is a
    1x1 or 2x2 matrix on the span of the basis keys with that grade, and its
    +1 eigenspace is compared to the span of the embedded theta-monomials.
    """
    theta = theta if theta is not None else ThetaMatrix.zeros(j.n)
    alg = deformed_cover(theta, j)
    act = kernel_action(j)
    basis = alg.basis(cutoff)
    grades: dict[tuple[int, ...], list[int]] = {}
    for k, f in basis:
        grades.setdefault(k, []).append(f)

    image: dict[tuple[int, ...], list[np.ndarray]] = {}
    for m in _image_box(alg, cutoff):
        e = embed_cover(TorusElement(theta, {m: 1.0}), alg)
        for k in {key[0] for key in e.terms}:
            fibers = grades[k]
            image.setdefault(k, []).append(
                np.array([e.terms.get((k, f), 0j) for f in fibers])
            )

    fixed_dim = 0
    image_dim = 0
    ok = True
    for k, fibers in grades.items():
        d = len(fibers)
        A = np.zeros((d, d), dtype=complex)
        for col, f in enumerate(fibers):
            for coef, k2, f2 in act.on_monomial(k, f):
                A[fibers.index(f2), col] += coef
        # fixed subspace = null space of A - I
        _, s, vh = np.linalg.svd(A - np.eye(d))
        null = vh[np.sum(s > 1e-12):].conj()
        fd = null.shape[0]
        vecs = image.get(k, [])
        imd = int(np.linalg.matrix_rank(np.array(vecs), tol=1e-12)) if vecs else 0
        fixed_dim += fd
        image_dim += imd
        if fd != imd:
            ok = False
            continue
        if fd:
            joint = np.vstack([null] + vecs)
            if np.linalg.matrix_rank(joint, tol=1e-12) != fd:
                ok = False
    return {
        "spin": list(j.j),
        "cutoff": cutoff,
        "total_monomials": len(basis),
        "fixed_dim": fixed_dim,
        "image_dim": image_dim,
        "pass": ok,
    }


def index_cosets(algebra: CoveringAlgebra, cutoff: int) -> int:
    """Number of classes of covering basis keys modulo the embedded image grading.

    Keys (k, f) and (k', f') are in the same class when u^k is a multiple of
    u^k' times an image monomial; for the trivial double the fiber label is
    the class. An index-2 subalgebra gives exactly 2.
    """
    X = algebra.twist_set
    if algebra.trivial:
        return len({f for _, f in algebra.basis(cutoff)})
    classes = {tuple(k[i] % 2 for i in sorted(X)) for k, _ in algebra.basis(cutoff)}
    return len(classes)
