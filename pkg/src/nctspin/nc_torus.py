"""Smooth noncommutative torus C^inf(T^N_theta), restricted to finitely supported elements.

Basis monomials are normal ordered, ``u^m = u_1^{m_1} ... u_N^{m_N}``, and
multiply through the cocycle

    u^m * u^n = exp(2 pi i sum_{k>l} theta[k][l] m_k n_l) u^{m+n}

so that for N = 2 with ``theta[1][0] = t`` one has ``u_2 u_1 = e^{2 pi i t} u_1 u_2``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

PRUNE_TOL = 1e-15
_INT64_MAX = 2**63 - 1

Monomial = tuple  # tuple[int, ...]


class ThetaMismatchError(ValueError):
    pass


def _check_exponents(m: Sequence[int]) -> tuple[int, ...]:
    out = tuple(int(x) for x in m)
    for x in out:
        if abs(x) > _INT64_MAX:
            raise OverflowError(f"exponent {x} exceeds 64-bit range")
    return out


@dataclass(frozen=True)
class ThetaMatrix:
    """Real skew-symmetric deformation matrix (entries in units of full turns)."""

    entries: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(float(x) for x in row) for row in self.entries)
        n = len(rows)
        if n < 1:
            raise ValueError("theta must be at least 1x1")
        for k, row in enumerate(rows):
            if len(row) != n:
                raise ValueError("theta must be square")
            if row[k] != 0.0:
                raise ValueError(f"theta[{k}][{k}] must be 0")
            for l in range(k):
                if row[l] != -rows[l][k]:
                    raise ValueError(f"theta is not skew-symmetric at ({k}, {l})")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def scalar(cls, t: float) -> ThetaMatrix:
        """N = 2 matrix with theta[1][0] = t (so u_2 u_1 = e^{2 pi i t} u_1 u_2)."""
        t = float(t)
        return cls(((0.0, -t), (t, 0.0)))

    @classmethod
    def zeros(cls, n: int) -> ThetaMatrix:
        return cls(tuple((0.0,) * n for _ in range(n)))

    @classmethod
    def from_lower(cls, n: int, lower: Mapping[tuple[int, int], float]) -> ThetaMatrix:
        """Build from entries theta[k][l], k > l (0-based)."""
        rows = [[0.0] * n for _ in range(n)]
        for (k, l), v in lower.items():
            if k <= l:
                raise ValueError("from_lower expects k > l")
            rows[k][l] = float(v)
            rows[l][k] = -float(v)
        return cls(tuple(tuple(r) for r in rows))

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, kl: tuple[int, int]) -> float:
        k, l = kl
        return self.entries[k][l]

    def scaled(self, factors: Sequence[Sequence[float]]) -> ThetaMatrix:
        return ThetaMatrix(
            tuple(
                tuple(self.entries[k][l] * factors[k][l] for l in range(self.n))
                for k in range(self.n)
            )
        )

    def to_list(self) -> list[list[float]]:
        return [list(r) for r in self.entries]

    def cocycle_exponent(self, m: Sequence[int], n: Sequence[int]) -> float:
        """sum_{k>l} theta[k][l] m_k n_l, the phase of u^m * u^n in full turns."""
        s = 0.0
        rows = self.entries
        for k in range(1, len(rows)):
            mk = m[k]
            if mk:
                row = rows[k]
                for l in range(k):
                    if n[l]:
                        s += row[l] * mk * n[l]
        return s

    def cocycle(self, m: Sequence[int], n: Sequence[int]) -> complex:
        return turn_phase(self.cocycle_exponent(m, n))


def turn_phase(x: float) -> complex:
    """exp(2 pi i x), reducing x modulo 1 first to keep the phase accurate."""
    x = x - math.floor(x)
    if x == 0.0:
        return 1.0 + 0.0j
    return cmath.exp(2j * math.pi * x)


class TorusElement:
    """Finite sum of normal-ordered monomials with complex coefficients.

    Immutable. Arithmetic operators: ``+``, ``-``, ``*`` (star product, or
    scalar multiplication when one side is a number).
    """

    __slots__ = ("theta", "_terms")

    def __init__(self, theta: ThetaMatrix, terms: Mapping[Iterable[int], complex] | None = None):
        self.theta = theta
        clean: dict[tuple[int, ...], complex] = {}
        for m, c in (terms or {}).items():
            m = _check_exponents(m)
            if len(m) != theta.n:
                raise ValueError(f"monomial {m} has length {len(m)}, expected {theta.n}")
            clean[m] = clean.get(m, 0j) + complex(c)
        self._terms = MappingProxyType(
            {m: c for m, c in clean.items() if abs(c) > PRUNE_TOL}
        )

    @property
    def terms(self) -> Mapping[tuple[int, ...], complex]:
        return self._terms

    @property
    def n(self) -> int:
        return self.theta.n

    def support(self) -> set[tuple[int, ...]]:
        return set(self._terms)

    def coefficient(self, m: Iterable[int]) -> complex:
        return self._terms.get(tuple(m), 0j)

    def is_zero(self) -> bool:
        return not self._terms

    def _same_theta(self, other: TorusElement) -> None:
        if self.theta != other.theta:
            raise ThetaMismatchError("elements live over different theta matrices")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = identity(self.theta, other)
        self._same_theta(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0j) + c
        return TorusElement(self.theta, out)

    __radd__ = __add__

    def __neg__(self):
        return TorusElement(self.theta, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: complex) -> TorusElement:
        return TorusElement(self.theta, {m: c * v for m, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return star_product(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return NotImplemented

    def star(self) -> TorusElement:
        return involution(self)

    def __pow__(self, k: int) -> TorusElement:
        if k < 0:
            return involution(self) ** (-k)
        out = identity(self.theta)
        for _ in range(k):
            out = out * self
        return out

    def distance(self, other: TorusElement) -> float:
        """Max coefficient difference (l-infinity on the coefficient sequence)."""
        self._same_theta(other)
        keys = set(self._terms) | set(other._terms)
        return max((abs(self.coefficient(m) - other.coefficient(m)) for m in keys), default=0.0)

    def allclose(self, other: TorusElement, tol: float = 1e-12) -> bool:
        return self.distance(other) <= tol

    def __eq__(self, other):
        if not isinstance(other, TorusElement):
            return NotImplemented
        return self.theta == other.theta and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash((self.theta, frozenset(self._terms.items())))

    def __repr__(self):
        if not self._terms:
            return "TorusElement(0)"
        parts = [f"({c:.6g})u^{m}" for m, c in sorted(self._terms.items())]
        return "TorusElement(" + " + ".join(parts) + ")"

    def to_json(self) -> dict:
        return {
            "theta": self.theta.to_list(),
            "terms": [
                {"m": list(m), "re": c.real, "im": c.imag}
                for m, c in sorted(self._terms.items())
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data: Mapping) -> TorusElement:
        theta = ThetaMatrix(tuple(tuple(r) for r in data["theta"]))
        return cls(theta, {tuple(t["m"]): complex(t["re"], t["im"]) for t in data["terms"]})

    @classmethod
    def loads(cls, s: str) -> TorusElement:
        return cls.from_json(json.loads(s))


def monomial(theta: ThetaMatrix, m: Sequence[int], c: complex = 1.0) -> TorusElement:
    if len(m) != theta.n:
        raise ValueError(f"monomial {tuple(m)} has length {len(m)}, expected {theta.n}")
    return TorusElement(theta, {tuple(m): c})


def identity(theta: ThetaMatrix, c: complex = 1.0) -> TorusElement:
    return monomial(theta, (0,) * theta.n, c)


def generator(theta: ThetaMatrix, k: int) -> TorusElement:
    """u_{k+1} (0-based index k)."""
    m = [0] * theta.n
    m[k] = 1
    return monomial(theta, m)


def star_product(a: TorusElement, b: TorusElement) -> TorusElement:
    a._same_theta(b)
    theta = a.theta
    out: dict[tuple[int, ...], complex] = {}
    for m, c in a.terms.items():
        for n, d in b.terms.items():
            mn = tuple(x + y for x, y in zip(m, n))
            out[mn] = out.get(mn, 0j) + theta.cocycle(m, n) * c * d
    return TorusElement(theta, out)


def involution(a: TorusElement) -> TorusElement:
    # (u^m)^* = cocycle(-m, m)^{-1} u^{-m}, so that (u^m)^* u^m = 1
    theta = a.theta
    out = {}
    for m, c in a.terms.items():
        neg = tuple(-x for x in m)
        out[neg] = c.conjugate() * turn_phase(-theta.cocycle_exponent(neg, m))
    return TorusElement(theta, out)


def grade_decompose(a: TorusElement) -> dict[tuple[int, ...], TorusElement]:
    return {m: TorusElement(a.theta, {m: c}) for m, c in a.terms.items()}


def sign_action(a: TorusElement, eps: Sequence[int]) -> TorusElement:
    """u^k -> (prod_i eps_i^{k_i}) u^k; eps is a vector of +-1."""
    if len(eps) != a.n:
        raise ValueError(f"sign vector has length {len(eps)}, expected {a.n}")
    if any(e not in (1, -1) for e in eps):
        raise ValueError("sign vector entries must be +1 or -1")
    flips = [i for i, e in enumerate(eps) if e == -1]
    out = {}
    for m, c in a.terms.items():
        odd = sum(m[i] for i in flips) % 2
        out[m] = -c if odd else c
    return TorusElement(a.theta, out)


def commutative_product(a: TorusElement, b: TorusElement) -> TorusElement:
    """Convolution of coefficient sequences, ignoring theta (the theta = 0 product)."""
    out: dict[tuple[int, ...], complex] = {}
    for m, c in a.terms.items():
        for n, d in b.terms.items():
            mn = tuple(x + y for x, y in zip(m, n))
            out[mn] = out.get(mn, 0j) + c * d
    return TorusElement(a.theta, out)


def random_element(theta: ThetaMatrix, rng, support: int = 5, max_exp: int = 3) -> TorusElement:
    """Random element with up to ``support`` terms, exponents in [-max_exp, max_exp]."""
    terms = {}
    for _ in range(support):
        m = tuple(int(x) for x in rng.integers(-max_exp, max_exp + 1, size=theta.n))
        terms[m] = complex(rng.normal(), rng.normal())
    return TorusElement(theta, terms)


def random_theta(n: int, rng) -> ThetaMatrix:
    lower = {(k, l): float(rng.uniform(-1.0, 1.0)) for k in range(n) for l in range(k)}
    return ThetaMatrix.from_lower(n, lower)
