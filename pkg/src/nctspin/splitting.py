"""Splitting realization M_theta = (M x T^N_theta) / T^N for M = T^N, and the spinor bimodule.

The tensor algebra C^inf(T^N) (x) C^inf(T^N_theta) has basis z^a (x) u^b and
the torus acts with weight a - b; its fixed points are spanned by
z^m (x) u^m = kappa(u^m).

For spinors on T^2 the second factor is the deformed covering algebra of the
spin structure. A spinor mode m has weight p = m + j/2, a covering monomial
u^k has weight k_i / 2 on twisted loops and k_i elsewhere, and the deck
generator acts by -1 on spinors, so invariant vectors must be odd under the
dual deck action as well.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .nc_torus import PRUNE_TOL, ThetaMatrix, TorusElement, turn_phase
from .spectral import CHARGE_CONJ, clifford, momentum, spectrum
from .spin_cover import (
    CoverElement,
    CoveringAlgebra,
    SpinStructure,
    deformed_cover,
    kernel_action,
    pullback,
)


class WeightedTensorElement:
    """Finite sum of c z^a (x) u^b; commutative in z, star product in u."""

    __slots__ = ("theta", "_terms")

    def __init__(self, theta: ThetaMatrix, terms: Mapping[tuple, complex] | None = None):
        self.theta = theta
        clean: dict = {}
        for (a, b), c in (terms or {}).items():
            key = (tuple(int(x) for x in a), tuple(int(x) for x in b))
            if len(key[0]) != theta.n or len(key[1]) != theta.n:
                raise ValueError("grade length does not match theta")
            clean[key] = clean.get(key, 0j) + complex(c)
        self._terms = MappingProxyType({k: c for k, c in clean.items() if abs(c) > PRUNE_TOL})

    @property
    def terms(self):
        return self._terms

    def __add__(self, other):
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0j) + c
        return WeightedTensorElement(self.theta, out)

    def __mul__(self, other: WeightedTensorElement) -> WeightedTensorElement:
        if self.theta != other.theta:
            raise ValueError("theta mismatch")
        out: dict = {}
        for (a, b), c in self._terms.items():
            for (a2, b2), d in other._terms.items():
                key = (
                    tuple(x + y for x, y in zip(a, a2)),
                    tuple(x + y for x, y in zip(b, b2)),
                )
                out[key] = out.get(key, 0j) + self.theta.cocycle(b, b2) * c * d
        return WeightedTensorElement(self.theta, out)

    def star(self) -> WeightedTensorElement:
        out = {}
        for (a, b), c in self._terms.items():
            nb = tuple(-x for x in b)
            out[(tuple(-x for x in a), nb)] = c.conjugate() * turn_phase(
                -self.theta.cocycle_exponent(nb, b)
            )
        return WeightedTensorElement(self.theta, out)

    def is_fixed(self) -> bool:
        """Invariant under alpha* (x) beta^{-1}: every term has weight a - b = 0."""
        return all(a == b for a, b in self._terms)

    def evaluate_left(self, angles: Sequence[float]) -> TorusElement:
        """Evaluate the commutative factor at the point (e^{i s_1}, ..., e^{i s_N})."""
        out: dict = {}
        for (a, b), c in self._terms.items():
            z = complex(np.exp(1j * sum(x * s for x, s in zip(a, angles))))
            out[b] = out.get(b, 0j) + z * c
        return TorusElement(self.theta, out)

    def distance(self, other: WeightedTensorElement) -> float:
        keys = set(self._terms) | set(other._terms)
        return max(
            (abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) for k in keys), default=0.0
        )


def kappa(a: TorusElement) -> WeightedTensorElement:
    return WeightedTensorElement(a.theta, {(m, m): c for m, c in a.terms.items()})


def kappa_inverse(w: WeightedTensorElement) -> TorusElement:
    if not w.is_fixed():
        raise ValueError("element is not in the fixed-point subalgebra")
    return TorusElement(w.theta, {b: c for (_, b), c in w.terms.items()})


def fixed_point_basis(n: int, cutoff: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All (a, b) in [-cutoff, cutoff]^N x [-cutoff, cutoff]^N with a - b = 0, by enumeration."""
    box = list(itertools.product(range(-cutoff, cutoff + 1), repeat=n))
    return [(a, b) for a in box for b in box if all(x == y for x, y in zip(a, b))]


def kappa_surjects(theta: ThetaMatrix, cutoff: int) -> bool:
    fixed = set(fixed_point_basis(theta.n, cutoff))
    image = set()
    for m in itertools.product(range(-cutoff, cutoff + 1), repeat=theta.n):
        image |= set(kappa(TorusElement(theta, {m: 1.0})).terms)
    return fixed == image


# --- spinor bimodule over T^2 -------------------------------------------------

SpinorKey = tuple  # (mode m, spinor component s, covering key (k, f))


def half_theta_cover(theta: ThetaMatrix) -> CoveringAlgebra:
    """The T^2_{theta/2} prescription with untwisted weights, as used for the trivial spin structure."""
    n = theta.n
    half = theta.scaled([[0.5] * n for _ in range(n)])
    return CoveringAlgebra(theta, SpinStructure((0,) * n), half, (tuple([1] * n),), trivial=False)


class SpinorBimodule:
    """Invariant part of (spinor modes) (x) (covering algebra) for T^2.

    ``impose_kernel`` adds the deck-group parity condition; it is switched off
    only for the theta/2 prescription, which has no deck group.
    """

    def __init__(self, j: SpinStructure, theta: float | ThetaMatrix, cutoff: int = 4,
                 algebra: CoveringAlgebra | None = None, impose_kernel: bool = True):
        if j.n != 2:
            raise ValueError("the spinor bimodule is implemented for T^2 only")
        if cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        theta = theta if isinstance(theta, ThetaMatrix) else ThetaMatrix.scalar(theta)
        self.j = j
        self.theta = theta
        self.cutoff = cutoff
        self.algebra = algebra if algebra is not None else deformed_cover(theta, j)
        self.impose_kernel = impose_kernel
        self._fibers: dict[tuple[int, int], dict] = {}

    def modes(self, cutoff: int | None = None) -> list[tuple[int, int]]:
        c = self.cutoff if cutoff is None else cutoff
        return [(a, b) for a in range(-c, c + 1) for b in range(-c, c + 1)]

    def spinor_weight(self, m) -> tuple[float, float]:
        return momentum(self.j, m)

    def matching_exponent(self, m) -> tuple[int, ...] | None:
        """The covering exponent k with weight(k) == spinor weight of m, if any."""
        X = self.algebra.twist_set
        k = []
        for i, p in enumerate(self.spinor_weight(m)):
            v = 2 * p if i in X else p
            if v != int(v):
                return None
            k.append(int(v))
        return tuple(k)

    def fiber_vector(self, m) -> dict:
        """Normalized invariant covering-algebra vector paired with spinor mode m."""
        if m in self._fibers:
            return self._fibers[m]
        k = self.matching_exponent(m)
        keys = [(k, f) for f in self.algebra.fibers if k is not None and self.algebra.is_basis_key(k, f)]
        vec: dict = {}
        if keys and self.impose_kernel:
            act = kernel_action(self.algebra.j)
            d = len(keys)
            A = np.zeros((d, d), dtype=complex)
            for col, (kk, f) in enumerate(keys):
                for coef, k2, f2 in act.on_monomial(kk, f):
                    A[keys.index((k2, f2)), col] += coef
            # deck generator acts by -1 on spinors
            _, s, vh = np.linalg.svd(A + np.eye(d))
            null = vh[np.sum(s > 1e-12):].conj()
            if null.shape[0] > 1:
                raise RuntimeError("invariant fiber is not one-dimensional")
            if null.shape[0] == 1:
                v = null[0]
                lead = v[np.flatnonzero(np.abs(v) > 1e-12)[0]]
                v = v / lead
                vec = {key: complex(np.round(x.real, 15) + 1j * np.round(x.imag, 15))
                       for key, x in zip(keys, v) if abs(x) > 1e-12}
        elif keys:
            vec = {keys[0]: 1.0}
        self._fibers[m] = vec
        return vec

    def basis_element(self, m, s: int) -> SpinorBimoduleElement:
        return SpinorBimoduleElement(
            self, {(tuple(m), s, key): c for key, c in self.fiber_vector(tuple(m)).items()}
        )

    def basis(self, cutoff: int | None = None) -> list[SpinorBimoduleElement]:
        out = []
        for m in self.modes(cutoff):
            if self.fiber_vector(m):
                out.extend(self.basis_element(m, s) for s in (0, 1))
        return out

    def generators(self) -> tuple[SpinorBimoduleElement, SpinorBimoduleElement]:
        return (self.basis_element((0, 0), 0), self.basis_element((0, 0), 1))

    def embed(self, a: TorusElement) -> CoverElement:
        from .spin_cover import embed_cover

        return embed_cover(a, self.algebra)

    def coordinates(self, x: SpinorBimoduleElement, m) -> np.ndarray:
        """Coefficients of x at mode m in the basis (basis_element(m, 0), basis_element(m, 1))."""
        vec = self.fiber_vector(tuple(m))
        lhs = []
        rhs = []
        for s in (0, 1):
            for key, c in vec.items():
                row = [0j, 0j]
                row[s] = c
                lhs.append(row)
                rhs.append(x.terms.get((tuple(m), s, key), 0j))
        sol, *_ = np.linalg.lstsq(np.array(lhs), np.array(rhs), rcond=None)
        return sol


class SpinorBimoduleElement:
    __slots__ = ("module", "_terms")

    def __init__(self, module: SpinorBimodule, terms: Mapping[SpinorKey, complex] | None = None):
        self.module = module
        clean: dict = {}
        for (m, s, key), c in (terms or {}).items():
            k = (tuple(m), int(s), (tuple(key[0]), int(key[1])))
            clean[k] = clean.get(k, 0j) + complex(c)
        self._terms = MappingProxyType({k: c for k, c in clean.items() if abs(c) > PRUNE_TOL})

    @property
    def terms(self):
        return self._terms

    def __add__(self, other):
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0j) + c
        return SpinorBimoduleElement(self.module, out)

    def scale(self, c: complex) -> SpinorBimoduleElement:
        return SpinorBimoduleElement(self.module, {k: c * v for k, v in self._terms.items()})

    def __sub__(self, other):
        return self + other.scale(-1)

    def modes(self) -> set:
        return {m for m, _, _ in self._terms}

    def is_invariant(self) -> bool:
        """Spinor weight equals covering weight on every term (and deck parity, if imposed)."""
        mod = self.module
        alg = mod.algebra
        for m, _, (k, _) in self._terms:
            if tuple(mod.spinor_weight(m)) != alg.weight(k):
                return False
        if mod.impose_kernel:
            act = kernel_action(alg.j)
            flipped: dict = {}
            for (m, s, (k, f)), c in self._terms.items():
                for coef, k2, f2 in act.on_monomial(k, f):
                    key = (m, s, (k2, f2))
                    flipped[key] = flipped.get(key, 0j) + coef * c
            # spinor factor contributes -1
            keys = set(flipped) | set(self._terms)
            if any(abs(flipped.get(k, 0j) + self._terms.get(k, 0j)) > 1e-12 for k in keys):
                return False
        return True

    def distance(self, other: SpinorBimoduleElement) -> float:
        keys = set(self._terms) | set(other._terms)
        return max(
            (abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) for k in keys), default=0.0
        )


def right_action(x: SpinorBimoduleElement, a: TorusElement) -> SpinorBimoduleElement:
    """(psi (x) t) . a = (psi z^n) (x) (t * embed(u^n)), summed over the terms of a."""
    mod = x.module
    alg = mod.algebra
    out: dict = {}
    for n, c in a.terms.items():
        ek = alg.embed_key(n)
        for (m, s, key), d in x.terms.items():
            for f in alg.fibers:
                r = alg.mul_keys(key, (ek, f))
                if r is None:
                    continue
                ph, key2 = r
                target = ((m[0] + n[0], m[1] + n[1]), s, key2)
                out[target] = out.get(target, 0j) + ph * c * d
    return SpinorBimoduleElement(mod, out)


def left_action(a: TorusElement, x: SpinorBimoduleElement) -> SpinorBimoduleElement:
    """a . (psi (x) t) = (z^n psi) (x) (embed(u^n) * t)."""
    mod = x.module
    alg = mod.algebra
    out: dict = {}
    for n, c in a.terms.items():
        ek = alg.embed_key(n)
        for (m, s, key), d in x.terms.items():
            for f in alg.fibers:
                r = alg.mul_keys((ek, f), key)
                if r is None:
                    continue
                ph, key2 = r
                target = ((m[0] + n[0], m[1] + n[1]), s, key2)
                out[target] = out.get(target, 0j) + ph * c * d
    return SpinorBimoduleElement(mod, out)


def dirac_theta(x: SpinorBimoduleElement) -> SpinorBimoduleElement:
    """D (x) I restricted to the invariant space."""
    mod = x.module
    out: dict = {}
    for (m, s, key), c in x.terms.items():
        col = clifford(mod.spinor_weight(m))[:, s]
        for s2 in (0, 1):
            k2 = (m, s2, key)
            out[k2] = out.get(k2, 0j) + col[s2] * c
    return SpinorBimoduleElement(mod, out)


def apply_spinor_matrix(x: SpinorBimoduleElement, A: np.ndarray) -> SpinorBimoduleElement:
    out: dict = {}
    for (m, s, key), c in x.terms.items():
        for s2 in (0, 1):
            k2 = (m, s2, key)
            out[k2] = out.get(k2, 0j) + A[s2, s] * c
    return SpinorBimoduleElement(x.module, out)


def real_structure_theta(x: SpinorBimoduleElement) -> SpinorBimoduleElement:
    """J~(psi (x) t) = J psi (x) t^*."""
    mod = x.module
    j1, j2 = mod.j.j
    out: dict = {}
    for (m, s, key), c in x.terms.items():
        ph, key2 = mod.algebra.star_key(key)
        m2 = (-m[0] - j1, -m[1] - j2)
        for s2 in (0, 1):
            k2 = (m2, s2, key2)
            out[k2] = out.get(k2, 0j) + CHARGE_CONJ[s2, s] * c.conjugate() * ph
    return SpinorBimoduleElement(mod, out)


def hermitian_pairing(x: SpinorBimoduleElement, y: SpinorBimoduleElement) -> TorusElement:
    """(psi (x) t, psi' (x) t') = (psi, psi') (x) t^* t', pulled back to C^inf(T^2_theta).

    The spinor inner product of Fourier modes m, m' is z^{m' - m}; the result is
    invariant, so its covering part at grade z^n is a multiple of embed(u^n).
    """
    if x.module.j != y.module.j or x.module.theta != y.module.theta:
        raise ValueError("pairing needs elements of the same bimodule")
    alg = x.module.algebra
    acc: dict[tuple[int, int], dict] = {}
    for (m, s, key), c in x.terms.items():
        ph_star, kstar = alg.star_key(key)
        for (m2, s2, key2), d in y.terms.items():
            if s != s2:
                continue
            r = alg.mul_keys(kstar, key2)
            if r is None:
                continue
            ph, k = r
            n = (m2[0] - m[0], m2[1] - m[1])
            slot = acc.setdefault(n, {})
            slot[k] = slot.get(k, 0j) + c.conjugate() * ph_star * ph * d
    out: dict = {}
    for n, cover_terms in acc.items():
        a = pullback(CoverElement(alg, cover_terms))
        if a is None:
            raise ArithmeticError(f"pairing at grade {n} left the image of the algebra")
        for mm, c in a.terms.items():
            if tuple(mm) != n:
                raise ArithmeticError(f"pairing grade {n} does not match algebra grade {mm}")
            out[n] = out.get(n, 0j) + c
    return TorusElement(alg.theta, out)


def freeness_ranks(mod: SpinorBimodule, cutoff: int | None = None) -> dict:
    """Per-mode check that {e_0 . u^m, e_1 . u^m} is a basis of the invariant space at mode m."""
    e0, e1 = mod.generators()
    bad = []
    total = 0
    for m in mod.modes(cutoff):
        inv_dim = 2 if mod.fiber_vector(m) else 0
        u = TorusElement(mod.theta, {m: 1.0})
        cols = []
        for e in (e0, e1):
            y = right_action(e, u)
            if not y.is_invariant() or y.modes() - {m}:
                bad.append(m)
            cols.append(mod.coordinates(y, m) if inv_dim else np.zeros(2))
        M = np.column_stack(cols)
        rank = int(np.linalg.matrix_rank(M, tol=1e-12))
        # reconstruct y from coordinates to make sure the lstsq fit is exact
        for e, col in zip((e0, e1), cols):
            y = right_action(e, u)
            rebuilt = mod.basis_element(m, 0).scale(col[0]) + mod.basis_element(m, 1).scale(col[1])
            if rebuilt.distance(y) > 1e-12:
                bad.append(m)
        total += rank
        if rank != inv_dim or inv_dim != 2:
            bad.append(m)
    return {"rank": 2, "modes": len(mod.modes(cutoff)), "total_rank": total, "free": not bad}


def module_spectrum(mod: SpinorBimodule, radius: float) -> list[tuple[float, int]]:
    """Eigenvalues of D_theta on invariant modes with |p| <= radius, aggregated like :func:`spectrum`."""
    if radius > mod.cutoff:
        raise ValueError("radius exceeds module cutoff")
    counts: dict[float, int] = {}
    for m in mod.modes():
        p = mod.spinor_weight(m)
        if 4 * (p[0] ** 2 + p[1] ** 2) > math.floor(4 * radius * radius + 1e-9):
            continue
        if not mod.fiber_vector(m):
            continue
        cols = [mod.coordinates(dirac_theta(mod.basis_element(m, s)), m) for s in (0, 1)]
        ev = np.linalg.eigvalsh(np.column_stack(cols))
        for v in ev:
            key = round(float(v), 12) + 0.0
            counts[key] = counts.get(key, 0) + 1
    return sorted(counts.items())


def spinor_bimodule_basis(j: SpinStructure, theta: float, cutoff: int = 4) -> dict:
    mod = SpinorBimodule(j, theta, cutoff)
    basis = mod.basis()
    gens = mod.generators()
    fr = freeness_ranks(mod)
    radius = cutoff - 1 if cutoff > 1 else 0.5
    ref = [(round(v, 12) + 0.0, c) for v, c in spectrum(j, radius)]
    return {
        "spin": list(j.j),
        "theta": theta,
        "cutoff": cutoff,
        "covering": mod.algebra.to_json(),
        "basis_size": len(basis),
        "generators": [_element_json(g) for g in gens],
        "free_rank": 2 if fr["free"] else None,
        "free": fr["free"],
        "all_invariant": all(b.is_invariant() for b in basis),
        "dirac_spectrum_matches": module_spectrum(mod, radius) == ref,
    }


def _element_json(x: SpinorBimoduleElement) -> list:
    return [
        {"mode": list(m), "spinor": s, "k": list(key[0]), "fiber": key[1], "re": c.real, "im": c.imag}
        for (m, s, key), c in sorted(x.terms.items())
    ]


# --- the theta/2 puzzle ------------------------------------------------------

def _translation_phase(mod: SpinorBimodule) -> complex:
    """Commutation phase t_2 t_1 (t_1 t_2)^{-1} of the module translations along the two loops."""
    alg = mod.algebra
    base = CoverElement(alg, mod.fiber_vector((0, 0))).star()
    t = [base * CoverElement(alg, mod.fiber_vector(m)) for m in ((1, 0), (0, 1))]
    a = (t[1] * t[0]).terms
    b = (t[0] * t[1]).terms
    key = next(iter(a))
    return a[key] / b[key]


def _order(z: complex, max_order: int, tol: float = 1e-9) -> int | None:
    w = 1.0 + 0j
    for k in range(1, max_order + 1):
        w *= z
        if abs(w - 1) < tol:
            return k
    return None


def _in_subgroup(z: complex, gen: complex, bound: int, tol: float = 1e-9) -> bool:
    w = 1.0 + 0j
    winv = 1.0 + 0j
    if abs(z - 1) < tol:
        return True
    for _ in range(bound):
        w *= gen
        winv /= gen
        if abs(w - z) < tol or abs(winv - z) < tol:
            return True
    return False


def puzzle_report(theta: float, max_order: int = 1000) -> dict:
    """Compare the theta/2 prescription with the trivial double for the trivial spin structure."""
    th = ThetaMatrix.scalar(theta)
    j = SpinStructure((0, 0))
    half = SpinorBimodule(j, th, cutoff=1, algebra=half_theta_cover(th), impose_kernel=False)
    correct = SpinorBimodule(j, th, cutoff=1)
    za = _translation_phase(half)
    zb = _translation_phase(correct)
    a_in_b = _in_subgroup(za, zb, max_order)
    b_in_a = _in_subgroup(zb, za, max_order)
    same = a_in_b and b_in_a
    index = None
    if not same and b_in_a and abs(za * za - zb) < 1e-9:
        index = 2
    return {
        "theta": theta,
        "half_theta_prescription": {
            "coefficient_theta": half.algebra.theta_tilde[1, 0],
            "phase": [za.real, za.imag],
            "order": _order(za, max_order),
        },
        "trivial_double": {
            "coefficient_theta": correct.algebra.theta_tilde[1, 0],
            "phase": [zb.real, zb.imag],
            "order": _order(zb, max_order),
        },
        "same_phase_group": same,
        "index_of_correct_in_prescription": index,
        "discrepancy": not same,
    }
