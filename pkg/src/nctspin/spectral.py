"""Flat Dirac spectral triple on T^2 for the four spin structures, and its theta-deformation.

Spinors are finitely supported functions Z^2 -> C^2. Fourier mode m of the
spin structure j carries momentum p = m + j/2, and

    D = p_1 sigma_1 + p_2 sigma_2,   gamma = sigma_3,
    (J psi)(m) = sigma_2 conj(psi(-m - j)).

Operators are sums of terms (n, M): (K psi)(m + n) = M(m) psi(m), so a term
shifting by n has bidegree n. Everything acts exactly on finite supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .nc_torus import TorusElement, turn_phase
from .spin_cover import SpinStructure

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
CHARGE_CONJ = SIGMA2
EYE2 = np.eye(2, dtype=complex)

Mode = tuple  # tuple[int, int]
Multiplier = Callable[[Mode], np.ndarray]


def _require_n2(j: SpinStructure) -> None:
    if j.n != 2:
        raise ValueError("the spectral triple is implemented for T^2 only")


def momentum(j: SpinStructure, m: Mode) -> tuple[float, float]:
    return (m[0] + j.j[0] / 2, m[1] + j.j[1] / 2)


def clifford(p: Sequence[float]) -> np.ndarray:
    return p[0] * SIGMA1 + p[1] * SIGMA2


class ModeSpinor:
    """Finitely supported spinor; values are length-2 complex arrays keyed by mode."""

    __slots__ = ("j", "values")

    def __init__(self, j: SpinStructure, values: Mapping[Mode, Sequence[complex]] | None = None):
        _require_n2(j)
        self.j = j
        self.values: dict[Mode, np.ndarray] = {}
        for m, v in (values or {}).items():
            v = np.asarray(v, dtype=complex).reshape(2)
            m = (int(m[0]), int(m[1]))
            if m in self.values:
                self.values[m] = self.values[m] + v
            else:
                self.values[m] = v.copy()

    def __add__(self, other: ModeSpinor) -> ModeSpinor:
        out = dict(self.values)
        for m, v in other.values.items():
            out[m] = out[m] + v if m in out else v
        return ModeSpinor(self.j, out)

    def __sub__(self, other: ModeSpinor) -> ModeSpinor:
        return self + other.scale(-1)

    def scale(self, c: complex) -> ModeSpinor:
        return ModeSpinor(self.j, {m: c * v for m, v in self.values.items()})

    def apply_matrix(self, A: np.ndarray) -> ModeSpinor:
        return ModeSpinor(self.j, {m: A @ v for m, v in self.values.items()})

    def norm(self) -> float:
        return math.sqrt(sum(float(np.vdot(v, v).real) for v in self.values.values()))

    def inner(self, other: ModeSpinor) -> complex:
        return complex(
            sum(np.vdot(v, other.values[m]) for m, v in self.values.items() if m in other.values)
        )

    def distance(self, other: ModeSpinor) -> float:
        return (self - other).norm()


def random_spinor(j: SpinStructure, rng, cutoff: int = 3, support: int = 6) -> ModeSpinor:
    vals = {}
    for _ in range(support):
        m = tuple(int(x) for x in rng.integers(-cutoff, cutoff + 1, size=2))
        vals[m] = rng.normal(size=2) + 1j * rng.normal(size=2)
    psi = ModeSpinor(j, vals)
    return psi.scale(1 / psi.norm())


@dataclass(frozen=True)
class OperatorTerm:
    shift: tuple[int, int]
    multiplier: Multiplier

    @property
    def bidegree(self) -> tuple[int, int]:
        return self.shift


class ModeOperator:
    """Linear operator given by finitely many bigraded terms."""

    def __init__(self, j: SpinStructure, terms: Iterable[OperatorTerm]):
        _require_n2(j)
        self.j = j
        self.terms = tuple(terms)

    def __call__(self, psi: ModeSpinor) -> ModeSpinor:
        out: dict[Mode, np.ndarray] = {}
        for t in self.terms:
            n1, n2 = t.shift
            for m, v in psi.values.items():
                target = (m[0] + n1, m[1] + n2)
                w = t.multiplier(m) @ v
                out[target] = out[target] + w if target in out else w
        return ModeSpinor(psi.j, out)

    def bidegrees(self) -> set[tuple[int, int]]:
        return {t.shift for t in self.terms}

    def __add__(self, other: ModeOperator) -> ModeOperator:
        return ModeOperator(self.j, self.terms + other.terms)

    def scale(self, c: complex) -> ModeOperator:
        return ModeOperator(
            self.j, [OperatorTerm(t.shift, _scaled(t.multiplier, c)) for t in self.terms]
        )

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def compose(self, other: ModeOperator) -> ModeOperator:
        """self o other."""
        terms = []
        for t in self.terms:
            for s in other.terms:
                terms.append(OperatorTerm(_add(t.shift, s.shift), _chain(t.multiplier, s)))
        return ModeOperator(self.j, terms)

    __matmul__ = compose

    def adjoint(self) -> ModeOperator:
        return ModeOperator(self.j, [_adjoint_term(t) for t in self.terms])

    def mode_local_norm(self, modes: Iterable[Mode]) -> float:
        """Exact operator norm for a single-shift operator, as a sup over the given modes."""
        shifts = self.bidegrees()
        if len(shifts) > 1:
            raise ValueError("mode-local norm needs an operator with a single bidegree")
        best = 0.0
        for m in modes:
            M = sum(t.multiplier(m) for t in self.terms)
            best = max(best, float(np.linalg.norm(M, 2)))
        return best


def _add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def _scaled(f: Multiplier, c: complex) -> Multiplier:
    return lambda m: c * f(m)


def _chain(outer: Multiplier, inner: OperatorTerm) -> Multiplier:
    n = inner.shift
    f = inner.multiplier
    return lambda m: outer((m[0] + n[0], m[1] + n[1])) @ f(m)


def _adjoint_term(t: OperatorTerm) -> OperatorTerm:
    n = t.shift
    f = t.multiplier
    return OperatorTerm((-n[0], -n[1]), lambda m: f((m[0] - n[0], m[1] - n[1])).conj().T)


def commutator(A: ModeOperator, B: ModeOperator) -> ModeOperator:
    return A.compose(B) - B.compose(A)


def dirac_operator(j: SpinStructure) -> ModeOperator:
    return ModeOperator(j, [OperatorTerm((0, 0), lambda m: clifford(momentum(j, m)))])


def grading_operator(j: SpinStructure) -> ModeOperator:
    return ModeOperator(j, [OperatorTerm((0, 0), lambda m: SIGMA3)])


def dirac_apply(psi: ModeSpinor) -> ModeSpinor:
    j = psi.j
    return ModeSpinor(j, {m: clifford(momentum(j, m)) @ v for m, v in psi.values.items()})


def mode_eigenvalues(j: SpinStructure, m: Mode) -> np.ndarray:
    return np.linalg.eigvalsh(clifford(momentum(j, m)))


def spectrum(j: SpinStructure, cutoff: float) -> list[tuple[float, int]]:
    """Eigenvalues of D with |eigenvalue| <= cutoff, as sorted (value, multiplicity) pairs.

    Each mode contributes +|p| and -|p|. Multiplicities are aggregated on the
    exact integer 4|p|^2 = (2m_1 + j_1)^2 + (2m_2 + j_2)^2.
    """
    _require_n2(j)
    if cutoff <= 0:
        raise ValueError("spectral cutoff must be positive")
    r = math.ceil(cutoff) + 1
    a = 2 * np.arange(-r, r + 1, dtype=np.int64) + j.j[0]
    b = 2 * np.arange(-r, r + 1, dtype=np.int64) + j.j[1]
    sq = (a[:, None] ** 2 + b[None, :] ** 2).ravel()
    bound = math.floor(4 * cutoff * cutoff + 1e-9)
    vals, counts = np.unique(sq[sq <= bound], return_counts=True)
    out = []
    for v, c in zip(vals.tolist(), counts.tolist()):
        lam = math.sqrt(v) / 2
        if v == 0:
            out.append((0.0, 2 * c))
        else:
            out.append((-lam, c))
            out.append((lam, c))
    out.sort()
    return out


def gauss_count(j: SpinStructure, cutoff: float) -> int:
    """Number of eigenvalues with |eigenvalue| <= cutoff, by row-wise circle counting."""
    bound = math.floor(4 * cutoff * cutoff + 1e-9)
    top = math.isqrt(bound)
    total = 0
    for a in range(-top, top + 1):
        if (a - j.j[0]) % 2:
            continue
        s = math.isqrt(bound - a * a)
        total += 2 * (s // 2) + 1 if j.j[1] == 0 else 2 * ((s + 1) // 2)
    return 2 * total


def weyl_ratio(j: SpinStructure, cutoff: float) -> float:
    return gauss_count(j, cutoff) / (2 * math.pi * cutoff * cutoff)


def spectral_summary(j: SpinStructure, cutoff: float) -> dict:
    spec = spectrum(j, cutoff)
    kernel = sum(c for v, c in spec if v == 0.0)
    return {
        "spin": list(j.j),
        "cutoff": cutoff,
        "kernel_dim": kernel,
        "min_abs_eigenvalue": min(abs(v) for v, _ in spec),
        "eigenvalue_count": sum(c for _, c in spec),
        "weyl_ratio": weyl_ratio(j, cutoff),
    }


def rep_algebra(a: TorusElement, j: SpinStructure) -> ModeOperator:
    """Undeformed action of the Fourier modes: u^n is the pure shift by n."""
    if a.n != 2:
        raise ValueError("rep_algebra expects a 2-torus element")
    return ModeOperator(
        j, [OperatorTerm(tuple(n), _constant(c * EYE2)) for n, c in sorted(a.terms.items())]
    )


def _constant(A: np.ndarray) -> Multiplier:
    return lambda m: A


def p1_phase(theta: float, j: SpinStructure, n2: int) -> Multiplier:
    """Mode m -> lambda^{n2 p_1}, lambda = e^{2 pi i theta}."""
    h = j.j[0] / 2
    return lambda m: turn_phase(theta * n2 * (m[0] + h))


def deform_operator(K: ModeOperator, theta: float) -> ModeOperator:
    """K -> sum_n K_n lambda^{n_2 p_1}, the phase acting before (to the right of) K_n."""
    j = K.j
    terms = []
    for t in K.terms:
        phase = p1_phase(theta, j, t.shift[1])
        f = t.multiplier
        terms.append(OperatorTerm(t.shift, _phased(f, phase)))
    return ModeOperator(j, terms)


def _phased(f: Multiplier, phase: Callable[[Mode], complex]) -> Multiplier:
    return lambda m: f(m) * phase(m)


def star_compose(K: ModeOperator, L: ModeOperator, theta: float) -> ModeOperator:
    """K * L: term products K_n L_n' weighted by lambda^{n'_1 n_2}."""
    terms = []
    for t in K.terms:
        for s in L.terms:
            ph = turn_phase(theta * s.shift[0] * t.shift[1])
            terms.append(OperatorTerm(_add(t.shift, s.shift), _scaled(_chain(t.multiplier, s), ph)))
    return ModeOperator(K.j, terms)


def random_bigraded(j: SpinStructure, rng, max_shift: int = 5) -> ModeOperator:
    n = tuple(int(x) for x in rng.integers(-max_shift, max_shift + 1, size=2))
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    B = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    # unit-norm pieces keep the operator norm <= 1 so tolerances are absolute
    A /= 2 * np.linalg.norm(A, 2)
    B /= 2 * np.linalg.norm(B, 2)
    a, b = rng.uniform(-1, 1, size=2)
    h1, h2 = j.j[0] / 2, j.j[1] / 2
    return ModeOperator(j, [OperatorTerm(
        n, lambda m: A * np.exp(1j * a * (m[0] + h1)) + B * math.cos(b * (m[1] + h2))
    )])


def product_rule_residual(theta: float, j: SpinStructure, rng, spinors: int = 20) -> float:
    K = random_bigraded(j, rng)
    L = random_bigraded(j, rng)
    lhs = deform_operator(K, theta).compose(deform_operator(L, theta))
    rhs = deform_operator(star_compose(K, L, theta), theta)
    worst = 0.0
    for _ in range(spinors):
        psi = random_spinor(j, rng, cutoff=4)
        worst = max(worst, lhs(psi).distance(rhs(psi)))
    return worst


def deformed_rep(a: TorusElement, j: SpinStructure) -> ModeOperator:
    return deform_operator(rep_algebra(a, j), a.theta[1, 0])


@dataclass(frozen=True)
class RealStructure:
    """Antilinear J = (m -> -m - j) o (C conj), optionally twisted by lambda^{-p_1 p_2}."""

    j: SpinStructure
    theta: float = 0.0

    def __call__(self, psi: ModeSpinor) -> ModeSpinor:
        j1, j2 = self.j.j
        out = {}
        for m, v in psi.values.items():
            if self.theta:
                p1, p2 = momentum(self.j, m)
                v = turn_phase(-self.theta * p1 * p2) * v
            out[(-m[0] - j1, -m[1] - j2)] = CHARGE_CONJ @ v.conj()
        return ModeSpinor(psi.j, out)

    def inverse(self, psi: ModeSpinor) -> ModeSpinor:
        return self(psi).scale(-1)

    def conjugate(self, K: ModeOperator) -> Callable[[ModeSpinor], ModeSpinor]:
        """psi -> J K J^{-1} psi."""
        return lambda psi: self(K(self.inverse(psi)))


def real_structure(j: SpinStructure) -> RealStructure:
    _require_n2(j)
    return RealStructure(j)


def deform_real(J: RealStructure, theta: float) -> RealStructure:
    return RealStructure(J.j, J.theta + theta)


def _generators(theta: float) -> dict[str, TorusElement]:
    from .nc_torus import ThetaMatrix, generator

    th = ThetaMatrix.scalar(theta)
    u1, u2 = generator(th, 0), generator(th, 1)
    return {"u1": u1, "u2": u2, "u1*": u1.star(), "u2*": u2.star()}


def axiom_suite(
    theta: float,
    j: SpinStructure,
    cutoff: int = 3,
    tol: float = 1e-12,
    samples: int = 8,
    rng=None,
) -> dict:
    """Residuals of the real spectral triple conditions for the deformed triple.

    All checks act on random finitely supported spinors with modes in
    [-cutoff, cutoff]^2; the operators are exact, so the only error is
    floating-point roundoff.
    """
    if cutoff < 2:
        raise ValueError("cutoff must be >= 2")
    rng = rng if rng is not None else np.random.default_rng(0)
    D = dirac_operator(j)
    gamma = grading_operator(j)
    J = deform_real(real_structure(j), theta)
    gens = {k: deformed_rep(v, j) for k, v in _generators(theta).items()}
    spinors = [random_spinor(j, rng, cutoff=cutoff) for _ in range(samples)]
    box = [(a, b) for a in range(-cutoff, cutoff + 1) for b in range(-cutoff, cutoff + 1)]

    res = {k: 0.0 for k in (
        "bounded_commutator", "zeroth_order", "first_order", "dirac_real",
        "real_square", "gamma_dirac", "gamma_algebra", "gamma_real",
    )}
    for name, a in gens.items():
        n = a.terms[0].shift
        norm = commutator(D, a).mode_local_norm(box)
        res["bounded_commutator"] = max(res["bounded_commutator"], abs(norm - math.hypot(*n)))
    for psi in spinors:
        res["dirac_real"] = max(res["dirac_real"], D(J(psi)).distance(J(D(psi))))
        res["real_square"] = max(res["real_square"], J(J(psi)).distance(psi.scale(-1)))
        res["gamma_dirac"] = max(res["gamma_dirac"], gamma(D(psi)).distance(D(gamma(psi)).scale(-1)))
        res["gamma_real"] = max(res["gamma_real"], gamma(J(psi)).distance(J(gamma(psi)).scale(-1)))
        for a in gens.values():
            res["gamma_algebra"] = max(res["gamma_algebra"], gamma(a(psi)).distance(a(gamma(psi))))
            da = commutator(D, a)
            for b in gens.values():
                opp_star = J.conjugate(b.adjoint())
                opp = J.conjugate(b)
                r0 = a(opp_star(psi)).distance(opp_star(a(psi)))
                r1 = da(opp(psi)).distance(opp(da(psi)))
                res["zeroth_order"] = max(res["zeroth_order"], r0)
                res["first_order"] = max(res["first_order"], r1)

    # isospectrality: eigenvalues of the mode blocks of the deformed D (bidegree 0)
    D_hat = deform_operator(D, theta)
    undeformed = [mode_eigenvalues(j, m).tolist() for m in box]
    deformed = [np.linalg.eigvalsh(sum(t.multiplier(m) for t in D_hat.terms)).tolist() for m in box]
    iso = undeformed == deformed

    passed = all(v <= tol for v in res.values()) and iso
    return {
        "theta": theta,
        "spin": list(j.j),
        "cutoff": cutoff,
        "tol": tol,
        "residuals": res,
        "isospectral": iso,
        "pass": passed,
    }
