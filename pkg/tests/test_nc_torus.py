import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings

from nctspin.nc_torus import (
    ThetaMatrix,
    ThetaMismatchError,
    TorusElement,
    commutative_product,
    generator,
    grade_decompose,
    identity,
    involution,
    monomial,
    random_element,
    random_theta,
    sign_action,
    star_product,
)

from .conftest import elements

TH = ThetaMatrix.scalar(0.3)
TH3 = ThetaMatrix.from_lower(3, {(1, 0): 0.17, (2, 0): -0.41, (2, 1): 0.29})


def lam(t):
    return cmath.exp(2j * math.pi * t)


class TestThetaMatrix:
    def test_scalar_sets_theta_21(self):
        assert TH[1, 0] == 0.3
        assert TH[0, 1] == -0.3

    @pytest.mark.parametrize("rows", [
        ((0.0, 0.1), (0.1, 0.0)),
        ((0.5, 0.0), (0.0, 0.0)),
        ((0.0, 0.1, 0.0), (-0.1, 0.0)),
    ])
    def test_rejects_non_skew(self, rows):
        with pytest.raises(ValueError):
            ThetaMatrix(rows)


class TestMonomial:
    def test_generator(self):
        u1 = monomial(TH, (1, 0))
        assert dict(u1.terms) == {(1, 0): 1}
        assert u1 == generator(TH, 0)

    def test_identity(self, rng):
        one = monomial(TH, (0, 0))
        a = random_element(TH, rng)
        assert (one * a).allclose(a, 0) and (a * one).allclose(a, 0)

    def test_direct_construction(self):
        x = monomial(TH, (2, -1), 1j)
        assert dict(x.terms) == {(2, -1): 1j}

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            monomial(TH, (1, 0, 0))

    def test_overflow_guard(self):
        with pytest.raises(OverflowError):
            monomial(TH, (2**63, 0))

    def test_pruning(self):
        x = TorusElement(TH, {(1, 0): 1e-16, (0, 1): 1.0})
        assert x.support() == {(0, 1)}


class TestStarProduct:
    def test_lambda_rule(self):
        u1, u2 = generator(TH, 0), generator(TH, 1)
        # bidegrees (0,1) then (1,0): factor lambda^{1*1}
        assert (u2 * u1).allclose(monomial(TH, (1, 1), lam(0.3)), 1e-15)
        assert (u1 * u2).allclose(monomial(TH, (1, 1)), 0)

    def test_general_bidegree_rule(self):
        for m, n in [((2, 3), (-1, 4)), ((0, -2), (5, 1)), ((3, 0), (0, 7))]:
            got = monomial(TH, m) * monomial(TH, n)
            want = monomial(TH, (m[0] + n[0], m[1] + n[1]), lam(0.3 * n[0] * m[1]))
            assert got.allclose(want, 1e-12)

    def test_undeformed_limit(self, rng):
        th0 = ThetaMatrix.zeros(3)
        for _ in range(20):
            a, b = random_element(th0, rng), random_element(th0, rng)
            assert star_product(a, b) == commutative_product(a, b)

    def test_quarter_theta_against_clock_shift(self):
        # frozen from the q = 4 clock-and-shift oracle: (U + V) U^dag = 1 - i U^3 V
        th = ThetaMatrix.scalar(0.25)
        a = monomial(th, (1, 0)) + monomial(th, (0, 1))
        b = involution(monomial(th, (1, 0)))
        want = TorusElement(th, {(0, 0): 1.0, (-1, 1): -1j})
        assert (a * b).allclose(want, 1e-15)

    def test_theta_mismatch(self):
        with pytest.raises(ThetaMismatchError):
            generator(TH, 0) * generator(ThetaMatrix.scalar(0.31), 0)

    def test_commutation_relation_all_pairs(self):
        for th in (TH, TH3, random_theta(5, np.random.default_rng(3))):
            for k in range(th.n):
                for l in range(th.n):
                    uk, ul = generator(th, k), generator(th, l)
                    assert (uk * ul).allclose((ul * uk).scale(lam(th[k, l])), 1e-14)

    def test_support_in_minkowski_sum(self, rng):
        a, b = random_element(TH3, rng, 6), random_element(TH3, rng, 6)
        sums = {tuple(x + y for x, y in zip(m, n)) for m in a.support() for n in b.support()}
        assert (a * b).support() <= sums


@settings(max_examples=60, deadline=None)
@given(elements(TH3), elements(TH3), elements(TH3))
def test_associativity(a, b, c):
    scale = max(1.0, _l1(a) * _l1(b) * _l1(c))
    assert ((a * b) * c).allclose(a * (b * c), 1e-14 * scale)


def _l1(x):
    return sum(abs(c) for c in x.terms.values())


@settings(max_examples=60, deadline=None)
@given(elements(TH3), elements(TH3))
def test_star_is_anti_homomorphism(a, b):
    assert (a * b).star().allclose(b.star() * a.star(), 1e-11)


@settings(max_examples=60, deadline=None)
@given(elements(TH3))
def test_involution_is_involutive(a):
    assert involution(involution(a)).allclose(a, 1e-14)


class TestInvolution:
    def test_generators_unitary(self):
        for th in (TH, TH3):
            for k in range(th.n):
                u = generator(th, k)
                assert (u.star() * u).allclose(identity(th), 1e-15)
                assert (u * u.star()).allclose(identity(th), 1e-15)

    def test_monomials_unitary(self):
        x = monomial(TH3, (2, -3, 1))
        assert (x.star() * x).allclose(identity(TH3), 1e-14)


class TestGrading:
    def test_direct_split(self):
        a = monomial(TH, (1, 0), 2) + monomial(TH, (0, 1), 3)
        parts = grade_decompose(a)
        assert parts == {(1, 0): monomial(TH, (1, 0), 2), (0, 1): monomial(TH, (0, 1), 3)}

    def test_zero(self):
        assert grade_decompose(TorusElement(TH)) == {}

    def test_reconstruction(self, rng):
        a = random_element(TH3, rng, 7)
        total = TorusElement(TH3)
        for part in grade_decompose(a).values():
            total = total + part
        assert total == a

    def test_grade_additivity_exhaustive(self):
        # every pair of monomials in a small box: product is homogeneous of the summed grade
        box = [(i, j) for i in range(-2, 3) for j in range(-2, 3)]
        for m in box:
            for n in box:
                prod = monomial(TH, m) * monomial(TH, n)
                assert prod.support() == {(m[0] + n[0], m[1] + n[1])}


class TestSignAction:
    def test_trivial(self, rng):
        a = random_element(TH3, rng)
        assert sign_action(a, (1, 1, 1)) == a

    def test_diagonal_z2(self):
        assert sign_action(monomial(TH, (1, 1)), (-1, -1)) == monomial(TH, (1, 1))
        assert sign_action(monomial(TH, (1, 0)), (-1, -1)) == monomial(TH, (1, 0), -1)

    def test_multiplicative(self, rng):
        for _ in range(20):
            a, b = random_element(TH3, rng), random_element(TH3, rng)
            eps = tuple(int(x) for x in rng.choice([-1, 1], size=3))
            lhs = sign_action(a * b, eps)
            rhs = sign_action(a, eps) * sign_action(b, eps)
            assert lhs.allclose(rhs, 1e-12)

    def test_bad_length(self):
        with pytest.raises(ValueError):
            sign_action(generator(TH, 0), (1, 1, 1))


class TestSerialization:
    def test_roundtrip(self, rng):
        a = random_element(TH3, rng, 8)
        assert TorusElement.loads(a.dumps()) == a

    def test_sorted_terms(self):
        a = monomial(TH, (1, 0), 1) + monomial(TH, (-1, 2), 2j) + monomial(TH, (0, 0), 0.5)
        data = json.loads(a.dumps())
        assert [t["m"] for t in data["terms"]] == [[-1, 2], [0, 0], [1, 0]]
        assert data["theta"] == [[0.0, -0.3], [0.3, 0.0]]
        assert data["terms"][0] == {"m": [-1, 2], "re": 0.0, "im": 2.0}

    def test_bit_exact(self, rng):
        a = random_element(TH, rng, 6)
        b = TorusElement(TH, dict(reversed(list(a.terms.items()))))
        assert a.dumps() == b.dumps()
