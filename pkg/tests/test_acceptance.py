"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line."""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from nctspin.nc_torus import ThetaMatrix, random_element, random_theta
from nctspin.rational_oracle import RationalTheta, build_rep, frobenius, represent
from nctspin.spectral import axiom_suite, product_rule_residual, spectral_summary, spectrum, weyl_ratio
from nctspin.spin_cover import (
    SpinStructure,
    deformed_cover,
    embed_cover,
    group_GX,
    z2prime_fixed_check,
)
from nctspin.splitting import (
    SpinorBimodule,
    freeness_ranks,
    kappa,
    kappa_surjects,
    module_spectrum,
    puzzle_report,
)

ALL2 = SpinStructure.all(2)
IRRATIONAL = math.sqrt(2) / 6


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
        assert ok, f"criterion {n} failed: {detail}"
    return emit


def test_c1_oracle_equivalence(report):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for q in (2, 3, 4, 5, 12):
        for p in range(1, q):
            if math.gcd(p, q) == 1:
                break
        rep = build_rep(RationalTheta(p, q))
        th = rep.t.theta_matrix()
        for _ in range(100):
            a, b = random_element(th, rng, 20, 8), random_element(th, rng, 20, 8)
            Ra, Rb = represent(rep, a), represent(rep, b)
            worst = max(worst, frobenius(represent(rep, a * b) - Ra @ Rb),
                        frobenius(represent(rep, a.star()) - Ra.conj().T))
    elapsed = time.perf_counter() - start
    report(1, "oracle equivalence", worst <= 1e-10 and elapsed < 10,
           f"residual={worst:.2e} time={elapsed:.2f}s")


def test_c2_algebra_laws(report):
    rng = np.random.default_rng(2)
    worst = 0.0
    for n in (2, 3, 5):
        for _ in range(200):
            th = random_theta(n, rng)
            a, b, c = (random_element(th, rng) for _ in range(3))
            worst = max(worst, ((a * b) * c).distance(a * (b * c)),
                        (a * b).star().distance(b.star() * a.star()))
    report(2, "associativity and anti-homomorphism", worst <= 1e-12, f"residual={worst:.2e}")


def test_c3_covering_suite(report):
    rng = np.random.default_rng(3)
    ok = True
    worst = 0.0
    # N = 2: every spin structure, exact Z_2' basis equality at cutoff 6
    for j in ALL2:
        th = ThetaMatrix.scalar(float(rng.uniform(-1, 1)))
        alg = deformed_cover(th, j)
        for _ in range(10):
            a, b = random_element(th, rng), random_element(th, rng)
            ea = embed_cover(a, alg)
            worst = max(worst, embed_cover(a * b, alg).distance(ea * embed_cover(b, alg)),
                        embed_cover(a.star(), alg).distance(ea.star()))
            ok &= ea.in_algebra() and all(ea.group_action(g).distance(ea) == 0 for g in alg.group)
        ok &= z2prime_fixed_check(j, 6, th)["pass"]
    # 50 random (theta, X) up to N = 5
    for _ in range(50):
        n = int(rng.integers(2, 6))
        th = random_theta(n, rng)
        bits = tuple(int(x) for x in rng.integers(0, 2, size=n))
        X = {i for i, b in enumerate(bits) if b}
        alg = deformed_cover(th, SpinStructure(bits))
        a, b = random_element(th, rng), random_element(th, rng)
        ea = embed_cover(a, alg)
        worst = max(worst, embed_cover(a * b, alg).distance(ea * embed_cover(b, alg)),
                    embed_cover(a.star(), alg).distance(ea.star()))
        ok &= ea.in_algebra() and all(ea.group_action(g).distance(ea) == 0 for g in alg.group)
        for k in range(n):
            for l in range(n):
                ok &= alg.theta_tilde[k, l] == th[k, l] / (1, 2, 4)[(k in X) + (l in X)]
        if X:
            ok &= len(group_GX(X, n)) == 2 ** (len(X) - 1)
    report(3, "covering algebra suite", ok and worst <= 1e-12, f"embed residual={worst:.2e}")


def test_c4_product_rule(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for theta in (1 / 7, 1 / 3, IRRATIONAL):
        for i in range(200):
            worst = max(worst, product_rule_residual(theta, ALL2[i % 4], rng, spinors=20))
    report(4, "deformation product rule", worst <= 1e-12, f"residual={worst:.2e}")


def test_c5_spectral_axioms(report):
    worst = 0.0
    ok = True
    for j in ALL2:
        for theta in (0.0, 1 / 3, IRRATIONAL):
            r = axiom_suite(theta, j)
            worst = max(worst, max(r["residuals"].values()))
            ok &= r["pass"] and r["isospectral"]
    report(5, "spectral triple axioms", ok and worst <= 1e-12, f"max residual={worst:.2e}")


def test_c6_fingerprints(report):
    start = time.perf_counter()
    expected = {(0, 0): (2, 0.0), (1, 0): (0, 0.5), (0, 1): (0, 0.5), (1, 1): (0, math.sqrt(2) / 2)}
    ok = True
    ratios = []
    for j in ALL2:
        s = spectral_summary(j, 3)
        ok &= (s["kernel_dim"], s["min_abs_eigenvalue"]) == expected[j.j]
        # count from the spectrum itself, cross-checked against the lattice row count
        count = sum(c for _, c in spectrum(j, 200))
        ok &= count / (2 * math.pi * 200 ** 2) == weyl_ratio(j, 200)
        ratios.append(count / (2 * math.pi * 200 ** 2))
    elapsed = time.perf_counter() - start
    dev = max(abs(r - 1) for r in ratios)
    report(6, "spin-structure fingerprints", ok and dev <= 0.05 and elapsed < 5,
           f"weyl deviation={dev:.2e} time={elapsed:.2f}s")


def test_c7_splitting(report):
    rng = np.random.default_rng(7)
    ok = True
    worst = 0.0
    for th in (ThetaMatrix.scalar(IRRATIONAL), random_theta(3, rng)):
        for _ in range(20):
            a, b = random_element(th, rng), random_element(th, rng)
            worst = max(worst, (kappa(a) * kappa(b)).distance(kappa(a * b)))
        ok &= kappa_surjects(th, 4)
    for j in ALL2:
        mod = SpinorBimodule(j, IRRATIONAL, cutoff=4)
        ok &= freeness_ranks(mod)["free"]
        ref = [(round(v, 12) + 0.0, c) for v, c in spectrum(j, 3)]
        ok &= module_spectrum(mod, 3) == ref
    report(7, "splitting and spinor bimodule", ok and worst <= 1e-12, f"kappa residual={worst:.2e}")


def test_c8_puzzle(report):
    half = puzzle_report(0.5)
    irr = puzzle_report(IRRATIONAL)
    zero = puzzle_report(0.0)
    ok = half["discrepancy"] and irr["discrepancy"] and not zero["discrepancy"]
    report(8, "theta/2 puzzle", ok,
           f"orders at 1/2: {half['half_theta_prescription']['order']} vs {half['trivial_double']['order']}")


def _cli(*argv, threads="1"):
    env = dict(os.environ, NCTSPIN_THREADS=threads)
    return subprocess.run([sys.executable, "-m", "nctspin", *argv], capture_output=True,
                          text=True, env=env, check=False)


def test_c9_cli_determinism(report):
    runs = [
        ["deform", "--theta", "0.3", "--seed", "9", "--trials", "10"],
        ["oracle-check", "--p", "1", "--q", "5", "--seed", "9", "--trials", "10"],
        ["spectrum", "--spin", "1", "1", "--cutoff", "5", "--format", "csv"],
    ]
    ok = True
    for argv in runs:
        outs = [_cli(*argv, threads=t) for t in ("1", "1", "3")]
        ok &= all(o.returncode == 0 for o in outs) and len({o.stdout for o in outs}) == 1
    bad = [(["verify", "--tol", "-1"], "--tol"), (["spectrum", "--cutoff", "-2"], "--cutoff"),
           (["cover", "--spin", "1", "0", "1", "--theta", "0.3"], "--spin")]
    for argv, field in bad:
        r = _cli(*argv)
        ok &= r.returncode == 2 and f"{field}:" in r.stderr
    report(9, "CLI determinism and config errors", ok)
