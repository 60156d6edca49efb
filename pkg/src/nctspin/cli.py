"""Command-line front end.

Exit status: 0 when every check passes, 1 when a verification fails (the
report is still written), 2 on an invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rational_oracle as ro
from .nc_torus import ThetaMatrix, TorusElement, random_element, star_product
from .spectral import (
    axiom_suite,
    deformed_rep,
    product_rule_residual,
    random_spinor,
    spectral_summary,
    spectrum,
)
from .spin_cover import (
    SpinStructure,
    classify_covering,
    deformed_cover,
    embed_cover,
    index_cosets,
    is_fixed_monomial,
    kernel_action,
    z2prime_fixed_check,
)
from .splitting import (
    kappa,
    kappa_surjects,
    puzzle_report,
    spinor_bimodule_basis,
)

SCHEMA = "1"
COMMANDS = ("spectrum", "verify", "cover", "deform", "split", "oracle-check")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    command: str
    theta: ThetaMatrix | None = None
    spin: SpinStructure | None = None
    cutoff: float | None = None
    tol: float = 1e-12
    seed: int = 0
    output: str | None = None
    format: str = "json"
    extra: dict = field(default_factory=dict)


def max_workers() -> int:
    env = os.environ.get("NCTSPIN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("NCTSPIN_THREADS", f"expected an integer, got {env!r}")
    return min(4, os.cpu_count() or 1)


def _pmap(fn, items):
    """Order-preserving map; results never depend on the worker count."""
    items = list(items)
    workers = max_workers()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# --- subcommands --------------------------------------------------------------

def run_spectrum(cfg: RunConfig) -> tuple[int, object]:
    spec = spectrum(cfg.spin, cfg.cutoff)
    summary = spectral_summary(cfg.spin, cfg.cutoff)
    if cfg.format == "csv":
        return 0, spec
    return 0, {"summary": summary, "spectrum": [[v, c] for v, c in spec]}


def run_verify(cfg: RunConfig) -> tuple[int, dict]:
    t = cfg.theta[1, 0]
    report = axiom_suite(t, cfg.spin, cutoff=int(cfg.cutoff), tol=cfg.tol,
                         rng=np.random.default_rng(cfg.seed))
    return (0 if report["pass"] else 1), report


def _embedding_trials(theta: ThetaMatrix, j: SpinStructure, trials: int, seed: int, tol: float) -> dict:
    alg = deformed_cover(theta, j)

    def one(rng):
        a = random_element(theta, rng, support=4, max_exp=3)
        b = random_element(theta, rng, support=4, max_exp=3)
        hom = embed_cover(a * b, alg).distance(embed_cover(a, alg) * embed_cover(b, alg))
        star = embed_cover(a.star(), alg).distance(embed_cover(a, alg).star())
        fixed = all(
            is_fixed_monomial(k, alg.twist_set) for k, _ in embed_cover(a, alg).terms
        ) and all(
            embed_cover(a, alg).group_action(g).distance(embed_cover(a, alg)) <= tol
            for g in alg.group
        )
        return hom, star, fixed

    results = _pmap(one, _rngs(seed, trials))
    return {
        "trials": trials,
        "max_homomorphism_residual": max(r[0] for r in results),
        "max_star_residual": max(r[1] for r in results),
        "image_in_fixed_subalgebra": all(r[2] for r in results),
    }


def run_cover(cfg: RunConfig) -> tuple[int, dict]:
    theta, j = cfg.theta, cfg.spin
    cutoff = int(cfg.cutoff)
    alg = deformed_cover(theta, j)
    emb = _embedding_trials(theta, j, cfg.extra.get("trials", 20), cfg.seed, cfg.tol)
    report = {
        "spin": list(j.j),
        "theta": theta.to_list(),
        "theta_tilde": alg.theta_tilde.to_list(),
        "trivial_double": alg.trivial,
        "G_X": [list(g) for g in alg.group],
        "kernel_action": kernel_action(j).description,
        "index_cosets": index_cosets(alg, cutoff),
        "embedding": emb,
    }
    if j.n == 2:
        report["descriptor"] = classify_covering(j).to_json()
    fixed = z2prime_fixed_check(j, cutoff, theta)
    report["z2prime"] = fixed
    ok = (
        fixed["pass"]
        and emb["max_homomorphism_residual"] <= cfg.tol
        and emb["max_star_residual"] <= cfg.tol
        and emb["image_in_fixed_subalgebra"]
        and report["index_cosets"] == 2
    )
    report["pass"] = ok
    return (0 if ok else 1), report


def run_deform(cfg: RunConfig) -> tuple[int, dict]:
    t = cfg.theta[1, 0]
    j = cfg.spin
    trials = cfg.extra.get("trials", 200)
    res = _pmap(lambda rng: product_rule_residual(t, j, rng), _rngs(cfg.seed, trials))
    u1 = TorusElement(cfg.theta, {(1, 0): 1.0})
    u2 = TorusElement(cfg.theta, {(0, 1): 1.0})
    r1, r2 = deformed_rep(u1, j), deformed_rep(u2, j)
    lam = complex(np.exp(2j * math.pi * t))
    rng = np.random.default_rng(cfg.seed)
    comm = 0.0
    hom = 0.0
    for _ in range(20):
        psi = random_spinor(j, rng)
        comm = max(comm, r2(r1(psi)).distance(r1(r2(psi)).scale(lam)))
        hom = max(hom, r2(r1(psi)).distance(deformed_rep(star_product(u2, u1), j)(psi)))
    report = {
        "theta": t,
        "spin": list(j.j),
        "trials": trials,
        "max_product_rule_residual": max(res),
        "generator_commutation_residual": comm,
        "star_product_match_residual": hom,
    }
    ok = max(report["max_product_rule_residual"], comm, hom) <= cfg.tol
    report["pass"] = ok
    return (0 if ok else 1), report


def run_split(cfg: RunConfig) -> tuple[int, dict]:
    t = cfg.theta[1, 0]
    cutoff = int(cfg.cutoff)
    rng = np.random.default_rng(cfg.seed)
    mult = 0.0
    for _ in range(20):
        a = random_element(cfg.theta, rng, support=4, max_exp=3)
        b = random_element(cfg.theta, rng, support=4, max_exp=3)
        mult = max(mult, kappa(a * b).distance(kappa(a) * kappa(b)))
    bimod = spinor_bimodule_basis(cfg.spin, t, cutoff)
    puzzle = puzzle_report(t)
    report = {
        "kappa": {
            "multiplicative_residual": mult,
            "surjective_onto_fixed_basis": kappa_surjects(cfg.theta, cutoff),
        },
        "bimodule": bimod,
        "puzzle": puzzle,
    }
    ok = (
        mult <= cfg.tol
        and report["kappa"]["surjective_onto_fixed_basis"]
        and bimod["free"]
        and bimod["all_invariant"]
        and bimod["dirac_spectrum_matches"]
    )
    report["pass"] = ok
    return (0 if ok else 1), report


def run_oracle_check(cfg: RunConfig) -> tuple[int, dict]:
    t = ro.RationalTheta(cfg.extra["p"], cfg.extra["q"])
    rep = ro.build_rep(t)
    theta = t.theta_matrix()
    support = cfg.extra.get("support", 20)
    max_exp = cfg.extra.get("max_exp", 8)

    def one(rng):
        a = random_element(theta, rng, support=support, max_exp=max_exp)
        b = random_element(theta, rng, support=support, max_exp=max_exp)
        Ra, Rb = ro.represent(rep, a), ro.represent(rep, b)
        prod = ro.frobenius(ro.represent(rep, a * b) - Ra @ Rb)
        adj = ro.frobenius(ro.represent(rep, a.star()) - Ra.conj().T)
        return prod, adj

    results = _pmap(one, _rngs(cfg.seed, cfg.extra.get("trials", 100)))
    report = {
        "p": t.p,
        "q": t.q,
        "trials": len(results),
        "relations_residual": ro.check_relations(rep),
        "max_product_residual": max(r[0] for r in results),
        "max_adjoint_residual": max(r[1] for r in results),
    }
    ok = max(report["max_product_residual"], report["max_adjoint_residual"],
             report["relations_residual"]) <= cfg.tol
    report["pass"] = ok
    return (0 if ok else 1), report


HANDLERS = {
    "spectrum": run_spectrum,
    "verify": run_verify,
    "cover": run_cover,
    "deform": run_deform,
    "split": run_split,
    "oracle-check": run_oracle_check,
}

DEFAULT_CUTOFF = {"spectrum": 10.0, "verify": 3, "cover": 6, "deform": 4, "split": 4}
DEFAULT_TOL = {"oracle-check": 1e-10}


# --- parsing and validation -----------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nctspin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spin=True, theta=True):
        if theta:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--theta", type=float, help="scalar theta (N = 2, theta_21)")
            g.add_argument("--theta-file", help="JSON file with a full skew-symmetric matrix")
        if spin:
            p.add_argument("--spin", type=int, nargs="+", metavar="J", help="spin bits j_1 ... j_N")
        p.add_argument("--cutoff", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", "-o", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    common(sub.add_parser("spectrum", help="Dirac spectrum for a spin structure"), theta=False)
    common(sub.add_parser("verify", help="spectral triple axiom residuals"))
    p = sub.add_parser("cover", help="deformed covering algebra report")
    common(p)
    p.add_argument("--trials", type=int, default=20)
    p = sub.add_parser("deform", help="Connes-Landi product rule check")
    common(p)
    p.add_argument("--trials", type=int, default=200)
    common(sub.add_parser("split", help="splitting map, spinor bimodule and theta/2 puzzle"))
    p = sub.add_parser("oracle-check", help="compare the star product with clock-and-shift matrices")
    common(p, spin=False, theta=False)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--support", type=int, default=20)
    p.add_argument("--max-exp", type=int, default=8)
    return parser


def _load_theta(args) -> ThetaMatrix | None:
    if getattr(args, "theta_file", None):
        try:
            data = json.loads(Path(args.theta_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("--theta-file", f"cannot read matrix ({exc})")
        if isinstance(data, dict):
            data = data.get("theta")
        try:
            return ThetaMatrix(tuple(tuple(float(x) for x in row) for row in data))
        except (TypeError, ValueError) as exc:
            raise ConfigError("--theta-file", str(exc))
    t = getattr(args, "theta", None)
    if t is None:
        return None
    if not math.isfinite(t):
        raise ConfigError("--theta", "must be finite")
    return ThetaMatrix.scalar(t)


def config_from_args(args) -> RunConfig:
    cmd = args.command
    cfg = RunConfig(command=cmd, seed=args.seed, output=args.output, format=args.format)
    cfg.tol = args.tol if args.tol is not None else DEFAULT_TOL.get(cmd, 1e-12)
    if not (cfg.tol > 0):
        raise ConfigError("--tol", "must be > 0")
    if args.format == "csv" and cmd != "spectrum":
        raise ConfigError("--format", "csv output is only available for 'spectrum'")

    cutoff = args.cutoff if args.cutoff is not None else DEFAULT_CUTOFF.get(cmd)
    if cutoff is not None:
        if cmd == "spectrum":
            if not (cutoff > 0) or not math.isfinite(cutoff):
                raise ConfigError("--cutoff", "must be a positive number")
        else:
            if cutoff != int(cutoff) or cutoff < 1:
                raise ConfigError("--cutoff", "must be an integer >= 1")
            if cmd == "verify" and cutoff < 2:
                raise ConfigError("--cutoff", "verify needs cutoff >= 2")
            cutoff = int(cutoff)
    cfg.cutoff = cutoff

    if hasattr(args, "spin"):
        bits = args.spin if args.spin is not None else [0, 0]
        if any(b not in (0, 1) for b in bits):
            raise ConfigError("--spin", f"bits must be 0 or 1, got {bits}")
        cfg.spin = SpinStructure(tuple(bits))

    if hasattr(args, "theta"):
        theta = _load_theta(args)
        n = cfg.spin.n if cfg.spin is not None else 2
        if theta is None:
            theta = ThetaMatrix.zeros(n)
            if n == 2:
                theta = ThetaMatrix.scalar(0.0)
        if cfg.spin is not None and theta.n != cfg.spin.n:
            raise ConfigError("--spin", f"has {cfg.spin.n} bits but theta is {theta.n}x{theta.n}")
        cfg.theta = theta

    if cmd in ("spectrum", "verify", "deform", "split") and cfg.spin.n != 2:
        raise ConfigError("--spin", f"'{cmd}' works on T^2 and needs exactly 2 bits")

    if cmd in ("cover", "deform", "oracle-check"):
        if args.trials < 1:
            raise ConfigError("--trials", "must be >= 1")
        cfg.extra["trials"] = args.trials
    if cmd == "oracle-check":
        if args.q < 1:
            raise ConfigError("--q", "must be a positive integer")
        if args.support < 1:
            raise ConfigError("--support", "must be >= 1")
        if args.max_exp < 0:
            raise ConfigError("--max-exp", "must be >= 0")
        cfg.extra.update(p=args.p, q=args.q, support=args.support, max_exp=args.max_exp)
    return cfg


def render(cfg: RunConfig, status: int, report) -> str:
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eigenvalue", "multiplicity"])
        for v, c in sorted(report, key=lambda r: (r[0], r[1])):
            w.writerow([repr(v), c])
        return buf.getvalue()
    body = {"schema": SCHEMA, "command": cfg.command, "seed": cfg.seed, "exit_status": status,
            "report": report}
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def run(cfg: RunConfig) -> tuple[int, str]:
    status, report = HANDLERS[cfg.command](cfg)
    return status, render(cfg, status, report)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        status, text = run(cfg)
    except ConfigError as exc:
        print(f"nctspin: error: {exc}", file=sys.stderr)
        return 2
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
