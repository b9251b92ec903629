"""Command-line interface.

Subcommands cover the full pipeline: validate, project (ladder),
bracket, irreducible, certify, dof, pform, random, evolve.

Exit codes: 0 on success with all checks passing, 1 when a check or
certification fails, 2 on malformed input or usage errors.

Reports are JSON with sorted keys; apart from the ``wall_time_s`` field
they are byte-identical across runs with the same inputs.
"""

import os

_threads = os.environ.get("DIRAC_FORGE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__
from .chain import (
    ChainProfile,
    ReducibleSystem,
    Tolerances,
    dof_report,
    generate_random_chain,
    surface_points,
    system_from_json,
    system_to_json_obj,
    validate,
)
from .dirac import build_structure, dirac_bracket_at, evolve
from .errors import DiracForgeError
from .irreducible import build_irreducible, certify_equivalence, to_plain_system
from .pform import PFormSpec, build_pform_system, expected_counts, reference_brackets
from .phasespace import PolyFunction
from .projectors import build_ladder, verify_ladder

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2


def _load_system(path: str) -> tuple:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
        system = system_from_json(raw.decode("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DiracForgeError(f"cannot read system file {path}: {exc}") from exc
    return system, hashlib.sha256(raw).hexdigest()


def _load_poly(text: str, n_vars: int) -> PolyFunction:
    if text.startswith("@"):
        with open(text[1:], "r", encoding="utf-8") as fh:
            text = fh.read()
    return PolyFunction.from_json_obj(json.loads(text), n_vars)


def _check_items(report) -> list:
    return [
        {
            "name": c.name,
            "passed": bool(c.passed),
            "residual": repr(float(c.residual)),
            "threshold": repr(float(c.threshold)),
            "detail": c.detail,
        }
        for c in report.checks
    ]


def _emit(payload: dict, started: float, out_path=None) -> None:
    payload["wall_time_s"] = time.perf_counter() - started
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def _base_payload(command: str, digest=None) -> dict:
    payload = {"tool": "dirac-forge", "version": __version__, "command": command}
    if digest is not None:
        payload["input_digest"] = digest
    return payload


# ---------------------------------------------------------------------------
# subcommands


def _cmd_validate(args, started) -> int:
    system, digest = _load_system(args.system)
    report = validate(system)
    payload = _base_payload("validate", digest)
    payload["results"] = {
        "level_dims": system.level_dims,
        "independent_count": system.independent_count,
        "passed": report.passed,
        "checks": _check_items(report),
    }
    _emit(payload, started, args.report)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_project(args, started) -> int:
    system, digest = _load_system(args.system)
    ladder = build_ladder(system)
    report = verify_ladder(system, ladder)
    payload = _base_payload("project", digest)
    results = {
        "passed": report.passed,
        "checks": _check_items(report),
        "build_residuals": {k: repr(v) for k, v in sorted(ladder.residuals.items())},
    }
    if args.matrices:
        results["abar"] = [[[repr(float(x)) for x in row] for row in a] for a in ladder.abar]
        results["d_levels"] = [
            [[repr(float(x)) for x in row] for row in d] for d in ladder.d_levels
        ]
    payload["results"] = results
    _emit(payload, started, args.report)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_bracket(args, started) -> int:
    system, digest = _load_system(args.system)
    f = _load_poly(args.f, system.space.dim)
    g = _load_poly(args.g, system.space.dim)
    if args.point:
        point = np.array([float(x) for x in args.point.split(",")])
    else:
        point = surface_points(system, n_points=1)[0]
    ladder = build_ladder(system)
    structure = build_structure(system, ladder, point)
    value = dirac_bracket_at(f, g, system, structure, kind=args.kind)
    payload = _base_payload("bracket", digest)
    payload["results"] = {
        "kind": args.kind,
        "point": [repr(float(x)) for x in point],
        "value": repr(value),
        "mu_invertible": structure.mu_invertible,
    }
    _emit(payload, started, args.report)
    return EXIT_OK


def _cmd_irreducible(args, started) -> int:
    system, digest = _load_system(args.system)
    ladder = build_ladder(system)
    irr = build_irreducible(system, ladder)
    plain = to_plain_system(irr)
    obj = system_to_json_obj(plain)
    text = json.dumps(obj, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    payload = _base_payload("irreducible", digest)
    payload["results"] = {
        "extended_pairs": plain.space.n_pairs,
        "total_constraints": irr.total_constraints,
        "block_sizes": list(irr.block_sizes),
        "recovery_residual": repr(irr.recovery_residual),
    }
    if not args.out:
        payload["results"]["system"] = obj
    _emit(payload, started, args.report)
    return EXIT_OK


def _cmd_certify(args, started) -> int:
    system, digest = _load_system(args.system)
    cert = certify_equivalence(
        system, n_points=args.points, n_observables=args.observables, seed=args.seed
    )
    payload = _base_payload("certify", digest)
    payload["results"] = {
        "passed": cert.passed,
        "n_points": cert.n_points,
        "n_observables": cert.n_observables,
        "max_bracket_deviation": repr(cert.max_bracket_deviation),
        "max_mu_route_deviation": repr(cert.max_mu_route_deviation),
        "max_inverse_residual": repr(cert.max_inverse_residual),
        "rank_ok": cert.rank_ok,
        "tol_weak": repr(cert.tol_weak),
    }
    _emit(payload, started, args.report)
    return EXIT_OK if cert.passed else EXIT_CHECK_FAILED


def _cmd_dof(args, started) -> int:
    system, digest = _load_system(args.system)
    point = surface_points(system, n_points=1)[0]
    rep = dof_report(system, point)
    payload = _base_payload("dof", digest)
    payload["results"] = {
        "level_dims": list(rep.level_dims),
        "independent_count": rep.independent_count,
        "surface_dim": rep.surface_dim,
        "induced_rank": rep.induced_rank,
    }
    _emit(payload, started, args.report)
    return EXIT_OK


def _cmd_pform(args, started) -> int:
    extents = tuple(int(x) for x in args.extents.split(","))
    spec = PFormSpec(args.p, args.dim, extents)
    system = build_pform_system(spec)
    expected = expected_counts(spec)
    results = {
        "p": spec.p,
        "dim": spec.dim,
        "extents": list(spec.extents),
        "level_dims": system.level_dims,
        "expected_level_dims": expected["level_dims"],
        "independent_count": system.independent_count,
        "expected_independent_count": expected["independent_count"],
        "expected_surface_dim": expected["surface_dim"],
    }
    ok = True
    if args.check_oracle:
        from .dirac import fundamental_brackets

        ladder = build_ladder(system)
        point = surface_points(system, n_points=1)[0]
        structure = build_structure(system, ladder, point)
        fb = fundamental_brackets(system, structure)
        ref = reference_brackets(spec)
        n = system.space.n_pairs
        deviation = float(np.max(np.abs(fb[:n, n:] - ref)))
        ok = deviation <= system.tolerances.tol_weak
        results["oracle_deviation"] = repr(deviation)
        results["oracle_ok"] = ok
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(system_to_json_obj(system), indent=2, sort_keys=True) + "\n")
    payload = _base_payload("pform")
    payload["results"] = results
    _emit(payload, started, args.report)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_random(args, started) -> int:
    dims = tuple(int(x) for x in args.levels.split(","))
    profile = ChainProfile(dims, args.pairs, seed=args.seed)
    system = generate_random_chain(profile)
    report = validate(system)
    obj = system_to_json_obj(system)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    payload = _base_payload("random")
    payload["results"] = {
        "level_dims": system.level_dims,
        "independent_count": system.independent_count,
        "validation_passed": report.passed,
    }
    if not args.out:
        payload["results"]["system"] = obj
    _emit(payload, started, args.report)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_evolve(args, started) -> int:
    system, digest = _load_system(args.system)
    hamiltonian = _load_poly(args.hamiltonian, system.space.dim)
    if args.point:
        point = np.array([float(x) for x in args.point.split(",")])
    else:
        point = surface_points(system, n_points=1)[0]
    ladder = build_ladder(system)
    traj = evolve(
        system, ladder, hamiltonian, point, dt=args.dt, steps=args.steps, kind=args.kind
    )
    payload = _base_payload("evolve", digest)
    payload["results"] = {
        "steps": args.steps,
        "dt": repr(args.dt),
        "max_constraint_drift": repr(traj.max_drift),
        "drift_ok": traj.drift_ok,
        "final_point": [repr(float(x)) for x in traj.points[-1]],
    }
    _emit(payload, started, args.report)
    return EXIT_OK if traj.drift_ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dirac-forge",
        description="Dirac brackets for reducible second-class constraint systems.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, helptext, with_system=True):
        p = sub.add_parser(name, help=helptext)
        if with_system:
            p.add_argument("system", help="path to a system JSON file")
        p.add_argument("--report", help="also write the JSON report to this path")
        return p

    add("validate", "check the chain identities and second-class ranks")
    p = add("project", "build and verify the projector ladder")
    p.add_argument("--matrices", action="store_true", help="include ladder matrices in the report")

    p = add("bracket", "evaluate a Dirac bracket at a surface point")
    p.add_argument("--f", required=True, help="observable as JSON term list (or @file)")
    p.add_argument("--g", required=True, help="observable as JSON term list (or @file)")
    p.add_argument("--kind", choices=("m", "mu"), default="m")
    p.add_argument("--point", help="comma-separated phase-space point (default: sampled)")

    p = add("irreducible", "emit the equivalent irreducible system on the extended space")
    p.add_argument("--out", help="write the extended system JSON to this path")

    p = add("certify", "certify reducible/irreducible bracket agreement")
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--observables", type=int, default=6)
    p.add_argument("--seed", type=int, default=None)

    add("dof", "report constraint counting and surface dimension")

    p = add("pform", "build the lattice tensor gauge model", with_system=False)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--extents", required=True, help="comma-separated spatial extents")
    p.add_argument("--out", help="write the system JSON to this path")
    p.add_argument("--check-oracle", action="store_true", help="compare against the Fourier oracle")

    p = add("random", "generate a seeded random reducible chain", with_system=False)
    p.add_argument("--levels", required=True, help="comma-separated level sizes M_0,M_1,...")
    p.add_argument("--pairs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the system JSON to this path")

    p = add("evolve", "integrate Hamiltonian flow with the Dirac bracket")
    p.add_argument("--hamiltonian", required=True, help="JSON term list (or @file)")
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--kind", choices=("m", "mu"), default="m")
    p.add_argument("--point", help="comma-separated initial point (default: sampled)")

    return parser


_HANDLERS = {
    "validate": _cmd_validate,
    "project": _cmd_project,
    "bracket": _cmd_bracket,
    "irreducible": _cmd_irreducible,
    "certify": _cmd_certify,
    "dof": _cmd_dof,
    "pform": _cmd_pform,
    "random": _cmd_random,
    "evolve": _cmd_evolve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.perf_counter()
    try:
        return _HANDLERS[args.command](args, started)
    except DiracForgeError as exc:
        print(json.dumps({"error": str(exc), "tool": "dirac-forge"}, sort_keys=True))
        return EXIT_BAD_INPUT
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": str(exc), "tool": "dirac-forge"}, sort_keys=True))
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
