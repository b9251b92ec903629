"""Acceptance gate: one test per criterion, each emitting a pass/fail line."""

import json
import time

import numpy as np
import pytest

from conftest import record_criterion
from diracforge import (
    ChainProfile,
    ParityError,
    build_c_delta,
    build_c_delta_inverse,
    build_extended_space,
    build_irreducible,
    build_ladder,
    build_pform_system,
    build_structure,
    certify_equivalence,
    dirac_bracket_at,
    dof_report,
    evolve,
    expected_counts,
    fundamental_brackets,
    generate_random_chain,
    PFormSpec,
    reference_brackets,
    surface_points,
    system_from_json,
    system_to_json,
    tangent_complement_generators,
    validate,
    verify_ladder,
)
from diracforge.chain import matrix_rank
from diracforge.irreducible import irreducible_fundamental_brackets
from oracles import random_polynomial, subset_dirac_bracket

# Profiles with even-sized odd levels certify end to end; the odd-sized ones
# exercise validation, the ladder and the documented parity rejection.
EVEN_PROFILES = [((3, 1), 2, False), ((4, 2), 4, True), ((4, 4, 2), 4, True),
                 ((4, 4, 3, 1), 4, False), ((5, 4, 3, 2), 5, True),
                 ((5, 6, 5, 3, 1), 5, False), ((6, 6, 5, 4, 3), 6, True)]
SEEDS = range(20)


def _suite_systems():
    for dims, pairs, certifiable in EVEN_PROFILES:
        for seed in SEEDS:
            yield dims, pairs, certifiable, seed


def test_criterion_1_toy_routes_agree(toy_system):
    started = time.perf_counter()
    space = toy_system.space
    ladder = build_ladder(toy_system)
    rng = np.random.default_rng(0)
    worst = 0.0
    for z in surface_points(toy_system, n_points=2):
        structure = build_structure(toy_system, ladder, z)
        for _ in range(25):
            f = random_polynomial(4, rng)
            g = random_polynomial(4, rng)
            via_m = dirac_bracket_at(f, g, toy_system, structure, kind="m")
            via_mu = dirac_bracket_at(f, g, toy_system, structure, kind="mu")
            via_subset = subset_dirac_bracket(f, g, toy_system, z)
            worst = max(worst, abs(via_m - via_mu), abs(via_m - via_subset))
    z = surface_points(toy_system, n_points=1)[0]
    structure = build_structure(toy_system, ladder, z)
    free_pair = dirac_bracket_at(space.q(1), space.p(1), toy_system, structure)
    frozen_pair = dirac_bracket_at(space.q(0), space.p(0), toy_system, structure)
    elapsed = time.perf_counter() - started
    ok = (worst <= 1e-10 and abs(free_pair - 1.0) <= 1e-10
          and abs(frozen_pair) <= 1e-10 and elapsed < 1.0)
    record_criterion(
        1, ok,
        f"toy routes agree to {worst:.2e} (<=1e-10), free pair bracket "
        f"{free_pair:.12f}, frozen pair {frozen_pair:.2e}, {elapsed:.2f}s",
    )


def test_criterion_2_random_chain_suite():
    started = time.perf_counter()
    worst_ladder = 0.0
    worst_annihilation = 0.0
    worst_cert = 0.0
    all_ok = True
    parity_ok = True
    rng = np.random.default_rng(1)
    for dims, pairs, certifiable, seed in _suite_systems():
        system = generate_random_chain(ChainProfile(dims, pairs, seed=seed))
        if not validate(system).passed:
            all_ok = False
        ladder = build_ladder(system)
        report = verify_ladder(system, ladder)
        worst_ladder = max(worst_ladder, max(c.residual for c in report.checks
                                             if c.threshold < 0.5))
        if not report.passed:
            all_ok = False
        z = surface_points(system, n_points=1)[0]
        structure = build_structure(system, ladder, z)
        g = random_polynomial(system.space.dim, rng)
        for chi in system.chi:
            worst_annihilation = max(
                worst_annihilation, abs(dirac_bracket_at(chi, g, system, structure))
            )
        if certifiable:
            cert = certify_equivalence(system, ladder, n_points=2, n_observables=4)
            worst_cert = max(worst_cert, cert.max_bracket_deviation)
            if not cert.passed:
                all_ok = False
        else:
            try:
                build_extended_space(system)
                parity_ok = False
            except ParityError:
                pass
    elapsed = time.perf_counter() - started
    ok = (all_ok and parity_ok and worst_ladder < 1e-8
          and worst_annihilation < 1e-8 and worst_cert < 1e-8 and elapsed < 60.0)
    record_criterion(
        2, ok,
        f"suite over L=1..4 x 20 seeds: ladder residual {worst_ladder:.2e}, "
        f"annihilation {worst_annihilation:.2e}, certification deviation "
        f"{worst_cert:.2e} (<1e-8), odd parity rejected: {parity_ok}, {elapsed:.1f}s (<60s)",
    )


def test_criterion_3_closed_form_inverse():
    worst_entry = 0.0
    worst_identity = 0.0
    for dims, pairs, certifiable, seed in _suite_systems():
        if not certifiable:
            continue
        system = generate_random_chain(ChainProfile(dims, pairs, seed=seed))
        ladder = build_ladder(system)
        irr = build_irreducible(system, ladder)
        z = surface_points(system, n_points=1)[0]
        structure = build_structure(system, ladder, z)
        c_delta = build_c_delta(irr, structure)
        closed = build_c_delta_inverse(irr, structure)
        worst_entry = max(worst_entry, float(np.max(np.abs(closed - np.linalg.inv(c_delta)))))
        worst_identity = max(
            worst_identity,
            float(np.max(np.abs(c_delta @ closed - np.eye(irr.total_constraints)))),
        )
    ok = worst_entry < 1e-7 and worst_identity < 1e-8
    record_criterion(
        3, ok,
        f"blockwise inverse matches direct inversion to {worst_entry:.2e} (<1e-7), "
        f"identity residual {worst_identity:.2e} (<1e-8)",
    )


@pytest.mark.parametrize("p,dim,extents", [(2, 4, (3, 3, 3)), (3, 5, (2, 2, 2, 2))])
def test_criterion_4_pform_pipeline(p, dim, extents):
    started = time.perf_counter()
    spec = PFormSpec(p, dim, extents)
    system = build_pform_system(spec)
    ladder = build_ladder(system)
    z = surface_points(system, n_points=1)[0]
    structure = build_structure(system, ladder, z)
    fb = fundamental_brackets(system, structure)
    ref = reference_brackets(spec)
    n = system.space.n_pairs
    oracle_dev = float(np.max(np.abs(fb[:n, n:] - ref)))
    irr = build_irreducible(system, ladder)
    ext_fb = irreducible_fundamental_brackets(irr, irr.extended_point(z), structure)
    irr_dev = float(np.max(np.abs(ext_fb[: system.space.dim, : system.space.dim] - fb)))
    elapsed = time.perf_counter() - started
    ok = oracle_dev < 1e-7 and irr_dev < 1e-8 and elapsed < 120.0
    record_criterion(
        4, ok,
        f"p={p} D={dim} lattice {extents}: Fourier oracle deviation {oracle_dev:.2e} "
        f"(<1e-7), irreducible reconstruction deviation {irr_dev:.2e} (<1e-8), "
        f"{elapsed:.1f}s (<120s)",
    )


def test_criterion_5_dof_geometry():
    ok = True
    detail = []
    cases = []
    for dims, pairs, certifiable, seed in _suite_systems():
        if seed < 3:  # integer identities cannot depend on the seed; spot-check
            cases.append(generate_random_chain(ChainProfile(dims, pairs, seed=seed)))
    for spec_args in [(2, 4, (3, 3, 3)), (3, 5, (2, 2, 2, 2))]:
        cases.append(build_pform_system(PFormSpec(*spec_args)))
    for system in cases:
        z = surface_points(system, n_points=1)[0]
        rep = dof_report(system, z)
        expected = system.space.dim - system.independent_count
        if rep.induced_rank != expected:
            ok = False
            detail.append(f"induced rank {rep.induced_rank} != {expected}")
        ladder = build_ladder(system)
        gens = tangent_complement_generators(system, z)
        projected_rank = matrix_rank(gens @ ladder.d_levels[0], system.tolerances.tol_rank)
        if projected_rank != system.independent_count:
            ok = False
            detail.append(f"projected generator rank {projected_rank}")
    record_criterion(
        5, ok,
        "induced symplectic rank equals 2N - sum((-1)^l M_l) exactly and projected "
        "generators keep rank M on every suite system and lattice instance"
        + ("; ".join([""] + detail)),
    )


def test_criterion_6_dynamics(toy_system):
    space = toy_system.space
    ladder = build_ladder(toy_system)
    hamiltonian = (space.q(1) * space.q(1) + space.p(1) * space.p(1)) * 0.5
    start = np.array([0.0, 1.0, 0.0, 0.5])
    traj = evolve(toy_system, ladder, hamiltonian, start, dt=1e-2, steps=1000)
    t = traj.times[-1]
    q_err = abs(traj.points[-1][1] - (np.cos(t) + 0.5 * np.sin(t)))
    ok = q_err < 1e-6 and traj.max_drift < 1e-10
    record_criterion(
        6, ok,
        f"harmonic evolution: position error {q_err:.2e} (<1e-6) after 1000 RK4 "
        f"steps, constraint drift {traj.max_drift:.2e} (<1e-10)",
    )


def test_criterion_7_determinism_round_trip(tmp_path):
    from diracforge.cli import main

    system = generate_random_chain(ChainProfile((4, 4, 2), 4, seed=8))
    text = system_to_json(system)
    round_tripped = system_to_json(system_from_json(text))
    lossless = round_tripped == text

    path = tmp_path / "system.json"
    path.write_text(text)
    import contextlib
    import io

    def run(cmd):
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = main([cmd, str(path)])
        payload = json.loads(buf.getvalue())
        payload.pop("wall_time_s", None)
        return code, json.dumps(payload, sort_keys=True)

    deterministic = True
    for cmd in ("validate", "project", "certify", "dof"):
        code_a, a = run(cmd)
        code_b, b = run(cmd)
        if a != b or code_a != code_b:
            deterministic = False
    ok = lossless and deterministic
    record_criterion(
        7, ok,
        f"system JSON round-trip lossless: {lossless}; reports byte-identical "
        f"across repeated runs (wall time excluded): {deterministic}",
    )
