import numpy as np
import pytest

from diracforge import (
    ChainProfile,
    MuConstructionError,
    NotSecondClassError,
    PhaseSpace,
    ReducibleSystem,
    build_ladder,
    build_mu,
    build_structure,
    dirac_bracket_at,
    dirac_bracket_function,
    evolve,
    fundamental_brackets,
    generate_random_chain,
    surface_points,
)
from diracforge.dirac import build_c, solve_m
from oracles import random_polynomial, subset_dirac_bracket


def test_toy_kernel_frozen(toy_system):
    ladder = build_ladder(toy_system)
    point = np.zeros(4)
    cmat = build_c(toy_system, point)
    mmat = solve_m(toy_system, ladder, cmat)
    expected = np.array([[0.0, -1.0, -1.0], [1.0, 0.0, 1.0], [1.0, -1.0, 0.0]]) / 3.0
    assert np.allclose(mmat, expected)
    assert np.allclose(cmat @ mmat, ladder.d_levels[0])


def test_toy_coordinate_brackets(toy_system):
    space = toy_system.space
    ladder = build_ladder(toy_system)
    z = surface_points(toy_system, n_points=1)[0]
    structure = build_structure(toy_system, ladder, z)
    for kind in ("m", "mu"):
        assert dirac_bracket_at(space.q(1), space.p(1), toy_system, structure, kind=kind) == pytest.approx(1.0)
        assert dirac_bracket_at(space.q(0), space.p(0), toy_system, structure, kind=kind) == pytest.approx(0.0, abs=1e-12)


def test_constraints_are_annihilated(toy_system):
    ladder = build_ladder(toy_system)
    rng = np.random.default_rng(0)
    for z in surface_points(toy_system, n_points=3):
        structure = build_structure(toy_system, ladder, z)
        g = random_polynomial(4, rng)
        for chi in toy_system.chi:
            assert abs(dirac_bracket_at(chi, g, toy_system, structure)) < 1e-10


@pytest.mark.parametrize("dims,pairs", [((3, 1), 2), ((4, 4, 2), 4), ((5, 4, 3, 2), 5)])
def test_agreement_with_subset_oracle(dims, pairs):
    system = generate_random_chain(ChainProfile(dims, pairs, seed=17))
    ladder = build_ladder(system)
    rng = np.random.default_rng(5)
    for z in surface_points(system, n_points=3):
        structure = build_structure(system, ladder, z)
        for _ in range(5):
            f = random_polynomial(system.space.dim, rng)
            g = random_polynomial(system.space.dim, rng)
            ours = dirac_bracket_at(f, g, system, structure)
            ref = subset_dirac_bracket(f, g, system, z)
            assert ours == pytest.approx(ref, abs=1e-9)


def test_mu_route_matches_m_route():
    system = generate_random_chain(ChainProfile((4, 4, 2), 4, seed=3))
    ladder = build_ladder(system)
    rng = np.random.default_rng(6)
    z = surface_points(system, n_points=1)[0]
    structure = build_structure(system, ladder, z)
    assert structure.mu_invertible
    for _ in range(10):
        f = random_polynomial(system.space.dim, rng)
        g = random_polynomial(system.space.dim, rng)
        assert dirac_bracket_at(f, g, system, structure, kind="m") == pytest.approx(
            dirac_bracket_at(f, g, system, structure, kind="mu"), abs=1e-10
        )


def test_mu_requires_even_constraint_count(toy_system):
    # Three constraints: every antisymmetric 3x3 matrix is singular.
    ladder = build_ladder(toy_system)
    point = np.zeros(4)
    cmat = build_c(toy_system, point)
    with pytest.raises(MuConstructionError):
        build_mu(toy_system, ladder, cmat)
    mu, mu_inv, invertible = build_mu(toy_system, ladder, cmat, require_invertible=False)
    assert not invertible
    assert np.allclose(mu, -mu.T)


def test_not_second_class_raises():
    space = PhaseSpace(2)
    system = ReducibleSystem(space, [space.q(0), space.q(1)], [])
    ladder = build_ladder(system)
    with pytest.raises(NotSecondClassError):
        build_structure(system, ladder, np.zeros(4))


def test_fundamental_brackets_antisymmetric(toy_system):
    ladder = build_ladder(toy_system)
    z = surface_points(toy_system, n_points=1)[0]
    structure = build_structure(toy_system, ladder, z)
    fb = fundamental_brackets(toy_system, structure)
    assert np.allclose(fb, -fb.T, atol=1e-12)
    # Constrained pair is frozen, free pair keeps its canonical bracket.
    assert fb[0, 2] == pytest.approx(0.0, abs=1e-12)
    assert fb[1, 3] == pytest.approx(1.0)


def test_weak_jacobi_identity(toy_system):
    ladder = build_ladder(toy_system)
    rng = np.random.default_rng(11)
    z = surface_points(toy_system, n_points=1)[0]
    h = 1e-5
    polys = [random_polynomial(4, rng) for _ in range(3)]

    def outer(f, inner_fn, point):
        # [f, B]* with B known only pointwise: finite-difference the gradient of B.
        structure = build_structure(toy_system, ladder, point)
        sigma = toy_system.space.symplectic_matrix()
        from diracforge.phasespace import gradient

        grad_b = np.zeros(4)
        for a in range(4):
            up, dn = point.copy(), point.copy()
            up[a] += h
            dn[a] -= h
            grad_b[a] = (inner_fn(up) - inner_fn(dn)) / (2 * h)
        grad_f = gradient(f, point)
        jac = structure.jacobian
        bf = grad_f @ sigma @ jac.T
        bg = jac @ sigma @ grad_b
        return float(grad_f @ sigma @ grad_b - bf @ structure.mmat @ bg)

    f, g, k = polys
    total = (
        outer(f, dirac_bracket_function(g, k, toy_system, ladder), z)
        + outer(g, dirac_bracket_function(k, f, toy_system, ladder), z)
        + outer(k, dirac_bracket_function(f, g, toy_system, ladder), z)
    )
    assert abs(total) < 1e-6


def test_harmonic_evolution_matches_closed_form(toy_system):
    space = toy_system.space
    ladder = build_ladder(toy_system)
    hamiltonian = (space.q(1) * space.q(1) + space.p(1) * space.p(1)) * 0.5
    # Layout is (q1, q2, p1, p2); the surface fixes q1 = p1 = 0.
    start = np.array([0.0, 1.0, 0.0, 0.5])
    traj = evolve(toy_system, ladder, hamiltonian, start, dt=1e-2, steps=1000)
    t = traj.times[-1]
    q_expected = start[1] * np.cos(t) + start[3] * np.sin(t)
    p_expected = -start[1] * np.sin(t) + start[3] * np.cos(t)
    assert traj.points[-1][1] == pytest.approx(q_expected, abs=1e-6)
    assert traj.points[-1][3] == pytest.approx(p_expected, abs=1e-6)
    assert traj.max_drift < 1e-10
    assert traj.drift_ok
