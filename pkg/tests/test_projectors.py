import numpy as np
import pytest

from diracforge import (
    ChainProfile,
    LadderError,
    PhaseSpace,
    ReducibleSystem,
    build_ladder,
    generate_random_chain,
    verify_ladder,
)
from diracforge.chain import matrix_rank

PROFILES = [((3, 1), 2), ((4, 2), 4), ((4, 4, 2), 4), ((4, 4, 3, 1), 4),
            ((5, 4, 3, 2), 5), ((5, 6, 5, 3, 1), 5), ((6, 6, 5, 4, 3), 6)]


def test_toy_partial_inverse_frozen(toy_system):
    ladder = build_ladder(toy_system)
    assert np.allclose(ladder.abar[0], np.array([[1.0], [1.0], [-1.0]]) / 3.0)
    expected_d0 = np.eye(3) - np.outer([1, 1, -1], [1, 1, -1]) / 3.0
    assert np.allclose(ladder.d_levels[0], expected_d0)
    assert matrix_rank(ladder.d_levels[0], 1e-9) == 2


def test_toy_ladder_verifies(toy_system):
    ladder = build_ladder(toy_system)
    report = verify_ladder(toy_system, ladder)
    assert report.passed, report.summary_lines()


@pytest.mark.parametrize("dims,pairs", PROFILES)
def test_ladder_identities_across_profiles(dims, pairs):
    system = generate_random_chain(ChainProfile(dims, pairs, seed=21))
    ladder = build_ladder(system)
    report = verify_ladder(system, ladder)
    assert report.passed, report.summary_lines()
    # shapes: Abar_k is (M_{k-1}, M_k)
    for k, abar in enumerate(ladder.abar):
        assert abar.shape == (dims[k], dims[k + 1])


def test_order_zero_ladder_is_identity():
    space = PhaseSpace(1)
    system = ReducibleSystem(space, [space.q(0), space.p(0)], [])
    ladder = build_ladder(system)
    assert ladder.abar == []
    assert np.array_equal(ladder.d_levels[0], np.eye(2))
    assert verify_ladder(system, ladder).passed


def test_rank_deficient_top_stage_raises(toy_system):
    bad = ReducibleSystem(
        toy_system.space, toy_system.chi,
        [np.array([[1.0, 1.0, -1.0], [2.0, 2.0, -2.0]])[:1],
         np.zeros((1, 1))],
    )
    with pytest.raises(LadderError):
        build_ladder(bad)


def test_base_projector_annihilates_stage(toy_system):
    ladder = build_ladder(toy_system)
    z1 = toy_system.z_stages[0]
    assert np.allclose(z1 @ ladder.d_levels[0], 0.0, atol=1e-14)
    assert np.allclose(ladder.d_levels[0] @ ladder.abar[0], 0.0, atol=1e-14)
