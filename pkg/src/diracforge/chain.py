"""Reducible constraint systems and their validation.

A system of order L consists of constraint functions ``chi`` on a phase
space together with stage matrices ``Z_1, ..., Z_L`` expressing the
dependencies among them: ``Z_1 chi = 0`` identically and each composite
``Z_{k+1} Z_k`` vanishes on the constraint surface.  The number of
independent constraints is the alternating sum ``M = sum_k (-1)^k M_k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ChainGenerationError, StructuralError
from .phasespace import PhaseSpace, PolyFunction, gradient_matrix, sample_surface_point

__all__ = [
    "Tolerances",
    "ReducibleSystem",
    "CheckResult",
    "ValidationReport",
    "validate",
    "ChainProfile",
    "generate_random_chain",
    "DofReport",
    "dof_report",
    "tangent_complement_generators",
    "matrix_rank",
    "surface_points",
    "system_to_json_obj",
    "system_from_json_obj",
    "system_to_json",
    "system_from_json",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances and sampling controls used throughout the pipeline."""

    tol_weak: float = 1e-8
    tol_rank: float = 1e-9
    tol_surface: float = 1e-10
    n_samples: int = 5
    seed: int = 0


def matrix_rank(mat: np.ndarray, tol_rank: float) -> int:
    """Rank via SVD with a relative singular-value cutoff ``tol_rank``."""
    mat = np.asarray(mat, dtype=float)
    if mat.size == 0:
        return 0
    svals = np.linalg.svd(mat, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals > tol_rank * svals[0]))


@dataclass
class ReducibleSystem:
    """Constraint functions plus their reducibility chain.

    ``z_stages[k-1]`` is the matrix ``Z_k`` of shape ``(M_k, M_{k-1})``.
    An empty ``z_stages`` list means the system is declared irreducible
    (order zero).
    """

    space: PhaseSpace
    chi: list
    z_stages: list = field(default_factory=list)
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        self.chi = list(self.chi)
        self.z_stages = [np.asarray(z, dtype=float) for z in self.z_stages]
        if not self.chi:
            raise StructuralError("a system needs at least one constraint")
        for c in self.chi:
            if c.n_vars != self.space.dim:
                raise StructuralError("constraint variable count does not match the phase space")
        dims = self.level_dims
        for k, z in enumerate(self.z_stages, start=1):
            if z.ndim != 2 or z.shape[1] != dims[k - 1]:
                raise StructuralError(
                    f"stage {k} has shape {z.shape}, expected ({z.shape[0]}, {dims[k - 1]})"
                )
            if z.shape[0] == 0:
                raise StructuralError(f"stage {k} has no rows")

    @property
    def order(self) -> int:
        return len(self.z_stages)

    @property
    def level_dims(self) -> list:
        """``[M_0, M_1, ..., M_L]``."""
        return [len(self.chi)] + [z.shape[0] for z in self.z_stages]

    @property
    def independent_count(self) -> int:
        """The alternating sum ``M = M_0 - M_1 + M_2 - ...``."""
        return int(sum((-1) ** k * m for k, m in enumerate(self.level_dims)))

    def constraint_values(self, point) -> np.ndarray:
        return np.array([c.evaluate(point) for c in self.chi])

    def constraint_jacobian(self, point) -> np.ndarray:
        """Matrix whose row a is the gradient of ``chi_a`` at the point."""
        return gradient_matrix(self.chi, point)

    def bracket_matrix(self, point) -> np.ndarray:
        """``C_ab = [chi_a, chi_b]`` evaluated at the point."""
        jac = self.constraint_jacobian(point)
        return jac @ self.space.symplectic_matrix() @ jac.T


def surface_points(system: ReducibleSystem, n_points=None, seed=None) -> list:
    """Sample points on the constraint surface using the system's tolerances."""
    tol = system.tolerances
    n_points = tol.n_samples if n_points is None else n_points
    seed = tol.seed if seed is None else seed
    return [
        sample_surface_point(system.chi, system.space, seed=seed + i, tol_surface=tol.tol_surface)
        for i in range(n_points)
    ]


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    threshold: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary_lines(self) -> list:
        return [
            f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: residual={c.residual:.3e} "
            f"threshold={c.threshold:.1e}" + (f" ({c.detail})" if c.detail else "")
            for c in self.checks
        ]


def _first_stage_residual(system: ReducibleSystem) -> float:
    """Exact check that ``Z_1 chi`` vanishes identically as polynomials."""
    if system.order == 0:
        return 0.0
    z1 = system.z_stages[0]
    worst = Fraction(0)
    for row in z1:
        combo = PolyFunction.zero(system.space.dim)
        for coeff, c in zip(row, system.chi):
            if coeff != 0.0:
                combo = combo + Fraction(float(coeff)) * c
        for c in combo.terms.values():
            worst = max(worst, abs(c))
    return float(worst)


def validate(system: ReducibleSystem) -> ValidationReport:
    """Check every structural property of the chain; deterministic given the system.

    Performs exact polynomial checks where possible and numerical rank
    checks at ``n_samples`` points sampled on the constraint surface.
    """
    tol = system.tolerances
    checks = []

    res = _first_stage_residual(system)
    checks.append(
        CheckResult("first_stage_annihilates_constraints", res <= tol.tol_weak, res, tol.tol_weak)
    )

    worst_stage = 0.0
    for k in range(1, system.order):
        prod = system.z_stages[k] @ system.z_stages[k - 1]
        worst_stage = max(worst_stage, float(np.max(np.abs(prod))) if prod.size else 0.0)
    checks.append(
        CheckResult(
            "consecutive_stage_products_vanish",
            worst_stage <= tol.tol_weak,
            worst_stage,
            tol.tol_weak,
        )
    )

    if system.order > 0:
        z_top = system.z_stages[-1]
        r_top = matrix_rank(z_top, tol.tol_rank)
        ok = r_top == z_top.shape[0]
        checks.append(
            CheckResult(
                "top_stage_full_row_rank",
                ok,
                float(z_top.shape[0] - r_top),
                0.5,
                "" if ok else "dependent top-stage functions",
            )
        )

    m_expected = system.independent_count
    if m_expected <= 0 or m_expected > system.space.dim:
        checks.append(
            CheckResult(
                "independent_count_in_range",
                False,
                float(m_expected),
                float(system.space.dim),
                f"alternating sum M={m_expected} outside (0, 2N]",
            )
        )
        return ValidationReport(tuple(checks))

    points = surface_points(system)
    worst_rank_gap = 0
    worst_c_gap = 0
    for z in points:
        jac = system.constraint_jacobian(z)
        worst_rank_gap = max(worst_rank_gap, abs(matrix_rank(jac, tol.tol_rank) - m_expected))
        cmat = system.bracket_matrix(z)
        worst_c_gap = max(worst_c_gap, abs(matrix_rank(cmat, tol.tol_rank) - m_expected))
    checks.append(
        CheckResult(
            "gradient_rank_matches_independent_count",
            worst_rank_gap == 0,
            float(worst_rank_gap),
            0.5,
        )
    )
    checks.append(
        CheckResult(
            "bracket_matrix_rank_matches_independent_count",
            worst_c_gap == 0,
            float(worst_c_gap),
            0.5,
            "" if worst_c_gap == 0 else "not second-class",
        )
    )
    return ValidationReport(tuple(checks))


# ---------------------------------------------------------------------------
# random chain generation


@dataclass(frozen=True)
class ChainProfile:
    """Requested shape of a random chain: level sizes, phase-space size, seed."""

    level_dims: tuple
    n_pairs: int
    seed: int = 0

    @property
    def order(self) -> int:
        return len(self.level_dims) - 1


def _rank_profile(dims) -> list:
    """``r_k = M_k - M_{k+1} + M_{k+2} - ...`` for k = 0..L."""
    out = []
    for k in range(len(dims)):
        out.append(sum((-1) ** (i - k) * dims[i] for i in range(k, len(dims))))
    return out


def _random_unimodular(n: int, rng: np.random.Generator):
    """An integer matrix with determinant +-1, together with its exact inverse.

    Built from random elementary row operations applied to a signed
    permutation, with the inverse tracked by the inverse operations.
    """
    perm = rng.permutation(n)
    signs = rng.choice([-1, 1], size=n)
    mat = np.zeros((n, n), dtype=np.int64)
    mat[np.arange(n), perm] = signs
    inv = np.zeros((n, n), dtype=np.int64)
    inv[perm, np.arange(n)] = signs
    for _ in range(2 * n):
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        c = int(rng.choice([-1, 1]))
        mat[i, :] += c * mat[j, :]
        inv[:, j] -= c * inv[:, i]
    return mat, inv


def generate_random_chain(profile: ChainProfile) -> ReducibleSystem:
    """Generate a seeded random system whose chain identities hold exactly.

    The chain is a fixed model chain of identity blocks conjugated by
    random unimodular integer matrices, so all stage products are exactly
    zero in floating point and the first stage annihilates the
    constraints exactly.
    """
    dims = list(profile.level_dims)
    if not dims or any(m <= 0 for m in dims):
        raise ChainGenerationError(f"every level size must be positive, got {dims}")
    ranks = _rank_profile(dims)
    m_independent = ranks[0]
    if any(r < 0 for r in ranks):
        raise ChainGenerationError(
            f"rank profile {ranks} has a negative entry; the alternating tail sums "
            "of the level sizes must all be nonnegative"
        )
    if m_independent <= 0 or m_independent % 2 != 0:
        raise ChainGenerationError(
            f"independent constraint count M={m_independent} must be positive and even"
        )
    if m_independent > 2 * profile.n_pairs:
        raise ChainGenerationError(
            f"M={m_independent} exceeds the phase-space dimension {2 * profile.n_pairs}"
        )
    for k in range(1, len(dims)):
        if ranks[k] > dims[k - 1]:
            raise ChainGenerationError(
                f"stage {k} needs rank {ranks[k]} but level {k - 1} only has size {dims[k - 1]}"
            )

    rng = np.random.default_rng(profile.seed)
    bases = []
    for m in dims:
        bases.append(_random_unimodular(m, rng))

    # Model stage E_k reads the trailing r_k coordinates of level k-1 into the
    # leading r_k slots of level k; then E_{k+1} E_k = 0 because r_k + r_{k+1}
    # never exceeds M_k splits leading/trailing disjointly (r_k + r_{k+1} = M_k).
    z_stages = []
    for k in range(1, len(dims)):
        r = ranks[k]
        model = np.zeros((dims[k], dims[k - 1]), dtype=np.int64)
        model[:r, dims[k - 1] - r :] = np.eye(r, dtype=np.int64)
        z_stages.append(bases[k][0] @ model @ bases[k - 1][1])

    space = PhaseSpace(profile.n_pairs)
    half = m_independent // 2
    independent = [space.q(i) for i in range(half)] + [space.p(i) for i in range(half)]
    mixing = bases[0][0][:, :m_independent]
    chi = []
    for row in mixing:
        combo = PolyFunction.zero(space.dim)
        for coeff, f in zip(row, independent):
            if coeff:
                combo = combo + Fraction(int(coeff)) * f
        chi.append(combo)
    return ReducibleSystem(space, chi, [z.astype(float) for z in z_stages])


# ---------------------------------------------------------------------------
# degree-of-freedom accounting


@dataclass(frozen=True)
class DofReport:
    level_dims: tuple
    independent_count: int
    surface_dim: int
    induced_rank: int


def tangent_complement_generators(system: ReducibleSystem, point) -> np.ndarray:
    """Columns spanning the symplectic-orthogonal complement of the surface tangent.

    These are the Hamiltonian vector fields of the constraints,
    ``sigma @ grad(chi_a)``, evaluated at the point.
    """
    jac = system.constraint_jacobian(point)
    return system.space.symplectic_matrix() @ jac.T


def dof_report(system: ReducibleSystem, point) -> DofReport:
    """Count independent constraints and the induced symplectic rank on the surface."""
    tol = system.tolerances
    m = system.independent_count
    jac = system.constraint_jacobian(point)
    # Orthonormal basis of the tangent space: null space of the jacobian.
    _, svals, vt = np.linalg.svd(jac)
    cutoff = tol.tol_rank * (svals[0] if svals.size else 1.0)
    rank = int(np.sum(svals > cutoff))
    tangent = vt[rank:].T
    induced = tangent.T @ system.space.symplectic_matrix() @ tangent
    return DofReport(
        level_dims=tuple(system.level_dims),
        independent_count=m,
        surface_dim=system.space.dim - rank,
        induced_rank=matrix_rank(induced, tol.tol_rank),
    )


# ---------------------------------------------------------------------------
# serialization


def _matrix_to_json(mat: np.ndarray) -> dict:
    return {
        "rows": int(mat.shape[0]),
        "cols": int(mat.shape[1]),
        "data": [[repr(float(x)) for x in row] for row in mat],
    }


def _matrix_from_json(obj) -> np.ndarray:
    mat = np.array([[float(x) for x in row] for row in obj["data"]], dtype=float)
    mat = mat.reshape(obj["rows"], obj["cols"])
    return mat


def system_to_json_obj(system: ReducibleSystem) -> dict:
    tol = system.tolerances
    return {
        "phase_space": {"n_pairs": system.space.n_pairs},
        "constraints": [c.to_json_obj() for c in system.chi],
        "reducibility": [
            {"level": k, **_matrix_to_json(z)} for k, z in enumerate(system.z_stages, start=1)
        ],
        "options": {
            "tol_weak": tol.tol_weak,
            "tol_rank": tol.tol_rank,
            "tol_surface": tol.tol_surface,
            "n_samples": tol.n_samples,
            "seed": tol.seed,
        },
    }


def system_from_json_obj(obj) -> ReducibleSystem:
    try:
        space = PhaseSpace(int(obj["phase_space"]["n_pairs"]))
        chi = [PolyFunction.from_json_obj(c, space.dim) for c in obj["constraints"]]
        stages = sorted(obj.get("reducibility", []), key=lambda s: s["level"])
        z_stages = [_matrix_from_json(s) for s in stages]
        options = obj.get("options", {})
        tol = Tolerances(
            tol_weak=float(options.get("tol_weak", Tolerances.tol_weak)),
            tol_rank=float(options.get("tol_rank", Tolerances.tol_rank)),
            tol_surface=float(options.get("tol_surface", Tolerances.tol_surface)),
            n_samples=int(options.get("n_samples", Tolerances.n_samples)),
            seed=int(options.get("seed", Tolerances.seed)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StructuralError(f"malformed system JSON: {exc}") from exc
    return ReducibleSystem(space, chi, z_stages, tol)


def system_to_json(system: ReducibleSystem) -> str:
    return json.dumps(system_to_json_obj(system), indent=2, sort_keys=True)


def system_from_json(text: str) -> ReducibleSystem:
    return system_from_json_obj(json.loads(text))
