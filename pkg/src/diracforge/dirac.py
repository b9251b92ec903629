"""Dirac brackets for reducible second-class systems.

Given the constraint bracket matrix ``C`` (singular for a reducible
chain, with rank M) the bracket is

    [F, G]* = [F, G] - [F, chi_a] K^{ab} [chi_b, G]

where ``K`` is either the minimal singular kernel ``Mmat`` satisfying
``C Mmat = D_0`` (the base projector), or an invertible completion
``mu``.  Both produce the same bracket on the constraint surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import ReducibleSystem, matrix_rank
from .errors import MuConstructionError, NotSecondClassError, StructuralError
from .phasespace import PolyFunction, gradient
from .projectors import ProjectorLadder

__all__ = [
    "DiracStructure",
    "build_c",
    "solve_m",
    "build_mu",
    "canonical_sector_form",
    "build_structure",
    "dirac_bracket_at",
    "dirac_bracket_function",
    "fundamental_brackets",
    "Trajectory",
    "evolve",
]


def build_c(system: ReducibleSystem, point) -> np.ndarray:
    """The constraint bracket matrix ``C_ab = [chi_a, chi_b]`` at a point."""
    return system.bracket_matrix(point)


def solve_m(system: ReducibleSystem, ladder: ProjectorLadder, cmat: np.ndarray) -> np.ndarray:
    """The minimal antisymmetric kernel: ``Mmat = pinv(C) @ D_0``, antisymmetrized.

    Satisfies ``C Mmat = D_0`` up to tolerance, is annihilated by the
    chain (``Mmat @ Abar_1 = 0``) and reduces to ``C^{-1}`` for an
    irreducible system.
    """
    tol = system.tolerances
    m = system.independent_count
    if matrix_rank(cmat, tol.tol_rank) != m:
        raise NotSecondClassError(
            f"bracket matrix has rank {matrix_rank(cmat, tol.tol_rank)}, expected {m}"
        )
    d0 = ladder.d_levels[0]
    mmat = np.linalg.pinv(cmat, rcond=tol.tol_rank) @ d0
    mmat = 0.5 * (mmat - mmat.T)
    residual = float(np.max(np.abs(cmat @ mmat - d0)))
    if residual > tol.tol_weak:
        raise NotSecondClassError(
            f"kernel equation C*M = D_0 has residual {residual:.3e} beyond {tol.tol_weak:.1e}"
        )
    return mmat


def canonical_sector_form(size: int) -> np.ndarray:
    """The canonical antisymmetric form ``[[0, I], [-I, 0]]`` of even size."""
    if size % 2 != 0:
        raise StructuralError(f"canonical sector form needs an even size, got {size}")
    half = size // 2
    omega = np.zeros((size, size))
    omega[:half, half:] = np.eye(half)
    omega[half:, :half] = -np.eye(half)
    return omega


def build_mu(
    system: ReducibleSystem,
    ladder: ProjectorLadder,
    cmat: np.ndarray,
    mmat: np.ndarray = None,
    sector_inverse: np.ndarray = None,
    retries: int = 8,
    require_invertible: bool = True,
):
    """An invertible antisymmetric completion ``mu = Mmat + Z_1^T W Z_1``.

    ``W`` defaults to the inverse of the canonical sector form on the
    first dependency level (when that level has even size), which is the
    completion compatible with the extended-system inverse.  If the
    result is singular, up to ``retries`` seeded random antisymmetric
    choices of ``W`` are tried.  When no invertible completion exists
    (always the case when the number of constraints is odd), either
    raises or, with ``require_invertible=False``, returns the best
    completion with its pseudo-inverse and an ``invertible=False`` flag.

    Returns ``(mu, mu_inv, invertible)``.
    """
    tol = system.tolerances
    if mmat is None:
        mmat = solve_m(system, ladder, cmat)
    m0 = len(system.chi)
    if system.order == 0:
        return mmat, np.linalg.inv(cmat), True

    z1 = system.z_stages[0]
    m1 = z1.shape[0]

    def completion(w):
        return mmat + z1.T @ w @ z1

    candidates = []
    if sector_inverse is not None:
        candidates.append(np.asarray(sector_inverse, dtype=float))
    elif m1 % 2 == 0:
        candidates.append(np.linalg.inv(canonical_sector_form(m1)))
    rng = np.random.default_rng(tol.seed)
    for _ in range(retries):
        raw = rng.standard_normal((m1, m1))
        candidates.append(0.5 * (raw - raw.T))

    best = None
    for w in candidates:
        mu = completion(w)
        mu = 0.5 * (mu - mu.T)
        if matrix_rank(mu, tol.tol_rank) == m0:
            return mu, np.linalg.inv(mu), True
        if best is None:
            best = mu
    if require_invertible:
        raise MuConstructionError(
            f"no invertible completion found after {retries} randomized retries "
            f"(M_0={m0}, M_1={m1}; an odd constraint count admits none)"
        )
    return best, np.linalg.pinv(best, rcond=tol.tol_rank), False


@dataclass
class DiracStructure:
    """Everything needed to evaluate Dirac brackets at one phase-space point."""

    point: np.ndarray
    cmat: np.ndarray
    mmat: np.ndarray
    mu: np.ndarray
    mu_inv: np.ndarray
    mu_invertible: bool
    jacobian: np.ndarray
    residuals: dict = field(default_factory=dict)


def build_structure(
    system: ReducibleSystem,
    ladder: ProjectorLadder,
    point,
    require_invertible_mu: bool = False,
) -> DiracStructure:
    """Assemble the bracket data (C, Mmat, mu) at a point."""
    point = np.asarray(point, dtype=float)
    cmat = build_c(system, point)
    mmat = solve_m(system, ladder, cmat)
    mu, mu_inv, invertible = build_mu(
        system, ladder, cmat, mmat, require_invertible=require_invertible_mu
    )
    jac = system.constraint_jacobian(point)
    residuals = {
        "kernel_equation": float(np.max(np.abs(cmat @ mmat - ladder.d_levels[0]))),
        "mmat_antisymmetry": float(np.max(np.abs(mmat + mmat.T))),
        "mu_antisymmetry": float(np.max(np.abs(mu + mu.T))),
    }
    if system.order > 0:
        residuals["mmat_annihilates_partial_inverse"] = float(
            np.max(np.abs(mmat @ ladder.abar[0]))
        )
    return DiracStructure(
        point=point,
        cmat=cmat,
        mmat=mmat,
        mu=mu,
        mu_inv=mu_inv,
        mu_invertible=invertible,
        jacobian=jac,
        residuals=residuals,
    )


def _kernel(structure: DiracStructure, kind: str) -> np.ndarray:
    if kind == "m":
        return structure.mmat
    if kind == "mu":
        return structure.mu
    raise StructuralError(f"unknown bracket kind {kind!r}; use 'm' or 'mu'")


def dirac_bracket_at(
    f: PolyFunction,
    g: PolyFunction,
    system: ReducibleSystem,
    structure: DiracStructure,
    kind: str = "m",
) -> float:
    """Evaluate ``[f, g]*`` at the structure's point."""
    sigma = system.space.symplectic_matrix()
    grad_f = gradient(f, structure.point)
    grad_g = gradient(g, structure.point)
    plain = grad_f @ sigma @ grad_g
    bf = grad_f @ sigma @ structure.jacobian.T
    bg = structure.jacobian @ sigma @ grad_g
    return float(plain - bf @ _kernel(structure, kind) @ bg)


def dirac_bracket_function(
    f: PolyFunction,
    g: PolyFunction,
    system: ReducibleSystem,
    ladder: ProjectorLadder,
    kind: str = "m",
):
    """``[f, g]*`` as a function of the phase-space point (structure rebuilt per call)."""

    def value(point):
        structure = build_structure(system, ladder, point)
        return dirac_bracket_at(f, g, system, structure, kind=kind)

    return value


def fundamental_brackets(
    system: ReducibleSystem, structure: DiracStructure, kind: str = "m"
) -> np.ndarray:
    """The matrix of coordinate brackets ``[z^a, z^b]*`` at the structure's point."""
    sigma = system.space.symplectic_matrix()
    hv = sigma @ structure.jacobian.T  # columns: [z^a, chi_b]
    return sigma + hv @ _kernel(structure, kind) @ hv.T


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    max_drift: float
    drift_ok: bool


def evolve(
    system: ReducibleSystem,
    ladder: ProjectorLadder,
    hamiltonian: PolyFunction,
    point,
    dt: float,
    steps: int,
    kind: str = "m",
    drift_tol: float = None,
) -> Trajectory:
    """Integrate ``z' = [z, H]*`` with classical Runge-Kutta 4.

    The bracket structure is rebuilt at every stage point.  Constraint
    drift is monitored along the trajectory and flagged against
    ``drift_tol`` (default: the system's weak tolerance).
    """
    drift_tol = system.tolerances.tol_weak if drift_tol is None else drift_tol
    grad_h = lambda z: gradient(hamiltonian, z)

    def velocity(z):
        structure = build_structure(system, ladder, z)
        fb = fundamental_brackets(system, structure, kind=kind)
        return fb @ grad_h(z)

    z = np.asarray(point, dtype=float)
    times = [0.0]
    points = [z.copy()]
    max_drift = float(np.max(np.abs(system.constraint_values(z))))
    for n in range(steps):
        k1 = velocity(z)
        k2 = velocity(z + 0.5 * dt * k1)
        k3 = velocity(z + 0.5 * dt * k2)
        k4 = velocity(z + dt * k3)
        z = z + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        times.append((n + 1) * dt)
        points.append(z.copy())
        max_drift = max(max_drift, float(np.max(np.abs(system.constraint_values(z)))))
    return Trajectory(
        times=np.array(times),
        points=np.array(points),
        max_drift=max_drift,
        drift_ok=max_drift <= drift_tol,
    )
