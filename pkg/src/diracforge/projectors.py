"""Projector ladders for reducible chains.

For a chain ``Z_1, ..., Z_L`` the ladder consists of right partial
inverses ``Abar_k`` (one per stage, shape ``(M_{k-1}, M_k)``) and level
projectors ``D_k = I - Abar_{k+1} Z_{k+1}``.  On an exact chain the
ladder satisfies, exactly up to roundoff,

* ``Z_k Abar_k + Abar_{k+1} Z_{k+1} = I`` at every intermediate level,
* ``Abar_k Abar_{k+1} = 0``,
* ``D_0`` is the projector onto the independent directions among the
  constraints, with ``rank(D_0) = M`` and ``D_0 chi = chi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import CheckResult, ReducibleSystem, ValidationReport, matrix_rank, surface_points
from .errors import LadderError

__all__ = ["ProjectorLadder", "build_ladder", "verify_ladder"]


@dataclass
class ProjectorLadder:
    """The ladder matrices for one system.

    ``abar[k-1]`` is ``Abar_k`` of shape ``(M_{k-1}, M_k)`` and
    ``d_levels[k]`` is the level-k projector ``D_k`` for k = 0..L-1,
    followed by the top-level product ``Z_L Abar_L`` at index L.
    """

    abar: list
    d_levels: list
    residuals: dict = field(default_factory=dict)


def build_ladder(system: ReducibleSystem) -> ProjectorLadder:
    """Build the ladder top-down from the highest stage.

    The top partial inverse is ``Z_L^T (Z_L Z_L^T)^{-1}``; descending,
    each ``Abar_k`` is the minimal-norm solution of
    ``Z_k Abar_k = I - Abar_{k+1} Z_{k+1}``, followed by a least-squares
    correction in the residual gauge freedom ``Abar_k += Z_{k-1} mu`` to
    suppress ``Abar_k Abar_{k+1}``.
    """
    order = system.order
    dims = system.level_dims
    if order == 0:
        return ProjectorLadder(abar=[], d_levels=[np.eye(dims[0])], residuals={})

    z = system.z_stages
    abar = [None] * order
    z_top = z[-1]
    gram = z_top @ z_top.T
    if matrix_rank(gram, system.tolerances.tol_rank) < z_top.shape[0]:
        raise LadderError("top stage is rank deficient; run validate() first")
    abar[order - 1] = z_top.T @ np.linalg.inv(gram)

    for k in range(order - 1, 0, -1):
        # Solve Z_k Abar_k = I - Abar_{k+1} Z_{k+1} in the least-squares sense.
        target = np.eye(dims[k]) - abar[k] @ z[k]
        abar[k - 1] = np.linalg.pinv(z[k - 1]) @ target
        cross = abar[k - 1] @ abar[k]
        if np.max(np.abs(cross)) > system.tolerances.tol_weak and k >= 2:
            # Gauge correction Abar_k -= Z_{k-1} mu chosen by least squares so
            # that the product with the next partial inverse is suppressed.
            lhs = z[k - 2]
            mu = np.linalg.pinv(lhs) @ cross @ np.linalg.pinv(abar[k])
            abar[k - 1] = abar[k - 1] - lhs @ mu

    d_levels = [np.eye(dims[k]) - abar[k] @ z[k] for k in range(order)]
    d_levels.append(z[-1] @ abar[-1])

    residuals = {}
    for k in range(order - 1):
        contraction = z[k] @ abar[k] + abar[k + 1] @ z[k + 1] - np.eye(dims[k + 1])
        residuals[f"contraction_level_{k + 1}"] = float(np.max(np.abs(contraction)))
        residuals[f"abar_product_{k + 1}_{k + 2}"] = float(np.max(np.abs(abar[k] @ abar[k + 1])))
    residuals["top_identity"] = float(np.max(np.abs(d_levels[order] - np.eye(dims[order]))))
    return ProjectorLadder(abar=abar, d_levels=d_levels, residuals=residuals)


def verify_ladder(system: ReducibleSystem, ladder: ProjectorLadder) -> ValidationReport:
    """Check every ladder identity and return a residual report."""
    tol = system.tolerances
    order = system.order
    dims = system.level_dims
    checks = []

    def add(name, residual, threshold=None, detail=""):
        threshold = tol.tol_weak if threshold is None else threshold
        checks.append(CheckResult(name, residual <= threshold, float(residual), threshold, detail))

    for k, d in enumerate(ladder.d_levels[: order + 1]):
        add(f"projector_idempotent_level_{k}", np.max(np.abs(d @ d - d)) if d.size else 0.0)

    if order > 0:
        z = system.z_stages
        d0 = ladder.d_levels[0]
        for k in range(order):
            add(
                f"stage_annihilates_projector_level_{k}",
                np.max(np.abs(z[k] @ ladder.d_levels[k])),
            )
        for k in range(1, order):
            add(
                f"projector_fixes_stage_level_{k}",
                np.max(np.abs(ladder.d_levels[k] @ z[k - 1] - z[k - 1])),
            )
        add("projector_annihilates_first_partial_inverse", np.max(np.abs(d0 @ ladder.abar[0])))
        for k in range(order - 1):
            add(
                f"partial_inverse_product_{k + 1}_{k + 2}",
                np.max(np.abs(ladder.abar[k] @ ladder.abar[k + 1])),
            )
            contraction = (
                z[k] @ ladder.abar[k] + ladder.abar[k + 1] @ z[k + 1] - np.eye(dims[k + 1])
            )
            add(f"chain_contraction_level_{k + 1}", np.max(np.abs(contraction)))
        add("top_identity", np.max(np.abs(ladder.d_levels[order] - np.eye(dims[order]))))

        m = system.independent_count
        rank_gap = abs(matrix_rank(d0, tol.tol_rank) - m)
        add("base_projector_rank", float(rank_gap), 0.5, f"expected rank {m}")
        add("base_projector_trace", abs(float(np.trace(d0)) - m))

        worst = 0.0
        for z_pt in surface_points(system):
            values = system.constraint_values(z_pt)
            worst = max(worst, float(np.max(np.abs(d0 @ values - values))))
        add("base_projector_fixes_constraints_on_surface", worst)
    return ValidationReport(tuple(checks))
