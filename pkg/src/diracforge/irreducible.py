"""Irreducible reconstruction of a reducible system on an extended phase space.

Auxiliary canonical variables ``y`` are attached to every odd dependency
level; the constraints are completed to an equivalent irreducible
second-class set ``chi-tilde`` built from the chain's partial inverses:

* level 0:        ``chi + Abar_1 y_1``
* even level e:   ``Z_e y_{e-1} + Abar_{e+1} y_{e+1}`` (last term absent
  at the top level when the order is even)

The bracket matrix of the completed set is block tridiagonal and has a
closed-form inverse assembled from the same ladder matrices; its (0, 0)
block is the invertible completion ``mu``.  On the constraint surface
(where every ``y`` vanishes) the irreducible Dirac bracket agrees with
the reducible one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .chain import ReducibleSystem, matrix_rank
from .dirac import DiracStructure, build_structure, canonical_sector_form, dirac_bracket_at
from .errors import ParityError, RecoveryError, StructuralError
from .phasespace import PolyFunction, gradient
from .projectors import ProjectorLadder

__all__ = [
    "ExtendedPhaseSpace",
    "IrreducibleSystem",
    "build_extended_space",
    "build_irreducible",
    "build_c_delta",
    "build_c_delta_inverse",
    "irreducible_dirac_at",
    "irreducible_fundamental_brackets",
    "to_plain_system",
    "CertificateReport",
    "certify_equivalence",
]


@dataclass(frozen=True)
class ExtendedPhaseSpace:
    """The base phase space augmented with one canonical sector per odd level.

    Sector ``j`` carries ``sector_dims[j]`` auxiliary coordinates with the
    constant canonical antisymmetric bracket form; every sector dimension
    must be even for that form to be invertible.
    """

    base_dim: int
    sector_dims: tuple

    def __post_init__(self):
        for j, m in enumerate(self.sector_dims):
            if m % 2 != 0:
                raise ParityError(
                    f"auxiliary sector {j} has odd size {m}; every odd-level block must "
                    "have even size to carry an invertible antisymmetric form"
                )

    @property
    def dim(self) -> int:
        return self.base_dim + sum(self.sector_dims)

    def sector_offset(self, j: int) -> int:
        return self.base_dim + sum(self.sector_dims[:j])

    def sector_form(self, j: int) -> np.ndarray:
        return canonical_sector_form(self.sector_dims[j])

    def bracket_matrix(self, base_sigma: np.ndarray) -> np.ndarray:
        """Block-diagonal coordinate bracket matrix of the extended space."""
        out = np.zeros((self.dim, self.dim))
        out[: self.base_dim, : self.base_dim] = base_sigma
        for j in range(len(self.sector_dims)):
            off = self.sector_offset(j)
            m = self.sector_dims[j]
            out[off : off + m, off : off + m] = self.sector_form(j)
        return out


def build_extended_space(system: ReducibleSystem) -> ExtendedPhaseSpace:
    dims = system.level_dims
    odd = tuple(dims[k] for k in range(1, system.order + 1, 2))
    return ExtendedPhaseSpace(base_dim=system.space.dim, sector_dims=odd)


def _matrix_times_coords(mat: np.ndarray, n_vars: int, col_offset: int) -> list:
    """Rows of ``mat`` as linear polynomials in coordinates starting at ``col_offset``."""
    out = []
    for row in mat:
        terms = {}
        for j, coeff in enumerate(row):
            if coeff != 0.0:
                exps = [0] * n_vars
                exps[col_offset + j] = 1
                terms[tuple(exps)] = Fraction(float(coeff))
        out.append(PolyFunction(n_vars, terms))
    return out


@dataclass
class IrreducibleSystem:
    """The completed irreducible constraints on the extended phase space."""

    base: ReducibleSystem
    ladder: ProjectorLadder
    ext: ExtendedPhaseSpace
    chi_tilde: list
    even_levels: tuple
    block_sizes: tuple
    recovery_residual: float = 0.0

    @property
    def total_constraints(self) -> int:
        return int(sum(self.block_sizes))

    def extended_point(self, base_point, y_values=None) -> np.ndarray:
        z = np.zeros(self.ext.dim)
        z[: self.ext.base_dim] = np.asarray(base_point, dtype=float)
        if y_values is not None:
            z[self.ext.base_dim :] = np.asarray(y_values, dtype=float)
        return z

    def constraint_values(self, ext_point) -> np.ndarray:
        return np.array([c.evaluate(ext_point) for c in self.chi_tilde])

    def constraint_jacobian(self, ext_point) -> np.ndarray:
        return np.array([gradient(c, ext_point) for c in self.chi_tilde])

    def extended_bracket_matrix(self) -> np.ndarray:
        return self.ext.bracket_matrix(self.base.space.symplectic_matrix())


def _sector_index(level: int) -> int:
    """Auxiliary sector index for odd level ``level = 2j + 1``."""
    return (level - 1) // 2


def build_irreducible(
    system: ReducibleSystem, ladder: ProjectorLadder, verify_recovery: bool = True
) -> IrreducibleSystem:
    """Complete the constraints to an irreducible set on the extended space.

    When ``verify_recovery`` is set, the linear reconstruction that
    recovers ``(chi, y)`` from the completed set is checked at random
    points of the extended space and a ``RecoveryError`` is raised if it
    fails beyond the weak tolerance.
    """
    ext = build_extended_space(system)
    order = system.order
    dims = system.level_dims
    n_vars = ext.dim
    top_even = order if order % 2 == 0 else order - 1
    even_levels = tuple(range(0, top_even + 1, 2))

    chi_tilde = []
    block_sizes = []
    for e in even_levels:
        if e == 0:
            block = [c.extend(n_vars) for c in system.chi]
            if order >= 1:
                off = ext.sector_offset(0)
                extra = _matrix_times_coords(ladder.abar[0], n_vars, off)
                block = [a + b for a, b in zip(block, extra)]
        else:
            off_prev = ext.sector_offset(_sector_index(e - 1))
            block = _matrix_times_coords(system.z_stages[e - 1], n_vars, off_prev)
            if e + 1 <= order:
                off_next = ext.sector_offset(_sector_index(e + 1))
                extra = _matrix_times_coords(ladder.abar[e], n_vars, off_next)
                block = [a + b for a, b in zip(block, extra)]
        chi_tilde.extend(block)
        block_sizes.append(dims[e])

    irr = IrreducibleSystem(
        base=system,
        ladder=ladder,
        ext=ext,
        chi_tilde=chi_tilde,
        even_levels=even_levels,
        block_sizes=tuple(block_sizes),
    )
    if verify_recovery:
        irr.recovery_residual = _verify_recovery(irr)
    return irr


def _block_slices(block_sizes):
    slices = []
    start = 0
    for size in block_sizes:
        slices.append(slice(start, start + size))
        start += size
    return slices


def _verify_recovery(irr: IrreducibleSystem) -> float:
    """Check that ``(chi, y)`` is a linear function of the completed constraints.

    The reconstruction is ``chi = D_0 * block_0`` and, for each odd level,
    ``y = Z * block_below + Abar * block_above`` (top term absent for the
    highest odd level when the order is odd).  Verified at random points
    of the full extended space, not only on the surface.
    """
    system, ladder, ext = irr.base, irr.ladder, irr.ext
    order = system.order
    tol = system.tolerances
    slices = _block_slices(irr.block_sizes)
    rng = np.random.default_rng(tol.seed)
    worst = 0.0
    for _ in range(3):
        point = rng.uniform(-1.0, 1.0, size=ext.dim)
        values = irr.constraint_values(point)
        chi_rec = ladder.d_levels[0] @ values[slices[0]]
        chi_true = system.constraint_values(point[: ext.base_dim])
        worst = max(worst, float(np.max(np.abs(chi_rec - chi_true))))
        for o in range(1, order + 1, 2):
            below = values[slices[(o - 1) // 2]]
            y_rec = system.z_stages[o - 1] @ below
            if o + 1 <= irr.even_levels[-1]:
                above = values[slices[(o + 1) // 2]]
                y_rec = y_rec + ladder.abar[o] @ above
            off = ext.sector_offset(_sector_index(o))
            y_true = point[off : off + ext.sector_dims[_sector_index(o)]]
            worst = max(worst, float(np.max(np.abs(y_rec - y_true))))
    if worst > tol.tol_weak:
        raise RecoveryError(
            f"reconstruction of (chi, y) from the completed constraints has residual "
            f"{worst:.3e} beyond {tol.tol_weak:.1e}"
        )
    return worst


# ---------------------------------------------------------------------------
# block matrices


def build_c_delta(irr: IrreducibleSystem, structure: DiracStructure) -> np.ndarray:
    """The bracket matrix of the completed constraints, assembled blockwise.

    Block tridiagonal: the (0, 0) block is ``C + Abar_1 w_1 Abar_1^T``,
    the diagonal block at even level e is
    ``Z_e w_{e-1} Z_e^T + Abar_{e+1} w_{e+1} Abar_{e+1}^T`` and the
    superdiagonal block is ``Abar_{e-1} w_{e-1} Z_e^T``, where ``w`` is
    the canonical sector form of each odd level.
    """
    system, ladder = irr.base, irr.ladder
    order = system.order
    total = irr.total_constraints
    slices = _block_slices(irr.block_sizes)
    out = np.zeros((total, total))

    def omega(level):
        return irr.ext.sector_form(_sector_index(level))

    for i, e in enumerate(irr.even_levels):
        if e == 0:
            block = structure.cmat.copy()
            if order >= 1:
                block += ladder.abar[0] @ omega(1) @ ladder.abar[0].T
        else:
            z_e = system.z_stages[e - 1]
            block = z_e @ omega(e - 1) @ z_e.T
            if e + 1 <= order:
                block += ladder.abar[e] @ omega(e + 1) @ ladder.abar[e].T
        out[slices[i], slices[i]] = block
        if i + 1 < len(irr.even_levels):
            e_next = irr.even_levels[i + 1]
            upper = ladder.abar[e_next - 2] @ omega(e_next - 1) @ system.z_stages[e_next - 1].T
            out[slices[i], slices[i + 1]] = upper
            out[slices[i + 1], slices[i]] = -upper.T
    return out


def build_c_delta_inverse(irr: IrreducibleSystem, structure: DiracStructure) -> np.ndarray:
    """The closed-form inverse of the completed bracket matrix.

    Also block tridiagonal: the (0, 0) block is the invertible completion
    ``mu = Mmat + Z_1^T w_1^{-1} Z_1``, the diagonal block at even level
    e is ``Abar_e^T w_{e-1}^{-1} Abar_e + Z_{e+1}^T w_{e+1}^{-1} Z_{e+1}``
    and the superdiagonal block is ``Z_{e-1}^T w_{e-1}^{-1} Abar_e``.
    """
    system, ladder = irr.base, irr.ladder
    order = system.order
    total = irr.total_constraints
    slices = _block_slices(irr.block_sizes)
    out = np.zeros((total, total))

    def omega_inv(level):
        return np.linalg.inv(irr.ext.sector_form(_sector_index(level)))

    for i, e in enumerate(irr.even_levels):
        if e == 0:
            block = structure.mmat.copy()
            if order >= 1:
                z1 = system.z_stages[0]
                block += z1.T @ omega_inv(1) @ z1
        else:
            abar_e = ladder.abar[e - 1]
            block = abar_e.T @ omega_inv(e - 1) @ abar_e
            if e + 1 <= order:
                z_next = system.z_stages[e]
                block += z_next.T @ omega_inv(e + 1) @ z_next
        out[slices[i], slices[i]] = block
        if i + 1 < len(irr.even_levels):
            e_next = irr.even_levels[i + 1]
            upper = system.z_stages[e_next - 2].T @ omega_inv(e_next - 1) @ ladder.abar[e_next - 1]
            out[slices[i], slices[i + 1]] = upper
            out[slices[i + 1], slices[i]] = -upper.T
    return out


def irreducible_dirac_at(
    f: PolyFunction,
    g: PolyFunction,
    irr: IrreducibleSystem,
    ext_point,
    structure: DiracStructure = None,
) -> float:
    """Evaluate the irreducible Dirac bracket of extended-space functions.

    ``f`` and ``g`` must be polynomials on the extended space (use
    ``PolyFunction.extend`` for base observables).  The base-point
    structure is rebuilt unless supplied.
    """
    ext_point = np.asarray(ext_point, dtype=float)
    if f.n_vars != irr.ext.dim or g.n_vars != irr.ext.dim:
        raise StructuralError("observables must live on the extended space")
    if structure is None:
        structure = build_structure(irr.base, irr.ladder, ext_point[: irr.ext.base_dim])
    sigma_ext = irr.extended_bracket_matrix()
    jac = irr.constraint_jacobian(ext_point)
    kernel = build_c_delta_inverse(irr, structure)
    grad_f = gradient(f, ext_point)
    grad_g = gradient(g, ext_point)
    plain = grad_f @ sigma_ext @ grad_g
    bf = grad_f @ sigma_ext @ jac.T
    bg = jac @ sigma_ext @ grad_g
    return float(plain - bf @ kernel @ bg)


def irreducible_fundamental_brackets(
    irr: IrreducibleSystem, ext_point, structure: DiracStructure = None
) -> np.ndarray:
    """The matrix of extended coordinate brackets under the irreducible bracket."""
    ext_point = np.asarray(ext_point, dtype=float)
    if structure is None:
        structure = build_structure(irr.base, irr.ladder, ext_point[: irr.ext.base_dim])
    sigma_ext = irr.extended_bracket_matrix()
    jac = irr.constraint_jacobian(ext_point)
    kernel = build_c_delta_inverse(irr, structure)
    hv = sigma_ext @ jac.T
    return sigma_ext + hv @ kernel @ hv.T


def to_plain_system(irr: IrreducibleSystem) -> ReducibleSystem:
    """Repackage the completed constraints as an ordinary order-0 system.

    The auxiliary sectors carry the canonical form, so splitting each
    sector in half and interleaving with the base pairs produces a
    canonical phase space on which the completed constraints are plain
    polynomial constraints with no reducibility.
    """
    from .phasespace import PhaseSpace

    ext = irr.ext
    n_base = ext.base_dim // 2
    halves = [m // 2 for m in ext.sector_dims]
    n_total = n_base + sum(halves)
    perm = [0] * ext.dim
    for i in range(n_base):
        perm[i] = i
        perm[n_base + i] = n_total + i
    q_cursor = n_base
    for j, m in enumerate(ext.sector_dims):
        off = ext.sector_offset(j)
        for t in range(halves[j]):
            perm[off + t] = q_cursor + t
            perm[off + halves[j] + t] = n_total + q_cursor + t
        q_cursor += halves[j]
    chi = [c.permute_variables(perm) for c in irr.chi_tilde]
    return ReducibleSystem(PhaseSpace(n_total), chi, [], irr.base.tolerances)


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class CertificateReport:
    n_points: int
    n_observables: int
    max_bracket_deviation: float
    max_mu_route_deviation: float
    max_inverse_residual: float
    rank_ok: bool
    tol_weak: float

    @property
    def passed(self) -> bool:
        return (
            self.rank_ok
            and self.max_bracket_deviation <= self.tol_weak
            and self.max_mu_route_deviation <= self.tol_weak
            and self.max_inverse_residual <= self.tol_weak
        )

    def summary_lines(self) -> list:
        flag = lambda ok: "PASS" if ok else "FAIL"
        return [
            f"[{flag(self.max_bracket_deviation <= self.tol_weak)}] reducible vs irreducible "
            f"brackets: max deviation {self.max_bracket_deviation:.3e} <= {self.tol_weak:.1e}",
            f"[{flag(self.max_mu_route_deviation <= self.tol_weak)}] singular vs invertible "
            f"kernel routes: max deviation {self.max_mu_route_deviation:.3e}",
            f"[{flag(self.max_inverse_residual <= self.tol_weak)}] closed-form inverse residual "
            f"{self.max_inverse_residual:.3e}",
            f"[{flag(self.rank_ok)}] completed constraint set is second class",
        ]


def _random_observable(space_dim, ext_dim, rng, degree=2, n_terms=4) -> PolyFunction:
    terms = {}
    for _ in range(n_terms):
        exps = [0] * space_dim
        for _ in range(rng.integers(1, degree + 1)):
            exps[rng.integers(0, space_dim)] += 1
        coeff = Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))
        if coeff != 0:
            terms[tuple(exps)] = terms.get(tuple(exps), Fraction(0)) + coeff
    poly = PolyFunction(space_dim, terms)
    return poly.extend(ext_dim)


def certify_equivalence(
    system: ReducibleSystem,
    ladder: ProjectorLadder = None,
    irr: IrreducibleSystem = None,
    n_points: int = None,
    n_observables: int = 6,
    seed: int = None,
) -> CertificateReport:
    """Numerically certify that reducible and irreducible brackets agree weakly.

    Samples points on the constraint surface (auxiliary coordinates zero),
    draws random polynomial observables of the base coordinates, and
    compares the reducible Dirac bracket (both kernel routes) with the
    irreducible bracket of the completed system, checking also the
    closed-form inverse and the second-class rank of the completed set.
    """
    from .chain import surface_points
    from .projectors import build_ladder

    tol = system.tolerances
    if ladder is None:
        ladder = build_ladder(system)
    if irr is None:
        irr = build_irreducible(system, ladder)
    n_points = tol.n_samples if n_points is None else n_points
    seed = tol.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    observables = [
        _random_observable(system.space.dim, irr.ext.dim, rng) for _ in range(n_observables)
    ]
    pairs = [
        (observables[rng.integers(0, n_observables)], observables[rng.integers(0, n_observables)])
        for _ in range(n_observables)
    ]

    max_dev = 0.0
    max_mu_dev = 0.0
    max_inv = 0.0
    rank_ok = True
    base_dim = system.space.dim
    for z in surface_points(system, n_points=n_points, seed=seed):
        structure = build_structure(system, ladder, z)
        ext_point = irr.extended_point(z)
        c_delta = build_c_delta(irr, structure)
        c_delta_inv = build_c_delta_inverse(irr, structure)
        max_inv = max(
            max_inv,
            float(np.max(np.abs(c_delta @ c_delta_inv - np.eye(irr.total_constraints)))),
        )
        rank_ok = rank_ok and (
            matrix_rank(c_delta, tol.tol_rank) == irr.total_constraints
        )
        direct = irr.constraint_jacobian(ext_point)
        sigma_ext = irr.extended_bracket_matrix()
        assembled_residual = float(
            np.max(np.abs(direct @ sigma_ext @ direct.T - c_delta))
        )
        max_inv = max(max_inv, assembled_residual)
        for f_ext, g_ext in pairs:
            f_base = _restrict_to_base(f_ext, base_dim)
            g_base = _restrict_to_base(g_ext, base_dim)
            red = dirac_bracket_at(f_base, g_base, system, structure, kind="m")
            red_mu = dirac_bracket_at(f_base, g_base, system, structure, kind="mu")
            irrv = irreducible_dirac_at(f_ext, g_ext, irr, ext_point, structure=structure)
            max_dev = max(max_dev, abs(red - irrv))
            max_mu_dev = max(max_mu_dev, abs(red - red_mu))
    return CertificateReport(
        n_points=n_points,
        n_observables=n_observables,
        max_bracket_deviation=max_dev,
        max_mu_route_deviation=max_mu_dev,
        max_inverse_residual=max_inv,
        rank_ok=rank_ok,
        tol_weak=tol.tol_weak,
    )


def _restrict_to_base(poly: PolyFunction, base_dim: int) -> PolyFunction:
    """Drop the auxiliary variables of a polynomial that does not use them."""
    terms = {}
    for exps, coeff in poly.terms.items():
        if any(exps[base_dim:]):
            raise StructuralError("observable depends on auxiliary coordinates")
        terms[exps[:base_dim]] = coeff
    return PolyFunction(base_dim, terms)
