"""Lattice realization: antisymmetric tensor gauge fields of rank p.

On a periodic spatial lattice of dimension ``d`` the field ``A`` and its
momentum ``pi`` are p-forms (one real component per increasing
multi-index per site).  The second-class constraint set is the pair of
divergence conditions ``delta pi = 0`` and ``delta A = 0`` built from
the backward-difference codifferential ``delta``; successive
codifferentials of the same shape form a reducibility chain of order
``p - 1`` because ``delta delta = 0``.

On the periodic lattice every component of ``delta f`` sums to zero over
sites, so one site per component is redundant at every level.  Those
zero modes are removed by composing with integer restriction/embedding
maps, which keeps all chain identities exact and makes the retained
constraints second class.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .chain import ReducibleSystem, Tolerances
from .errors import StructuralError
from .phasespace import PhaseSpace, PolyFunction

__all__ = [
    "PFormSpec",
    "multi_indices",
    "codifferential_matrix",
    "build_pform_system",
    "reference_brackets",
    "expected_counts",
]


@dataclass(frozen=True)
class PFormSpec:
    """A rank-p lattice model: ``p``, spacetime dimension ``dim``, spatial extents."""

    p: int
    dim: int
    extents: tuple

    def __post_init__(self):
        if self.p < 1:
            raise StructuralError("the form rank p must be at least 1")
        if self.dim < self.p + 1:
            raise StructuralError(f"spacetime dimension {self.dim} too small for a {self.p}-form")
        if len(self.extents) != self.dim - 1:
            raise StructuralError(
                f"need {self.dim - 1} spatial extents, got {len(self.extents)}"
            )
        if any(n < 2 for n in self.extents):
            raise StructuralError("every lattice extent must be at least 2")

    @property
    def d(self) -> int:
        return self.dim - 1

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    @property
    def order(self) -> int:
        return self.p - 1


def multi_indices(d: int, q: int) -> list:
    """Sorted increasing multi-indices of length q out of d directions."""
    return list(itertools.combinations(range(d), q))


def _site_index(spec: PFormSpec, site) -> int:
    return int(np.ravel_multi_index(site, spec.extents, mode="wrap"))


def codifferential_matrix(spec: PFormSpec, q: int) -> np.ndarray:
    """The backward-difference codifferential on q-forms, as an integer matrix.

    Maps component-major flattened q-forms to (q-1)-forms:
    ``(delta f)_J(x) = sum_{l not in J} sign(l, J) (f_I(x) - f_I(x - e_l))``
    with ``I = sorted(J + (l,))`` and ``sign = (-1)^{position of l in I}``.
    """
    if not 1 <= q <= spec.d:
        raise StructuralError(f"codifferential defined for 1 <= q <= {spec.d}, got {q}")
    rows_idx = multi_indices(spec.d, q - 1)
    cols_idx = multi_indices(spec.d, q)
    col_pos = {I: i for i, I in enumerate(cols_idx)}
    s = spec.n_sites
    out = np.zeros((len(rows_idx) * s, len(cols_idx) * s), dtype=np.int64)
    sites = list(np.ndindex(*spec.extents))
    for j_pos, J in enumerate(rows_idx):
        for l in range(spec.d):
            if l in J:
                continue
            I = tuple(sorted(J + (l,)))
            sign = (-1) ** I.index(l)
            ci = col_pos[I]
            for x in sites:
                row = j_pos * s + _site_index(spec, x)
                shifted = list(x)
                shifted[l] -= 1
                out[row, ci * s + _site_index(spec, x)] += sign
                out[row, ci * s + _site_index(spec, tuple(shifted))] -= sign
    return out


def _restriction(n_components: int, n_sites: int) -> np.ndarray:
    """Drop the site-0 entry of every component."""
    out = np.zeros((n_components * (n_sites - 1), n_components * n_sites), dtype=np.int64)
    for c in range(n_components):
        for x in range(1, n_sites):
            out[c * (n_sites - 1) + x - 1, c * n_sites + x] = 1
    return out


def _embedding(n_components: int, n_sites: int) -> np.ndarray:
    """Right inverse of the restriction whose image has zero sum over sites.

    The dropped site-0 entry is reconstructed as minus the sum of the rest,
    which is exact for any vector in the image of the codifferential.
    """
    out = np.zeros((n_components * n_sites, n_components * (n_sites - 1)), dtype=np.int64)
    for c in range(n_components):
        for x in range(1, n_sites):
            out[c * n_sites + x, c * (n_sites - 1) + x - 1] = 1
            out[c * n_sites, c * (n_sites - 1) + x - 1] = -1
    return out


def _reduced_stage(spec: PFormSpec, q: int) -> np.ndarray:
    """The codifferential on q-forms with the redundant site removed on both sides."""
    s = spec.n_sites
    delta = codifferential_matrix(spec, q)
    rows = len(multi_indices(spec.d, q - 1))
    cols = len(multi_indices(spec.d, q))
    return _restriction(rows, s) @ delta @ _embedding(cols, s)


def build_pform_system(spec: PFormSpec, tolerances: Tolerances = None) -> ReducibleSystem:
    """Assemble the lattice model as a reducible system.

    Phase-space layout: coordinate ``q`` index ``comp * S + site`` is the
    field component ``A_I(x)`` and the matching momentum is ``pi_I(x)``.
    Constraints: the momentum divergence block first, then the field
    divergence block, each with the redundant site removed per component.
    """
    s = spec.n_sites
    n_field = len(multi_indices(spec.d, spec.p)) * s
    space = PhaseSpace(n_field)
    delta_top = codifferential_matrix(spec, spec.p)
    w = _restriction(len(multi_indices(spec.d, spec.p - 1)), s) @ delta_top

    chi = []
    for offset in (n_field, 0):  # momentum block first, then the field block
        for row in w:
            terms = {}
            for j, coeff in enumerate(row):
                if coeff:
                    exps = [0] * space.dim
                    exps[offset + j] = 1
                    terms[tuple(exps)] = Fraction(int(coeff))
            chi.append(PolyFunction(space.dim, terms))

    z_stages = []
    for k in range(1, spec.order + 1):
        stage = _reduced_stage(spec, spec.p - k)
        z_stages.append(np.block([
            [stage, np.zeros_like(stage)],
            [np.zeros_like(stage), stage],
        ]).astype(float))
    tolerances = tolerances or Tolerances()
    return ReducibleSystem(space, chi, z_stages, tolerances)


def expected_counts(spec: PFormSpec) -> dict:
    """Independent closed-form counting of constraints and surface dimension."""
    from math import comb

    d, p, s = spec.d, spec.p, spec.n_sites
    level_dims = [2 * comb(d, p - 1 - k) * (s - 1) for k in range(p)]
    m_independent = 2 * (s - 1) * comb(d - 1, p - 1)
    surface_dim = 2 * (comb(d, p) + (s - 1) * comb(d - 1, p))
    return {
        "level_dims": level_dims,
        "independent_count": m_independent,
        "surface_dim": surface_dim,
    }


def reference_brackets(spec: PFormSpec) -> np.ndarray:
    """The expected Dirac brackets ``[A_I(x), pi_J(y)]*`` from a Fourier oracle.

    Mode by mode the bracket is the orthogonal projector onto the kernel
    of the contraction with the lattice momentum symbol
    ``1 - exp(-i kappa_l)``; the position-space kernel is its inverse
    discrete Fourier transform.  Independent of the chain machinery.
    """
    d, p = spec.d, spec.p
    comps_p = multi_indices(d, p)
    comps_lower = multi_indices(d, p - 1)
    n_p = len(comps_p)
    s = spec.n_sites
    col_pos = {I: i for i, I in enumerate(comps_p)}

    projectors = np.zeros((s, n_p, n_p), dtype=complex)
    for flat, mode in enumerate(np.ndindex(*spec.extents)):
        kappa = 2.0 * np.pi * np.array(mode) / np.array(spec.extents)
        symbol = 1.0 - np.exp(-1j * kappa)
        iota = np.zeros((len(comps_lower), n_p), dtype=complex)
        for j_pos, J in enumerate(comps_lower):
            for l in range(d):
                if l in J:
                    continue
                I = tuple(sorted(J + (l,)))
                iota[j_pos, col_pos[I]] += (-1) ** I.index(l) * symbol[l]
        gram = iota @ iota.conj().T
        projectors[flat] = np.eye(n_p) - iota.conj().T @ np.linalg.pinv(gram) @ iota

    out = np.zeros((n_p * s, n_p * s))
    site_list = list(np.ndindex(*spec.extents))
    kernels = np.empty((n_p, n_p), dtype=object)
    for a in range(n_p):
        for b in range(n_p):
            grid = projectors[:, a, b].reshape(spec.extents)
            kernels[a, b] = np.real(np.fft.ifftn(grid))
    for a in range(n_p):
        for b in range(n_p):
            kern = kernels[a, b]
            for xi, x in enumerate(site_list):
                for yi, y in enumerate(site_list):
                    diff = tuple((xc - yc) % n for xc, yc, n in zip(x, y, spec.extents))
                    out[a * s + xi, b * s + yi] = kern[diff]
    return out
