"""Canonical phase spaces and exact polynomial functions on them.

A phase space with N canonical pairs carries coordinates
``(q_1, ..., q_N, p_1, ..., p_N)``.  Functions are sparse multivariate
polynomials with exact rational coefficients, so Poisson brackets of
polynomials are computed without rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import StructuralError, SurfaceSampleError

__all__ = [
    "PhaseSpace",
    "PolyFunction",
    "poisson_bracket",
    "gradient",
    "gradient_matrix",
    "sample_surface_point",
]


@dataclass(frozen=True)
class PhaseSpace:
    """A canonical phase space with ``n_pairs`` conjugate pairs."""

    n_pairs: int

    def __post_init__(self):
        if self.n_pairs < 1:
            raise StructuralError("phase space needs at least one canonical pair")

    @property
    def dim(self) -> int:
        return 2 * self.n_pairs

    @property
    def coordinate_names(self) -> tuple[str, ...]:
        n = self.n_pairs
        return tuple(f"q{i + 1}" for i in range(n)) + tuple(f"p{i + 1}" for i in range(n))

    def symplectic_matrix(self) -> np.ndarray:
        """The constant bracket matrix of the coordinates, ``[z^a, z^b]``."""
        n = self.n_pairs
        sigma = np.zeros((2 * n, 2 * n))
        sigma[:n, n:] = np.eye(n)
        sigma[n:, :n] = -np.eye(n)
        return sigma

    def q(self, i: int) -> "PolyFunction":
        """The coordinate function ``q_{i+1}`` (0-based index)."""
        if not 0 <= i < self.n_pairs:
            raise StructuralError(f"q index {i} out of range for {self.n_pairs} pairs")
        return PolyFunction.coordinate(self.dim, i)

    def p(self, i: int) -> "PolyFunction":
        """The coordinate function ``p_{i+1}`` (0-based index)."""
        if not 0 <= i < self.n_pairs:
            raise StructuralError(f"p index {i} out of range for {self.n_pairs} pairs")
        return PolyFunction.coordinate(self.dim, self.n_pairs + i)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, float):
        return Fraction(value)
    raise TypeError(f"cannot use {type(value).__name__} as a polynomial coefficient")


class PolyFunction:
    """A sparse polynomial with Fraction coefficients.

    Terms are stored as a dict mapping exponent tuples (one entry per
    phase-space coordinate) to nonzero Fraction coefficients.
    """

    __slots__ = ("n_vars", "terms")

    def __init__(self, n_vars: int, terms=None):
        self.n_vars = int(n_vars)
        clean: dict[tuple[int, ...], Fraction] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.n_vars:
                raise StructuralError(
                    f"exponent tuple of length {len(exps)} in a {self.n_vars}-variable polynomial"
                )
            if any(e < 0 for e in exps):
                raise StructuralError("negative exponent in polynomial term")
            coeff = _as_fraction(coeff)
            if coeff != 0:
                clean[exps] = clean.get(exps, Fraction(0)) + coeff
                if clean[exps] == 0:
                    del clean[exps]
        self.terms = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, n_vars: int) -> "PolyFunction":
        return cls(n_vars)

    @classmethod
    def constant(cls, n_vars: int, value) -> "PolyFunction":
        zeros = (0,) * n_vars
        return cls(n_vars, {zeros: _as_fraction(value)})

    @classmethod
    def coordinate(cls, n_vars: int, index: int) -> "PolyFunction":
        if not 0 <= index < n_vars:
            raise StructuralError(f"coordinate index {index} out of range")
        exps = tuple(1 if j == index else 0 for j in range(n_vars))
        return cls(n_vars, {exps: Fraction(1)})

    @classmethod
    def linear(cls, coeffs) -> "PolyFunction":
        """A linear form ``sum_a coeffs[a] * z^a``."""
        coeffs = list(coeffs)
        n = len(coeffs)
        terms = {}
        for a, c in enumerate(coeffs):
            c = _as_fraction(c)
            if c != 0:
                terms[tuple(1 if j == a else 0 for j in range(n))] = c
        return cls(n, terms)

    # -- algebra -----------------------------------------------------------

    def _check_compatible(self, other: "PolyFunction"):
        if self.n_vars != other.n_vars:
            raise StructuralError("polynomials live on different spaces")

    def __add__(self, other):
        if isinstance(other, (int, float, Fraction)):
            other = PolyFunction.constant(self.n_vars, other)
        self._check_compatible(other)
        terms = dict(self.terms)
        for exps, coeff in other.terms.items():
            terms[exps] = terms.get(exps, Fraction(0)) + coeff
        return PolyFunction(self.n_vars, terms)

    __radd__ = __add__

    def __neg__(self):
        return PolyFunction(self.n_vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float, Fraction)):
            other = PolyFunction.constant(self.n_vars, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, Fraction)):
            c = _as_fraction(other)
            return PolyFunction(self.n_vars, {e: k * c for e, k in self.terms.items()})
        self._check_compatible(other)
        terms: dict[tuple[int, ...], Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                terms[key] = terms.get(key, Fraction(0)) + c1 * c2
        return PolyFunction(self.n_vars, terms)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PolyFunction):
            return NotImplemented
        return self.n_vars == other.n_vars and self.terms == other.terms

    def __hash__(self):
        return hash((self.n_vars, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def diff(self, index: int) -> "PolyFunction":
        """Exact partial derivative with respect to coordinate ``index``."""
        terms = {}
        for exps, coeff in self.terms.items():
            e = exps[index]
            if e == 0:
                continue
            key = exps[:index] + (e - 1,) + exps[index + 1 :]
            terms[key] = terms.get(key, Fraction(0)) + coeff * e
        return PolyFunction(self.n_vars, terms)

    def evaluate(self, point) -> float:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.n_vars,):
            raise StructuralError(
                f"point of shape {point.shape} for a {self.n_vars}-variable polynomial"
            )
        total = 0.0
        for exps, coeff in self.terms.items():
            mono = 1.0
            for x, e in zip(point, exps):
                if e:
                    mono *= x**e
            total += float(coeff) * mono
        return total

    def evaluate_exact(self, point) -> Fraction:
        """Evaluate at a point of Fractions/ints without rounding."""
        total = Fraction(0)
        for exps, coeff in self.terms.items():
            mono = Fraction(1)
            for x, e in zip(point, exps):
                if e:
                    mono *= Fraction(x) ** e
            total += coeff * mono
        return total

    def extend(self, n_vars: int) -> "PolyFunction":
        """The same polynomial viewed on a larger space (extra trailing variables)."""
        if n_vars < self.n_vars:
            raise StructuralError("cannot shrink a polynomial's variable count")
        pad = (0,) * (n_vars - self.n_vars)
        return PolyFunction(n_vars, {e + pad: c for e, c in self.terms.items()})

    def permute_variables(self, perm) -> "PolyFunction":
        """Relabel variables: new variable ``perm[a]`` is the old variable ``a``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.n_vars)):
            raise StructuralError("not a permutation of the variables")
        terms = {}
        for exps, coeff in self.terms.items():
            new = [0] * self.n_vars
            for a, e in enumerate(exps):
                new[perm[a]] = e
            terms[tuple(new)] = coeff
        return PolyFunction(self.n_vars, terms)

    def __repr__(self):
        if not self.terms:
            return "PolyFunction(0)"
        parts = []
        for exps, coeff in sorted(self.terms.items()):
            mono = "*".join(
                f"z{a}" + (f"^{e}" if e > 1 else "") for a, e in enumerate(exps) if e
            )
            parts.append(f"{coeff}" + (f"*{mono}" if mono else ""))
        return "PolyFunction(" + " + ".join(parts) + ")"

    # -- serialization -----------------------------------------------------

    def to_json_obj(self) -> list:
        """A JSON-ready list of terms with exact 'num/den' coefficient strings."""
        out = []
        for exps, coeff in sorted(self.terms.items()):
            out.append({"coeff": f"{coeff.numerator}/{coeff.denominator}", "exps": list(exps)})
        return out

    @classmethod
    def from_json_obj(cls, obj, n_vars: int) -> "PolyFunction":
        terms = {}
        for item in obj:
            num, den = item["coeff"].split("/")
            terms[tuple(item["exps"])] = Fraction(int(num), int(den))
        return cls(n_vars, terms)

    def to_json(self) -> str:
        return json.dumps({"n_vars": self.n_vars, "terms": self.to_json_obj()})

    @classmethod
    def from_json(cls, text: str) -> "PolyFunction":
        obj = json.loads(text)
        return cls.from_json_obj(obj["terms"], obj["n_vars"])


def poisson_bracket(f: PolyFunction, g: PolyFunction, space: PhaseSpace) -> PolyFunction:
    """The exact canonical Poisson bracket ``[f, g]`` as a polynomial."""
    if f.n_vars != space.dim or g.n_vars != space.dim:
        raise StructuralError("polynomial variable count does not match the phase space")
    n = space.n_pairs
    out = PolyFunction.zero(space.dim)
    for i in range(n):
        out = out + f.diff(i) * g.diff(n + i) - f.diff(n + i) * g.diff(i)
    return out


def gradient(f: PolyFunction, point) -> np.ndarray:
    """The gradient of ``f`` evaluated at ``point``."""
    point = np.asarray(point, dtype=float)
    if point.shape != (f.n_vars,):
        raise StructuralError(
            f"point of shape {point.shape} for a {f.n_vars}-variable polynomial"
        )
    out = np.zeros(f.n_vars)
    for exps, coeff in f.terms.items():
        c = float(coeff)
        active = [(a, e) for a, e in enumerate(exps) if e]
        for a, e in active:
            mono = c * e * point[a] ** (e - 1)
            for b, eb in active:
                if b != a:
                    mono *= point[b] ** eb
            out[a] += mono
    return out


def gradient_matrix(functions, point) -> np.ndarray:
    """Rows are gradients of the given functions at ``point``."""
    point = np.asarray(point, dtype=float)
    return np.array([gradient(f, point) for f in functions]).reshape(len(list(functions)), point.size)


def sample_surface_point(
    constraints,
    space: PhaseSpace,
    seed: int = 0,
    tol_surface: float = 1e-10,
    max_iter: int = 60,
    scale: float = 1.0,
) -> np.ndarray:
    """Draw a random point and project it onto the zero set of the constraints.

    Starts from a uniform draw in ``[-scale, scale]^dim`` and runs damped
    Gauss-Newton iterations ``z -= lstsq(J(z), chi(z))`` until every
    constraint value is below ``tol_surface`` in magnitude.
    """
    constraints = list(constraints)
    rng = np.random.default_rng(seed)
    z = rng.uniform(-scale, scale, size=space.dim)
    if not constraints:
        return z
    for _ in range(max_iter):
        values = np.array([c.evaluate(z) for c in constraints])
        if np.max(np.abs(values)) < tol_surface:
            return z
        jac = gradient_matrix(constraints, z)
        step, *_ = np.linalg.lstsq(jac, values, rcond=None)
        z = z - step
    values = np.array([c.evaluate(z) for c in constraints])
    if np.max(np.abs(values)) < tol_surface:
        return z
    raise SurfaceSampleError(
        f"surface projection stalled at residual {np.max(np.abs(values)):.3e} "
        f"(tolerance {tol_surface:.1e}, seed {seed})"
    )
