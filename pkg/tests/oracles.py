"""Independent cross-checks used by the test suite.

These deliberately avoid the library's ladder/kernel machinery so that
agreement with them is meaningful.
"""

from fractions import Fraction

import numpy as np

from diracforge.phasespace import PolyFunction, gradient


def finite_difference_gradient(f, point, h=1e-6):
    """Central-difference gradient, independent of the exact differentiation."""
    point = np.asarray(point, dtype=float)
    out = np.zeros_like(point)
    for a in range(point.size):
        up = point.copy()
        dn = point.copy()
        up[a] += h
        dn[a] -= h
        out[a] = (f.evaluate(up) - f.evaluate(dn)) / (2 * h)
    return out


def independent_subset(system, point, tol=1e-9):
    """Indices of a maximal independent subset of constraint gradients."""
    jac = system.constraint_jacobian(point)
    chosen = []
    for a in range(jac.shape[0]):
        trial = jac[chosen + [a]]
        svals = np.linalg.svd(trial, compute_uv=False)
        if svals[-1] > tol * svals[0]:
            chosen.append(a)
    return chosen


def subset_dirac_bracket(f, g, system, point):
    """Classic Dirac bracket using only an independent subset of the constraints."""
    idx = independent_subset(system, point)
    sigma = system.space.symplectic_matrix()
    jac = system.constraint_jacobian(point)[idx]
    c_sub = jac @ sigma @ jac.T
    kernel = np.linalg.inv(c_sub)
    grad_f = gradient(f, point)
    grad_g = gradient(g, point)
    plain = grad_f @ sigma @ grad_g
    bf = grad_f @ sigma @ jac.T
    bg = jac @ sigma @ grad_g
    return float(plain - bf @ kernel @ bg)


def random_polynomial(n_vars, rng, degree=2, n_terms=4):
    """A small random polynomial with exact rational coefficients."""
    terms = {}
    for _ in range(n_terms):
        exps = [0] * n_vars
        for _ in range(int(rng.integers(1, degree + 1))):
            exps[int(rng.integers(0, n_vars))] += 1
        coeff = Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4)))
        if coeff:
            key = tuple(exps)
            terms[key] = terms.get(key, Fraction(0)) + coeff
    return PolyFunction(n_vars, terms)
