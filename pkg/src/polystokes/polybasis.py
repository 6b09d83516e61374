"""Per-cell polynomial bases: scaled monomials and their L2-orthonormalization.

Members are indexed in graded lexicographic order (1, x, y, x^2, xy, y^2, ...)
in the scaled coordinates (x - x_K)/h_K, so degree-j prefixes span P_j.
Every member is stored as a coefficient column against the scaled monomials;
the change-of-basis matrix is upper triangular, which keeps the bases nested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .geometry import polygon_area, polygon_centroid, polygon_diameter, polygon_quadrature

__all__ = [
    "PolyBasis",
    "PolyGramData",
    "poly_dim",
    "monomial_exponents",
    "build_basis",
    "evaluate",
    "gradient",
    "laplacian_in_lower_basis",
    "derivative_matrices",
    "harmonic_subspace",
]


def poly_dim(k):
    return 0 if k < 0 else (k + 1) * (k + 2) // 2


def monomial_exponents(k):
    """Graded-lex exponent pairs (a, b) for all degrees <= k."""
    exps = []
    for d in range(k + 1):
        for a in range(d, -1, -1):
            exps.append((a, d - a))
    return exps


@dataclass(frozen=True)
class PolyBasis:
    """Polynomial basis of degree k attached to one cell.

    change_of_basis columns hold each member's coefficients against the
    scaled monomials (identity for kind 'scaled_monomial').
    """

    kind: str
    degree: int
    centroid: np.ndarray
    diameter: float
    change_of_basis: np.ndarray

    @property
    def dimension(self):
        return poly_dim(self.degree)

    def prefix(self, j):
        """The sub-basis of degree j <= degree (nesting is exact)."""
        n = poly_dim(j)
        return PolyBasis(self.kind, j, self.centroid, self.diameter,
                         self.change_of_basis[:n, :n].copy())

    def monomial_to_basis(self, coeffs):
        """Convert scaled-monomial coefficient columns to this basis."""
        return solve_triangular(self.change_of_basis, coeffs)

    def basis_to_monomial(self, coeffs):
        return self.change_of_basis @ coeffs


@dataclass(frozen=True)
class PolyGramData:
    """Quadrature Gram matrices of a basis on its cell."""

    mass: np.ndarray
    stiffness: np.ndarray


def _scaled_monomial_values(exps, centroid, diameter, points):
    xs = (points[:, 0] - centroid[0]) / diameter
    ys = (points[:, 1] - centroid[1]) / diameter
    return np.column_stack([xs ** a * ys ** b for a, b in exps])


def _scaled_monomial_gradients(exps, centroid, diameter, points):
    xs = (points[:, 0] - centroid[0]) / diameter
    ys = (points[:, 1] - centroid[1]) / diameter
    out = np.zeros((len(points), len(exps), 2))
    for i, (a, b) in enumerate(exps):
        if a > 0:
            out[:, i, 0] = a * xs ** (a - 1) * ys ** b / diameter
        if b > 0:
            out[:, i, 1] = b * xs ** a * ys ** (b - 1) / diameter
    return out


def _monomial_laplacian_map(k, diameter):
    """Matrix L with L[:, i] = coefficients of laplacian(m_i) in M_{k-2}."""
    exps = monomial_exponents(k)
    low = {e: i for i, e in enumerate(monomial_exponents(k - 2))} if k >= 2 else {}
    L = np.zeros((poly_dim(k - 2), poly_dim(k)))
    for i, (a, b) in enumerate(exps):
        if a >= 2:
            L[low[(a - 2, b)], i] += a * (a - 1) / diameter ** 2
        if b >= 2:
            L[low[(a, b - 2)], i] += b * (b - 1) / diameter ** 2
    return L


def _monomial_derivative_maps(k, diameter):
    exps = monomial_exponents(k)
    idx = {e: i for i, e in enumerate(exps)}
    n = poly_dim(k)
    dx = np.zeros((n, n))
    dy = np.zeros((n, n))
    for i, (a, b) in enumerate(exps):
        if a > 0:
            dx[idx[(a - 1, b)], i] = a / diameter
        if b > 0:
            dy[idx[(a, b - 1)], i] = b / diameter
    return dx, dy


class IllConditionedBasisError(RuntimeError):
    pass


def build_basis(verts, k, kind="scaled_monomial", quadrature=None):
    """Build the degree-k basis on a polygonal cell.

    kind 'l2_orthonormal' applies modified Gram-Schmidt (one
    reorthogonalization pass) in the quadrature mass inner product.
    """
    verts = np.asarray(verts, dtype=float)
    centroid = polygon_centroid(verts)
    diameter = polygon_diameter(verts)
    n = poly_dim(k)
    if kind == "scaled_monomial":
        return PolyBasis(kind, k, centroid, diameter, np.eye(n))
    if kind != "l2_orthonormal":
        raise ValueError(f"unknown basis kind {kind!r}")

    if quadrature is None:
        quadrature = polygon_quadrature(verts, 2 * k + 2)
    exps = monomial_exponents(k)
    V = _scaled_monomial_values(exps, centroid, diameter, quadrature.points)
    M = V.T @ (quadrature.weights[:, None] * V)
    if np.linalg.cond(M) > 1e15:
        raise IllConditionedBasisError(
            "monomial mass matrix numerically singular; reduce the degree "
            "or improve the cell shape")

    def mdot(u, v):
        return u @ M @ v

    C = np.zeros((n, n))
    for i in range(n):
        q = np.zeros(n)
        q[i] = 1.0
        for _ in range(2):  # MGS + one reorthogonalization pass
            for j in range(i):
                q = q - mdot(C[:, j], q) * C[:, j]
        q = q / np.sqrt(mdot(q, q))
        C[:, i] = q
    return PolyBasis("l2_orthonormal", k, centroid, diameter, C)


def evaluate(basis, points):
    """Member values at points, shape (n_points, dimension)."""
    exps = monomial_exponents(basis.degree)
    V = _scaled_monomial_values(exps, basis.centroid, basis.diameter, np.atleast_2d(points))
    return V @ basis.change_of_basis


def gradient(basis, points):
    """Member gradients at points, shape (n_points, dimension, 2)."""
    exps = monomial_exponents(basis.degree)
    G = _scaled_monomial_gradients(exps, basis.centroid, basis.diameter, np.atleast_2d(points))
    return np.einsum("pmd,mi->pid", G, basis.change_of_basis)


def laplacian_in_lower_basis(basis):
    """Coefficients of each member's laplacian in the degree-(k-2) prefix."""
    k = basis.degree
    L = _monomial_laplacian_map(k, basis.diameter)
    mono = L @ basis.change_of_basis
    n_low = poly_dim(k - 2)
    if n_low == 0:
        return mono
    return solve_triangular(basis.change_of_basis[:n_low, :n_low], mono)


def derivative_matrices(basis):
    """(DX, DY) with DX @ c = basis coefficients of d/dx of the polynomial c."""
    dx, dy = _monomial_derivative_maps(basis.degree, basis.diameter)
    C = basis.change_of_basis
    return (solve_triangular(C, dx @ C), solve_triangular(C, dy @ C))


def gram_data(basis, quadrature):
    V = evaluate(basis, quadrature.points)
    G = gradient(basis, quadrature.points)
    w = quadrature.weights
    mass = V.T @ (w[:, None] * V)
    stiff = np.einsum("pid,p,pjd->ij", G, w, G)
    return PolyGramData(mass=mass, stiffness=stiff)


def harmonic_subspace(basis, k):
    """Columns spanning the harmonic polynomials of degree <= k, in basis coords.

    Uses Re((x+iy)^m), Im((x+iy)^m) in the scaled coordinates; 2k+1 columns
    for k >= 1, a single constant column for k = 0.
    """
    exps = monomial_exponents(basis.degree)
    idx = {e: i for i, e in enumerate(exps)}
    cols = []
    from math import comb
    for m in range(k + 1):
        re = np.zeros(len(exps))
        im = np.zeros(len(exps))
        for j in range(m + 1):
            c = comb(m, j) * (1j ** j)
            re[idx[(m - j, j)]] += c.real
            im[idx[(m - j, j)]] += c.imag
        cols.append(re)
        if m >= 1:
            cols.append(im)
    mono = np.column_stack(cols)
    return basis.monomial_to_basis(mono)
