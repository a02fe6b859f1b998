"""Uniform grid on [0, b] with high-order quadrature and differentiation.

Every x-dependent quantity in the solver lives on one shared uniform grid
as an array of per-node values; matrix-valued functions are arrays of
shape (M + 1, 2, 2).  This module supplies the numerical substrate: an
indefinite integral built from a composite 6-point Newton-Cotes rule
(block size 5, exact for polynomials up to degree 5, observed order 6 on
smooth integrands), a 6-point finite-difference derivative, local cubic
interpolation, and the small pointwise-algebra helpers that keep grid
compatibility checked in one place.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "GridMismatchError",
    "indefinite_integral",
    "indefinite_integral_weighted",
    "differentiate",
    "linear_combine",
    "matmul_left",
    "matmul_right",
    "scale_by_nodes",
    "cubic_interp",
    "check_same_grid",
    "BLOCK",
]

BLOCK = 5  # nodes per quadrature block, minus one


class GridMismatchError(ValueError):
    """Operands sampled on different grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, b] into M cells (M + 1 nodes).

    M is rounded up to a multiple of the quadrature block size and must be
    at least 10 after rounding.
    """

    b: float
    M: int

    def __post_init__(self):
        if not (self.b > 0 and np.isfinite(self.b)):
            raise ValueError("interval length b must be positive and finite")
        m = int(self.M)
        if m % BLOCK:
            m += BLOCK - m % BLOCK
        if m < 10:
            raise ValueError("grid too small for the composite rule (need M >= 10)")
        object.__setattr__(self, "M", m)

    @cached_property
    def nodes(self):
        return np.linspace(0.0, self.b, self.M + 1)

    @property
    def h(self):
        return self.b / self.M

    @property
    def size(self):
        return self.M + 1


def check_same_grid(grid, *values):
    for v in values:
        if v.shape[0] != grid.size:
            raise GridMismatchError(
                "expected %d nodes, got %d" % (grid.size, v.shape[0])
            )


def _partial_weights():
    # W[k, j] = integral over [0, k] of the Lagrange basis polynomial
    # through nodes 0..5, in units of h; row 5 is the classical 6-point
    # closed Newton-Cotes rule.
    weights = np.zeros((BLOCK + 1, BLOCK + 1))
    for j in range(BLOCK + 1):
        poly = [Fraction(1)]
        denom = Fraction(1)
        for m in range(BLOCK + 1):
            if m == j:
                continue
            poly = [Fraction(0)] + poly  # multiply by s
            for i in range(len(poly) - 1):
                poly[i] -= m * poly[i + 1]
            denom *= j - m
        anti = [Fraction(0)] + [c / (i + 1) for i, c in enumerate(poly)]
        for k in range(1, BLOCK + 1):
            val = sum(c * Fraction(k) ** i for i, c in enumerate(anti))
            weights[k, j] = float(val / denom)
    return weights


_W = _partial_weights()


def indefinite_integral(grid, f):
    """Cumulative integral F(x_i) = int_0^x_i f, per component.

    f has shape (M + 1, ...); within each block of 5 cells the partial
    integrals come from the block's degree-5 interpolant, so the result is
    exact for polynomials up to degree 5 and F(0) = 0 exactly.
    """
    f = np.asarray(f)
    check_same_grid(grid, f)
    nblocks = grid.M // BLOCK
    blocks = np.empty((nblocks, BLOCK + 1) + f.shape[1:], dtype=f.dtype)
    for j in range(BLOCK + 1):
        blocks[:, j] = f[j::BLOCK][:nblocks]
    # per-block partial integrals at offsets 1..5, then block totals chained
    partial = np.einsum("kj,nj...->nk...", _W[1:], blocks) * grid.h
    out = np.zeros_like(f, dtype=np.result_type(f.dtype, float))
    starts = np.zeros((nblocks,) + f.shape[1:], dtype=out.dtype)
    np.cumsum(partial[:-1, -1], axis=0, out=starts[1:])
    for k in range(1, BLOCK + 1):
        out[k::BLOCK] = starts + partial[:, k - 1]
    return out


def _lagrange_basis_matrix():
    # rows: basis index j; columns: monomial powers of the block variable
    coeffs = np.zeros((BLOCK + 1, BLOCK + 1))
    for j in range(BLOCK + 1):
        poly = [Fraction(1)]
        denom = Fraction(1)
        for m in range(BLOCK + 1):
            if m == j:
                continue
            poly = [Fraction(0)] + poly
            for i in range(len(poly) - 1):
                poly[i] -= m * poly[i + 1]
            denom *= j - m
        for i, c in enumerate(poly):
            coeffs[j, i] = float(c / denom)
    return coeffs


_LAGRANGE = _lagrange_basis_matrix()
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(40)


def indefinite_integral_weighted(grid, k, f):
    """Cumulative weighted integral F(x_i) = int_0^x_i t^k f(t) dt.

    Only the sampled factor f is interpolated (degree-5 per block, as in
    the plain rule); the monomial weight t^k is carried exactly through a
    Gauss rule of ample order, so the result is exact for polynomial f up
    to degree 5 regardless of k.  This matters near the origin, where the
    product t^k f(t) itself is far beyond the resolution of any
    fixed-order rule in the first cells once k is moderately large.
    """
    f = np.asarray(f)
    check_same_grid(grid, f)
    if k == 0:
        return indefinite_integral(grid, f)
    if k < 0 or k != int(k):
        raise ValueError("weight exponent must be a nonnegative integer")
    h = grid.h
    nblocks = grid.M // BLOCK
    starts = grid.nodes[::BLOCK][:nblocks]
    blocks = np.empty((nblocks, BLOCK + 1) + f.shape[1:], dtype=f.dtype)
    for j in range(BLOCK + 1):
        blocks[:, j] = f[j::BLOCK][:nblocks]
    out = np.zeros_like(f, dtype=np.result_type(f.dtype, float))
    # f at the Gauss points of [0, r] in block coordinates, each r = 1..5
    extra = (1,) * (f.ndim - 1)
    prev = np.zeros((nblocks,) + f.shape[1:], dtype=out.dtype)
    for r in range(1, BLOCK + 1):
        u = 0.5 * r * (_GAUSS_NODES + 1.0)
        basis = _LAGRANGE @ np.vander(u, BLOCK + 1, increasing=True).T  # (6, G)
        fg = np.einsum("nj...,jg->ng...", blocks, basis)
        w = (starts[:, None] + h * u[None, :]) ** k * _GAUSS_WEIGHTS[None, :]
        part = 0.5 * r * h * np.sum(w.reshape(w.shape + extra) * fg, axis=1)
        out[r::BLOCK][:nblocks] = part
        if r == BLOCK:
            block_totals = part
    np.cumsum(block_totals[:-1], axis=0, out=prev[1:])
    for r in range(1, BLOCK + 1):
        out[r::BLOCK][:nblocks] += prev
    return out


def _fornberg(x0, nodes):
    """First-derivative weights at x0 for arbitrary nodes (Fornberg)."""
    n = len(nodes)
    c = np.zeros((n, 2))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, n):
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                c[i, 1] = c1 * (c[i - 1, 0] - c5 * c[i - 1, 1]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            c[j, 1] = (c4 * c[j, 1] - c[j, 0]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, 1]


def _stencil_weights():
    # offsets -2..3 for interior nodes; one-sided stencils near the ends
    offs = np.arange(6, dtype=float)
    interior = _fornberg(2.0, offs)
    edge = [_fornberg(float(i), offs) for i in range(6)]
    return interior, edge


_D_INTERIOR, _D_EDGE = _stencil_weights()


def differentiate(grid, f):
    """Derivative of sampled values by 6-point finite differences.

    Interior nodes use the stencil i-2..i+3; the first and last nodes fall
    back to one-sided 6-point stencils.  Order 5 on smooth data.
    """
    f = np.asarray(f)
    check_same_grid(grid, f)
    n = grid.size
    out = np.zeros_like(f, dtype=np.result_type(f.dtype, float))
    for j, w in enumerate(_D_INTERIOR):
        out[2 : n - 3] += w * f[j : n - 5 + j]
    for i in (0, 1):
        out[i] = np.tensordot(_D_EDGE[i], f[:6], axes=(0, 0))
    for i in (n - 3, n - 2, n - 1):
        out[i] = np.tensordot(_D_EDGE[6 - (n - i)], f[-6:], axes=(0, 0))
    return out / grid.h


def linear_combine(coeffs, fns):
    """sum_k coeffs[k] * fns[k], all on one grid."""
    if len(coeffs) != len(fns):
        raise ValueError("coefficient/function count mismatch")
    it = iter(zip(coeffs, fns))
    c0, f0 = next(it)
    out = c0 * np.asarray(f0, dtype=complex)
    for c, f in it:
        if np.shape(f)[0] != np.shape(f0)[0]:
            raise GridMismatchError("operands on different grids")
        out = out + c * np.asarray(f)
    return out


def matmul_left(factor, f):
    """Per-node left multiplication factor @ f(x_i).

    factor is a single (2, 2) matrix or one per node.
    """
    factor = np.asarray(factor)
    f = np.asarray(f)
    if factor.ndim == 3 and factor.shape[0] != f.shape[0]:
        raise GridMismatchError("matrix factor on a different grid")
    return factor @ f


def matmul_right(f, factor):
    """Per-node right multiplication f(x_i) @ factor."""
    factor = np.asarray(factor)
    f = np.asarray(f)
    if factor.ndim == 3 and factor.shape[0] != f.shape[0]:
        raise GridMismatchError("matrix factor on a different grid")
    return f @ factor


def scale_by_nodes(scalars, f):
    """Per-node scalar multiple scalars[i] * f(x_i)."""
    scalars = np.asarray(scalars)
    f = np.asarray(f)
    if scalars.shape[0] != f.shape[0]:
        raise GridMismatchError("scalar factor on a different grid")
    return scalars.reshape(scalars.shape + (1,) * (f.ndim - 1)) * f


def cubic_interp(grid, values, x):
    """Piecewise-cubic (local 4-point Lagrange) interpolation at x.

    values has node-major shape (M + 1, ...); x may be scalar or 1-D.
    Matches the quadrature accuracy class for smooth data; x is clipped to
    [0, b].
    """
    values = np.asarray(values)
    check_same_grid(grid, values)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.clip(x, 0.0, grid.b) / grid.h
    i0 = np.clip(np.floor(t).astype(int) - 1, 0, grid.M - 3)
    s = t - i0
    out = np.zeros(x.shape + values.shape[1:], dtype=values.dtype)
    for j in range(4):
        w = np.ones_like(s)
        for m in range(4):
            if m != j:
                w *= (s - m) / (j - m)
        out += w.reshape(w.shape + (1,) * (values.ndim - 1)) * values[i0 + j]
    return out
