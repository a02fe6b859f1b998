"""Canonical Dirac system data and its lambda = 0 machinery.

The system under study is B Y' + Q(x) Y = lambda Y on [0, b] with

    B = [[0, 1], [-1, 0]],    Q = [[p, q], [q, -p]],

p, q complex-valued.  This module holds the potential, the free solution
(Q = 0), the fundamental matrix U(0, x) of the homogeneous system with its
inverse obtained from unimodularity, the variation-of-parameters operator
S that solves B Y' + Q Y = H with Y(0) = 0, and finite-difference residual
diagnostics used throughout the test surface.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import (
    Grid,
    check_same_grid,
    cubic_interp,
    differentiate,
    indefinite_integral,
)

__all__ = [
    "B_MAT",
    "BT_MAT",
    "I2",
    "ResidualError",
    "Potential",
    "HomogeneousSolution",
    "free_solution",
    "fundamental_solution_zero",
    "invert_unimodular",
    "apply_S",
    "apply_A",
    "dirac_residual",
    "dirac_residual_nodes",
    "matrix_norm",
]

B_MAT = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
BT_MAT = B_MAT.T.copy()
I2 = np.eye(2, dtype=complex)


class ResidualError(RuntimeError):
    """Solve came out above tolerance; the grid needs refinement."""


def matrix_norm(a):
    """Spectral norm, batched over leading axes."""
    return np.linalg.matrix_norm(a, ord=2)


@dataclass(frozen=True)
class Potential:
    """Sampled trace-free symmetric potential Q = [[p, q], [q, -p]].

    Optional callables provide off-grid values (used by the refined-mesh
    ODE integrator); tabulated potentials fall back to local cubic
    interpolation of the node values.
    """

    grid: Grid
    p: np.ndarray
    q: np.ndarray
    p_fn: object = field(default=None, repr=False, compare=False)
    q_fn: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=complex)
        q = np.asarray(self.q, dtype=complex)
        check_same_grid(self.grid, p)
        check_same_grid(self.grid, q)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValueError("potential samples must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def zero(cls, grid):
        z = np.zeros(grid.size, dtype=complex)
        return cls(grid, z, z.copy(), p_fn=lambda x: np.zeros_like(x, dtype=complex),
                   q_fn=lambda x: np.zeros_like(x, dtype=complex))

    @classmethod
    def constant(cls, grid, p, q):
        return cls(
            grid,
            np.full(grid.size, p, dtype=complex),
            np.full(grid.size, q, dtype=complex),
            p_fn=lambda x, _p=p: np.full_like(x, _p, dtype=complex),
            q_fn=lambda x, _q=q: np.full_like(x, _q, dtype=complex),
        )

    @classmethod
    def from_functions(cls, grid, p_fn, q_fn):
        # constant expressions may come back 0-d; broadcast per node
        p = np.broadcast_to(
            np.asarray(p_fn(grid.nodes), dtype=complex), (grid.size,)
        ).copy()
        q = np.broadcast_to(
            np.asarray(q_fn(grid.nodes), dtype=complex), (grid.size,)
        ).copy()
        return cls(grid, p, q, p_fn=p_fn, q_fn=q_fn)

    @cached_property
    def matrices(self):
        """Q(x_i) as an (M + 1, 2, 2) array."""
        out = np.empty((self.grid.size, 2, 2), dtype=complex)
        out[:, 0, 0] = self.p
        out[:, 0, 1] = self.q
        out[:, 1, 0] = self.q
        out[:, 1, 1] = -self.p
        return out

    @cached_property
    def sup_norm(self):
        return float(np.max(matrix_norm(self.matrices)))

    def values_at(self, x):
        """(p(x), q(x)) off-grid, from the callables when available."""
        x = np.asarray(x, dtype=float)
        if self.p_fn is not None and self.q_fn is not None:
            return (
                np.broadcast_to(np.asarray(self.p_fn(x), dtype=complex), x.shape),
                np.broadcast_to(np.asarray(self.q_fn(x), dtype=complex), x.shape),
            )
        return (
            cubic_interp(self.grid, self.p, x),
            cubic_interp(self.grid, self.q, x),
        )

    @property
    def is_real(self):
        return bool(
            np.all(np.abs(self.p.imag) == 0) and np.all(np.abs(self.q.imag) == 0)
        )


def free_solution(lam, x):
    """Free fundamental matrix [[cos lx, -sin lx], [sin lx, cos lx]].

    x may be scalar or array; the result has shape x.shape + (2, 2).
    """
    z = np.asarray(lam * np.asarray(x), dtype=complex)
    c, s = np.cos(z), np.sin(z)
    out = np.empty(z.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def free_solution_dlambda(lam, x):
    """d/dlambda of the free solution, closed form."""
    z = complex(lam) * np.asarray(x, dtype=complex)
    c, s = np.cos(z), np.sin(z)
    x = np.asarray(x)
    out = np.empty(np.shape(z) + (2, 2), dtype=complex)
    out[..., 0, 0] = -x * s
    out[..., 0, 1] = -x * c
    out[..., 1, 0] = x * c
    out[..., 1, 1] = -x * s
    return out


def invert_unimodular(a, tol=1e-6):
    """Inverse of (a batch of) 2x2 matrices with det = 1, by adjugate.

    [[a, b], [c, d]] -> [[d, -b], [-c, a]]; a determinant drifting beyond
    tol from 1 is rejected since the adjugate would silently stop being
    the inverse.
    """
    a = np.asarray(a, dtype=complex)
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    if np.max(np.abs(det - 1.0)) > tol:
        raise ValueError("matrix is not unimodular within tolerance")
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    out[..., 1, 1] = a[..., 0, 0]
    return out


@dataclass(frozen=True)
class HomogeneousSolution:
    """U(0, x) with U(0, 0) = I, plus its adjugate inverse, per node."""

    grid: Grid
    U: np.ndarray
    Uinv: np.ndarray

    @property
    def det_defect(self):
        det = self.U[:, 0, 0] * self.U[:, 1, 1] - self.U[:, 0, 1] * self.U[:, 1, 0]
        return float(np.max(np.abs(det - 1.0)))


def _coefficient_samples(Q, substeps):
    """B Q(x) on the refinement needed by the RK4 sweep (h/substeps/2)."""
    grid = Q.grid
    n_fine = 2 * grid.M * substeps
    x = np.linspace(0.0, grid.b, n_fine + 1)
    p, q = Q.values_at(x)
    A = np.empty((n_fine + 1, 2, 2), dtype=complex)
    # B Q = [[q, -p], [-p, -q]]
    A[:, 0, 0] = q
    A[:, 0, 1] = -p
    A[:, 1, 0] = -p
    A[:, 1, 1] = -q
    return A


def fundamental_solution_zero(Q, substeps=10, check=True):
    """Fundamental matrix U(0, x) of B Y' + Q Y = 0, U(0, 0) = I.

    Classical fixed-step RK4 on a `substeps`-fold refinement of the grid
    (written as U' = B Q U), down-sampled to the grid nodes.  The inverse
    comes from the adjugate since det U(0, x) = 1 identically (the
    coefficient matrix B Q is trace-free).  With check=True the
    unimodularity defect and the finite-difference ODE residual are
    verified against a scale-aware tolerance; failure signals that the
    grid is too coarse for the potential.
    """
    grid = Q.grid
    A = _coefficient_samples(Q, substeps)
    hs = grid.h / substeps
    U = np.empty((grid.size, 2, 2), dtype=complex)
    u = I2.copy()
    U[0] = u
    k = 0
    for i in range(grid.M):
        for _ in range(substeps):
            a0, am, a1 = A[k], A[k + 1], A[k + 2]
            k1 = a0 @ u
            k2 = am @ (u + 0.5 * hs * k1)
            k3 = am @ (u + 0.5 * hs * k2)
            k4 = a1 @ (u + hs * k3)
            u = u + (hs / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            k += 2
        U[i + 1] = u
    U[0] = I2
    if check:
        det = U[:, 0, 0] * U[:, 1, 1] - U[:, 0, 1] * U[:, 1, 0]
        defect = float(np.max(np.abs(det - 1.0)))
        if defect > 1e-10:
            raise ResidualError(
                "det U(0, x) drifts from 1 by %.3e; refine the grid" % defect
            )
    hom = HomogeneousSolution(grid=grid, U=U, Uinv=invert_unimodular(U))
    if check:
        tol = 1e-8 * (1.0 + Q.sup_norm * grid.b)
        resid = homogeneous_residual(hom, Q)
        if resid > tol:
            raise ResidualError(
                "ODE residual %.3e exceeds %.3e; refine the grid" % (resid, tol)
            )
    return hom


def homogeneous_residual(hom, Q):
    """max interior-node norm of B U' + Q U for the computed U(0, x)."""
    dU = differentiate(hom.grid, hom.U)
    R = B_MAT @ dU + Q.matrices @ hom.U
    return float(np.max(matrix_norm(R[1:-1])))


def apply_S(H, hom):
    """Solution of B Y' + Q Y = H with Y(0) = 0, by variation of parameters.

    Y(x) = U(0, x) int_0^x U^{-1}(0, t) B^T H(t) dt  with  B^T = -B.
    """
    H = np.asarray(H, dtype=complex)
    check_same_grid(hom.grid, H)
    integrand = hom.Uinv @ (BT_MAT @ H)
    return hom.U @ indefinite_integral(hom.grid, integrand)


def apply_A(grid, Y, Q):
    """The differential expression B Y' + Q Y, derivative by 6-point FD."""
    dY = differentiate(grid, Y)
    if Y.ndim == 2:  # vector-valued samples (n, 2)
        return (B_MAT @ dY[..., None])[..., 0] + (Q.matrices @ Y[..., None])[..., 0]
    return B_MAT @ dY + Q.matrices @ Y


def dirac_residual_nodes(Y, Q, lam):
    """Per-node norm of B Y' + Q Y - lambda Y (matrix or vector samples)."""
    grid = Q.grid
    Y = np.asarray(Y, dtype=complex)
    check_same_grid(grid, Y)
    R = apply_A(grid, Y, Q) - lam * Y
    if R.ndim == 2:
        return np.linalg.norm(R, axis=1)
    return matrix_norm(R)


def dirac_residual(Y, Q, lam):
    """Max interior-node norm of B Y' + Q Y - lambda Y."""
    return float(np.max(dirac_residual_nodes(Y, Q, lam)[1:-1]))
