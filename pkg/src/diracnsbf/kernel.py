"""Fourier-Legendre coefficients of the transmutation kernel.

The transmutation kernel K(x, t) relating the free and perturbed Dirac
systems expands as K(x, t) = sum_n x^{-1} C_n(x) P_n(t/x) on |t| <= x.
With theta_n(x) := x^n C_n(x) the coefficients satisfy one recursion
driven by the nonhomogeneous solver S:

    theta_0  = (U(0, x) - I) / 2
    theta_-1 = -theta_0 / x
    theta_n  = (2n+1)/(2n-3) [ x^2 theta_{n-2}
               + S[ -(2n-1) x B theta_{n-2} + (2n-3) theta_{n-1} B ] ]

so the whole family comes out of quadratures against U(0, x).  Truncation
quality is observable without knowing the exact kernel: plugging the
series into the characteristic boundary identities of the kernel's
Goursat problem (a commutator identity on t = x, an anticommutator
identity on t = -x) gives residuals

    delta_Q(x) = | Q(x) + x^{-1} sum_n [B C_n - C_n B] |
    delta_0(x) = | x^{-1} sum_n (-1)^n [B C_n + C_n B] |

whose sup-norms drive the automatic truncation-order choice.  Both decay
to the quadrature floor as N grows; the floor itself sits at the first
nodes (where a fixed-order rule resolves the least), so the truncation
choice monitors the outer half of the grid where the series is consumed.
"""

from dataclasses import dataclass, field

import numpy as np

from .dirac import B_MAT, I2, apply_S, matrix_norm
from .grid import cubic_interp, scale_by_nodes
from .special import legendre_seq

__all__ = [
    "KernelCoefficients",
    "GoursatResiduals",
    "TruncationReport",
    "build_coefficients",
    "extend_coefficients",
    "kernel_eval",
    "goursat_residuals",
    "auto_truncation",
    "DEFAULT_TRUNCATION",
]

# Paired with machine-precision eigenvalue behavior on smooth benchmark
# potentials; used when automatic truncation is disabled.
DEFAULT_TRUNCATION = 16

# Nodes with x below this fraction of b take the near-origin guard path.
_GUARD_FRACTION = 1e-3
# In-recursion sanitation: for n >= _SANITIZE_FROM the weighted averages
# behind C_n involve t^(n-1) factors that a fixed-order rule cannot
# resolve relative to their own size on roughly the first n^2 cells, and
# the junk would otherwise feed the next orders.  The true coefficient is
# far below working precision there (it vanishes like x^(n+1)), so those
# nodes are pinned to zero.
_SANITIZE_FROM = 4
_SANITIZE_CELLS = 0.75  # cut after ceil(_SANITIZE_CELLS * n^2) cells
_SANITIZE_CAP = 8  # never cut more than M / _SANITIZE_CAP cells


@dataclass(frozen=True)
class KernelCoefficients:
    """theta_n and C_n = theta_n / x^n for n = -1..N on one grid.

    Arrays are indexed with an offset of one: row k holds order n = k - 1.
    """

    grid: object
    potential: object
    hom: object
    N: int
    theta: np.ndarray
    K: np.ndarray

    def _row(self, n):
        if not -1 <= n <= self.N:
            raise IndexError("order %d outside -1..%d" % (n, self.N))
        return n + 1

    def theta_n(self, n):
        return self.theta[self._row(n)]

    def coeff(self, n):
        """C_n(x) sampled on the grid."""
        return self.K[self._row(n)]

    @property
    def coeffs(self):
        """C_0..C_N as one (N + 1, M + 1, 2, 2) array."""
        return self.K[1:]


@dataclass(frozen=True)
class GoursatResiduals:
    """Characteristic-identity residuals, per node x > 0 and their sups.

    sup_Q / sup_0 run over the whole grid; sup_Q_outer / sup_0_outer over
    x >= b/2, the region that bounds the evaluation error of the
    truncated series where it is actually used (the quadrature noise
    floor of the first few cells does not converge with N and would mask
    the truncation signal otherwise).
    """

    x: np.ndarray
    delta_Q: np.ndarray
    delta_0: np.ndarray
    sup_Q: float
    sup_0: float
    sup_Q_outer: float
    sup_0_outer: float


@dataclass(frozen=True)
class TruncationReport:
    """What auto-truncation looked at and whether it met the tolerance."""

    converged: bool
    N: int
    tol: float
    probes: list = field(default_factory=list)  # (N_probe, sup_Q, sup_0)


def _apply_guard(grid, Kn):
    """Near-origin guard for one coefficient function.

    Nodes with 0 < x below the guard fraction of b (where the weighted
    averages behind C_n carry the least quadrature information) are
    replaced by a degree-3 extrapolation from the first trustworthy nodes;
    the x = 0 node is pinned to the exact limit C_n(0) = 0.
    """
    x = grid.nodes
    out = Kn.copy()
    out[0] = 0.0
    cut = _GUARD_FRACTION * grid.b
    guard = (x > 0) & (x < cut)
    if guard.any():
        i0 = int(np.argmax(x >= cut))
        xs = x[i0 : i0 + 4]
        ys = out[i0 : i0 + 4]
        for xi in np.nonzero(guard)[0]:
            w = np.array(
                [
                    np.prod([(x[xi] - xs[m]) / (xs[j] - xs[m]) for m in range(4) if m != j])
                    for j in range(4)
                ]
            )
            out[xi] = np.tensordot(w, ys, axes=(0, 0))
    return out


def build_coefficients(Q, hom, N):
    """theta_-1..theta_N and C_-1..C_N by the recursive procedure.

    hom must be the fundamental solution built from Q.  The recursion is
    advanced in the C_n variables with the x^n weight moved inside the
    quadrature,

        C_n = (2n+1)/(2n-3) [ C_{n-2}
              + x^{-n} S[ t^{n-1} (-(2n-1) B C_{n-2} + (2n-3) C_{n-1} B) ] ],

    an exact rewriting of the theta_n form in which x^{-n} times the
    integral is a weighted average: round-off stays bounded by the
    integrand scale instead of being amplified by x^{-n} near the origin.
    Raises on NaN contamination, which indicates the grid cannot support
    the requested order.
    """
    if N < 0:
        raise ValueError("truncation order must be >= 0")
    grid = Q.grid
    K = np.zeros((N + 2, grid.size, 2, 2), dtype=complex)
    K[1] = 0.5 * (hom.U - I2)
    K[0] = -K[1]
    for n in range(1, N + 1):
        _recursion_step(K, n, Q, hom)
    return _finalize(Q, hom, N, K)


def extend_coefficients(coeffs, N_new):
    """Continue the recursion of an existing family up to N_new."""
    if N_new <= coeffs.N:
        return coeffs
    grid = coeffs.grid
    K = np.zeros((N_new + 2, grid.size, 2, 2), dtype=complex)
    K[: coeffs.N + 2] = coeffs.K
    for n in range(coeffs.N + 1, N_new + 1):
        _recursion_step(K, n, coeffs.potential, coeffs.hom)
    return _finalize(coeffs.potential, coeffs.hom, N_new, K)


def sanitize_cells(n, M):
    """Number of leading cells pinned to zero for order n."""
    if n < _SANITIZE_FROM:
        return 0
    return min(int(np.ceil(_SANITIZE_CELLS * n * n)), M // _SANITIZE_CAP)


def _recursion_step(K, n, Q, hom):
    x = Q.grid.nodes
    prev2 = K[n - 1]  # C_{n-2}
    prev1 = K[n]  # C_{n-1}
    Phi = -(2 * n - 1) * (B_MAT @ prev2) + (2 * n - 3) * (prev1 @ B_MAT)
    H = scale_by_nodes(x ** (n - 1), Phi)
    Sval = apply_S(H, hom)
    xn = x**n
    avg = np.zeros_like(Sval)
    ok = xn > 0.0
    avg[ok] = Sval[ok] / xn[ok, None, None]
    K[n + 1] = ((2 * n + 1) / (2 * n - 3)) * (prev2 + avg)
    K[n + 1][: sanitize_cells(n, Q.grid.M) + 1] = 0.0


def _finalize(Q, hom, N, K):
    if not np.all(np.isfinite(K)):
        raise ArithmeticError(
            "non-finite kernel coefficients at N=%d, M=%d; refine the grid or lower N"
            % (N, Q.grid.M)
        )
    grid = Q.grid
    x = grid.nodes
    Kg = K.copy()
    theta = np.empty_like(K)
    for n in range(1, N + 1):
        Kg[n + 1] = _apply_guard(grid, K[n + 1])
        Kg[n + 1][0] = 0.0
    theta[1] = Kg[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        theta[0][1:] = -Kg[1][1:] / x[1:, None, None]
    # forced limit at 0 from U(0, x) = I + B Q(0) x + O(x^2)
    theta[0][0] = -0.5 * (B_MAT @ Q.matrices[0])
    for n in range(1, N + 1):
        theta[n + 1] = scale_by_nodes(x**n, Kg[n + 1])
    return KernelCoefficients(grid=grid, potential=Q, hom=hom, N=N, theta=theta, K=Kg)


def kernel_eval(coeffs, x, t):
    """Truncated kernel K^N(x, t) = sum_n x^{-1} C_n(x) P_n(t/x).

    x in (0, b], |t| <= x; off-grid x uses piecewise-cubic interpolation
    of the coefficient functions (diagnostic accuracy class).
    """
    x = float(x)
    if not 0.0 < x <= coeffs.grid.b * (1 + 1e-12):
        raise ValueError("x must lie in (0, b]")
    t = float(t)
    if abs(t) > x * (1 + 1e-12):
        raise ValueError("|t| must not exceed x")
    Kx = np.stack(
        [cubic_interp(coeffs.grid, coeffs.coeff(n), x)[0] for n in range(coeffs.N + 1)]
    )
    P = legendre_seq(np.clip(t / x, -1.0, 1.0), coeffs.N)
    return np.einsum("n,nij->ij", P, Kx) / x


def goursat_residuals(coeffs):
    """delta_Q and delta_0 per node (x = 0 excluded) plus their sups."""
    grid = coeffs.grid
    x = grid.nodes[1:]
    Kn = coeffs.coeffs[:, 1:]
    comm = B_MAT @ Kn - Kn @ B_MAT
    anti = B_MAT @ Kn + Kn @ B_MAT
    signs = (-1.0) ** np.arange(coeffs.N + 1)
    dQ = matrix_norm(
        coeffs.potential.matrices[1:] + comm.sum(axis=0) / x[:, None, None]
    )
    d0 = matrix_norm(np.einsum("n,n...->...", signs, anti) / x[:, None, None])
    outer = x >= 0.5 * grid.b
    return GoursatResiduals(
        x=x,
        delta_Q=dQ,
        delta_0=d0,
        sup_Q=float(dQ.max()),
        sup_0=float(d0.max()),
        sup_Q_outer=float(dQ[outer].max()),
        sup_0_outer=float(d0[outer].max()),
    )


def _residual_profile(coeffs):
    """Outer-region sup delta_Q and sup delta_0 for every order n <= N."""
    grid = coeffs.grid
    outer = grid.nodes >= 0.5 * grid.b
    x = grid.nodes[outer, None, None]
    Kn = coeffs.coeffs[:, outer]
    comm = B_MAT @ Kn - Kn @ B_MAT
    anti = B_MAT @ Kn + Kn @ B_MAT
    Qm = coeffs.potential.matrices[outer]
    sup_Q = np.empty(coeffs.N + 1)
    sup_0 = np.empty(coeffs.N + 1)
    total = np.zeros_like(comm[0])
    alt = np.zeros_like(comm[0])
    for n in range(coeffs.N + 1):
        total = total + comm[n]
        alt = alt + (-1.0) ** n * anti[n]
        sup_Q[n] = np.max(matrix_norm(Qm + total / x))
        sup_0[n] = np.max(matrix_norm(alt / x))
    return sup_Q, sup_0


def _probe_schedule(n_max):
    probes = [2, 4, 8]
    grow = True
    while probes[-1] < n_max:
        probes.append(probes[-1] * 3 // 2 if grow else probes[-1] * 4 // 3)
        grow = not grow
    return sorted({min(p, n_max) for p in probes})


def _truncate(coeffs, N):
    if N == coeffs.N:
        return coeffs
    return KernelCoefficients(
        grid=coeffs.grid,
        potential=coeffs.potential,
        hom=coeffs.hom,
        N=N,
        theta=coeffs.theta[: N + 2].copy(),
        K=coeffs.K[: N + 2].copy(),
    )


def auto_truncation(Q, hom, tol, N_max=128):
    """Smallest truncation order whose Goursat residuals meet tol.

    Convergence is judged on the outer-region sups (see GoursatResiduals).
    Residuals are evaluated along a geometric probe schedule (they cost
    O(N M) each); once a probe passes, the cheap per-order profile of the
    already-built family locates the smallest sufficient order exactly.
    Returns (coefficients, report); report.converged is False when even
    N_max misses the tolerance.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    probes = _probe_schedule(N_max)
    coeffs = None
    report_probes = []
    for Np in probes:
        coeffs = (
            build_coefficients(Q, hom, Np)
            if coeffs is None
            else extend_coefficients(coeffs, Np)
        )
        sup_Q, sup_0 = _residual_profile(coeffs)
        report_probes.append((Np, float(sup_Q[Np]), float(sup_0[Np])))
        level = np.maximum(sup_Q, sup_0)
        if level[Np] <= tol:
            n_best = int(np.argmax(level <= tol))
            return _truncate(coeffs, n_best), TruncationReport(
                converged=True, N=n_best, tol=tol, probes=report_probes
            )
    return coeffs, TruncationReport(
        converged=False, N=coeffs.N, tol=tol, probes=report_probes
    )
