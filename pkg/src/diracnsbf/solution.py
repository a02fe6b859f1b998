"""Truncated series evaluation of U(lambda, x) and its lambda-derivative.

With the kernel coefficients C_n in hand, the fundamental matrix of the
Dirac system is the Bessel series

    U(lambda, x) = U0(lambda, x) + sum_{n=0}^{N} Kt_n(x) j_n(lambda x),

where the folded coefficients Kt absorb the parity signs and the B factor
of the odd terms (Kt_n = 2 (-1)^(n/2) C_n for even n and
2 (-1)^((n+1)/2) C_n B for odd n).  The lambda-derivative follows from the
Bessel derivative identities and is assembled from j_n(z) and j_n(z)/z so
that lambda = 0 needs no limit handling anywhere.
"""

from dataclasses import dataclass

import numpy as np

from .dirac import (
    B_MAT,
    dirac_residual,
    free_solution,
    free_solution_dlambda,
)
from .grid import cubic_interp
from .special import bessel_pair, bessel_pair_batch

__all__ = [
    "NsbfEvaluator",
    "IvpSolution",
    "build_evaluator",
    "evaluate_U",
    "evaluate_U_nodes",
    "evaluate_dU_dlambda",
    "solve_ivp",
]


@dataclass(frozen=True)
class NsbfEvaluator:
    """Precomputed folded coefficients for fast sweeps over lambda."""

    coeffs: object
    Ktilde: np.ndarray  # (N + 1, M + 1, 2, 2)

    @property
    def grid(self):
        return self.coeffs.grid

    @property
    def N(self):
        return self.coeffs.N

    @property
    def b(self):
        return self.coeffs.grid.b


@dataclass(frozen=True)
class IvpSolution:
    """Initial-value solution samples Y(lambda, x_i) = U^N(lambda, x_i) c."""

    lam: complex
    c: np.ndarray
    Y: np.ndarray
    residual: float


def build_evaluator(coeffs):
    """Fold parity signs and the B factor into per-order coefficients."""
    N = coeffs.N
    Kt = np.empty((N + 1,) + coeffs.coeff(0).shape, dtype=complex)
    for n in range(N + 1):
        if n % 2 == 0:
            Kt[n] = 2.0 * (-1.0) ** (n // 2) * coeffs.coeff(n)
        else:
            Kt[n] = 2.0 * (-1.0) ** ((n + 1) // 2) * (coeffs.coeff(n) @ B_MAT)
    return NsbfEvaluator(coeffs=coeffs, Ktilde=Kt)


def _coeffs_at(ev, x):
    """Folded coefficients at one x: node row or cubic interpolation."""
    grid = ev.grid
    t = x / grid.h
    i = int(round(t))
    if abs(t - i) < 1e-9 and 0 <= i <= grid.M:
        return ev.Ktilde[:, i]
    vals = np.empty((ev.N + 1, 2, 2), dtype=complex)
    for n in range(ev.N + 1):
        vals[n] = cubic_interp(grid, ev.Ktilde[n], x)[0]
    return vals


def evaluate_U(ev, lam, x):
    """U^N(lambda, x) at a single point, 0 <= x <= b."""
    x = float(x)
    if not 0.0 <= x <= ev.b * (1 + 1e-12):
        raise ValueError("x outside [0, b]")
    Kt = _coeffs_at(ev, x)
    jn, _ = bessel_pair(lam * x, ev.N + 1)
    return free_solution(lam, x) + np.einsum("n,nij->ij", jn[: ev.N + 1], Kt)


def evaluate_U_nodes(ev, lam):
    """U^N(lambda, x_i) on every grid node, vectorized over the nodes."""
    x = ev.grid.nodes
    jn, _ = bessel_pair_batch(lam * x, ev.N + 1)
    out = free_solution(lam, x)
    out += np.einsum("nm,nmij->mij", jn[: ev.N + 1], ev.Ktilde)
    return out


def evaluate_dU_dlambda(ev, lam, x):
    """d/dlambda of U^N(lambda, x), finite at lambda = 0.

    Per order the derivative weights are
        even n:  x (n j_n(z)/z - j_{n+1}(z))
        odd n:   x (j_{n-1}(z) - (n+1) j_n(z)/z)
    with z = lambda x; the j_n(z)/z factors come from the dedicated
    primitive, so the apparent 1/lambda singularity never materializes.
    """
    x = float(x)
    if not 0.0 <= x <= ev.b * (1 + 1e-12):
        raise ValueError("x outside [0, b]")
    Kt = _coeffs_at(ev, x)
    jn, jz = bessel_pair(lam * x, ev.N + 1)
    n = np.arange(ev.N + 1)
    w = np.where(
        n % 2 == 0,
        x * (n * jz[: ev.N + 1] - jn[1 : ev.N + 2]),
        x * (np.concatenate(([0], jn[: ev.N])) - (n + 1) * jz[: ev.N + 1]),
    )
    return free_solution_dlambda(lam, x) + np.einsum("n,nij->ij", w, Kt)


def solve_ivp(ev, lam, c):
    """Initial-value solution Y(lambda, x_i) = U^N(lambda, x_i) c."""
    c = np.asarray(c, dtype=complex).reshape(2)
    U = evaluate_U_nodes(ev, lam)
    Y = U @ c
    resid = dirac_residual(Y, ev.coeffs.potential, lam)
    return IvpSolution(lam=complex(lam), c=c, Y=Y, residual=resid)
