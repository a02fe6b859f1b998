"""Independent reference solutions used by the test suite only.

Everything here is deliberately built on different mathematics than the
library paths it checks: constant-coefficient problems use the closed-form
exponential of a traceless 2x2 matrix, the diagonal-potential benchmark
problem reduces to an exactly solvable Airy equation, and the
transmutation kernel is integrated directly along characteristics of its
defining hyperbolic system.
"""

import numpy as np
from scipy import optimize
from scipy import special as sp

B = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def _sinhc(w):
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < 1e-4
    safe = np.where(small, 1.0, w)
    out = np.where(small, 1.0 + w**2 / 6.0 + w**4 / 120.0, np.sinh(safe) / safe)
    return out


def expm_traceless(C, x):
    """exp(x C) for traceless 2x2 C: cosh(mu x) I + sinh(mu x)/mu * C."""
    C = np.asarray(C, dtype=complex)
    assert abs(C[0, 0] + C[1, 1]) < 1e-13
    mu2 = -(C[0, 0] * C[1, 1] - C[0, 1] * C[1, 0])
    mu = np.sqrt(mu2 + 0j)
    x = np.asarray(x, dtype=complex)
    w = mu * x
    out = np.cosh(w)[..., None, None] * I2 + (x * _sinhc(w))[..., None, None] * C
    return out


def const_q_solution(p, q, lam, x):
    """U(lambda, x) for constant p, q: exp(x (-lambda B + B Q))."""
    Q = np.array([[p, q], [q, -p]], dtype=complex)
    return expm_traceless(-lam * B + B @ Q, x)


def zs_const_solution(nu, lam, x):
    """Z(lambda, x) for a constant ZS potential: exp(x (Q_zs + i lam s3))."""
    G = np.array([[1j * lam, nu], [np.conj(nu), -1j * lam]], dtype=complex)
    return expm_traceless(G, x)


def central_dlambda(fn, lam, h=1e-5):
    return (fn(lam + h) - fn(lam - h)) / (2.0 * h)


# ---------------------------------------------------------------------------
# Benchmark spectral problem: B Z' + diag(-x, 1) Z = lam Z on [0, 1] with
# z1(0) = z1(1) = 0.  Eliminating z2 gives z1'' = (1 - lam)(lam + x) z1,
# which is exactly an Airy equation, so shooting has a closed form.  The
# elimination is degenerate at lam = 1, where (0, 1)^T is an eigenfunction
# of the first-order system; that eigenvalue is appended separately.
# ---------------------------------------------------------------------------


def airy_char(lam):
    """Shooting value z1(1) with z1(0) = 0, z1'(0) = 1 (up to sign)."""
    lam = np.asarray(lam, dtype=float)
    s = np.cbrt(1.0 - lam)
    z0 = s * lam
    z1 = s * (1.0 + lam)
    ai0, _, bi0, _ = sp.airy(z0)
    ai1, _, bi1, _ = sp.airy(z1)
    small = np.abs(s) < 1e-8
    safe = np.where(small, 1.0, s)
    return np.where(small, 1.0, np.pi * (ai0 * bi1 - bi0 * ai1) / safe)


def airy_spectrum(lam_min, lam_max, scan_step=0.05):
    """All eigenvalues of the benchmark problem inside [lam_min, lam_max]."""
    grid = np.arange(lam_min, lam_max + scan_step, scan_step)
    vals = airy_char(grid)
    roots = []
    for k in range(len(grid) - 1):
        if vals[k] == 0.0:
            roots.append(grid[k])
        elif np.sign(vals[k]) != np.sign(vals[k + 1]):
            r = optimize.brentq(
                lambda t: float(airy_char(t)), grid[k], grid[k + 1], xtol=1e-13, rtol=8.9e-16
            )
            roots.append(r)
    if lam_min <= 1.0 <= lam_max:
        roots.append(1.0)
    roots = np.array(sorted(roots))
    # dedupe (lam = 1 could in principle coincide with a reduced root)
    keep = np.ones(len(roots), dtype=bool)
    keep[1:] = np.diff(roots) > 1e-9
    return roots[keep]


# ---------------------------------------------------------------------------
# Direct Goursat integration of the transmutation-kernel system
#   B K_x + K_t B = -Q(x) K  on |t| <= x
#   B K(x, x) - K(x, x) B = -Q(x),   B K(x, -x) + K(x, -x) B = 0.
# In characteristic variables xi = (x + t)/2, eta = (x - t)/2 and the
# component combinations s1 = k11 + k22, d1 = k11 - k22, s2 = k12 + k21,
# d2 = k12 - k21 the system decouples into transport equations
#   d/dxi  s1 =  q d1 - p s2        d/dxi  d2 =  p d1 + q s2
#   d/deta d1 =  q s1 + p d2        d/deta s2 = -p s1 + q d2
# with data s1 = d2 = 0 on xi = 0 and d1 = q(x), s2 = -p(x) on eta = 0.
# A trapezoidal march with corrector sweeps gives an O(h^2) desk-scale
# reference that never touches the production recursion.
# ---------------------------------------------------------------------------


def goursat_kernel(p_fn, q_fn, b, n=30, sweeps=4):
    """Kernel K on the lattice (xi, eta) = (i, j) b/n, i + j <= n.

    Returns (x, t, K) arrays of the lattice points and 2x2 kernel values.
    """
    h = b / n
    s1 = np.zeros((n + 1, n + 1))
    d1 = np.zeros_like(s1)
    s2 = np.zeros_like(s1)
    d2 = np.zeros_like(s1)
    idx = np.arange(n + 1)
    xi = idx * h
    x_of = xi[:, None] + xi[None, :]  # x = xi + eta
    p = p_fn(x_of)
    q = q_fn(x_of)
    d1[:, 0] = q_fn(xi)
    s2[:, 0] = -p_fn(xi)

    def rhs_xi(i, j):
        return q[i, j] * d1[i, j] - p[i, j] * s2[i, j], p[i, j] * d1[i, j] + q[i, j] * s2[i, j]

    def rhs_eta(i, j):
        return q[i, j] * s1[i, j] + p[i, j] * d2[i, j], -p[i, j] * s1[i, j] + q[i, j] * d2[i, j]

    for _ in range(sweeps):
        for i in range(1, n + 1):
            for j in range(0, n + 1 - i):
                f0 = rhs_xi(i - 1, j)
                f1 = rhs_xi(i, j)
                s1[i, j] = s1[i - 1, j] + 0.5 * h * (f0[0] + f1[0])
                d2[i, j] = d2[i - 1, j] + 0.5 * h * (f0[1] + f1[1])
        for j in range(1, n + 1):
            for i in range(0, n + 1 - j):
                g0 = rhs_eta(i, j - 1)
                g1 = rhs_eta(i, j)
                d1[i, j] = d1[i, j - 1] + 0.5 * h * (g0[0] + g1[0])
                s2[i, j] = s2[i, j - 1] + 0.5 * h * (g0[1] + g1[1])

    pts_x, pts_t, kmats = [], [], []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            x = xi[i] + xi[j]
            t = xi[i] - xi[j]
            k11 = 0.5 * (s1[i, j] + d1[i, j])
            k22 = 0.5 * (s1[i, j] - d1[i, j])
            k12 = 0.5 * (s2[i, j] + d2[i, j])
            k21 = 0.5 * (s2[i, j] - d2[i, j])
            pts_x.append(x)
            pts_t.append(t)
            kmats.append([[k11, k12], [k21, k22]])
    return np.array(pts_x), np.array(pts_t), np.array(kmats)
