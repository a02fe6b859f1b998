"""Diagonal-potential systems brought to canonical form by rotation.

A system B Z' + diag(m1, m2) Z = lambda Z turns into the canonical form
B Y' + Q Y = lambda Y under Z = R(phi) Y with R a rotation matrix,
provided phi' = -(m1 + m2)/2 (which makes the transformed potential
trace-free):

    p = (m1 - m2)/2 cos(2 phi),    q = (m2 - m1)/2 sin(2 phi).

Boundary rows acting on Z(x0) become rows acting on Y(x0) after right
multiplication by R(phi(x0)), so a declared gauge also rotates the
boundary blocks.  The spectrum is invariant under the whole procedure.
"""

import numpy as np

from .dirac import Potential
from .grid import Grid

__all__ = [
    "rotation",
    "rotate_boundary_blocks",
    "diagonal_to_canonical",
]


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rotate_boundary_blocks(left, right, phi0, phib):
    """Boundary blocks for Y given blocks for Z = R(phi) Y."""
    return left @ rotation(phi0), right @ rotation(phib)


def diagonal_to_canonical(grid, m1_fn, m2_fn, phi_fn):
    """Canonical potential for the rotated system, plus a gauge defect.

    The defect is the max deviation of phi' + (m1 + m2)/2 from zero on a
    fine mesh (finite differences); a non-tiny defect means the supplied
    angle does not match the diagonal entries and the transformed system
    would not be trace-free.
    """
    if not isinstance(grid, Grid):
        raise TypeError("grid must be a Grid")

    def p_fn(x):
        return 0.5 * (m1_fn(x) - m2_fn(x)) * np.cos(2.0 * phi_fn(x))

    def q_fn(x):
        return 0.5 * (m2_fn(x) - m1_fn(x)) * np.sin(2.0 * phi_fn(x))

    xf = np.linspace(0.0, grid.b, 4 * grid.M + 1)
    h = xf[1] - xf[0]
    dphi = np.gradient(np.asarray(phi_fn(xf), dtype=float), h)
    defect = np.abs(dphi + 0.5 * (np.asarray(m1_fn(xf)) + np.asarray(m2_fn(xf))))
    # one-sided gradient stencils at the ends are first order; skip them
    defect = float(np.max(defect[2:-2]))
    return Potential.from_functions(grid, p_fn, q_fn), defect
