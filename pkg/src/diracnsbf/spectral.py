"""Characteristic function, real-line eigenvalue scan, Newton refinement.

For the two-point condition A_left Y(0) + A_right Y(b) = 0 the eigenvalues
are the zeros of Delta(lambda) = det(A_left + A_right U(lambda, b)); the
scan samples Delta on a uniform lambda grid, brackets sign changes of its
real restriction (plus suspicious local minima of |Delta|), refines each
candidate with a safeguarded Newton iteration driven by the series'
lambda-derivative, and indexes the surviving roots with index 0 anchored
at the smallest nonnegative eigenvalue.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dirac import free_solution
from .solution import evaluate_dU_dlambda, evaluate_U
from .special import bessel_pair_batch

__all__ = [
    "BoundaryCondition",
    "EigenvalueRecord",
    "ScanOptions",
    "char_function",
    "char_function_derivative",
    "refine_root",
    "scan_eigenvalues",
]


@dataclass(frozen=True)
class BoundaryCondition:
    """Coefficient blocks of A_left Y(0) + A_right Y(b) = 0.

    Each block is a constant 2x2 array or a callable lambda -> 2x2 (entire
    functions of the spectral parameter are allowed); optional derivative
    callables enable Newton refinement for lambda-dependent blocks.
    self_adjoint=True asserts a real characteristic function on the real
    axis and turns a violation into a diagnostic.
    """

    left: object
    right: object
    left_deriv: object = None
    right_deriv: object = None
    self_adjoint: bool = None

    @classmethod
    def dirichlet(cls):
        """y1(0) = 0 and y1(b) = 0."""
        return cls(
            left=np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex),
            right=np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex),
            self_adjoint=True,
        )

    def block(self, which, lam):
        blk = self.left if which == "left" else self.right
        if callable(blk):
            return np.asarray(blk(lam), dtype=complex)
        return np.asarray(blk, dtype=complex)

    def block_deriv(self, which, lam):
        blk = self.left if which == "left" else self.right
        if not callable(blk):
            return np.zeros((2, 2), dtype=complex)
        hook = self.left_deriv if which == "left" else self.right_deriv
        if hook is None:
            return None
        return np.asarray(hook(lam), dtype=complex)

    @property
    def is_constant(self):
        return not (callable(self.left) or callable(self.right))


@dataclass(frozen=True)
class EigenvalueRecord:
    index: int
    lam: float
    residual: float
    iterations: int
    converged: bool = True


@dataclass(frozen=True)
class ScanOptions:
    step: float = None  # default pi / (10 b)
    refine_rtol: float = 1e-13
    max_iter: int = 80
    minimum_ratio: float = 1e-3  # |Delta| local-min bracket threshold
    workers: int = 1
    dedupe_fraction: float = 0.25


def _det2(m):
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def char_function(ev, bc, lam):
    """Delta(lambda) = det(A_left + A_right U^N(lambda, b))."""
    M = bc.block("left", lam) + bc.block("right", lam) @ evaluate_U(ev, lam, ev.b)
    return complex(_det2(M))


def char_function_batch(ev, bc, lams):
    """Vectorized Delta over an array of lambda (constant blocks only)."""
    lams = np.asarray(lams, dtype=complex)
    if not bc.is_constant:
        return np.array([char_function(ev, bc, l) for l in lams])
    z = lams * ev.b
    jn, _ = bessel_pair_batch(z, ev.N + 1)
    Ub = free_solution(lams, ev.b) + np.einsum(
        "nm,nij->mij", jn[: ev.N + 1], ev.Ktilde[:, -1]
    )
    M = bc.block("left", 0.0) + bc.block("right", 0.0) @ Ub
    return M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]


def char_function_derivative(ev, bc, lam):
    """d Delta / d lambda, or None when a lambda-dependent block lacks
    a derivative hook.

    d(det M) expands exactly in cofactors for 2x2 matrices (equivalent to
    Jacobi's formula, with no conditioning caveat at singular M).
    """
    dL = bc.block_deriv("left", lam)
    dR = bc.block_deriv("right", lam)
    if dL is None or dR is None:
        return None
    U = evaluate_U(ev, lam, ev.b)
    dU = evaluate_dU_dlambda(ev, lam, ev.b)
    M = bc.block("left", lam) + bc.block("right", lam) @ U
    dM = dL + dR @ U + bc.block("right", lam) @ dU
    return complex(
        dM[0, 0] * M[1, 1]
        + M[0, 0] * dM[1, 1]
        - dM[0, 1] * M[1, 0]
        - M[0, 1] * dM[1, 0]
    )


def _delta_real(ev, bc, lam):
    return char_function(ev, bc, lam).real


def refine_root(ev, bc, bracket, tol=None, max_iter=80, trust_radius=None):
    """Polish one root of Re Delta with safeguarded Newton.

    bracket is (a, b) straddling a sign change (iterates are confined to
    it, with bisection as the fallback step), or a bare starting point
    when no sign change is available; the unbracketed mode gives up with
    converged=False once the iterates leave the trust radius (default
    pi/b, one asymptotic eigenvalue gap) rather than report a far-away
    root.  An endpoint or start already satisfying |Delta| <= tol counts
    as converged with zero iterations.  Falls back to secant steps when
    a lambda-dependent block has no derivative hook.
    """
    if trust_radius is None:
        trust_radius = np.pi / ev.b
    bracketed = np.ndim(bracket) != 0
    if bracketed:
        a, b = (float(np.real(t)) for t in bracket)
        fa, fb = _delta_real(ev, bc, a), _delta_real(ev, bc, b)
        scale = max(abs(fa), abs(fb), 1e-300)
        if tol is None:
            tol = 1e-13 * scale
        if abs(fa) <= tol:
            return EigenvalueRecord(0, a, abs(fa), 0, True)
        if abs(fb) <= tol:
            return EigenvalueRecord(0, b, abs(fb), 0, True)
        if np.sign(fa) == np.sign(fb):
            raise ValueError("bracket endpoints must straddle a sign change")
        lam = 0.5 * (a + b)
        fval = _delta_real(ev, bc, lam)
        if np.sign(fval) == np.sign(fa):
            a, fa = lam, fval
        else:
            b, fb = lam, fval
    else:
        a = b = fa = fb = None
        lam = float(np.real(bracket))
        fval = _delta_real(ev, bc, lam)
        if tol is None:
            tol = 1e-13 * max(1.0, abs(fval))
    start = lam
    best = (abs(fval), lam)
    if abs(fval) <= tol:
        return EigenvalueRecord(0, lam, abs(fval), 0, True)
    for it in range(1, max_iter + 1):
        df = char_function_derivative(ev, bc, lam)
        new = None
        if df is not None and np.isfinite(df.real) and df.real != 0.0:
            new = lam - fval / df.real
        elif bracketed and fb != fa:
            new = (a * fb - b * fa) / (fb - fa)  # false position
        if new is None:
            break
        if bracketed and not (min(a, b) < new < max(a, b)):
            new = 0.5 * (a + b)
        if not bracketed and abs(new - start) > trust_radius:
            return EigenvalueRecord(0, best[1], best[0], it, False)
        fnew = _delta_real(ev, bc, new)
        if bracketed:
            if np.sign(fnew) == np.sign(fa):
                a, fa = new, fnew
            else:
                b, fb = new, fnew
        moved = abs(new - lam)
        lam, fval = new, fnew
        if abs(fval) < best[0]:
            best = (abs(fval), lam)
        if abs(fval) <= tol:
            return EigenvalueRecord(0, lam, abs(fval), it, True)
        if moved <= 4.0 * np.finfo(float).eps * (1.0 + abs(lam)):
            # step collapse: at a simple root this is convergence in
            # lambda; require the residual to at least sit at the
            # double-root scale of the lambda resolution
            converged = abs(fval) <= max(tol, 1e4 * tol)
            return EigenvalueRecord(0, lam, abs(fval), it, converged)
    return EigenvalueRecord(0, best[1], best[0], max_iter, False)


def _scan_window(ev, bc, lam_min, lam_max, opts):
    npts = max(2, int(np.ceil((lam_max - lam_min) / opts.step)) + 1)
    grid = np.linspace(lam_min, lam_max, npts)
    vals = char_function_batch(ev, bc, grid)
    roots = []
    sgn = np.sign(vals.real)
    for i in range(len(grid) - 1):
        if sgn[i] == 0.0:
            roots.append(refine_root(ev, bc, grid[i], max_iter=opts.max_iter))
        elif sgn[i] != sgn[i + 1]:
            roots.append(
                refine_root(
                    ev, bc, (grid[i], grid[i + 1]), max_iter=opts.max_iter
                )
            )
    # local minima of |Delta| without a sign change: possible even-order
    # roots; attempt an unbracketed polish and keep only clean converges
    mag = np.abs(vals)
    floor = opts.minimum_ratio * np.median(mag)
    tol_min = opts.refine_rtol * max(float(np.median(mag)), 1e-300)
    for i in range(1, len(grid) - 1):
        if mag[i] < mag[i - 1] and mag[i] < mag[i + 1] and mag[i] < floor:
            if sgn[i - 1] == sgn[i] == sgn[i + 1]:
                rec = refine_root(
                    ev,
                    bc,
                    grid[i],
                    tol=tol_min,
                    max_iter=opts.max_iter,
                    trust_radius=3.0 * opts.step,
                )
                if rec.converged and lam_min <= rec.lam <= lam_max:
                    roots.append(rec)
    return roots


def scan_eigenvalues(ev, bc, lam_min, lam_max, options=None):
    """All real eigenvalues in [lam_min, lam_max], refined and indexed.

    Returns EigenvalueRecord items sorted by eigenvalue; the smallest
    nonnegative eigenvalue carries index 0 and indices decrease leftward
    (when every eigenvalue is negative the rightmost one gets index -1).
    """
    if not lam_min < lam_max:
        raise ValueError("need lam_min < lam_max")
    opts = options or ScanOptions()
    if opts.step is None:
        opts = ScanOptions(
            step=np.pi / (10.0 * ev.b),
            refine_rtol=opts.refine_rtol,
            max_iter=opts.max_iter,
            minimum_ratio=opts.minimum_ratio,
            workers=opts.workers,
            dedupe_fraction=opts.dedupe_fraction,
        )
    probe = char_function_batch(
        ev, bc, np.linspace(lam_min, lam_max, 101)
    )
    im_level = np.max(np.abs(probe.imag))
    re_scale = max(np.max(np.abs(probe)), 1e-300)
    real = im_level <= 1e-8 * re_scale
    if bc.self_adjoint and not real:
        raise ArithmeticError(
            "problem flagged self-adjoint but Delta is complex on the real "
            "axis (|Im|/|Delta| = %.2e)" % (im_level / re_scale)
        )
    nwin = max(1, int(opts.workers))
    edges = np.linspace(lam_min, lam_max, nwin + 1)
    windows = [(edges[i], edges[i + 1]) for i in range(nwin)]
    if nwin == 1:
        found = _scan_window(ev, bc, lam_min, lam_max, opts)
    else:
        found = []
        with ThreadPoolExecutor(max_workers=nwin) as pool:
            futs = [
                pool.submit(_scan_window, ev, bc, a, b, opts)
                for a, b in windows
            ]
            for fut in futs:
                found.extend(fut.result())
    found = [r for r in found if r.converged]
    found.sort(key=lambda r: r.lam)
    merged = []
    for rec in found:
        if merged and abs(rec.lam - merged[-1].lam) < opts.dedupe_fraction * opts.step:
            if rec.residual < merged[-1].residual:
                merged[-1] = rec
            continue
        merged.append(rec)
    if not merged:
        warnings.warn("no eigenvalues found in the window", stacklevel=2)
        return []
    anchor = next((i for i, r in enumerate(merged) if r.lam >= 0.0), len(merged))
    return [
        EigenvalueRecord(
            index=i - anchor,
            lam=r.lam,
            residual=r.residual,
            iterations=r.iterations,
            converged=r.converged,
        )
        for i, r in enumerate(merged)
    ]
