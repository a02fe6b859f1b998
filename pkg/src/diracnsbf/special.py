"""Spherical Bessel functions of complex argument and Legendre polynomials.

The series evaluator consumes two special-function families: spherical
Bessel functions j_n(z) for complex z (the argument is lambda*x, so both
tiny and large moduli occur in one sweep) and Legendre polynomials P_n(s)
on [-1, 1], both as point values and as monomial coefficient tables.

Spherical Bessel values are generated by downward (Miller) recurrence,
which is stable for orders above |z| where the upward recurrence loses all
digits.  The raw downward sequence is normalized against a closed form;
below a small-|z| cutoff a truncated Maclaurin series per order is used
instead.  A dedicated j_n(z)/z family removes the 1/lambda factors of the
derivative series analytically, so lambda = 0 needs no special casing by
callers.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "BesselSequence",
    "LegendreMonomialTable",
    "spherical_bessel_seq",
    "spherical_bessel_over_arg",
    "bessel_pair",
    "bessel_pair_batch",
    "legendre_eval",
    "legendre_seq",
    "legendre_monomial_coeffs",
    "LEGENDRE_DEGREE_CAP",
]

# Miller recurrence starts this many orders above n_max (plus ceil|z|).
_MILLER_PAD = 20
# spherical_bessel_seq switches to the Maclaurin series below this |z|.
_SEQ_SERIES_CUTOFF = 1e-4
# bessel_pair (the series evaluator's workhorse) switches earlier: the
# series is cheap and removes any division-by-small-z concern wholesale.
_PAIR_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 16
# Exact powers of two so rescaling during the downward pass is lossless.
_RESCALE_LIMIT = 2.0**830
_RESCALE_FACTOR = 2.0**-832

LEGENDRE_DEGREE_CAP = 64


@dataclass(frozen=True)
class BesselSequence:
    """Values j_0(z)..j_{n_max}(z) for one complex argument."""

    argument: complex
    values: np.ndarray


def _check_argument(z):
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise ValueError("non-finite Bessel argument: %r" % (z,))
    return z


def _series_pair(z, n_max):
    """Maclaurin j_n(z) and j_n(z)/z for small |z|.

    j_n(z) = z^n/(2n+1)!! * sum_k (-z^2/2)^k / (k! (2n+3)(2n+5)..(2n+2k+1)).
    Prefactors are built multiplicatively so large n underflows to zero
    instead of hitting an overflowing double factorial.  The n = 0 slot of
    the /z family is j_0(z)/z where z != 0 and 0 at z = 0 (no caller ever
    multiplies it by a nonzero weight there).
    """
    z = np.asarray(z, dtype=complex)
    half_z2 = 0.5 * z * z
    jn = np.empty((n_max + 1,) + z.shape, dtype=complex)
    jz = np.empty_like(jn)
    pref = np.ones_like(z)
    prefz = np.zeros_like(z)
    for n in range(n_max + 1):
        if n == 1:
            prefz = np.full_like(z, 1.0 / 3.0)
            pref = pref * z / 3.0
        elif n > 1:
            prefz = prefz * z / (2 * n + 1)
            pref = pref * z / (2 * n + 1)
        term = np.ones_like(z)
        total = np.ones_like(z)
        for k in range(1, _SERIES_TERMS):
            term = term * (-half_z2) / (k * (2 * n + 2 * k + 1))
            total = total + term
        jn[n] = pref * total
        if n >= 1:
            jz[n] = prefz * total
    zero = z == 0
    safe = np.where(zero, 1.0, z)
    jz[0] = np.where(zero, 0.0, jn[0] / safe)
    return jn, jz


def _miller_jn(z, n_max):
    """Spherical Bessel j_0..j_{n_max} for a batch of arguments.

    Downward recurrence: seeds an arbitrary tail at order
    n_max + pad + ceil|z| and recurses j_{n-1} = (2n+1)/z j_n - j_{n+1}
    down to 0, rescaling by an exact power of two whenever the carries
    grow, then normalizes against the closed form j_0 = sin(z)/z.  Near
    zeros of sin the normalization switches to j_1 = (sin z - z cos z)/z^2,
    whichever closed form is larger in modulus; normalizing against a
    near-vanishing j_0 would otherwise amplify the O(eps/|z|)
    contamination of the raw sequence.

    For essentially real arguments the oscillatory orders n <= 0.75 |z|
    are then recomputed by upward recurrence from the closed forms: the
    downward pass is accurate relative to the oscillation amplitude but
    not relative to the near-zero values at the crossings, while upward
    recurrence is stable (and locally exact) below the turning point.
    """
    z = np.asarray(z, dtype=complex)
    n_start = n_max + _MILLER_PAD + int(np.ceil(np.max(np.abs(z))))
    jp = np.zeros_like(z)
    jc = np.full_like(z, 1e-30)
    raw = np.zeros((n_max + 2,) + z.shape, dtype=complex)
    shift = np.zeros(z.shape, dtype=np.int64)
    shift_at = np.zeros((n_max + 2,) + z.shape, dtype=np.int64)
    for n in range(n_start, 0, -1):
        if n <= n_max + 1:
            raw[n] = jc
            shift_at[n] = shift
        jm = (2 * n + 1) / z * jc - jp
        jp, jc = jc, jm
        big = (np.abs(jc.real) + np.abs(jc.imag)) > _RESCALE_LIMIT
        if big.any():
            jc = np.where(big, jc * _RESCALE_FACTOR, jc)
            jp = np.where(big, jp * _RESCALE_FACTOR, jp)
            shift = shift + big
    raw[0] = jc
    shift_at[0] = shift

    sinz = np.sin(z)
    cosz = np.cos(z)
    j0_true = sinz / z
    j1_true = (sinz - z * cosz) / (z * z)
    use_j1 = np.abs(j1_true) > np.abs(j0_true)
    ref_true = np.where(use_j1, j1_true, j0_true)
    ref_raw = np.where(use_j1, raw[1], raw[0])
    factor = ref_true / ref_raw
    # Entries stored before a later rescale carry extra powers of the
    # rescale factor; applying them may underflow to zero, which is the
    # correct double-precision value of such a coefficient.
    delta = shift[None, ...] - shift_at
    out = raw[: n_max + 1] * factor * _RESCALE_FACTOR**delta[: n_max + 1]

    upward = (np.abs(z.imag) <= 1e-8 * np.abs(z)) & (np.abs(z) >= 4.0)
    if upward.any() and n_max >= 2:
        zu = z[upward]
        n_top = np.minimum((0.75 * np.abs(zu)).astype(int), n_max)
        jm = j0_true[upward]
        jc = j1_true[upward]
        for n in range(1, int(n_top.max())):
            jp = (2 * n + 1) / zu * jc - jm
            jm, jc = jc, jp
            write = n + 1 <= n_top
            if write.any():
                col = out[n + 1, upward]
                col[write] = jc[write]
                out[n + 1, upward] = col
    return out


def spherical_bessel_seq(z, n_max):
    """Spherical Bessel values j_0(z)..j_{n_max}(z), complex z allowed.

    Returns a BesselSequence.  Accurate to at least 12 significant digits
    for |z| <= 1e3 and n_max <= 256.  At z = 0 the exact limits are
    returned (j_0 = 1, j_n = 0 for n >= 1).
    """
    z = _check_argument(z)
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if abs(z) < _SEQ_SERIES_CUTOFF:
        values = _series_pair(np.array([z]), n_max)[0][:, 0]
    else:
        values = _miller_jn(np.array([z]), n_max)[:, 0]
    return BesselSequence(argument=z, values=values)


def spherical_bessel_over_arg(z, n_max):
    """The family j_n(z)/z for n = 0..n_max.

    Entries n >= 1 are finite for all z including z = 0, where the limits
    are 1/3 for n = 1 and 0 for n >= 2.  The n = 0 slot holds j_0(z)/z for
    z != 0 and 0 at z = 0; it is a placeholder (every consumer weights it
    by a factor that vanishes there).
    """
    z = _check_argument(z)
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if abs(z) < _PAIR_SERIES_CUTOFF:
        return _series_pair(np.array([z]), n_max)[1][:, 0]
    return _miller_jn(np.array([z]), n_max)[:, 0] / z


def bessel_pair(z, n_max):
    """(j_n(z), j_n(z)/z) for n = 0..n_max, sharing one generation pass."""
    z = _check_argument(z)
    jn, jz = bessel_pair_batch(np.array([z]), n_max)
    return jn[:, 0], jz[:, 0]


def bessel_pair_batch(z, n_max):
    """Vectorized bessel_pair over a 1-D array of arguments.

    Arguments below the series cutoff go through the Maclaurin branch, the
    rest through one shared downward recurrence.  Shape of each output is
    (n_max + 1, len(z)).
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite Bessel argument in batch")
    jn = np.empty((n_max + 1,) + z.shape, dtype=complex)
    jz = np.empty_like(jn)
    small = np.abs(z) < _PAIR_SERIES_CUTOFF
    if small.any():
        jn_s, jz_s = _series_pair(z[small], n_max)
        jn[:, small] = jn_s
        jz[:, small] = jz_s
    if (~small).any():
        zb = z[~small]
        jn_m = _miller_jn(zb, n_max)
        jn[:, ~small] = jn_m
        jz[:, ~small] = jn_m / zb
    return jn, jz


def legendre_eval(n, s):
    """P_n(s) by the three-term recurrence, s in [-1, 1] (scalar or array)."""
    if n < 0:
        raise ValueError("Legendre degree must be >= 0")
    s = np.asarray(s, dtype=float)
    if np.any(np.abs(s) > 1.0 + 1e-12):
        raise ValueError("Legendre argument outside [-1, 1]")
    out = legendre_seq(s, n)[n]
    if out.ndim == 0:
        return float(out)
    return out


def legendre_seq(s, n_max):
    """All of P_0(s)..P_{n_max}(s), shape (n_max + 1,) + shape(s)."""
    s = np.asarray(s, dtype=float)
    out = np.empty((n_max + 1,) + s.shape, dtype=float)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = s
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + 1) * s * out[n] - n * out[n - 1]) / (n + 1)
    return out


@dataclass(frozen=True)
class LegendreMonomialTable:
    """Monomial coefficients l[n, k] with P_n(s) = sum_k l[n, k] s^k."""

    n_max: int
    coeffs: np.ndarray

    def row(self, n):
        return self.coeffs[n]


def legendre_monomial_coeffs(n_max):
    """Monomial coefficient table for P_0..P_{n_max}, n_max <= 64.

    Rows are built with exact rational arithmetic through the Bonnet
    recurrence and emitted as floats; the cap keeps the combinatorial
    coefficient growth well inside double range.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if n_max > LEGENDRE_DEGREE_CAP:
        raise ValueError("monomial table capped at degree %d" % LEGENDRE_DEGREE_CAP)
    rows = [[Fraction(1)], [Fraction(0), Fraction(1)]]
    for n in range(1, n_max):
        prev, cur = rows[n - 1], rows[n]
        nxt = [Fraction(0)] * (n + 2)
        for k, c in enumerate(cur):
            nxt[k + 1] += Fraction(2 * n + 1, n + 1) * c
        for k, c in enumerate(prev):
            nxt[k] -= Fraction(n, n + 1) * c
        rows.append(nxt)
    coeffs = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        for k, c in enumerate(rows[n]):
            coeffs[n, k] = float(c)
    return LegendreMonomialTable(n_max=n_max, coeffs=coeffs)
