"""Exactly-rounded streaming moving sums.

The demodulator slides a fixed-length sum along millions of samples.  A
plain running update (add the incoming sample, subtract the outgoing one)
drifts away from a freshly computed window sum, so instead the window sum
is carried as a non-overlapping expansion of doubles (Shewchuk's
grow-expansion).  Adding a sample and adding the negation of the outgoing
sample are both exact, hence every emitted value is the correctly rounded
sum of exactly the samples inside the window - bit-identical to
``math.fsum`` over that window.

fastmath must stay off: the error-free transformations rely on strict
IEEE-754 ordering.
"""

import numba as nb
import numpy as np

_CAP = 64


@nb.njit(cache=True)
def _grow(e, m, b):
    """Add b to the expansion e[:m]; returns the new length (exact)."""
    q = b
    k = 0
    for j in range(m):
        ej = e[j]
        s = q + ej
        bv = s - q
        err = (q - (s - bv)) + (ej - bv)
        if err != 0.0:
            e[k] = err
            k += 1
        q = s
    if q != 0.0 or k == 0:
        e[k] = q
        k += 1
    return k


@nb.njit(cache=True)
def _round_expansion(e, m):
    """Correctly rounded double of the expansion value.

    Same final-rounding procedure as CPython's math.fsum: sum the partials
    from the largest down until a residue appears, then apply the
    half-to-even correction against the next partial.
    """
    if m == 0:
        return 0.0
    i = m - 1
    hi = e[i]
    lo = 0.0
    while i > 0:
        x = hi
        i -= 1
        y = e[i]
        hi = x + y
        yr = hi - x
        lo = y - yr
        if lo != 0.0:
            break
    if i > 0 and ((lo < 0.0 and e[i - 1] < 0.0) or (lo > 0.0 and e[i - 1] > 0.0)):
        y = lo * 2.0
        x = hi + y
        yr = x - hi
        if y == yr:
            hi = x
    return hi


@nb.njit(cache=True)
def _moving_sum(x, n):
    out = np.empty(x.shape[0] - n + 1)
    e = np.zeros(_CAP)
    m = 0
    for i in range(n):
        if m >= _CAP - 2:
            raise ValueError("expansion overflow in exact moving sum")
        m = _grow(e, m, x[i])
    out[0] = _round_expansion(e, m)
    for i in range(n, x.shape[0]):
        if m >= _CAP - 4:
            raise ValueError("expansion overflow in exact moving sum")
        m = _grow(e, m, x[i])
        m = _grow(e, m, -x[i - n])
        out[i - n + 1] = _round_expansion(e, m)
    return out


def moving_sum_exact(x: np.ndarray, n: int) -> np.ndarray:
    """Sums of every length-n window of x, each correctly rounded.

    out[i] == fsum(x[i:i+n]) bit for bit; len(out) == len(x) - n + 1.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if n < 1:
        raise ValueError("window length must be >= 1")
    if x.shape[0] < n:
        raise ValueError("input shorter than the window")
    return _moving_sum(x, n)
