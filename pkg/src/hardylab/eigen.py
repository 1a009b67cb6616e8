"""Smallest eigenpair of a symmetric tridiagonal pencil (T, B), B positive definite.

Matrices are passed as ``(diagonal, off_diagonal)`` pairs.  The pencil is
first scaled by diag(B)^(-1/2); on boundary-graded meshes the raw entries
span many orders of magnitude, the scaled ones are O(1).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, solve_banded

from .errors import IndefiniteH, NoConvergence


def _scale(T, B):
    bd, bo = B
    if np.any(bd <= 0):
        raise IndefiniteH("Hardy matrix has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(bd)
    td, to = T
    return ((td * s * s, to * s[:-1] * s[1:]), (np.ones_like(bd), bo * s[:-1] * s[1:]), s)


def sturm_count(T, B, sigma):
    """Number of eigenvalues of (T, B) below each shift in ``sigma``.

    Counts negative pivots of the LDL^T factorisation of T - sigma*B
    (Sylvester inertia); ``sigma`` may be an array of shifts handled at once.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    a = T[0][:, None] - sigma[None, :] * B[0][:, None]
    b = T[1][:, None] - sigma[None, :] * B[1][:, None]
    tiny = np.finfo(float).tiny ** 0.5
    count = np.zeros(sigma.size, dtype=int)
    d = a[0].copy()
    for i in range(a.shape[0]):
        if i:
            d = a[i] - b[i - 1] ** 2 / d
        d = np.where(d == 0.0, -tiny, d)
        count += d < 0
    return count


def _banded(T, B, sigma):
    d = T[0] - sigma * B[0]
    o = T[1] - sigma * B[1]
    ab = np.zeros((3, d.size))
    ab[0, 1:] = o
    ab[1] = d
    ab[2, :-1] = o
    return ab


def tri_matvec(M, x):
    d, o = M
    y = d * x
    y[:-1] += o * x[1:]
    y[1:] += o * x[:-1]
    return y


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    iterations: int
    trace: list
    bracket: tuple


def smallest_eigenpair(T, B, upper=None, rtol=1e-12, bisect_rtol=1e-9, max_iter=200):
    """Smallest eigenvalue and B-normalised eigenvector of T v = mu B v.

    Bisection on the Sturm count (16 shifts per sweep) brackets the smallest
    eigenvalue to ``bisect_rtol``; shifted inverse iteration from just below
    the bracket then converges to the eigenvector.  Iteration stops when
    successive Rayleigh quotients differ by less than ``rtol`` (relative,
    floored at 1).
    """
    Ts, Bs, s = _scale(T, B)
    n = Ts[0].size
    if sturm_count(Bs, (np.ones(n), np.zeros(n - 1)), [0.0])[0]:
        raise IndefiniteH("Hardy matrix is not positive definite")
    if upper is None:
        upper = float(np.max(Ts[0]) + 2 * np.max(np.abs(Ts[1]), initial=0.0))
    hi = float(upper)
    if sturm_count(Ts, Bs, [hi])[0] == 0:
        hi = abs(hi) * 2 + 1
    lo = hi - max(1.0, abs(hi))
    while sturm_count(Ts, Bs, [lo])[0] > 0:
        lo -= 2 * (hi - lo)
    while hi - lo > bisect_rtol * max(1.0, abs(lo), abs(hi)):
        grid = np.linspace(lo, hi, 18)[1:-1]
        c = sturm_count(Ts, Bs, grid)
        k = int(np.argmax(c > 0)) if np.any(c > 0) else grid.size
        lo_new = grid[k - 1] if k > 0 else lo
        hi_new = grid[k] if k < grid.size else hi
        lo, hi = lo_new, hi_new
    sigma = lo - 1e-3 * (hi - lo)
    ab = _banded(Ts, Bs, sigma)
    x = np.ones(n)
    x /= np.sqrt(x @ tri_matvec(Bs, x))
    prev = None
    trace = []
    for it in range(1, max_iter + 1):
        y = solve_banded((1, 1), ab, tri_matvec(Bs, x))
        x = y / np.sqrt(y @ tri_matvec(Bs, y))
        if x[np.argmax(np.abs(x))] < 0:
            x = -x
        rq = float(x @ tri_matvec(Ts, x))
        trace.append((it, rq))
        if prev is not None and abs(rq - prev) < rtol * max(1.0, abs(rq)) and it >= 3:
            return EigenResult(rq, x * s, it, trace, (lo, hi))
        prev = rq
    raise NoConvergence("inverse iteration did not converge",
                        EigenResult(rq, x * s, max_iter, trace, (lo, hi)))


def dense_smallest(T, B):
    """Dense generalized eigensolve; an independent check of the tridiagonal path."""
    def full(M):
        d, o = M
        return np.diag(d) + np.diag(o, 1) + np.diag(o, -1)
    vals, vecs = eigh(full(T), full(B), subset_by_index=[0, 0])
    return float(vals[0]), vecs[:, 0]
