"""Log-space quadrature for integrands that over- or underflow in linear space.

Every routine here integrates ``exp(log_integrand(s))`` over intervals of
``(0, inf)`` and returns the *logarithm* of the result.  Cells are mapped to
the variable ``u = log s`` first, which makes geometric grids uniform and
turns power-law integrands into exponentials that Gauss-Kronrod handles well.
Weights such as ``exp(1/sqrt(t))`` at ``t = 1e-6`` are ``e^1000``; nothing in
this module ever forms such a number.
"""

import numpy as np
from scipy.special import logsumexp

from .errors import QuadratureFailure

# 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (+-xgk[1], +-xgk[3], +-xgk[5], 0).
_GAUSS_MASK = np.zeros(15, dtype=bool)
_GAUSS_MASK[1:15:2] = True
GAUSS_WEIGHTS = np.concatenate([_WG[:-1], _WG[::-1]])
_LOG_WK = np.log(KRONROD_WEIGHTS)
_LOG_WG = np.log(GAUSS_WEIGHTS)

MAX_PANELS = 400


def _kronrod_logs(log_integrand, xa, xb, ref, anchor=None):
    """Log of K15 and G7 estimates of int exp(g(s)) ds over s = ref*e^x, x in [xa, xb].

    Panels are given in the local variable ``x = log(s/ref)`` so node
    positions keep full relative precision even deep toward s = 0.  Returns
    (logK, logG, logpeak, scale): logpeak is the largest sampled value times
    the width, and ``eps * scale`` is the attainable relative accuracy.
    """
    half = 0.5 * (xb - xa)
    mid = 0.5 * (xb + xa)
    x = mid[..., None] + half[..., None] * KRONROD_NODES
    s = ref[..., None] * np.exp(x)
    if anchor is None:
        g = log_integrand(s)
    else:
        g = log_integrand(s, anchor[..., None])
    g = np.where(np.isnan(g), -np.inf, g)
    vals = g + x + np.log(ref)[..., None]
    log_half = np.log(half)[..., None]
    lk = logsumexp(vals + _LOG_WK + log_half, axis=-1)
    lg = logsumexp(vals[..., _GAUSS_MASK] + _LOG_WG + log_half, axis=-1)
    finite = np.isfinite(g)
    # log values are only known to a few ulps of |g|, and the nodes to ulps
    # of |x|, which matters when g moves fast across a narrow panel
    gabs = np.where(finite, np.abs(g), 0.0).max(axis=-1)
    spread = np.where(finite, vals, -np.inf).max(axis=-1) - np.where(finite, vals, np.inf).min(axis=-1)
    spread = np.where(np.isfinite(spread), spread, 0.0)
    jitter = (np.abs(mid) + half + 1.0) * spread / (2.0 * half)
    return lk, lg, np.max(vals, axis=-1) + np.log(2.0 * half), gabs + jitter + 1.0


def _log_abs_diff(la, lb):
    """log|e^la - e^lb| with -inf for equal arguments."""
    hi = np.maximum(la, lb)
    lo = np.minimum(la, lb)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = hi + np.log(-np.expm1(lo - hi))
    return np.where(np.isfinite(hi), out, -np.inf)


def _group_lse(values, groups, n):
    """Per-group log-sum-exp of ``values`` (groups are ints in [0, n))."""
    m = np.full(n, -np.inf)
    np.maximum.at(m, groups, values)
    safe = np.where(np.isfinite(m), m, 0.0)
    acc = np.zeros(n)
    np.add.at(acc, groups, np.exp(values - safe[groups]))
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(m), safe + np.log(acc), m)


def log_cell_integrals(log_integrand, edges, rtol=1e-12, max_panels=MAX_PANELS,
                       summed=False, anchors=None):
    """Log of ``int exp(log_integrand(s)) ds`` over each cell of ``edges``.

    Panels are bisected (in ``u = log s``) until each one is accurate to
    ``rtol`` relative to itself or is negligible against its cell.  All cells
    are refined together, one vectorised Kronrod sweep per bisection level.

    Parameters
    ----------
    log_integrand : callable
        Vectorised ``s -> log(integrand(s))`` for ``s > 0``.
    edges : array_like
        Strictly increasing positive cell boundaries.
    rtol : float
        Relative error target per cell.  When log values are huge the target
        is relaxed to what double precision can resolve (a few ulps of |log|).
    max_panels : int
        Panel budget per cell.
    summed : bool
        The caller only needs the sum over cells: cells that are negligible
        against the whole total are not refined.
    anchors : array_like, optional
        One number per cell; the integrand is then called as
        ``log_integrand(s, anchor)``.  Used to integrate ratios such as
        ``w(t_i)/w(s)`` without forming either factor.

    Returns
    -------
    logI : ndarray
        One entry per cell; ``-inf`` for cells whose integral underflows
        even in log space.
    """
    edges = np.asarray(edges, dtype=float)
    if np.any(edges <= 0) or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be positive and strictly increasing")
    n = edges.size - 1
    ref = edges[:-1]
    ua, ub, cell = np.zeros(n), np.log(edges[1:] / ref), np.arange(n)
    anc = None if anchors is None else np.asarray(anchors, dtype=float)
    done_k, done_c = [], []
    used = np.ones(n, dtype=int)
    log_rtol = np.log(rtol)
    while ua.size:
        lk, lg, lpeak, gmax = _kronrod_logs(log_integrand, ua, ub, ref[cell],
                                            None if anc is None else anc[cell])
        le = _log_abs_diff(lk, lg)
        floor = np.maximum(log_rtol, np.log(16.0 * np.finfo(float).eps * gmax + 1e-300))
        ok = ~np.isfinite(lk) | (le <= floor + lk)
        est = _group_lse(np.concatenate([lk] + done_k), np.concatenate([cell] + done_c), n)
        ok |= lpeak < est[cell] + log_rtol + np.log(1e-3)
        if summed:
            ok |= lpeak < logsumexp(est) + log_rtol - np.log(n)
        mid = 0.5 * (ua + ub)
        ok |= ~((ua < mid) & (mid < ub))
        done_k.append(lk[ok])
        done_c.append(cell[ok])
        bad = ~ok
        if not bad.any():
            break
        used += np.bincount(cell[bad], minlength=n)
        if used.max() > max_panels:
            i = int(np.argmax(used))
            raise QuadratureFailure(
                f"log-space quadrature did not reach rtol={rtol:g} on cell "
                f"[{edges[i]:.3e}, {edges[i + 1]:.3e}] within {max_panels} panels")
        ua, ub, cell = (np.concatenate([ua[bad], mid[bad]]),
                        np.concatenate([mid[bad], ub[bad]]),
                        np.concatenate([cell[bad], cell[bad]]))
    return _group_lse(np.concatenate(done_k), np.concatenate(done_c), n)


def log_integral(log_integrand, a, b, rtol=1e-12):
    """Log of ``int_a^b exp(log_integrand(s)) ds`` for ``0 < a < b``."""
    return float(log_cell_integrals(log_integrand, [a, b], rtol=rtol)[0])


def dyadic_panel_logs(log_integrand, top, count, rtol=1e-12, summed=False):
    """Log integrals over the panels ``[top*2^-(k+1), top*2^-k]``, k = 0..count-1."""
    k = np.arange(count + 1)
    edges = top * np.exp2(-k.astype(float))[::-1]
    return log_cell_integrals(log_integrand, edges, rtol=rtol, summed=summed)[::-1]


def log_integral_from_zero(log_integrand, top, rtol=1e-12, max_halvings=1100):
    """Log of ``int_0^top exp(log_integrand)``, or ``None`` if it looks divergent.

    The interval is cut into dyadic panels shrinking toward 0.  Summation stops
    once the panel terms are negligible; a geometric tail is added when the
    terms decay at a steady ratio (exact for power laws).
    """
    logs = dyadic_panel_logs(log_integrand, top, 64, rtol=rtol, summed=True)
    while True:
        total = logsumexp(logs)
        last = logs[-8:]
        if not np.isfinite(total):
            return total
        if last[-1] < total + np.log(1e-17):
            return total
        ratios = np.diff(last)
        if np.min(ratios) > -1e-9:
            return None
        if ratios.max() < 0 and np.ptp(ratios) < 1e-6 * abs(ratios.mean()) + 1e-12:
            r = np.exp(ratios.mean())
            tail = last[-1] + np.log(r / (1.0 - r))
            return float(np.logaddexp(total, tail))
        if logs.size >= max_halvings:
            # decaying but not geometrically; accept only if tail is tiny
            if last[-1] < total + np.log(1e-12):
                return total
            return None
        start = top * 2.0 ** (-logs.size)
        more = dyadic_panel_logs(log_integrand, start, 64, rtol=rtol, summed=True)
        logs = np.concatenate([logs, more])
