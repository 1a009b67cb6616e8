"""Hardy functions f, F, G of a weight, tabulated on a boundary-graded grid.

For a weight w of class P (1/w not integrable at 0)::

    f(t) = mu + int_t^eta 1/w,      F = w f,     G(t) = mu + int_t^eta 1/F

and for class Q::

    f(t) = int_0^t 1/w,             F = w f,     G(t) = mu + int_t^eta 1/F

with the constants F(eta), mu used for t >= eta.  Since 1/F = |d log f/dt|,
G is also ``mu + |log f(t) - log f(eta)|``; the default build uses that exact
form and ``g_method="quadrature"`` integrates 1/F instead as a cross-check.

All tabulation happens in log space (``log f``, ``log F``) so weights like
``exp(1/sqrt(t))`` never overflow.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from . import __version__
from .errors import (ClassMismatch, ExtrapolationRequired, FitRejected, HypothesisNotMet,
                     InvalidParameter, NonPositiveT, QuadratureFailure, ToleranceExceeded)
from .quadrature import log_cell_integrals, log_integral_from_zero
from .weights import WeightClass, WeightSpec, make_weight, switching


class ExtrapolationWarning(UserWarning):
    """Emitted when a profile is evaluated below its smallest grid node."""


DEFAULT_DEPTH = 1e-9
# largest tolerated eps * |t d(log w)/dt| on the grid, see build_profile
PRECISION_LIMIT = 1e-4
ADMISSIBILITY_DEPTH = 1e-8
ADAPT_PASSES = 3
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def auto_mu(w, eta):
    """mu that turns F into the closed form t/(alpha-1) for Power(alpha > 1); else 1."""
    if w.family == "Power" and w.spec.params["alpha"] > 1:
        a = w.spec.params["alpha"]
        return eta ** (1.0 - a) / (a - 1.0)
    return 1.0


@dataclass(frozen=True)
class HardyProfile:
    """Tabulated Hardy functions for fixed (w, class, eta, mu).

    Arrays are indexed by the grid, which is uniform in ``u = log t`` and ends
    exactly at ``eta``.  Only ``log_f`` and ``G`` are primary; ``F`` is
    ``exp(log w + log f)``.
    """

    weight: object
    cls: WeightClass
    eta: float
    mu: float
    grid: np.ndarray
    log_f: np.ndarray
    log_F: np.ndarray
    G: np.ndarray
    g_method: str = "exact"
    _splines: dict = field(default=None, repr=False, compare=False)

    # -- derived tables -------------------------------------------------
    @property
    def s(self):
        return switching(self.cls)

    @property
    def f_vals(self):
        with np.errstate(over="ignore"):
            return np.exp(self.log_f)

    @property
    def F_vals(self):
        with np.errstate(over="ignore"):
            return np.exp(self.log_F)

    @property
    def G_vals(self):
        return self.G

    @property
    def t_min(self):
        return float(self.grid[0])

    @property
    def F_tail(self):
        return float(np.exp(self.log_F[-1]))

    @property
    def G_tail(self):
        return self.mu

    def slopes(self):
        """u-derivatives of (log f, log F, G) at the nodes.

        The first and last are exact.  d log F/du = t w'/w + s t/F is a
        difference of two huge numbers for exp(-1/t)-type weights deep
        toward 0; where it cancels the PCHIP slope is used instead.
        """
        t = self.grid
        tF = np.exp(np.log(t) - self.log_F)
        dlogf = self.s * tF
        a = t * self.weight.dlog(t)
        exact = a + dlogf
        pchip = PchipInterpolator(np.log(t), self.log_F).derivative()(np.log(t))
        ok = np.abs(exact) >= 1e-3 * (np.abs(a) + np.abs(dlogf))
        return dlogf, np.where(ok, exact, pchip), -tF

    def _spline(self, name):
        # cubic Hermite through the nodes with the slopes above; these are
        # monotone wherever the tabulated data are, up to O(h^4)
        sp = self._splines
        if name not in sp:
            d = dict(zip(("log_f", "log_F", "G"), self.slopes()))
            sp[name] = CubicHermiteSpline(np.log(self.grid), getattr(self, name), d[name])
        return sp[name]

    # -- evaluation -----------------------------------------------------
    def evaluate(self, name, t, strict=False):
        """Interpolate ``log_f``, ``log_F`` or ``G`` at t.

        Returns ``(values, extrapolated_mask)``.  Below the grid the value is
        continued linearly in log t with the exact end slope; ``strict``
        turns that into :class:`ExtrapolationRequired`.
        """
        t = np.asarray(t, dtype=float)
        if np.any(~(t > 0)):
            raise NonPositiveT("Hardy functions are defined for t > 0 only")
        u = np.log(t)
        u0, u1 = math.log(self.grid[0]), math.log(self.grid[-1])
        tail = {"log_f": self.log_f[-1], "log_F": self.log_F[-1], "G": self.mu}[name]
        below = u < u0
        if strict and below.any():
            raise ExtrapolationRequired(
                f"t={float(t[below].min()):.3e} is below the profile grid (t_min={self.t_min:.3e})")
        sp = self._spline(name)
        inside = np.clip(u, u0, u1)
        out = sp(inside)
        if below.any():
            slope = sp(u0, 1)
            out = np.where(below, sp(u0) + slope * (u - u0), out)
        out = np.where(t >= self.eta, tail, out)
        return out, below

    def _eval(self, name, t, strict):
        out, below = self.evaluate(name, t, strict)
        if below.any():
            warnings.warn(f"{name} extrapolated below t_min={self.t_min:.3e}",
                          ExtrapolationWarning, stacklevel=3)
        return out[()] if out.ndim == 0 else out

    def log_f_at(self, t, strict=False):
        return self._eval("log_f", t, strict)

    def log_F_at(self, t, strict=False):
        return self._eval("log_F", t, strict)

    def G_at(self, t, strict=False):
        return self._eval("G", t, strict)

    def to_json(self):
        return {
            "meta": {"version": __version__, "weight": self.weight.spec.to_json(),
                     "class": self.cls.to_json(), "eta": self.eta, "mu": self.mu,
                     "n_nodes": int(self.grid.size), "g_method": self.g_method},
            "grid": self.grid.tolist(),
            "log_f": self.log_f.tolist(),
            "log_F": self.log_F.tolist(),
            "f": self.f_vals.tolist(),
            "F": self.F_vals.tolist(),
            "G": self.G.tolist(),
            "tails": {"F_tail": self.F_tail, "G_tail": self.G_tail},
        }

    @classmethod
    def from_json(cls, doc):
        m = doc["meta"]
        w = make_weight(WeightSpec.from_json(m["weight"]))
        c = m["class"]
        wc = WeightClass(c["kind"], c["evidence"], c["log_integral"], c.get("panels", 0))
        return _make(w, wc, m["eta"], m["mu"], np.array(doc["grid"]), np.array(doc["log_f"]),
                     np.array(doc["log_F"]), np.array(doc["G"]), m.get("g_method", "exact"))

    def table(self):
        """Columns t, f, F, G, F*G^2 plus log f and log F."""
        F = self.F_vals
        return {"t": self.grid, "f": self.f_vals, "F": F, "G": self.G,
                "FG2": F * self.G ** 2, "log_f": self.log_f, "log_F": self.log_F}


def _make(w, c, eta, mu, grid, log_f, log_F, G, g_method):
    return HardyProfile(w, c, float(eta), float(mu), grid, log_f, log_F, G, g_method, {})


def eval_f(p, t, strict=False):
    with np.errstate(over="ignore"):
        return np.exp(p.log_f_at(t, strict))


def eval_F(p, t, strict=False):
    return np.exp(p.log_F_at(t, strict))


def eval_G(p, t, strict=False):
    return p.G_at(t, strict)


def profile_grid(eta, n_nodes, t_min):
    """Nodes uniform in log t from t_min to eta (eta included exactly)."""
    grid = eta * np.exp(np.linspace(math.log(t_min / eta), 0.0, n_nodes))
    grid[-1] = eta
    return grid


def adapted_grid(grid, G, mu, n_nodes):
    """Nodes uniform in v = log t - log(1 + G - mu).

    v is increasing (dv/dt = 1/t + 1/(F (1 + G - mu))) and puts nodes where
    log f moves fast: in the boundary layer below eta when 1/w(eta) is large
    compared with mu, and in the deep region for exponential weights.
    """
    v = np.log(grid) - np.log1p(G - mu)
    vn = np.linspace(v[0], v[-1], n_nodes)
    out = np.exp(np.interp(vn, v, np.log(grid)))
    out[0], out[-1] = grid[0], grid[-1]
    return out


def build_profile(w, cls, eta, mu=1.0, n_nodes=2048, t_min=None, g_method="exact", rtol=1e-12):
    """Tabulate f, F, G on a log-uniform grid from ``t_min`` up to ``eta``.

    Parameters
    ----------
    w : Weight
    cls : WeightClass
        Usually ``classify(w, eta)``.
    eta, mu : float
        Cut-off and offset of the Hardy functions.
    n_nodes : int
        Grid size, at least 64.
    t_min : float, optional
        Smallest node; defaults to ``1e-9 * eta``.
    g_method : {"exact", "quadrature"}
        How G is obtained, see module docstring.

    Raises
    ------
    ClassMismatch
        Class Q was requested but int_0 1/w diverges.
    QuadratureFailure
        A grid cell could not be integrated to ``rtol``, or ``t_min`` lies so
        deep that rounding of t alone moves log w by more than
        ``PRECISION_LIMIT`` (e.g. t < 1e-23 for exp(-1/sqrt t)).
    """
    if not (eta > 0 and mu > 0):
        raise InvalidParameter("eta and mu must be positive")
    if n_nodes < 64:
        raise InvalidParameter("n_nodes must be at least 64")
    t_min = DEFAULT_DEPTH * eta if t_min is None else float(t_min)
    if not 0 < t_min < eta:
        raise InvalidParameter("need 0 < t_min < eta")
    # pilot pass on a log grid, then the real pass on nodes adapted to G
    pilot = profile_grid(eta, max(64, n_nodes // 4), t_min)
    jitter = np.finfo(float).eps * float(np.max(np.abs(pilot * w.dlog(pilot))))
    if jitter > PRECISION_LIMIT:
        raise QuadratureFailure(
            f"t_min={t_min:.3e} is too deep for {w.label} in double precision: rounding t "
            f"changes log w by {jitter:.1e}")
    log_f = log_f_direct(w, cls, mu, pilot, rtol)
    grid = pilot
    for k in range(ADAPT_PASSES):
        grid = adapted_grid(grid, mu + np.abs(log_f - log_f[-1]), mu, n_nodes)
        if k < ADAPT_PASSES - 1:
            log_f = log_f_direct(w, cls, mu, grid, rtol)
    log_f, log_F = _log_f_on(w, cls, mu, grid, rtol)
    G = mu + np.abs(log_f - log_f[-1])
    G[-1] = mu
    prof = _make(w, cls, eta, mu, grid, log_f, log_F, G, "exact")
    if g_method == "quadrature":
        prof = _make(w, cls, eta, mu, grid, log_f, log_F, _G_by_quadrature(prof), "quadrature")
    elif g_method != "exact":
        raise InvalidParameter(f"unknown g_method {g_method!r}")
    return prof


def _log_f_on(w, cls, mu, grid, rtol):
    """Return (log f, log F) on ``grid``.

    F is accumulated directly from integrals of w(t_i)/w(s), so log F never
    comes out of a difference of two huge logarithms; log f = log F - log w.
    """
    lr = w.log_ratio
    n = grid.size
    log_F = np.empty(n)
    if cls.kind == "P":
        # F_i = (w_i/w_{i+1}) F_{i+1} + int_cell w_i/w(s) ds
        cells = log_cell_integrals(lambda s, a: lr(a, s), grid, rtol=rtol, anchors=grid[:-1])
        step = lr(grid[:-1], grid[1:])
        log_F[-1] = w.log(grid[-1:])[0] + math.log(mu)
        for i in range(n - 2, -1, -1):
            log_F[i] = np.logaddexp(log_F[i + 1] + step[i], cells[i])
    else:
        base = log_integral_from_zero(lambda s: lr(grid[0], s), grid[0], rtol=rtol)
        if base is None:
            raise ClassMismatch(f"class Q requested but int_0 1/w diverges for {w.label}")
        cells = log_cell_integrals(lambda s, a: lr(a, s), grid, rtol=rtol, anchors=grid[1:])
        step = lr(grid[1:], grid[:-1])
        log_F[0] = base
        for i in range(n - 1):
            log_F[i + 1] = np.logaddexp(log_F[i] + step[i], cells[i])
    return log_F - w.log(grid), log_F


def log_f_direct(w, cls, mu, grid, rtol=1e-12):
    """log f by plain cumulative sums of int 1/w (independent of the F path)."""
    inv_w = lambda s: -w.log(s)  # noqa: E731
    cells = log_cell_integrals(inv_w, grid, rtol=rtol)
    if cls.kind == "P":
        rev = np.concatenate([[math.log(mu)], cells[::-1]])
        return np.logaddexp.accumulate(rev)[::-1]
    base = log_integral_from_zero(inv_w, grid[0], rtol=rtol)
    if base is None:
        raise ClassMismatch(f"class Q requested but int_0 1/w diverges for {w.label}")
    return np.logaddexp.accumulate(np.concatenate([[base], cells]))


def _G_by_quadrature(prof):
    """mu + int_t^eta 1/F with 1/F taken from the Hermite interpolant of log F."""
    u = np.log(prof.grid)
    a, b = u[:-1], u[1:]
    h = 0.5 * (b - a)
    uq = 0.5 * (a + b)[:, None] + h[:, None] * _GL_X
    spl = prof._spline("log_F")
    cell = (h[:, None] * _GL_W * np.exp(uq - spl(uq))).sum(axis=1)
    return prof.mu + np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])


# ---------------------------------------------------------------------------
# checks on a profile
# ---------------------------------------------------------------------------

def _d5(y, x):
    """Five-point centred derivative dy/dx at nodes 2..n-3 of a nonuniform grid."""
    n = x.size
    off = np.stack([x[k:n - 4 + k] - x[2:n - 2] for k in range(5)], axis=1)
    scale = off[:, 4] - off[:, 0]
    z = off / scale[:, None]
    # Vandermonde V[j, k] = z_k^j; weights c solve V c = e_1 (first derivative)
    V = z[:, None, :] ** np.arange(5)[None, :, None]
    rhs = np.zeros((n - 4, 5))
    rhs[:, 1] = 1.0
    c = np.linalg.solve(V, rhs[..., None])[..., 0]
    ys = np.stack([y[k:n - 4 + k] for k in range(5)], axis=1)
    return (c * ys).sum(axis=1) / scale


@dataclass(frozen=True)
class IdentityReport:
    max_rel_err: dict
    worst_t: dict
    passed: bool

    def to_json(self):
        return {"max_rel_err": self.max_rel_err, "worst_t": self.worst_t, "passed": self.passed}


def verify_identities(p, tol=1e-4, t_range=None, raise_on_fail=True):
    """Finite-difference check of the three derivative identities.

    * d/dt log f = s/F      (s = -1 for P, +1 for Q)
    * d/dt log G = -1/(F G)
    * d/dt (1/G) = 1/(F G^2)

    The derivatives are taken on the tabulated values with a five-point
    stencil in log t.  Only interior nodes inside ``t_range`` are used.
    """
    if not tol > 0:
        raise InvalidParameter("tol must be positive")
    h = np.log(p.grid)
    t = p.grid[2:-2]
    keep = np.ones_like(t, dtype=bool)
    if t_range is not None:
        keep = (t >= t_range[0]) & (t <= t_range[1])
    # multiply through by t F so every side is O(1) and nothing overflows
    tF = np.exp(np.log(t) - p.log_F[2:-2])
    G = p.G[2:-2]
    checks = {
        "dlogf": (_d5(p.log_f, h) / tF, p.s * np.ones_like(t)),
        "dlogG": (_d5(np.log(p.G), h) / tF, -1.0 / G),
        "dinvG": (_d5(1.0 / p.G, h) / tF, 1.0 / G ** 2),
    }
    errs, worst = {}, {}
    for k, (lhs, rhs) in checks.items():
        rel = np.abs(lhs - rhs) / np.abs(rhs)
        rel = np.where(keep, rel, 0.0)
        i = int(np.argmax(rel))
        errs[k], worst[k] = float(rel[i]), float(t[i])
    rep = IdentityReport(errs, worst, max(errs.values()) <= tol)
    if raise_on_fail and not rep.passed:
        k = max(errs, key=errs.get)
        raise ToleranceExceeded(
            f"identity {k} off by {errs[k]:.3e} (tol {tol:g}) at t={worst[k]:.3e}", rep)
    return rep


@dataclass(frozen=True)
class AsymptoticsFit:
    exponent: float
    coefficient: float
    fit_range: tuple
    residual: float

    def to_json(self):
        return {"exponent": self.exponent, "coefficient": self.coefficient,
                "fit_range": list(self.fit_range), "residual": self.residual}


def estimate_F_asymptotics(p, fit_range=None, max_residual=0.05):
    """Least-squares line through (log t, log F).

    Default range is the lowest two decades of the grid.  ``residual`` is
    the largest deviation of log F from the line, i.e. roughly the largest
    relative deviation of F from the fitted power law.
    """
    if fit_range is None:
        if p.t_min > 1e-6 * p.eta:
            raise InvalidParameter("profile grid must reach 1e-6*eta for the default fit")
        fit_range = (p.t_min, 100.0 * p.t_min)
    lo, hi = fit_range
    m = (p.grid >= lo * (1 - 1e-12)) & (p.grid <= hi * (1 + 1e-12))
    if m.sum() < 3:
        raise InvalidParameter(f"fewer than 3 grid nodes in fit range {fit_range}")
    x, y = np.log(p.grid[m]), p.log_F[m]
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + icpt))))
    fit = AsymptoticsFit(float(slope), float(math.exp(icpt)), (float(lo), float(hi)), resid)
    if resid > max_residual:
        raise FitRejected(f"power-law fit residual {resid:.3g} exceeds {max_residual}", fit)
    return fit


@dataclass(frozen=True)
class AdmissibilityReport:
    K_curve: tuple
    K_sup: float
    G_bound_curve: tuple
    verdict: str
    slope: float

    def to_json(self):
        return {"verdict": self.verdict, "K_sup": self.K_sup, "slope": self.slope,
                "K_curve": [list(x) for x in self.K_curve],
                "G_bound_curve": [list(x) for x in self.G_bound_curve]}


def check_admissible(w, cls, eta, t_min=None, n=241, mu=1.0, not_adm=0.25, adm=0.02):
    """Evaluate K(t) on a log grid in [t_min, eta/2] and classify its trend.

    ``t_min`` defaults to ``ADMISSIBILITY_DEPTH``.  Bounded K curves such as
    that of exp(-1/sqrt t) approach their limit like 1 - O(sqrt t) and their
    log-slope only drops below ``adm`` a few decades under 1e-6.

    K(t) = sqrt(t) log int_t^eta 1/w for P and -sqrt(t) log int_0^t 1/w for
    Q.  The verdict comes from the slope of log K against log(1/t) over the
    deepest two decades: above ``not_adm`` means K blows up like a power of
    1/t, at most ``adm`` means K stays bounded.
    """
    t_min = ADMISSIBILITY_DEPTH if t_min is None else t_min
    if not 0 < t_min < eta:
        raise InvalidParameter("need 0 < t_min < eta")
    t = np.geomspace(t_min, eta / 2, n)
    edges = np.append(t, eta)
    inv_w = lambda s: -w.log(s)  # noqa: E731
    cells = log_cell_integrals(inv_w, edges)
    if cls.kind == "P":
        logI = np.logaddexp.accumulate(cells[::-1])[::-1]
        K = np.sqrt(t) * logI
        G = mu + np.logaddexp(math.log(mu), logI) - math.log(mu)
    else:
        base = log_integral_from_zero(inv_w, t[0])
        if base is None:
            raise ClassMismatch(f"class Q requested but int_0 1/w diverges for {w.label}")
        logI_all = np.logaddexp.accumulate(np.concatenate([[base], cells]))
        logI = logI_all[:-1]
        K = -np.sqrt(t) * logI
        G = mu + logI_all[-1] - logI
    deep = t <= 100.0 * t_min
    Kd = K[deep]
    slope = math.nan
    if np.all(Kd <= 0):
        verdict = "Admissible"
    elif np.sum(Kd > 0) < 5:
        verdict = "Inconclusive"
    else:
        pos = Kd > 0
        slope = float(np.polyfit(np.log(1.0 / t[deep][pos]), np.log(Kd[pos]), 1)[0])
        if slope > not_adm:
            verdict = "NotAdmissible"
        elif slope <= adm:
            verdict = "Admissible"
        else:
            verdict = "Inconclusive"
    K_sup = float(max(K.max(), 0.0)) if verdict != "NotAdmissible" else math.inf
    return AdmissibilityReport(tuple(zip(t.tolist(), K.tolist())), K_sup,
                               tuple(zip(t.tolist(), (np.sqrt(t) * G).tolist())), verdict, slope)


def check_FG2_vanishes(p, drop=1e-3, decades=2.0):
    """F G^2 at the smallest node is below ``drop`` times its value at eta/2,
    and it decreases monotonically toward 0 over the lowest ``decades``."""
    FG2 = np.exp(p.log_F + 2 * np.log(p.G))
    ref = float(np.exp(p._spline("log_F")(math.log(p.eta / 2))) * eval_G(p, p.eta / 2) ** 2)
    tail = p.grid <= p.t_min * 10 ** decades
    mono = bool(np.all(np.diff(FG2[tail]) > 0))
    verdict = bool(FG2[0] < drop * ref and mono)
    return {"verdict": verdict, "ratio": float(FG2[0] / ref),
            "trace": list(zip(p.grid.tolist(), FG2.tolist()))}


def check_limF_zero(p, mono, drop=1e-6):
    """F at the smallest node is below ``drop`` times the largest tabulated F.

    Needs a monotone weight; a Mixed sign certificate raises HypothesisNotMet.
    """
    if mono.sign == "Mixed":
        raise HypothesisNotMet("F -> 0 needs a monotone weight near the boundary")
    return bool(p.log_F[0] < p.log_F.max() + math.log(drop))


def integral_growth(p, log_integrand_of_profile):
    """Cumulative int_t^eta of a profile-derived density, per node (trapezoid in u)."""
    u = np.log(p.grid)
    g = np.exp(log_integrand_of_profile + u)
    cell = 0.5 * (g[1:] + g[:-1]) * np.diff(u)
    return np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])


def decade_increments(p, values):
    """Increments of a cumulative-from-eta quantity over the last two decades."""
    t = p.grid
    i1 = np.searchsorted(t, 10 * t[0])
    i2 = np.searchsorted(t, 100 * t[0])
    return float(values[0] - values[i1]), float(values[i1] - values[i2])


def remainder_integrability(p):
    """Divergence proxy for int 1/F and Cauchy proxy for int 1/(F G^2)."""
    invF = integral_growth(p, -p.log_F)
    invFG2 = integral_growth(p, -p.log_F - 2 * np.log(p.G))
    a1, a0 = decade_increments(p, invF)
    b1, _ = decade_increments(p, invFG2)
    return {
        "invF_last_decade": a1, "invF_prev_decade": a0,
        "invF_diverges": bool(a1 >= 0.5 * a0),
        "invFG2_last_decade": b1, "invFG2_total": float(invFG2[0]),
        "invFG2_converges": bool(b1 <= 1e-3 * invFG2[0]),
    }


def eta_sensitivity(w, cls, eta, mu=1.0, n_nodes=256):
    """F and G at a few probe points for cut-offs eta and eta/2."""
    out = {}
    for e in (eta, eta / 2):
        pr = build_profile(w, cls, e, mu, n_nodes)
        ts = np.geomspace(pr.t_min * 10, e / 4, 5)
        out[e] = {"t": ts.tolist(), "F": eval_F(pr, ts).tolist(), "G": eval_G(pr, ts).tolist()}
    return out
