"""The weighted Rayleigh quotient and what can be computed about its infimum.

For p > 1, a real lambda and a trial function u vanishing on the boundary::

    chi(u) = (int |u'|^p W_p - lambda int |u|^p W_p) / int |u|^p W_p / F^p

with W_p = w^(p-1) and F the Hardy function at cut-off eta0.  J(lambda) is
the infimum of chi.  It equals Lambda_p = (1 - 1/p)^p for lambda up to a
threshold lambda* and drops below Lambda_p afterwards.  This module evaluates
chi, builds the near-extremal test family u_eps, minimises chi on graded
meshes, brackets lambda* and classifies minimising sequences as concentrating
at the boundary or compact.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, LinAlgError

from .discretization import (GridFunction, Interval, assemble, make_graded_mesh, norms,
                             terms_and_gradients)
from .eigen import smallest_eigenpair
from .errors import (ClassMismatch, HypothesisNotMet, InvalidBracket, InvalidParameter,
                     NoConvergence, ProfileTooCoarse, ZeroDenominator)
from .hardy_kernel import build_profile, check_FG2_vanishes, decade_increments, integral_growth
from .quadrature import log_cell_integrals, log_integral_from_zero
from .weights import check_monotone, classify, switching


def Lambda_p(p):
    """Sharp Hardy constant (1 - 1/p)^p."""
    return (1.0 - 1.0 / p) ** p


# ---------------------------------------------------------------------------
# problem bundle
# ---------------------------------------------------------------------------

@dataclass
class Problem:
    """Weight, domain, exponent and the Hardy profile shared by every mesh.

    ``forms(mesh, lam)`` assembles on demand and deepens the profile when a
    mesh reaches closer to the boundary than the current profile grid.
    """

    weight: object
    domain: object
    p: float
    eta0: float
    mu: float
    cls: object
    profile: object
    n_nodes: int = 2048
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, w, domain, p, eta0=None, mu=1.0, t_min=None, n_nodes=2048):
        if not p > 1:
            raise InvalidParameter("p must exceed 1")
        eta0 = domain.default_eta0 if eta0 is None else float(eta0)
        if not 0 < eta0 <= domain.inradius:
            raise InvalidParameter("eta0 must lie in (0, inradius]")
        c = classify(w, eta0)
        prof = build_profile(w, c, eta0, mu, n_nodes=n_nodes, t_min=t_min)
        return cls(w, domain, float(p), eta0, float(mu), c, prof, n_nodes)

    def profile_for(self, mesh):
        need = 0.01 * mesh.smallest_cell
        if self.profile.t_min > need:
            self.profile = build_profile(self.weight, self.cls, self.eta0, self.mu,
                                         n_nodes=self.n_nodes, t_min=0.1 * need)
            self._cache.clear()
        return self.profile

    def forms(self, mesh, lam=0.0):
        prof = self.profile_for(mesh)
        key = id(mesh)
        if key not in self._cache:
            self._cache[key] = (mesh, assemble(mesh, self.weight, prof, self.p, 0.0))
        return self._cache[key][1].with_lambda(lam)

    def mesh(self, n, boundary_resolution, extra_breakpoints=()):
        bps = (self.eta0,) + tuple(extra_breakpoints)
        return make_graded_mesh(self.domain, n, boundary_resolution, breakpoints=bps)

    def to_json(self):
        return {"weight": self.weight.spec.to_json(), "domain": self.domain.to_json(),
                "p": self.p, "eta0": self.eta0, "mu": self.mu, "class": self.cls.kind}


# ---------------------------------------------------------------------------
# the quotient
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuotientReport:
    p: float
    lam: float
    value: float
    terms: dict
    u_descriptor: str = ""

    def to_json(self):
        return {"p": self.p, "lambda": self.lam, "value": self.value, "terms": self.terms,
                "u_descriptor": self.u_descriptor}


def chi(u, forms):
    """chi(u) = (grad - lambda*mass)/hardy on the assembled forms."""
    n = norms(u, forms)
    if not n.hardy_term > 0:
        raise ZeroDenominator("Hardy term vanishes: the trial function is zero")
    val = (n.grad_term - forms.lam * n.mass_term) / n.hardy_term
    return QuotientReport(forms.p, forms.lam, float(val),
                          {"grad": n.grad_term, "mass": n.mass_term, "hardy": n.hardy_term},
                          u.descriptor)


def _chi_value(v, forms):
    p = forms.p
    up = np.abs(forms.point_values(v)) ** p
    g = (forms.a * np.abs(np.diff(v)) ** p).sum()
    m = (forms.mq * up).sum()
    h = (forms.hq * up).sum()
    return (g - forms.lam * m) / h, h


# ---------------------------------------------------------------------------
# the near-extremal test family and the cut-off functions
# ---------------------------------------------------------------------------

def _check_eps_eta(eps, eta, profile):
    if not 0 < eps < 1:
        raise InvalidParameter("eps must lie in (0, 1)")
    if not 0 < eta <= profile.eta / 2 * (1 + 1e-12):
        raise InvalidParameter("eta must lie in (0, eta0/2]")


def u_eps_values(t, eps, eta, p, profile):
    """u_eps at boundary distances t (1-D formula, no mesh)."""
    _check_eps_eta(eps, eta, profile)
    t = np.asarray(t, dtype=float)
    s = profile.s
    a = 1.0 + s * eps - 1.0 / p
    out = np.zeros_like(t)
    inner = (t > 0) & (t <= eta)
    out[inner] = np.exp(a * profile.log_f_at(t[inner]))
    ueta = math.exp(a * float(profile.log_f_at(eta)))
    taper = (t > eta) & (t <= 2 * eta)
    out[taper] = ueta * (2 * eta - t[taper]) / eta
    return out


def test_family_u_eps(eps, eta, profile, cls, mesh, p):
    """Nodal interpolant of f^(1 + s eps - 1/p) on (0, eta], linear to 0 on (eta, 2 eta]."""
    if switching(cls) != profile.s:
        raise ClassMismatch("class does not match the profile")
    d = mesh.delta
    inner = (d > 0) & (d <= 2 * eta)
    if np.any(d[inner] < profile.t_min):
        raise ProfileTooCoarse(
            f"mesh nodes reach delta={d[inner].min():.3e}, profile starts at {profile.t_min:.3e}")
    v = u_eps_values(d, eps, eta, p, profile)
    v[mesh.pinned] = 0.0
    return GridFunction(mesh, v, f"u_eps(eps={eps:g}, eta={eta:g}, p={p:g})")


def closed_form_pieces(eps, eta, p, profile, cls):
    """Exact values of int_0^eta |u_eps'|^p W_p and int_0^eta |u_eps|^p W_p / F^p.

    hardy_main = f(eta)^(s eps p) / (p eps), grad_main = (1 - 1/p + s eps)^p hardy_main.
    """
    _check_eps_eta(eps, eta, profile)
    s = switching(cls)
    lf = float(profile.log_f_at(eta))
    hardy = math.exp(s * eps * p * lf) / (p * eps)
    grad = (1.0 - 1.0 / p + s * eps) ** p * hardy
    return {"grad_main": grad, "hardy_main": hardy, "ratio": grad / hardy}


def direct_pieces(eps, eta, p, profile, rtol=1e-12):
    """The same two integrals by log-space quadrature on (0, eta).

    Uses u_eps' = a f^(a-1) f' with f' = s/w, and the tabulated F for the
    Hardy term; below the profile grid log f and log F are continued
    linearly in log t (exact for power weights).
    """
    _check_eps_eta(eps, eta, profile)
    w = profile.weight
    s = profile.s
    a = 1.0 + s * eps - 1.0 / p

    def lf(t):
        return profile.evaluate("log_f", t)[0]

    def lF(t):
        return profile.evaluate("log_F", t)[0]

    def grad_int(t):
        return p * math.log(abs(a)) + (a - 1.0) * p * lf(t) - w.log(t)

    def hardy_int(t):
        return a * p * lf(t) + (p - 1.0) * w.log(t) - p * lF(t)

    out = {}
    for key, g in (("grad_main", grad_int), ("hardy_main", hardy_int)):
        upper = log_cell_integrals(g, [profile.t_min, eta], rtol=rtol)[0]
        lower = log_integral_from_zero(g, profile.t_min, rtol=rtol)
        if lower is None:
            raise NoConvergence(f"{key} integral does not converge at 0")
        out[key] = float(np.exp(np.logaddexp(upper, lower)))
    out["ratio"] = out["grad_main"] / out["hardy_main"]
    return out


def mesh_pieces(u, forms, eta):
    """The two integrals over cells with delta <= eta, per boundary component.

    An interval has two boundary ends and both collars are summed, so the
    sums are halved there; ``eta`` should be a mesh node.
    """
    p = forms.p
    v = u.values
    dl, dr = forms.mesh.cell_delta()
    cells = np.maximum(dl, dr) <= eta * (1 + 1e-12)
    up = np.abs(forms.point_values(v)) ** p
    sides = 2.0 if forms.mesh.domain.kind == "Interval" else 1.0
    grad = float((forms.a * np.abs(np.diff(v)) ** p)[cells].sum()) / sides
    hardy = float((forms.hq * up)[cells].sum()) / sides
    return {"grad_main": grad, "hardy_main": hardy, "ratio": grad / hardy}


def u_eps_quotient(eps, eta, p, profile, rtol=1e-12):
    """chi of u_eps as a 1-D function of delta, integrated exactly from 0.

    A mesh cannot carry this for small eps: the Hardy mass of u_eps is spread
    evenly over log scales and a mesh stopping at delta = h misses the
    fraction 1 - h^(p eps) of it.  The taper on (eta, 2 eta) is included.
    """
    main = direct_pieces(eps, eta, p, profile, rtol)
    w = profile.weight
    a = 1.0 + profile.s * eps - 1.0 / p
    lue = a * float(profile.log_f_at(eta))

    def tg(t):
        return p * (lue - math.log(eta)) + (p - 1.0) * w.log(t)

    def th(t):
        with np.errstate(divide="ignore"):
            lt = np.log(np.maximum(2 * eta - t, 0.0))
        return p * (lue + lt - math.log(eta)) + (p - 1.0) * w.log(t) \
            - p * profile.evaluate("log_F", t)[0]

    tgrad = float(np.exp(log_cell_integrals(tg, [eta, 2 * eta], rtol=rtol)[0]))
    thardy = float(np.exp(log_cell_integrals(th, [eta, 2 * eta], rtol=rtol)[0]))
    grad = main["grad_main"] + tgrad
    hardy = main["hardy_main"] + thardy
    return {"grad": grad, "hardy": hardy, "quotient": grad / hardy,
            "main_ratio": main["ratio"], "taper_grad": tgrad, "taper_hardy": thardy}


def cutoff_phi(eps_bar, eta, profile, mesh):
    """0 on (0, eps_bar], (f(eps_bar) - f)/(f(eps_bar) - f(eta)) up to eta, 1 beyond."""
    if profile.cls.kind != "P":
        raise ClassMismatch("cut-off functions need a class P weight")
    if not 0 < eps_bar < eta:
        raise InvalidParameter("need 0 < eps_bar < eta")
    fe = math.exp(float(profile.log_f_at(eps_bar)))
    fn = math.exp(float(profile.log_f_at(eta)))
    d = mesh.delta
    v = np.ones_like(d)
    v[d <= eps_bar] = 0.0
    mid = (d > eps_bar) & (d < eta)
    v[mid] = (fe - np.exp(profile.log_f_at(d[mid]))) / (fe - fn)
    v[mesh.pinned] = 0.0
    return GridFunction(mesh, v, f"cutoff(eps_bar={eps_bar:g}, eta={eta:g})")


def cutoff_energy(eps_bar, eta, p, profile, rtol=1e-10):
    """Gradient energy of the cut-off (closed form and quadrature) and its mass defect.

    The mass defect is int_0^eta (1 - phi)^p W_p, the part of the constant 1
    the cut-off misses.
    """
    if profile.cls.kind != "P":
        raise ClassMismatch("cut-off functions need a class P weight")
    w = profile.weight
    lfe = float(profile.log_f_at(eps_bar))
    lfn = float(profile.log_f_at(eta))
    log_df = lfe + math.log(-math.expm1(lfn - lfe))
    closed = math.exp((1.0 - p) * log_df)
    # |phi'|^p W_p = w^-p (df)^-p w^(p-1) = 1/(w df^p)
    quad = math.exp(log_cell_integrals(lambda t: -w.log(t), [eps_bar, eta], rtol=rtol)[0]
                    - p * log_df)

    def defect(t):
        # 1 - phi = (f - f(eta))/df on (eps_bar, eta)
        lf = profile.evaluate("log_f", t)[0]
        inner = np.log(np.maximum(np.expm1(lf - lfn), 1e-300)) + lfn - log_df
        return p * inner + (p - 1.0) * w.log(t)

    upper = log_cell_integrals(defect, [eps_bar, eta], rtol=rtol)[0]
    below = log_integral_from_zero(lambda t: (p - 1.0) * w.log(t), eps_bar, rtol=rtol)
    total = upper if below is None else np.logaddexp(upper, below)
    return {"eps_bar": eps_bar, "grad_closed": closed, "grad_quad": quad,
            "mass_defect": float(np.exp(total)) if below is not None else math.inf}


# ---------------------------------------------------------------------------
# minimisation
# ---------------------------------------------------------------------------

@dataclass
class MinimizeResult:
    J_estimate: float
    minimizer: GridFunction
    iterations: int
    residual: float
    trace: list
    method: str
    converged: bool = True
    meta: dict = field(default_factory=dict)

    def to_json(self):
        return {"J_estimate": self.J_estimate, "iterations": self.iterations,
                "residual": self.residual, "trace": [list(t) for t in self.trace],
                "method": self.method, "converged": self.converged, "meta": self.meta}


def interior_mode(mesh):
    """First Dirichlet mode of the Laplacian on the reduced domain (radial for balls)."""
    d = mesh.domain
    if d.kind == "Interval":
        # sin(pi x/L) written through delta keeps full precision at both ends
        v = np.sin(np.pi * mesh.delta / d.L)
    else:
        v = np.sin(0.5 * np.pi * mesh.delta / d.R)
    v[mesh.pinned] = 0.0
    return GridFunction(mesh, v, "interior mode")


def boundary_guess(mesh, p, profile=None, eps=0.05):
    """u_eps at eps = 0.05 when a profile is available, else delta^(1-1/p+eps) tapered."""
    eta0 = profile.eta if profile is not None else mesh.domain.default_eta0
    eta = 0.5 * eta0
    if profile is not None and profile.t_min <= mesh.delta[mesh.delta > 0].min():
        return test_family_u_eps(eps, eta, profile, profile.cls, mesh, p)
    d = mesh.delta
    v = np.where(d <= eta, d ** (1 - 1 / p + eps),
                 np.where(d <= 2 * eta, eta ** (1 - 1 / p + eps) * (2 * eta - d) / eta, 0.0))
    v[mesh.pinned] = 0.0
    return GridFunction(mesh, v, "boundary guess")


def _normalize(v, forms):
    _, h = _chi_value(v, forms)
    if not h > 0:
        raise ZeroDenominator("Hardy term vanishes")
    return v / h ** (1.0 / forms.p)


def _eigen2(forms):
    lam = forms.lam
    A, M, H = forms.A, forms.M, forms.H
    T = (A[0] - lam * M[0], A[1] - lam * M[1])
    r = smallest_eigenpair(T, H)
    v = np.zeros(forms.mesh.n_nodes)
    v[forms.mesh.free] = r.vector
    v = _normalize(v, forms)
    u = GridFunction(forms.mesh, v, "Eigen2 minimizer")
    return u, r.iterations, r.trace


def _frozen(v, forms, sigma):
    """Tridiagonal p-weighted stiffness - lam*mass - sigma*hardy, frozen at v, in banded-upper form."""
    p, mesh = forms.p, forms.mesh
    dv = np.abs(np.diff(v))
    floor = 1e-8 * dv.max()
    ca = p * forms.a * np.maximum(dv, floor) ** (p - 2)
    uq = np.abs(forms.point_values(v))
    uf = 1e-12 * uq.max()
    wq = np.maximum(uq, uf) ** (p - 2)
    pw = p * (forms.mq * (-forms.lam) - sigma * forms.hq) * wq
    n = mesh.n_nodes
    dia = np.zeros(n)
    off = np.zeros(n - 1)
    dia[:-1] += ca
    dia[1:] += ca
    off -= ca
    phi = forms.phi
    dia[:-1] += (pw * phi ** 2).sum(axis=1)
    dia[1:] += (pw * (1 - phi) ** 2).sum(axis=1)
    off += (pw * phi * (1 - phi)).sum(axis=1)
    f = mesh.free
    d, o = dia[f], off[f[:-1] & f[1:]]
    ab = np.zeros((2, d.size))
    ab[0, 1:] = o
    ab[1] = d
    return ab


def _descent(forms, v0, max_iter, window=20, stall=1e-10):
    mesh = forms.mesh
    free = mesh.free
    v = _normalize(v0.copy(), forms)
    val, _ = _chi_value(v, forms)
    trace = [(0, float(val))]
    theta = 1e-2
    tau = 1.0
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        (g, m, h), (gg, gm, gh) = terms_and_gradients(v, forms)
        val = (g - forms.lam * m) / h
        grad = (gg - forms.lam * gm - val * gh) / h
        rhs = -grad[free]
        # shifted preconditioner: for p = 2 a unit step is inverse iteration
        scale = max(abs(val), 1e-2)
        for _ in range(60):
            sigma = val - theta * scale
            try:
                cb = cholesky_banded(_frozen(v, forms, sigma))
                break
            except LinAlgError:
                theta *= 4.0
        else:
            raise NoConvergence("could not build a positive definite preconditioner")
        dfree = cho_solve_banded((cb, False), rhs)
        slope = float(-rhs @ dfree)
        if not slope < 0:
            converged = True
            break
        d = np.zeros_like(v)
        d[free] = dfree
        step = min(1.0, 2.0 * tau)
        while True:
            trial, _ = _chi_value(v + step * d, forms)
            if trial <= val + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-20:
                trial = None
                break
        if trial is None:
            converged = True
            break
        tau = step
        v = _normalize(v + step * d, forms)
        new, _ = _chi_value(v, forms)
        trace.append((it, float(new)))
        theta = max(min(theta, 1e-2), 1e-8)
        if len(trace) > window:
            old = trace[-1 - window][1]
            if old - new <= stall * max(abs(new), 1e-300):
                converged = True
                break
    return v, it, trace, converged


def minimize_quotient(forms, method="auto", profile=None, init=None, max_iter=100000):
    """Discrete infimum J_h of chi on the mesh of ``forms``.

    ``method``: "eigen" (p = 2 only; tridiagonal inverse iteration),
    "descent" (any p; preconditioned descent with halving line search) or
    "auto".  Descent starts from both a boundary-concentrated guess and the
    interior mode unless ``init`` is given, and keeps the better result.
    """
    p = forms.p
    if method == "auto":
        method = "eigen" if p == 2 else "descent"
    if method == "eigen":
        if p != 2:
            raise InvalidParameter("the eigen path needs p = 2")
        u, its, trace = _eigen2(forms)
        method_name, converged = "Eigen2", True
    elif method == "descent":
        starts = [init] if init is not None else [boundary_guess(forms.mesh, p, profile),
                                                   interior_mode(forms.mesh)]
        best = None
        for s in starts:
            out = _descent(forms, s.values, max_iter)
            if best is None or out[2][-1][1] < best[2][-1][1]:
                best = out
        v, its, trace, converged = best
        u = GridFunction(forms.mesh, v, "Descent minimizer")
        method_name = "Descent"
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    q = chi(u, forms)
    res = MinimizeResult(q.value, u, its, float("nan"), trace, method_name, converged,
                         {"p": p, "lambda": forms.lam, "n_cells": forms.mesh.n_cells})
    res.residual = euler_lagrange_residual(res, forms)
    if not converged:
        raise NoConvergence("iteration budget exhausted", res)
    return res


def euler_lagrange_residual(res, forms):
    """max_i |<weak Euler-Lagrange form, phi_i>| / ||phi_i||, over free hat functions.

    The weak form is int |u'|^(p-2) u' phi' W_p - lam int |u|^(p-2) u phi W_p
    - J int |u|^(p-2) u phi W_p / F^p with the Hardy term of u normalised to
    1; the hat functions are normalised in the Hardy norm.
    """
    u = res.minimizer if isinstance(res, MinimizeResult) else res
    p = forms.p
    v = _normalize(u.values, forms)
    (g, m, h), (gg, gm, gh) = terms_and_gradients(v, forms)
    J = (g - forms.lam * m) / h
    r = (gg - forms.lam * gm - J * gh) / p
    phi = forms.phi
    nrm = np.zeros_like(v)
    nrm[:-1] += (forms.hq * phi ** p).sum(axis=1)
    nrm[1:] += (forms.hq * (1 - phi) ** p).sum(axis=1)
    f = forms.mesh.free
    return float(np.max(np.abs(r[f]) / nrm[f] ** (1.0 / p)))


# ---------------------------------------------------------------------------
# lambda*
# ---------------------------------------------------------------------------

@dataclass
class LambdaStarReport:
    lam_star: float
    half_width: float
    bracket: tuple
    Lambda_p: float
    J_curve: list
    mesh_levels: list
    detect_tol: float
    audits: dict = field(default_factory=dict)
    note: str = ("attainment inside the bracket is not decided here; J = Lambda_p "
                 "at the threshold itself is a boundary case")

    def to_json(self):
        return {"lambda_star": self.lam_star, "half_width": self.half_width,
                "bracket": list(self.bracket), "Lambda_p": self.Lambda_p,
                "J_curve": [[lam, list(js)] for lam, js in self.J_curve],
                "mesh_levels": self.mesh_levels, "detect_tol": self.detect_tol,
                "audits": self.audits, "note": self.note}


def J_levels(problem, meshes, lam, method="auto"):
    """J_h(lam) on every mesh of a ladder."""
    out = []
    for m in meshes:
        f = problem.forms(m, lam)
        out.append(minimize_quotient(f, method, profile=problem.profile).J_estimate)
    return out


def lambda_star(problem, meshes, bracket=(-10.0, 50.0), tol=0.1, detect_tol=1e-3,
                method="auto"):
    """Bisect lam for the first J_h(lam) < Lambda_p - detect_tol.

    The predicate must hold on the two finest ladder levels.  ``tol`` is the
    final bracket width.
    """
    Lp = Lambda_p(problem.p)
    curve = {}

    def evaluate(lam):
        if lam not in curve:
            curve[lam] = J_levels(problem, meshes, lam, method)
        return curve[lam]

    def below(lam):
        js = evaluate(lam)
        return all(j < Lp - detect_tol for j in js[-2:])

    lo, hi = map(float, bracket)
    if not lo < hi:
        raise InvalidBracket("bracket must be increasing")
    if below(lo):
        raise InvalidBracket(f"J_h({lo}) is already below Lambda_p - detect_tol")
    if not below(hi):
        raise InvalidBracket(f"J_h({hi}) is not below Lambda_p - detect_tol")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if below(mid):
            hi = mid
        else:
            lo = mid
    lams = sorted(curve)
    J = [tuple(curve[l]) for l in lams]
    maxF = max(problem.forms(m, 0.0).maxF for m in meshes)
    report = LambdaStarReport(0.5 * (lo + hi), 0.5 * (hi - lo), (lo, hi), Lp,
                              list(zip(lams, J)),
                              [{"n_cells": m.n_cells, "boundary_resolution": m.boundary_resolution}
                               for m in meshes], detect_tol)
    report.audits = curve_audits(report.J_curve, maxF, problem.p)
    return report


def curve_audits(J_curve, maxF, p, slack=1e-10):
    """Monotonicity and Lipschitz checks of J_h(lam) on every ladder level."""
    lams = np.array([c[0] for c in J_curve])
    J = np.array([c[1] for c in J_curve])
    L = maxF ** p
    mono = bool(np.all(np.diff(J, axis=0) <= slack * (1 + np.abs(J[1:]))))
    dl = np.abs(lams[:, None] - lams[None, :])
    lip = True
    worst = 0.0
    for k in range(J.shape[1]):
        dj = np.abs(J[:, k][:, None] - J[:, k][None, :])
        lip &= bool(np.all(dj <= L * dl + slack))
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.where(dl > 0, dj / dl, 0.0)
        worst = max(worst, float(q.max()))
    return {"monotone": mono, "lipschitz": lip, "lipschitz_constant": L,
            "max_slope": worst}


# ---------------------------------------------------------------------------
# concentration versus compactness
# ---------------------------------------------------------------------------

@dataclass
class ConcentrationReport:
    lam: float
    eta_probe: float
    boundary_mass_fraction: list
    interior_gradient: list
    J: list
    levels: list
    verdict: str

    def to_json(self):
        return {"lambda": self.lam, "eta_probe": self.eta_probe,
                "boundary_mass_fraction": self.boundary_mass_fraction,
                "interior_gradient": self.interior_gradient, "J": self.J,
                "levels": self.levels, "verdict": self.verdict}

    def rows(self):
        return [{"level": i, **lv, "J": j, "boundary_mass_fraction": b, "interior_gradient": g}
                for i, (lv, j, b, g) in enumerate(zip(self.levels, self.J,
                                                       self.boundary_mass_fraction,
                                                       self.interior_gradient))]


def split_energies(u, forms, eta):
    """Hardy-term fraction in delta < eta and gradient energy in delta >= eta (hardy = 1)."""
    p = forms.p
    v = _normalize(u.values, forms)
    dl, dr = forms.mesh.cell_delta()
    near = np.minimum(dl, dr) < eta
    hc = (forms.hq * np.abs(forms.point_values(v)) ** p).sum(axis=1)
    gc = forms.a * np.abs(np.diff(v)) ** p
    return float(hc[near].sum() / hc.sum()), float(gc[~near].sum())


def concentration_diagnostic(problem, lam, meshes, eta_probe=None, fall=10.0, settle=0.05,
                             method="auto"):
    """Minimise on every ladder level and decide whether minimisers escape to the boundary.

    Concentrating: the interior gradient energy falls by ``fall`` across the
    ladder while the boundary fraction of the Hardy term grows.  Compact:
    both settle (relative change <= ``settle`` over the last two levels)
    with the interior energy bounded away from 0.  Anything else is
    Inconclusive.
    """
    eta_probe = 0.5 * problem.eta0 if eta_probe is None else eta_probe
    bf, ig, J, lv = [], [], [], []
    for m in meshes:
        f = problem.forms(m, lam)
        r = minimize_quotient(f, method, profile=problem.profile)
        b, g = split_energies(r.minimizer, f, eta_probe)
        bf.append(b)
        ig.append(g)
        J.append(r.J_estimate)
        lv.append({"n_cells": m.n_cells, "boundary_resolution": m.boundary_resolution})
    bfa, iga = np.array(bf), np.array(ig)
    conc = (iga[-1] * fall <= iga[0] and np.all(np.diff(iga) <= 1e-12 * iga[:-1] + 1e-300)
            and bfa[-1] >= bfa[0])
    compact = (len(ig) >= 2 and iga[-1] > 1e-6
               and abs(iga[-1] - iga[-2]) <= settle * iga[-1]
               and abs(bfa[-1] - bfa[-2]) <= settle * max(1 - bfa[-1], 1e-3)
               and 1 - bfa[-1] > 1e-3)
    verdict = "Concentrating" if conc else ("Compact" if compact else "Inconclusive")
    return ConcentrationReport(lam, eta_probe, bf, ig, J, lv, verdict)


def deep_ladder(domain, n, resolutions, eta0=None):
    """Meshes whose boundary resolution deepens level by level.

    The cell count grows with log(1/res) so the geometric ratio stays
    comparable across levels.
    """
    eta0 = domain.default_eta0 if eta0 is None else eta0
    out = []
    for r in resolutions:
        k = max(1.0, math.log10(domain.inradius / r) / 4.0)
        out.append(make_graded_mesh(domain, int(n * k), r, breakpoints=(eta0,)))
    return out


# ---------------------------------------------------------------------------
# p = 2 supersolution audit
# ---------------------------------------------------------------------------

@dataclass
class SupersolutionReport:
    s: float
    M: float
    t_ok: float
    limit_ratio: float
    limit_ok: bool
    v_s_eta: float
    invFG_diverges: bool
    trace: list

    def to_json(self):
        return {"s": self.s, "M": self.M, "sign_ok_region": [0.0, self.t_ok],
                "limit_ratio": self.limit_ratio, "limit_ok": self.limit_ok,
                "v_s_eta": self.v_s_eta, "invFG_diverges": self.invFG_diverges,
                "trace": [list(t) for t in self.trace]}


def supersolution_check(w, profile, s, M, domain=None, limit_tol=0.05):
    """Evaluate s(s+1) + Lap(delta) F (s_w G^2/2 + s G) - M F^2 G^2 on the profile grid.

    Where it stays >= s(s+1)/2 the function v_s = f^(1/2) G^(-s) is a
    supersolution.  Returns the largest t_ok with that property from 0 up,
    the limit audit at the bottom decade, and the 1/(F G) divergence proxy.
    """
    if not s > 0.5:
        raise InvalidParameter("s must exceed 1/2")
    if not M > 0:
        raise InvalidParameter("M must be positive")
    fg2 = check_FG2_vanishes(profile)
    if not fg2["verdict"]:
        raise HypothesisNotMet("F G^2 does not vanish at the boundary")
    if check_monotone(w, profile.eta).sign == "Mixed":
        raise HypothesisNotMet("the weight is not monotone near the boundary")
    domain = domain if domain is not None else Interval(4 * profile.eta)
    t = profile.grid
    F = profile.F_vals
    G = profile.G
    lap = domain.laplacian_delta(t)
    E = s * (s + 1) + lap * F * (profile.s * G ** 2 / 2 + s * G) - M * F ** 2 * G ** 2
    ok = E >= 0.5 * s * (s + 1)
    bad = np.flatnonzero(~ok)
    t_ok = float(t[-1]) if bad.size == 0 else (float(t[bad[0] - 1]) if bad[0] > 0 else 0.0)
    bottom = t <= 10 * t[0]
    ratio = float(np.max(np.abs(E[bottom] / (s * (s + 1)) - 1.0)))
    v_eta = math.exp(0.5 * profile.log_f[-1]) * profile.mu ** (-s)
    cum = integral_growth(profile, -profile.log_F - np.log(G))
    a1, a0 = decade_increments(profile, cum)
    return SupersolutionReport(s, M, t_ok, ratio, ratio <= limit_tol, v_eta, bool(a1 >= 0.5 * a0),
                               list(zip(t.tolist(), E.tolist())))


# ---------------------------------------------------------------------------
# Hardy-inequality audit
# ---------------------------------------------------------------------------

@dataclass
class AuditReport:
    gamma: float
    margins: list
    relative_margins: list
    min_margin: float
    seed: int = None

    def to_json(self):
        return {"gamma": self.gamma, "margins": self.margins,
                "relative_margins": self.relative_margins, "min_margin": self.min_margin,
                "seed": self.seed}


def hardy_audit(samples, forms, gamma, seed=None):
    """grad - gamma*hardy for every sample (forms at lambda = 0)."""
    margins, rel = [], []
    for u in samples:
        n = norms(u, forms)
        margins.append(n.grad_term - gamma * n.hardy_term)
        rel.append(margins[-1] / n.hardy_term if n.hardy_term > 0 else math.inf)
    return AuditReport(float(gamma), margins, rel, float(min(margins)), seed)


def random_collar_samples(mesh, count, eta, seed=0, modes=6):
    """Smooth random trial functions supported in the collar delta < eta.

    Each is delta^a (eta - delta) times a random sine series in delta/eta,
    with a in (1/2, 2); the random generator is seeded for reproducibility.
    """
    rng = np.random.default_rng(seed)
    d = mesh.delta
    inside = d < eta
    out = []
    for _ in range(count):
        a = rng.uniform(0.5, 2.0)
        c = rng.standard_normal(modes) / (1 + np.arange(modes))
        x = np.where(inside, d / eta, 0.0)
        series = np.sin(np.pi * np.outer(np.arange(1, modes + 1), x)).T @ c + rng.uniform(0.5, 2)
        v = np.where(inside, d ** a * (eta - d) * series, 0.0)
        v[mesh.pinned] = 0.0
        out.append(GridFunction(mesh, v, f"collar sample a={a:.3f}"))
    return out


def interior_hat(mesh, center=None):
    """Single hat function at the node nearest ``center`` (default: farthest from the boundary)."""
    i = int(np.argmax(mesh.delta)) if center is None else int(np.argmin(np.abs(mesh.x - center)))
    v = np.zeros(mesh.n_nodes)
    v[i] = 1.0
    return GridFunction(mesh, v, f"hat at x={mesh.x[i]:.4g}")
