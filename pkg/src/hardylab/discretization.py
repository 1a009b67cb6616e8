"""Reducible domains, boundary-graded meshes and P1 assembly of the quotient terms.

Two domains reduce exactly to one variable:

* ``Interval(L)``: x in (0, L), delta(x) = min(x, L - x);
* ``Ball(N, R)``: radial r in (0, R), delta = R - r, measure |S^{N-1}| r^{N-1} dr.

Meshes keep the boundary distance ``delta`` of every node and the width of
every cell as primary data; the coordinate ``x`` is derived.  That way cells
of width 1e-25 next to the boundary are represented exactly.

For trial functions u that are continuous, piecewise linear and zero on the
boundary, the three integrals of the quotient are

    grad  = int |u'|^p  W_p(delta) J
    mass  = int |u|^p   W_p(delta) J
    hardy = int |u|^p   W_p(delta) J / F(delta)^p

with ``W_p = w^(p-1)`` and J the radial Jacobian (1 on an interval).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .errors import ExtrapolationRequired, InvalidParameter, MeshMismatch, QuadratureFailure

# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    kind: str
    L: float = None
    N: int = None
    R: float = None

    @property
    def inradius(self):
        return 0.5 * self.L if self.kind == "Interval" else self.R

    @property
    def extent(self):
        """Length of the 1-D coordinate range."""
        return self.L if self.kind == "Interval" else self.R

    @property
    def default_eta0(self):
        return 0.5 * self.inradius if self.kind == "Interval" else 0.25 * self.R

    def delta(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "Interval":
            return np.minimum(x, self.L - x)
        return self.R - x

    def jacobian(self, x):
        """Radial measure factor; 1 on an interval, |S^{N-1}| r^{N-1} on a ball."""
        x = np.asarray(x, dtype=float)
        if self.kind == "Interval":
            return np.ones_like(x)
        return sphere_area(self.N) * x ** (self.N - 1)

    def log_jacobian_from_delta(self, d):
        if self.kind == "Interval":
            return np.zeros_like(d)
        return math.log(sphere_area(self.N)) + (self.N - 1) * np.log(self.R - d)

    def laplacian_delta(self, d):
        """Delta(delta) in the reduced geometry: 0 on an interval, -(N-1)/r on a ball."""
        d = np.asarray(d, dtype=float)
        if self.kind == "Interval":
            return np.zeros_like(d)
        return -(self.N - 1) / (self.R - d)

    def to_json(self):
        if self.kind == "Interval":
            return {"kind": "Interval", "L": self.L}
        return {"kind": "Ball", "N": self.N, "R": self.R}

    @classmethod
    def from_json(cls, obj):
        if obj["kind"] == "Interval":
            return Interval(obj["L"])
        return Ball(obj["N"], obj["R"])


def sphere_area(N):
    """|S^{N-1}| = 2 pi^{N/2} / Gamma(N/2); equals 2 for N = 1."""
    return float(2.0 * math.exp(0.5 * N * math.log(math.pi) - gammaln(0.5 * N)))


def Interval(L):
    if not (np.isfinite(L) and L > 0):
        raise InvalidParameter("interval length must be positive")
    return Domain("Interval", L=float(L))


def Ball(N, R):
    if not (np.isfinite(N) and int(N) == N and N >= 1):
        raise InvalidParameter("ball dimension must be an integer >= 1")
    if not (np.isfinite(R) and R > 0):
        raise InvalidParameter("ball radius must be positive")
    return Domain("Ball", N=int(N), R=float(R))


def make_domain(kind, **params):
    kind = kind.lower()
    if kind == "interval":
        return Interval(params["L"])
    if kind == "ball":
        return Ball(params["N"], params["R"])
    raise InvalidParameter(f"unknown domain kind {kind!r}")


def parse_domain(text):
    """``interval:1`` or ``ball:3,1``."""
    key, _, rest = text.partition(":")
    try:
        nums = [float(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise InvalidParameter(f"bad domain parameters in {text!r}") from None
    key = key.strip().lower()
    if key == "interval" and len(nums) == 1:
        return Interval(nums[0])
    if key == "ball" and len(nums) == 2:
        return Ball(nums[0], nums[1])
    raise InvalidParameter(f"domain must be interval:L or ball:N,R, got {text!r}")


# ---------------------------------------------------------------------------
# graded meshes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradingMap:
    """delta(xi) on [0, 1] -> [0, top]: linear on the first base cell,
    geometric up to ``xi_c``, then piecewise linear through ``knots``.

    Evaluating the same map on the dyadic refinements of the base grid gives
    nested meshes whose first cell shrinks by half per level.  Breakpoints in
    the linear part are knots placed on base-grid nodes, so they are mesh
    nodes on every level without creating sliver cells.
    """

    m: int
    res: float
    top: float
    kappa: float
    xi_c: float
    knots: tuple = ()

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        m, res, k = self.m, self.res, self.kappa
        kx, kd = zip(*self.knots) if self.knots else ((0.0, 1.0), (0.0, self.top))
        if k == 0.0:
            return np.interp(xi, kx, kd)
        first = res * xi * m
        geo = res * np.exp(np.minimum(k * (m * xi - 1.0), 700.0))
        lin = np.interp(xi, kx, kd)
        return np.where(xi <= 1.0 / m, first, np.where(xi <= self.xi_c, geo, lin))

    @classmethod
    def build(cls, m, res, top, graded_fraction=0.5, breakpoints=()):
        xi_c = max(graded_fraction, 1.0 / m + 1e-12)
        if res >= top / m:
            # boundary resolution coarser than uniform spacing: plain uniform map
            knots = _with_breakpoints(((0.0, 0.0), (1.0, top)), m, breakpoints)
            return cls(m, top / m, top, 0.0, 1.0 / m, knots)

        def gap(k):
            log_dc = math.log(res) + k * (m * xi_c - 1.0)
            return log_dc + math.log1p(k * m * (1.0 - xi_c)) - math.log(top)

        k = brentq(gap, 1e-12, 200.0, xtol=1e-15, rtol=1e-15)
        dc = res * math.exp(k * (m * xi_c - 1.0))
        knots = _with_breakpoints(((xi_c, dc), (1.0, top)), m, breakpoints)
        return cls(m, res, top, k, xi_c, knots)


def _with_breakpoints(knots, m, breakpoints):
    """Add (xi, b) knots for breakpoints inside the linear part, xi on the base grid."""
    kx, kd = [list(v) for v in zip(*knots)]
    for b in sorted(breakpoints):
        if not kd[0] < b < kd[-1]:
            continue
        j = int(round(float(np.interp(b, kd, kx)) * m))
        xi = j / m
        if kx[0] < xi < kx[-1] and xi not in kx:
            i = int(np.searchsorted(kx, xi))
            if kd[i - 1] < b < kd[i]:
                kx.insert(i, xi)
                kd.insert(i, float(b))
    return tuple(zip(kx, kd))


@dataclass(frozen=True)
class Mesh:
    """1-D mesh in the reduced coordinate.

    Attributes
    ----------
    delta : ndarray
        Boundary distance of every node (exact).
    h : ndarray
        Cell widths (exact; not recomputed from ``x``).
    x : ndarray
        Node coordinate (x on an interval, r on a ball).
    pinned : ndarray of bool
        Nodes on the boundary, where trial functions vanish.
    """

    domain: Domain
    x: np.ndarray
    delta: np.ndarray
    h: np.ndarray
    pinned: np.ndarray
    level: int = 0
    grading: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.x.size

    @property
    def n_cells(self):
        return self.h.size

    @property
    def free(self):
        return ~self.pinned

    @property
    def smallest_cell(self):
        return float(self.h.min())

    @property
    def boundary_resolution(self):
        return self.grading.get("res")

    @property
    def ratio(self):
        """Largest ratio between neighbouring cell widths."""
        r = self.h[1:] / self.h[:-1]
        return float(np.maximum(r, 1.0 / r).max())

    def cell_delta(self):
        """delta at the left and right node of every cell."""
        return self.delta[:-1], self.delta[1:]

    def refine(self):
        """Next nested level (every old node is kept)."""
        g = self.grading
        return _mesh_from_grading(self.domain, g["maps"], g["level"] + 1, g["breakpoints"],
                                  g["n_request"] * 2, g["res"])

    def in_collar(self, eta):
        """Node predicate delta < eta (the tubular neighbourhood)."""
        return self.delta < eta

    def to_json(self):
        return {"domain": self.domain.to_json(), "x": self.x.tolist(),
                "delta": self.delta.tolist(), "h": self.h.tolist(),
                "pinned": self.pinned.tolist(), "level": self.level,
                "boundary_resolution": self.grading.get("res")}

    @classmethod
    def from_json(cls, obj):
        return cls(Domain.from_json(obj["domain"]), np.array(obj["x"]), np.array(obj["delta"]),
                   np.array(obj["h"]), np.array(obj["pinned"], dtype=bool), obj.get("level", 0),
                   {"res": obj.get("boundary_resolution")})


def _half_deltas(gmap, level, breakpoints):
    xi = np.linspace(0.0, 1.0, gmap.m * 2 ** level + 1)
    d = gmap(xi)
    d[0], d[-1] = 0.0, gmap.top
    for b in breakpoints:
        if 0 < b < gmap.top:
            j = int(np.searchsorted(d, b))
            near = j if abs(d[j] - b) <= abs(d[j - 1] - b) else j - 1
            if abs(d[near] - b) <= 1e-9 * b:
                d[near] = b          # knot of the map, up to rounding of xi
            else:
                d = np.insert(d, j, b)
    return d


def _mesh_from_grading(domain, maps, level, breakpoints, n_request, res):
    grading = {"maps": maps, "level": level, "breakpoints": tuple(breakpoints),
               "n_request": n_request, "res": res}
    if domain.kind == "Interval":
        d = _half_deltas(maps[0], level, breakpoints)
        hh = np.diff(d)
        L = domain.L
        delta = np.concatenate([d, d[-2::-1]])
        h = np.concatenate([hh, hh[::-1]])
        x = np.concatenate([d, L - d[-2::-1]])
        pinned = np.zeros(delta.size, dtype=bool)
        pinned[[0, -1]] = True
    else:
        d = _half_deltas(maps[0], level, breakpoints)
        delta = d[::-1]
        h = np.diff(d)[::-1]
        x = domain.R - delta
        x[0] = 0.0
        pinned = np.zeros(delta.size, dtype=bool)
        pinned[-1] = True
    return Mesh(domain, x, delta, h, pinned, level, grading)


def make_graded_mesh(d, n, boundary_resolution, breakpoints=(), graded_fraction=0.5):
    """Mesh with about ``n`` cells, geometrically graded toward delta = 0.

    Both ends are graded on an interval, only r = R on a ball.  The mesh is
    built as level ``k`` of a fixed base grid, so ``n`` and ``2n`` give nested
    meshes.  ``breakpoints`` are boundary distances (e.g. eta0) inserted as
    nodes on every level.
    """
    if n < 32:
        raise InvalidParameter("n must be at least 32")
    if not 0 < boundary_resolution < d.inradius / 10:
        raise InvalidParameter("boundary_resolution must lie in (0, inradius/10)")
    if d.kind == "Interval":
        k = max(0, int(math.floor(math.log2(n / 64.0))))
        m = int(math.ceil(n / 2.0 ** (k + 1)))
        top = 0.5 * d.L
    else:
        k = max(0, int(math.floor(math.log2(n / 32.0))))
        m = int(math.ceil(n / 2.0 ** k))
        top = d.R
    gmap = GradingMap.build(m, boundary_resolution, top, graded_fraction, breakpoints)
    return _mesh_from_grading(d, (gmap,), k, breakpoints, n, boundary_resolution)


def mesh_ladder(d, n0, levels, boundary_resolution, breakpoints=()):
    """Nested meshes with n0, 2 n0, 4 n0, ... cells."""
    out = [make_graded_mesh(d, n0, boundary_resolution, breakpoints)]
    for _ in range(levels - 1):
        out.append(out[-1].refine())
    return out


def mirror_ball_mesh(mesh):
    """Interval(2R) mesh matching a Ball(1, R) mesh by reflection about r = 0."""
    d = mesh.domain
    if d.kind != "Ball" or d.N != 1:
        raise InvalidParameter("only Ball(1, R) meshes can be mirrored")
    R = d.R
    delta = np.concatenate([mesh.delta[::-1], mesh.delta[1:]])
    h = np.concatenate([mesh.h[::-1], mesh.h])
    x = np.concatenate([R - mesh.x[::-1], R + mesh.x[1:]])
    pinned = np.zeros(delta.size, dtype=bool)
    pinned[[0, -1]] = True
    return Mesh(Interval(2 * R), x, delta, h, pinned, mesh.level, {"res": mesh.grading.get("res")})


# ---------------------------------------------------------------------------
# grid functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    mesh: Mesh
    values: np.ndarray
    descriptor: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise MeshMismatch(f"expected {self.mesh.n_nodes} nodal values, got {v.shape}")
        if np.any(v[self.mesh.pinned] != 0):
            raise InvalidParameter("grid functions must vanish at boundary nodes")
        object.__setattr__(self, "values", v)

    def __mul__(self, c):
        return GridFunction(self.mesh, c * self.values, self.descriptor)

    __rmul__ = __mul__

    @classmethod
    def from_free(cls, mesh, free_values, descriptor=""):
        v = np.zeros(mesh.n_nodes)
        v[mesh.free] = free_values
        return cls(mesh, v, descriptor)

    @classmethod
    def interpolate(cls, mesh, fn, descriptor=""):
        """Nodal interpolant of ``fn(delta, x)``; boundary nodes set to 0."""
        v = np.asarray(fn(mesh.delta, mesh.x), dtype=float) * np.ones(mesh.n_nodes)
        v[mesh.pinned] = 0.0
        return cls(mesh, v, descriptor)

    def to_json(self):
        return {"x": self.mesh.x.tolist(), "delta": self.mesh.delta.tolist(),
                "u": self.values.tolist(), "descriptor": self.descriptor}


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _gauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (1.0 + x), 0.5 * w


@dataclass(frozen=True)
class AssembledForms:
    """Quadrature tables for the three integrals on one mesh.

    ``a[c]`` multiplies |u_{c+1} - u_c|^p in the gradient term; ``mq`` and
    ``hq`` are (cells x points) weights for the mass and Hardy terms, with
    ``phi`` the left-hat values at the points.  For p = 2 the tridiagonal
    matrices on the free nodes are in ``A``, ``M``, ``H`` as
    ``(diagonal, off_diagonal)`` pairs.
    """

    mesh: Mesh
    p: float
    lam: float
    a: np.ndarray
    mq: np.ndarray
    hq: np.ndarray
    phi: np.ndarray
    A: tuple = None
    M: tuple = None
    H: tuple = None
    maxF: float = None
    meta: dict = field(default_factory=dict)

    def with_lambda(self, lam):
        return AssembledForms(self.mesh, self.p, float(lam), self.a, self.mq, self.hq, self.phi,
                              self.A, self.M, self.H, self.maxF, self.meta)

    def point_values(self, v):
        """u at the quadrature points of every cell."""
        return v[:-1, None] * self.phi + v[1:, None] * (1.0 - self.phi)

    def triplets(self, which):
        """(i, j, value) rows of a p=2 matrix over the free nodes, both triangles."""
        dia, off = getattr(self, which)
        n = dia.size
        i = np.concatenate([np.arange(n), np.arange(n - 1), np.arange(1, n)])
        j = np.concatenate([np.arange(n), np.arange(1, n), np.arange(n - 1)])
        return np.column_stack([i, j, np.concatenate([dia, off, off])])


def _tridiag(mesh, cellA, pointW, phi):
    """Assemble a tridiagonal matrix on all nodes then restrict to free nodes."""
    n = mesh.n_nodes
    dia = np.zeros(n)
    off = np.zeros(n - 1)
    if cellA is not None:
        dia[:-1] += cellA
        dia[1:] += cellA
        off -= cellA
    if pointW is not None:
        dia[:-1] += (pointW * phi ** 2).sum(axis=1)
        dia[1:] += (pointW * (1 - phi) ** 2).sum(axis=1)
        off += (pointW * phi * (1 - phi)).sum(axis=1)
    f = mesh.free
    idx = np.flatnonzero(f)
    keep_off = f[:-1] & f[1:]
    # free nodes are contiguous so the restricted off-diagonal is a slice
    return dia[idx], off[keep_off]


def assemble(mesh, w, profile, p, lam=0.0, order=8):
    """Tabulate the three weighted integrals on ``mesh``.

    The profile must have ``eta`` equal to the eta0 of the problem and must
    reach below the smallest quadrature point near the boundary; otherwise
    :class:`ExtrapolationRequired` is raised rather than extrapolating.
    """
    if not p > 1:
        raise InvalidParameter("p must exceed 1")
    xq, wq = _gauss(order)
    dl, dr = mesh.cell_delta()
    h = mesh.h
    # delta is linear on every cell, so interpolate it directly (exact near 0)
    dq = dl[:, None] + (dr - dl)[:, None] * xq
    if np.any(dq <= 0):
        raise QuadratureFailure("quadrature point on the boundary")
    tq = dq[dq < profile.eta]
    if tq.size and tq.min() < profile.t_min:
        raise ExtrapolationRequired(
            f"mesh reaches delta={tq.min():.3e} but the profile starts at {profile.t_min:.3e}")
    logw = w.log(dq)
    logF = profile.log_F_at(dq, strict=True)
    logJ = mesh.domain.log_jacobian_from_delta(dq)
    logm = np.log(wq * h[:, None]) + (p - 1.0) * logw + logJ
    logh = logm - p * logF
    # gradient: (int_cell W_p J) / h^p
    loga = np.log((np.exp(logm - logm.max(axis=1, keepdims=True))).sum(axis=1)) \
        + logm.max(axis=1) - p * np.log(h)
    with np.errstate(over="ignore"):
        a, mq, hq = np.exp(loga), np.exp(logm), np.exp(logh)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(mq)) and np.all(np.isfinite(hq))):
        raise QuadratureFailure("assembled weights overflow; use a coarser boundary_resolution")
    # dq runs from the left node, so the left hat is 1 - xq at each point
    phi = np.broadcast_to(1.0 - xq[None, :], dq.shape).copy()
    A = M = H = None
    if p == 2:
        A = _tridiag(mesh, a, None, phi)
        M = _tridiag(mesh, None, mq, phi)
        H = _tridiag(mesh, None, hq, phi)
    maxF = float(np.exp(profile.log_F.max()))
    return AssembledForms(mesh, float(p), float(lam), a, mq, hq, phi, A, M, H, maxF,
                          {"order": order, "eta0": profile.eta, "weight": w.label})


def _check_mesh(u, forms):
    if u.mesh is not forms.mesh and not (
            u.mesh.n_nodes == forms.mesh.n_nodes and np.array_equal(u.mesh.delta, forms.mesh.delta)):
        raise MeshMismatch("grid function and forms live on different meshes")


@dataclass(frozen=True)
class Norms:
    grad_term: float
    mass_term: float
    hardy_term: float

    def to_json(self):
        return {"grad_term": self.grad_term, "mass_term": self.mass_term,
                "hardy_term": self.hardy_term}


def norms(u, forms):
    """The three integrals for a grid function."""
    _check_mesh(u, forms)
    v = u.values
    p = forms.p
    du = np.abs(np.diff(v))
    uq = np.abs(forms.point_values(v))
    up = uq ** p
    return Norms(float((forms.a * du ** p).sum()), float((forms.mq * up).sum()),
                 float((forms.hq * up).sum()))


def terms_and_gradients(v, forms):
    """Values and nodal gradients of grad/mass/hardy at nodal vector v (all nodes)."""
    p = forms.p
    dv = np.diff(v)
    adv = np.abs(dv)
    cg = forms.a * adv ** (p - 1) * np.sign(dv)
    gg = np.zeros_like(v)
    gg[:-1] -= cg
    gg[1:] += cg
    uq = forms.point_values(v)
    aq = np.abs(uq)
    sq = aq ** (p - 1) * np.sign(uq)

    def point_grad(W):
        g = np.zeros_like(v)
        g[:-1] += (W * sq * forms.phi).sum(axis=1)
        g[1:] += (W * sq * (1 - forms.phi)).sum(axis=1)
        return g

    aqp = aq ** p
    vals = ((forms.a * adv ** p).sum(), (forms.mq * aqp).sum(), (forms.hq * aqp).sum())
    grads = (p * gg, p * point_grad(forms.mq), p * point_grad(forms.hq))
    return vals, grads
