"""One-dimensional boundary weights w(t) and their P/Q taxonomy.

A weight is a strictly positive C^1 function on (0, inf).  The class of a
weight is decided by integrability of 1/w at 0:

* class ``P``: 1/w is *not* integrable on (0, eta),
* class ``Q``: 1/w is integrable on (0, eta).

Everything is evaluated through ``log w`` first because the interesting
weights (``exp(+-t**-beta)``) overflow long before the boundary is reached.
"""

import ast
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import Inconclusive, InvalidParameter, NonPositiveExpression, QuadratureFailure
from .quadrature import dyadic_panel_logs

FAMILIES = ("Power", "ExpPower", "PowerTimesExp", "Constant", "Expression")


@dataclass(frozen=True)
class WeightSpec:
    """Family name plus parameters; see ``FAMILIES``.

    Parameters by family: Power ``alpha``; ExpPower ``sign``, ``beta``;
    PowerTimesExp ``alpha``, ``sign``; Constant ``c``; Expression ``text``.
    """

    family: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def to_json(self):
        return {"family": self.family, "params": dict(self.params), "label": self.label}

    @classmethod
    def from_json(cls, obj):
        if "family" not in obj:
            raise InvalidParameter("weight spec needs a 'family' key")
        return cls(obj["family"], dict(obj.get("params", {})), obj.get("label", ""))


# ---------------------------------------------------------------------------
# restricted expression grammar
# ---------------------------------------------------------------------------

_FUNCS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    # sin/cos are not needed by the families but oscillating test weights use them
    "sin": np.sin, "cos": np.cos,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}


def _parse_expression(text):
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise InvalidParameter(f"cannot parse weight expression {text!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        ok = isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp, ast.USub, ast.UAdd,
                               ast.Call, ast.Name, ast.Load, ast.Constant, *_BINOPS))
        if not ok:
            raise InvalidParameter(f"disallowed syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise InvalidParameter(f"only numeric literals are allowed in {text!r}")
        if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS \
                and node.id != "t":
            raise InvalidParameter(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS \
                    or len(node.args) != 1 or node.keywords:
                raise InvalidParameter(f"only exp/log/sqrt/sin/cos of one argument in {text!r}")
    return tree.body


def _eval(node, t):
    if isinstance(node, ast.Constant):
        return np.full_like(t, float(node.value))
    if isinstance(node, ast.Name):
        return t if node.id == "t" else np.full_like(t, _CONSTS[node.id])
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, t)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, t), _eval(node.right, t))
    return _FUNCS[node.func.id](_eval(node.args[0], t))


def _eval_log(node, t):
    """log of the expression, pushed through products/exp/powers when possible."""
    if isinstance(node, ast.Call) and node.func.id == "exp":
        return _eval(node.args[0], t)
    if isinstance(node, ast.Call) and node.func.id == "sqrt":
        return 0.5 * _eval_log(node.args[0], t)
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        return _eval_log(node.left, t) + _eval_log(node.right, t)
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Div):
        return _eval_log(node.left, t) - _eval_log(node.right, t)
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow) \
            and isinstance(node.right, ast.Constant):
        return float(node.right.value) * _eval_log(node.left, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(_eval(node, t))


def _fd_step(t):
    return np.minimum(np.maximum(1e-6 * t, 1e-12), 0.5 * t)


# ---------------------------------------------------------------------------
# Weight
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Weight:
    """Evaluators for w, w', log w and d(log w)/dt, all vectorised."""

    spec: WeightSpec
    log: Callable
    dlog: Callable
    ratio: Callable = None

    def log_ratio(self, t, s):
        """log w(t) - log w(s), without cancellation for the closed families."""
        t, s = _arr(t), _arr(s)
        if self.ratio is not None:
            return self.ratio(t, s)
        return self.log(t) - self.log(s)

    @property
    def family(self):
        return self.spec.family

    @property
    def label(self):
        return self.spec.label or describe(self.spec)

    def value(self, t):
        with np.errstate(over="ignore"):
            return np.exp(self.log(_arr(t)))

    def __call__(self, t):
        return self.value(t)

    def deriv(self, t):
        t = _arr(t)
        d = self.dlog(t)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.exp(self.log(t)) * d
        return np.where(d == 0, 0.0, out)


def _log_quot(t, s):
    """log(t/s); log1p only where t and s are close, it loses digits near t = 0."""
    d = (t - s) / s
    near = np.abs(d) < 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(near, np.log1p(np.where(near, d, 0.0)), np.log(t) - np.log(s))


def _arr(t):
    return np.asarray(t, dtype=float)


def _positive(name, v):
    if not (np.isfinite(v) and v > 0):
        raise InvalidParameter(f"{name} must be positive, got {v!r}")
    return float(v)


def _sign(v):
    if v not in (1, -1, 1.0, -1.0):
        raise InvalidParameter(f"sign must be +1 or -1, got {v!r}")
    return int(v)


def _finite(name, v):
    if not np.isfinite(v):
        raise InvalidParameter(f"{name} must be finite, got {v!r}")
    return float(v)


def make_weight(spec):
    """Build a :class:`Weight` from a :class:`WeightSpec`.

    Raises
    ------
    InvalidParameter
        Unknown family, missing or out-of-range parameters.
    NonPositiveExpression
        An Expression weight is not finite and positive on the probe grid.
    """
    fam, prm = spec.family, spec.params
    try:
        if fam == "Power":
            a = _finite("alpha", prm["alpha"])
            return Weight(spec, lambda t: a * np.log(t), lambda t: a / t,
                          lambda t, s: a * _log_quot(t, s))
        if fam == "ExpPower":
            s, b = _sign(prm["sign"]), _positive("beta", prm["beta"])
            # t^-b - s^-b = t^-b (1 - (t/s)^b)
            return Weight(spec, lambda t: s * t ** (-b), lambda t: -s * b * t ** (-b - 1.0),
                          lambda t, u: -s * t ** (-b) * np.expm1(b * _log_quot(t, u)))
        if fam == "PowerTimesExp":
            a, s = _finite("alpha", prm["alpha"]), _sign(prm["sign"])
            return Weight(spec, lambda t: a * np.log(t) + s / t, lambda t: a / t - s / t ** 2,
                          lambda t, u: a * _log_quot(t, u) + s * (u - t) / (t * u))
        if fam == "Constant":
            c = _positive("c", prm["c"])
            return Weight(spec, lambda t: np.full_like(t, math.log(c)), lambda t: np.zeros_like(t),
                          lambda t, s: np.zeros(np.broadcast(t, s).shape))
        if fam == "Expression":
            return _expression_weight(spec)
    except KeyError as exc:
        raise InvalidParameter(f"{fam} weight is missing parameter {exc.args[0]!r}") from None
    raise InvalidParameter(f"unknown weight family {fam!r}; expected one of {FAMILIES}")


def _expression_weight(spec):
    text = spec.params["text"]
    node = _parse_expression(text)

    def log(t):
        with np.errstate(all="ignore"):
            return _eval_log(node, np.asarray(t, dtype=float))

    probe = np.logspace(-12, 0, 2401)
    lv = log(probe)
    bad = ~np.isfinite(lv)
    if bad.any():
        raise NonPositiveExpression(
            f"expression {text!r} is not finite and positive at t={probe[bad][0]:.6g}")

    def dlog(t):
        t = np.asarray(t, dtype=float)
        h = _fd_step(t)
        return (log(t + h) - log(t - h)) / (2.0 * h)

    return Weight(spec, log, dlog)


def describe(spec):
    p = spec.params
    return {
        "Power": lambda: f"t^{p.get('alpha')}",
        "ExpPower": lambda: f"exp({'+' if p.get('sign', 1) > 0 else '-'}t^-{p.get('beta')})",
        "PowerTimesExp": lambda: f"t^{p.get('alpha')}*exp({'+' if p.get('sign', 1) > 0 else '-'}1/t)",
        "Constant": lambda: f"{p.get('c')}",
        "Expression": lambda: str(p.get("text")),
    }.get(spec.family, lambda: spec.family)()


def parse_weight(text):
    """Parse the short CLI form, e.g. ``power:0.5``, ``exppow:-1,0.5``, ``expr:1+t^2``."""
    if ":" not in text:
        raise InvalidParameter(f"weight must look like family:params, got {text!r}")
    key, _, rest = text.partition(":")
    key = key.strip().lower()
    if key in ("expr", "expression"):
        return WeightSpec("Expression", {"text": rest}, rest)
    try:
        nums = [float(x) for x in rest.split(",")]
    except ValueError:
        raise InvalidParameter(f"non-numeric parameters in {text!r}") from None
    table = {
        "power": ("Power", ("alpha",)),
        "exppow": ("ExpPower", ("sign", "beta")),
        "powexp": ("PowerTimesExp", ("alpha", "sign")),
        "const": ("Constant", ("c",)),
    }
    if key not in table:
        raise InvalidParameter(f"unknown weight family {key!r}")
    fam, names = table[key]
    if len(nums) != len(names):
        raise InvalidParameter(f"{fam} expects {len(names)} parameter(s): {', '.join(names)}")
    spec = WeightSpec(fam, dict(zip(names, nums)))
    return WeightSpec(fam, spec.params, text)


# Weights used as oracles throughout the test-suite and demos.
REGISTRY = {
    "const1": WeightSpec("Constant", {"c": 1.0}, "1"),
    "power2": WeightSpec("Power", {"alpha": 2.0}, "t^2"),
    "power1": WeightSpec("Power", {"alpha": 1.0}, "t"),
    "power0.5": WeightSpec("Power", {"alpha": 0.5}, "t^0.5"),
    "exp-1/t": WeightSpec("ExpPower", {"sign": -1, "beta": 1.0}, "exp(-1/t)"),
    "exp+1/t": WeightSpec("ExpPower", {"sign": 1, "beta": 1.0}, "exp(1/t)"),
    "exp-1/sqrt": WeightSpec("ExpPower", {"sign": -1, "beta": 0.5}, "exp(-1/sqrt(t))"),
    "exp+1/sqrt": WeightSpec("ExpPower", {"sign": 1, "beta": 0.5}, "exp(1/sqrt(t))"),
    "t2exp-1/t": WeightSpec("PowerTimesExp", {"alpha": 2.0, "sign": -1}, "t^2 exp(-1/t)"),
    "t-1exp+1/t": WeightSpec("PowerTimesExp", {"alpha": -1.0, "sign": 1}, "t^-1 exp(1/t)"),
}


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightClass:
    """P/Q verdict.

    ``log_integral`` is log of the partial sum of int 1/w over the probed
    panels: the integral itself for Q, a divergence proxy for P.
    """

    kind: str
    evidence: str
    log_integral: float
    panels: int = 0

    @property
    def integral_estimate(self):
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_integral))

    @property
    def sign(self):
        return switching(self)

    def to_json(self):
        return {"kind": self.kind, "evidence": self.evidence,
                "log_integral": self.log_integral, "panels": self.panels}


def _analytic_kind(spec):
    p = spec.params
    if spec.family == "Power":
        return "P" if p["alpha"] >= 1 else "Q"
    if spec.family in ("ExpPower", "PowerTimesExp"):
        return "P" if p["sign"] < 0 else "Q"
    if spec.family == "Constant":
        return "Q"
    return None


def numeric_class(w, eta, max_panels=60, window=10):
    """Decide P/Q from dyadic panels of int 1/w toward 0.

    Returns ``(kind, log_partial_sum, panels_used)``; raises Inconclusive.
    """
    try:
        logs = dyadic_panel_logs(lambda s: -w.log(s), eta, max_panels, summed=True)
    except QuadratureFailure as e:
        raise Inconclusive(f"1/w panels for {w.label} cannot be integrated: {e}", {}) from e
    csum = np.logaddexp.accumulate(logs)
    total = csum[-1]
    if not np.isfinite(total):
        raise Inconclusive(f"1/w panels are not finite for {w.label}", {"panel_logs": logs.tolist()})
    # tail already negligible: convergent
    if logs[-1] < total + math.log(1e-14):
        return "Q", float(total), max_panels
    last = logs[-window:]
    ratios = np.diff(last)
    if np.min(ratios) >= -1e-9:
        return "P", float(total), max_panels
    if csum[-1] - csum[-window - 1] >= math.log(2.0):
        return "P", float(total), max_panels
    steady = ratios[-1] <= ratios[0] + 0.1 * abs(ratios[0])
    if np.max(ratios) < math.log1p(-1e-6) and steady:
        return "Q", float(total), max_panels
    raise Inconclusive(
        f"1/w panel ratios for {w.label} neither settle below 1 nor stop decaying "
        f"(last log-ratios {ratios[0]:.3g} .. {ratios[-1]:.3g})",
        {"panel_logs": logs.tolist(), "log_ratios": ratios.tolist()})


def classify(w, eta, method="auto"):
    """Classify ``w`` as P or Q on (0, eta).

    ``method="auto"`` uses the closed-form rule for the analytic families and
    the panel test otherwise; ``"numeric"`` forces the panel test.
    """
    if not eta > 0:
        raise InvalidParameter("eta must be positive")
    kind = _analytic_kind(w.spec) if method == "auto" else None
    if method not in ("auto", "numeric"):
        raise InvalidParameter(f"unknown method {method!r}")
    try:
        nkind, logI, n = numeric_class(w, eta)
    except Inconclusive:
        if kind is None:
            raise
        return WeightClass(kind, "Analytic", math.inf if kind == "P" else math.nan, 0)
    if kind is None:
        return WeightClass(nkind, "Numeric", logI, n)
    return WeightClass(kind, "Analytic", logI, n)


def switching(c):
    """Switching sign s(w): -1 for class P, +1 for class Q."""
    kind = c.kind if isinstance(c, WeightClass) else c
    if kind == "P":
        return -1
    if kind == "Q":
        return 1
    raise InvalidParameter(f"unknown class {kind!r}")


# ---------------------------------------------------------------------------
# doubling and monotonicity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DoublingReport:
    ratio_min: float
    ratio_max: float
    t_grid: tuple
    verdict: str
    C: float
    log_ratios: tuple = ()

    def to_json(self):
        return {"verdict": self.verdict, "C": self.C, "ratio_min": self.ratio_min,
                "ratio_max": self.ratio_max, "t_grid": list(self.t_grid),
                "log_ratios": list(self.log_ratios)}


def is_doubling(w, t_min, t_max, n=200, blowup=1e6):
    """Probe w(t)/w(2t) on a log grid in [t_min, t_max]."""
    if not 0 < t_min < t_max:
        raise InvalidParameter("need 0 < t_min < t_max")
    t = np.geomspace(t_min, t_max, n)
    lr = w.log(t) - w.log(2.0 * t)
    lo, hi = float(lr.min()), float(lr.max())
    spread = hi - lo
    # monotone drift as t -> t_min, by more than a factor of 2
    d = np.diff(lr)
    trend = spread > math.log(2.0) and (np.all(d >= 0) or np.all(d <= 0))
    if spread > math.log(blowup) or trend:
        verdict, C = "NonDoubling", math.inf
    else:
        verdict, C = "Doubling", float(math.exp(max(abs(lo), abs(hi))))
    with np.errstate(over="ignore"):
        rmin, rmax = float(np.exp(lo)), float(np.exp(hi))
    return DoublingReport(rmin, rmax, tuple(t.tolist()), verdict, C, tuple(lr.tolist()))


@dataclass(frozen=True)
class MonotoneReport:
    sign: str
    witnesses: tuple = ()

    def to_json(self):
        return {"sign": self.sign, "witnesses": list(self.witnesses)}


def check_monotone(w, eta0, n=2000, depth=1e-10):
    """Sign scan of w' (via d log w/dt) on a log grid in (depth*eta0, eta0)."""
    if not eta0 > 0:
        raise InvalidParameter("eta0 must be positive")
    t = np.geomspace(depth * eta0, eta0, n + 1)[:-1]
    d = w.dlog(t)
    if np.all(d >= 0):
        return MonotoneReport("NonDecreasing")
    if np.all(d <= 0):
        return MonotoneReport("NonIncreasing")
    s = np.sign(d)
    flips = np.flatnonzero(s[1:] * s[:-1] < 0)
    wit = tuple(float(math.sqrt(t[i] * t[i + 1])) for i in flips[:3])
    return MonotoneReport("Mixed", wit)
