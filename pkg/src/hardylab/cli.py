"""Command-line front end.

    hardylab classify    --weight power:0.5
    hardylab profile     --weight exppow:1,0.5 --eta 0.25
    hardylab minimize    --weight const:1 --p 2 --lambda 0 --domain interval:1
    hardylab lambda-star --weight const:1 --p 2
    hardylab diagnose    --weight const:1 --p 2 --lambda 1.5
    hardylab ueps        --weight const:1 --p 2 --eps 0.01,0.001

Every run writes JSON (and CSV where a table makes sense) into ``--out``
(default ``./runs/<timestamp>``) and prints the main JSON document.  The
resolved configuration and the package version are embedded in every file.
Exit codes: 0 verdict reached, 2 inconclusive, 1 error.
"""

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from ._io import dumps, write_csv, write_json
from .discretization import mesh_ladder, parse_domain
from .errors import HardyLabError, HypothesisNotMet, Inconclusive
from .hardy_kernel import (ADMISSIBILITY_DEPTH, auto_mu, build_profile, check_admissible,
                           check_FG2_vanishes, estimate_F_asymptotics, remainder_integrability,
                           verify_identities)
from .variational import (Lambda_p, Problem, closed_form_pieces, concentration_diagnostic,
                          deep_ladder, direct_pieces, lambda_star, minimize_quotient,
                          supersolution_check, u_eps_quotient)
from .weights import check_monotone, classify, is_doubling, make_weight, parse_weight


@dataclass
class RunConfig:
    weight: str = "const:1"
    domain: str = "interval:1"
    p: float = 2.0
    lam: float = 0.0
    bracket: list = field(default_factory=lambda: [-10.0, 50.0])
    eta0: float = None
    eta: float = None
    mu: str = "1"
    n: int = 200
    levels: int = 3
    boundary_resolution: float = 1e-6
    resolutions: list = field(default_factory=lambda: [1e-2, 1e-8, 1e-14, 1e-20])
    tol: float = 0.1
    detect_tol: float = 1e-3
    eps: list = field(default_factory=lambda: [0.01, 0.001])
    s_values: list = field(default_factory=lambda: [0.6, 1.0])
    M: float = 1.0
    method: str = "auto"
    nodes: int = 2048
    t_min: float = None
    seed: int = 0
    out: str = None

    def resolved(self, command):
        d = asdict(self)
        d.pop("out")
        d["command"] = command
        return d


_FLAGS = {
    "weight": str, "domain": str, "p": float, "lam": float, "bracket": "floats",
    "eta0": float, "eta": float, "mu": str, "n": int, "levels": int,
    "boundary_resolution": float, "resolutions": "floats", "tol": float,
    "detect_tol": float, "eps": "floats", "s_values": "floats", "M": float,
    "method": str, "nodes": int, "t_min": float, "seed": int, "out": str,
}


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def build_config(args):
    cfg = RunConfig()
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        names = {f.name for f in fields(RunConfig)}
        for k, v in doc.items():
            key = "lam" if k == "lambda" else k.replace("-", "_")
            if key not in names:
                raise HardyLabError(f"unknown config key {k!r}")
            setattr(cfg, key, v)
    for key, kind in _FLAGS.items():
        v = getattr(args, key, None)
        if v is None:
            continue
        setattr(cfg, key, _floats(v) if kind == "floats" else kind(v))
    return cfg


def _eta0(cfg, domain=None):
    if cfg.eta0 is not None:
        return float(cfg.eta0)
    if cfg.eta is not None and domain is None:
        return float(cfg.eta)
    return (domain or parse_domain(cfg.domain)).default_eta0


def _mu(cfg, w, eta):
    return auto_mu(w, eta) if str(cfg.mu).lower() == "auto" else float(cfg.mu)


def _doc(cfg, command, body):
    return {"version": __version__, "config": cfg.resolved(command), **body}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_classify(cfg, out):
    w = make_weight(parse_weight(cfg.weight))
    eta = cfg.eta if cfg.eta is not None else (cfg.eta0 if cfg.eta0 is not None else 0.25)
    c = classify(w, eta)
    t_min = cfg.t_min if cfg.t_min is not None else ADMISSIBILITY_DEPTH
    dbl = is_doubling(w, t_min, eta / 2)
    mono = check_monotone(w, eta)
    adm = check_admissible(w, c, eta, t_min)
    body = {"class": c.kind, "evidence": c.evidence, "doubling": dbl.verdict, "C": dbl.C,
            "monotone": mono.sign, "admissible": adm.verdict,
            "details": {"class": c.to_json(), "admissibility_slope": adm.slope,
                        "K_sup": adm.K_sup, "doubling_ratio_range": [dbl.ratio_min, dbl.ratio_max]}}
    doc = _doc(cfg, "classify", body)
    write_json(out / "classify.json", doc)
    return doc, 0


def cmd_profile(cfg, out):
    w = make_weight(parse_weight(cfg.weight))
    eta = cfg.eta if cfg.eta is not None else (cfg.eta0 if cfg.eta0 is not None else 0.25)
    c = classify(w, eta)
    mu = _mu(cfg, w, eta)
    prof = build_profile(w, c, eta, mu, n_nodes=cfg.nodes, t_min=cfg.t_min)
    ident = verify_identities(prof, raise_on_fail=False)
    try:
        fit = estimate_F_asymptotics(prof).to_json()
    except HardyLabError as e:
        fit = {"rejected": str(e), **(e.fit.to_json() if getattr(e, "fit", None) else {})}
    tab = prof.table()
    body = {"class": c.kind, "eta": eta, "mu": mu, "t_min": prof.t_min,
            "n_nodes": int(prof.grid.size), "F_tail": prof.F_tail, "G_tail": prof.G_tail,
            "asymptotics": fit, "identities": ident.to_json(),
            "FG2_vanishes": check_FG2_vanishes(prof)["verdict"],
            "remainder": remainder_integrability(prof)}
    doc = _doc(cfg, "profile", body)
    write_json(out / "profile.json", doc)
    write_csv(out / "profile.csv", ["t", "f", "F", "G", "FG2"],
              zip(tab["t"], tab["f"], tab["F"], tab["G"], tab["FG2"]), doc["config"])
    return doc, 0


def _problem(cfg):
    d = parse_domain(cfg.domain)
    w = make_weight(parse_weight(cfg.weight))
    eta0 = _eta0(cfg, d)
    return Problem.build(w, d, cfg.p, eta0, _mu(cfg, w, eta0), n_nodes=cfg.nodes)


def cmd_minimize(cfg, out):
    pr = _problem(cfg)
    m = pr.mesh(cfg.n, cfg.boundary_resolution)
    f = pr.forms(m, cfg.lam)
    r = minimize_quotient(f, cfg.method, profile=pr.profile)
    body = {"problem": pr.to_json(), "result": r.to_json(),
            "Lambda_p": Lambda_p(cfg.p), "n_cells": m.n_cells,
            "smallest_cell": m.smallest_cell}
    doc = _doc(cfg, "minimize", body)
    write_json(out / "minimize.json", doc)
    write_csv(out / "minimizer.csv", ["x", "delta", "u"],
              zip(m.x, m.delta, r.minimizer.values), doc["config"])
    return doc, 0


def cmd_lambda_star(cfg, out):
    pr = _problem(cfg)
    ladder = mesh_ladder(pr.domain, cfg.n, cfg.levels, cfg.boundary_resolution,
                         breakpoints=(pr.eta0,))
    rep = lambda_star(pr, ladder, tuple(cfg.bracket), cfg.tol, cfg.detect_tol, cfg.method)
    doc = _doc(cfg, "lambda-star", {"problem": pr.to_json(), "report": rep.to_json()})
    write_json(out / "lambda_star.json", doc)
    header = ["lambda"] + [f"J_level{k}" for k in range(len(ladder))]
    write_csv(out / "J_curve.csv", header, ([l, *js] for l, js in rep.J_curve), doc["config"])
    return doc, 0


def cmd_diagnose(cfg, out):
    pr = _problem(cfg)
    ladder = deep_ladder(pr.domain, cfg.n, cfg.resolutions, pr.eta0)
    rep = concentration_diagnostic(pr, cfg.lam, ladder, method=cfg.method)
    sup = []
    if cfg.p == 2:
        for s in cfg.s_values:
            try:
                r = supersolution_check(pr.weight, pr.profile, s, cfg.M, pr.domain)
                sup.append(r)
            except HypothesisNotMet as e:
                sup.append({"s": s, "skipped": str(e)})
    body = {"problem": pr.to_json(), "concentration": rep.to_json(),
            "supersolution": [x if isinstance(x, dict) else
                              {k: v for k, v in x.to_json().items() if k != "trace"} for x in sup]}
    doc = _doc(cfg, "diagnose", body)
    write_json(out / "diagnose.json", doc)
    rows = rep.rows()
    write_csv(out / "concentration.csv",
              ["level", "n_cells", "boundary_resolution", "J", "boundary_mass_fraction",
               "interior_gradient"],
              ([r["level"], r["n_cells"], r["boundary_resolution"], r["J"],
                r["boundary_mass_fraction"], r["interior_gradient"]] for r in rows), doc["config"])
    done = [x for x in sup if not isinstance(x, dict)]
    if done:
        t = [row[0] for row in done[0].trace]
        cols = [[row[1] for row in x.trace] for x in done]
        write_csv(out / "supersolution.csv", ["t"] + [f"E_s{x.s:g}" for x in done],
                  zip(t, *cols), doc["config"])
    code = 2 if rep.verdict == "Inconclusive" else 0
    return doc, code


def cmd_ueps(cfg, out):
    pr = _problem(cfg)
    eta = cfg.eta if cfg.eta is not None else pr.eta0 / 2
    rows = []
    for e in cfg.eps:
        cf = closed_form_pieces(e, eta, cfg.p, pr.profile, pr.cls)
        dp = direct_pieces(e, eta, cfg.p, pr.profile)
        q = u_eps_quotient(e, eta, cfg.p, pr.profile)
        rows.append({"eps": e, "closed_ratio": cf["ratio"], "direct_ratio": dp["ratio"],
                     "closed_vs_direct": abs(dp["ratio"] / cf["ratio"] - 1),
                     "quotient": q["quotient"],
                     "quotient_vs_Lambda": q["quotient"] / Lambda_p(cfg.p) - 1})
    doc = _doc(cfg, "ueps", {"problem": pr.to_json(), "eta": eta,
                             "Lambda_p": Lambda_p(cfg.p), "table": rows})
    write_json(out / "ueps.json", doc)
    keys = list(rows[0])
    write_csv(out / "ueps.csv", keys, ([r[k] for k in keys] for r in rows), doc["config"])
    return doc, 0


COMMANDS = {"classify": cmd_classify, "profile": cmd_profile, "minimize": cmd_minimize,
            "lambda-star": cmd_lambda_star, "diagnose": cmd_diagnose, "ueps": cmd_ueps}


def make_parser():
    ap = argparse.ArgumentParser(prog="hardylab", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"hardylab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
        sp.add_argument("--out", help="output directory (default ./runs/<timestamp>)")
        sp.add_argument("--weight", help="power:a | exppow:s,b | powexp:a,s | const:c | expr:...")
        sp.add_argument("--domain", help="interval:L | ball:N,R")
        sp.add_argument("--p", type=float)
        sp.add_argument("--lambda", dest="lam", type=float)
        sp.add_argument("--bracket", help="lo,hi for lambda-star")
        sp.add_argument("--eta0", type=float)
        sp.add_argument("--eta", type=float)
        sp.add_argument("--mu", help="number or 'auto'")
        sp.add_argument("--n", type=int, help="cells on the coarsest mesh")
        sp.add_argument("--levels", type=int)
        sp.add_argument("--boundary-resolution", dest="boundary_resolution", type=float)
        sp.add_argument("--resolutions", help="comma list for the diagnose ladder")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--detect-tol", dest="detect_tol", type=float)
        sp.add_argument("--eps", help="comma list for ueps")
        sp.add_argument("--s", dest="s_values", help="comma list of s for the supersolution audit")
        sp.add_argument("--M", type=float)
        sp.add_argument("--method", choices=["auto", "eigen", "descent"])
        sp.add_argument("--nodes", type=int, help="profile grid nodes")
        sp.add_argument("--t-min", dest="t_min", type=float)
        sp.add_argument("--seed", type=int)
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        np.random.seed(cfg.seed)
        out = Path(cfg.out) if cfg.out else Path("runs") / time.strftime("%Y%m%d-%H%M%S")
        out.mkdir(parents=True, exist_ok=True)
        doc, code = COMMANDS[args.command](cfg, out)
    except Inconclusive as e:
        report = e.report.to_json() if hasattr(e.report, "to_json") else e.report
        sys.stdout.write(dumps({"version": __version__, "inconclusive": str(e),
                                "report": report}))
        return 2
    except (HardyLabError, ValueError, OSError, json.JSONDecodeError) as e:
        sys.stderr.write(f"hardylab: error: {type(e).__name__}: {e}\n")
        return 1
    sys.stdout.write(dumps(doc))
    return code


if __name__ == "__main__":
    sys.exit(main())
