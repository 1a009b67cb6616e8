import math

import numpy as np
import pytest

import hardylab.variational as V
from hardylab import (REGISTRY, Ball, GridFunction, Interval, Problem, build_profile, chi,
                      classify, make_graded_mesh, make_weight, mesh_ladder, parse_weight)
from hardylab.errors import (ClassMismatch, HypothesisNotMet, InvalidBracket, InvalidParameter,
                             NoConvergence, ProfileTooCoarse, ZeroDenominator)


def W(name):
    return make_weight(REGISTRY[name])


@pytest.fixture(scope="module")
def flat():
    """w = 1 on Interval(1), p = 2."""
    return Problem.build(W("const1"), Interval(1.0), 2.0)


def test_Lambda_p():
    assert V.Lambda_p(2) == 0.25
    assert V.Lambda_p(3) == pytest.approx(8 / 27)


def test_problem_defaults_and_validation():
    pr = Problem.build(W("power0.5"), Ball(3, 2.0), 2.0)
    assert pr.eta0 == 0.5 and pr.cls.kind == "Q"
    with pytest.raises(InvalidParameter):
        Problem.build(W("const1"), Interval(1.0), 1.0)
    with pytest.raises(InvalidParameter):
        Problem.build(W("const1"), Interval(1.0), 2.0, eta0=0.7)
    assert pr.to_json()["class"] == "Q"


def test_profile_deepens_with_the_mesh(flat):
    pr = Problem.build(W("const1"), Interval(1.0), 2.0)
    m = pr.mesh(200, 1e-40)
    pr.forms(m)
    assert pr.profile.t_min <= 0.01 * m.smallest_cell


def test_chi_of_zero_function(flat):
    m = flat.mesh(64, 1e-6)
    with pytest.raises(ZeroDenominator):
        chi(GridFunction(m, np.zeros(m.n_nodes)), flat.forms(m))


# -- test family ------------------------------------------------------------

def test_u_eps_pieces_match_oracle(flat, oracles):
    for p in (1.5, 2.0, 3.0):
        prof = flat.profile
        for eps in (1e-2, 1e-3):
            o = oracles["ueps"][f"p={p:g},eps={eps:g}"]
            cf = V.closed_form_pieces(eps, 0.1, p, prof, flat.cls)
            dp = V.direct_pieces(eps, 0.1, p, prof)
            q = V.u_eps_quotient(eps, 0.1, p, prof)
            assert cf["ratio"] == pytest.approx(o["closed_ratio"], rel=1e-14)
            assert cf["hardy_main"] == pytest.approx(o["hardy_main"], rel=1e-12)
            assert dp["ratio"] == pytest.approx(cf["ratio"], rel=1e-10)
            assert q["quotient"] == pytest.approx(o["quotient"], rel=1e-9)


def test_u_eps_three_ways_agree(flat):
    # the Hardy mass of u_eps is spread evenly over log scales, so the mesh
    # has to reach delta ~ 1e-200 before it carries all but h^(2 eps) of it
    eta = flat.eta0 / 2
    m = flat.mesh(4000, 1e-200, extra_breakpoints=(eta,))
    f = flat.forms(m)
    u = V.test_family_u_eps(0.01, eta, flat.profile, flat.cls, m, 2.0)
    mesh = V.mesh_pieces(u, f, eta)
    cf = V.closed_form_pieces(0.01, eta, 2.0, flat.profile, flat.cls)
    dp = V.direct_pieces(0.01, eta, 2.0, flat.profile)
    assert mesh["ratio"] == pytest.approx(cf["ratio"], rel=1e-2)
    assert dp["ratio"] == pytest.approx(cf["ratio"], rel=1e-6)


def test_u_eps_quotient_decreases_to_Lambda(flat):
    qs = [V.u_eps_quotient(e, 0.1, 2.0, flat.profile)["quotient"] for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(qs, qs[1:]))
    assert qs[-1] == pytest.approx(0.25, rel=2e-3) and qs[-1] > 0.25


def test_u_eps_for_class_P(oracles):
    pr = Problem.build(W("power2"), Interval(1.0), 2.0)
    cf = V.closed_form_pieces(1e-2, 0.1, 2.0, pr.profile, pr.cls)
    assert cf["ratio"] == pytest.approx((0.5 - 0.01) ** 2)
    dp = V.direct_pieces(1e-2, 0.1, 2.0, pr.profile)
    assert dp["ratio"] == pytest.approx(cf["ratio"], rel=1e-8)


def test_u_eps_guards(flat):
    m = flat.mesh(64, 1e-20)
    prof = build_profile(flat.weight, flat.cls, 0.25, 1.0)    # stops at 2.5e-10
    with pytest.raises(ProfileTooCoarse):
        V.test_family_u_eps(0.01, 0.1, prof, flat.cls, m, 2.0)
    pP = classify(W("power2"), 0.25)
    with pytest.raises(ClassMismatch):
        V.test_family_u_eps(0.01, 0.1, flat.profile, pP, flat.mesh(64, 1e-6), 2.0)
    with pytest.raises(InvalidParameter):
        V.closed_form_pieces(0.01, 0.2, 2.0, flat.profile, flat.cls)
    with pytest.raises(InvalidParameter):
        V.closed_form_pieces(1.5, 0.1, 2.0, flat.profile, flat.cls)


def test_cutoff_functions(oracles):
    w = W("power2")
    prof = build_profile(w, classify(w, 0.25), 0.25, 1.0)
    defects = []
    for eb in (1e-2, 1e-3, 1e-4):
        o = oracles["cutoff"][f"{eb:g}"]
        r = V.cutoff_energy(eb, 0.1, 2.0, prof)
        assert r["grad_closed"] == pytest.approx(o["grad"], rel=1e-10)
        assert r["grad_quad"] == pytest.approx(r["grad_closed"], rel=1e-10)
        assert r["mass_defect"] == pytest.approx(o["mass_defect"], rel=1e-8)
        defects.append(r["mass_defect"])
    assert defects[0] > defects[1] > defects[2]
    m = make_graded_mesh(Interval(1.0), 128, 1e-6, breakpoints=(0.25, 0.1))
    phi = V.cutoff_phi(1e-3, 0.1, prof, m).values
    assert phi.max() == 1.0 and np.all(phi[m.delta <= 1e-3] == 0)
    assert np.all(np.diff(phi[: m.n_nodes // 2]) >= 0)
    with pytest.raises(ClassMismatch):
        V.cutoff_energy(1e-3, 0.1, 2.0, build_profile(W("const1"), classify(W("const1"), 0.25),
                                                       0.25))


# -- minimisation -----------------------------------------------------------

def test_eigen_path_matches_dense_oracle(flat, oracles):
    m = mesh_ladder(Interval(1.0), 200, 1, 1e-6, breakpoints=(flat.eta0,))[0]
    r = V.minimize_quotient(flat.forms(m, 0.0), "eigen")
    assert r.J_estimate == pytest.approx(oracles["dense"]["J_n200_lam0"], abs=1e-10)
    assert r.method == "Eigen2" and r.residual < 1e-8
    assert chi(r.minimizer, flat.forms(m, 0.0)).value == pytest.approx(r.J_estimate, rel=1e-12)


def test_J_in_range_on_a_2000_cell_mesh(flat):
    f = flat.forms(flat.mesh(2000, 1e-6), 0.0)
    assert 0.25 <= V.minimize_quotient(f).J_estimate <= 0.35


def test_descent_reproduces_inverse_iteration(flat):
    m = flat.mesh(128, 1e-6)
    for lam in (0.0, 10.0):
        f = flat.forms(m, lam)
        a = V.minimize_quotient(f, "eigen").J_estimate
        b = V.minimize_quotient(f, "descent", profile=flat.profile).J_estimate
        assert b == pytest.approx(a, rel=1e-10, abs=1e-12)
    with pytest.raises(InvalidParameter):
        V.minimize_quotient(flat.forms(m), "newton")


def test_descent_for_p_three():
    # F is frozen at F(eta0) past the collar, so J may sit below Lambda_3
    from scipy.optimize import minimize
    pr = Problem.build(W("const1"), Interval(1.0), 3.0)
    f = pr.forms(pr.mesh(32, 1e-4), 0.0)
    r = V.minimize_quotient(f, profile=pr.profile)
    assert r.method == "Descent" and r.converged and r.residual < 1e-8
    m = f.mesh
    q = lambda z: chi(GridFunction.from_free(m, z), f).value
    z0 = V.interior_mode(m).values[m.free]
    ref = minimize(q, z0, method="BFGS", options={"gtol": 1e-12, "maxiter": 20000})
    assert r.J_estimate <= ref.fun + 1e-9
    assert r.J_estimate == pytest.approx(ref.fun, rel=1e-6)
    with pytest.raises(InvalidParameter):
        V.minimize_quotient(f, "eigen")


def test_iteration_budget_is_reported():
    pr = Problem.build(W("const1"), Interval(1.0), 3.0)
    f = pr.forms(pr.mesh(64, 1e-6), 0.0)
    with pytest.raises(NoConvergence) as e:
        V.minimize_quotient(f, profile=pr.profile, max_iter=3)
    assert e.value.result.J_estimate > 0


def test_euler_lagrange_residual_detects_non_minimizers(flat):
    f = flat.forms(flat.mesh(128, 1e-6), 3.0)
    r = V.minimize_quotient(f)
    assert V.euler_lagrange_residual(r, f) < 1e-8
    assert V.euler_lagrange_residual(V.interior_mode(f.mesh), f) > 1e-3


def test_interior_mode_on_ball():
    m = make_graded_mesh(Ball(3, 1.0), 64, 1e-6)
    u = V.interior_mode(m)
    assert u.values[0] == pytest.approx(1.0) and u.values[-1] == 0


# -- lambda* and regimes ----------------------------------------------------

def test_lambda_star_bracket_errors(flat):
    ladder = mesh_ladder(Interval(1.0), 64, 2, 1e-6, breakpoints=(flat.eta0,))
    with pytest.raises(InvalidBracket):
        V.lambda_star(flat, ladder, bracket=(5.0, 1.0))
    with pytest.raises(InvalidBracket):
        V.lambda_star(flat, ladder, bracket=(10.0, 50.0))
    with pytest.raises(InvalidBracket):
        V.lambda_star(flat, ladder, bracket=(-10.0, 0.0))


def test_curve_audits_flag_violations():
    good = [(0.0, (0.3, 0.29)), (1.0, (0.28, 0.27)), (2.0, (0.2, 0.19))]
    a = V.curve_audits(good, 1.0, 2.0)
    assert a["monotone"] and a["lipschitz"]
    bad = [(0.0, (0.3,)), (1.0, (0.31,))]
    assert not V.curve_audits(bad, 1.0, 2.0)["monotone"]
    steep = [(0.0, (0.3,)), (0.1, (0.0,))]
    assert not V.curve_audits(steep, 1.0, 2.0)["lipschitz"]


def test_concentration_verdicts_on_a_short_ladder(flat):
    ladder = V.deep_ladder(Interval(1.0), 200, [1e-2, 1e-10, 1e-18], flat.eta0)
    assert [m.n_cells for m in ladder][0] == 200
    c = V.concentration_diagnostic(flat, -50.0, ladder)
    assert c.verdict == "Concentrating"
    assert c.boundary_mass_fraction[-1] > c.boundary_mass_fraction[0]
    k = V.concentration_diagnostic(flat, 20.0, ladder)
    assert k.verdict == "Compact"
    assert len(k.rows()) == 3


# -- supersolution and audits ----------------------------------------------

def test_supersolution_check():
    w = W("exp-1/sqrt")
    pr = Problem.build(w, Ball(3, 1.0), 2.0)
    r = V.supersolution_check(w, pr.profile, 1.0, 1.0, pr.domain)
    assert r.limit_ok and r.invFG_diverges and r.t_ok > 0
    assert r.v_s_eta == pytest.approx(1.0)   # f(eta) = mu = 1, G(eta) = 1
    for bad_s in (0.5, 0.2):
        with pytest.raises(InvalidParameter):
            V.supersolution_check(w, pr.profile, bad_s, 1.0)
    w = make_weight(parse_weight("exppow:1,1"))
    prof = build_profile(w, classify(w, 0.25), 0.25)
    with pytest.raises(HypothesisNotMet):
        V.supersolution_check(w, prof, 1.0, 1.0)


def test_hardy_audit(flat):
    m = flat.mesh(400, 1e-8)
    f = flat.forms(m)
    rep = V.hardy_audit(V.random_collar_samples(m, 100, flat.eta0, seed=7), f, 0.25, seed=7)
    assert rep.min_margin > 0 and len(rep.margins) == 100
    again = V.hardy_audit(V.random_collar_samples(m, 100, flat.eta0, seed=7), f, 0.25, seed=7)
    assert again.margins == rep.margins
    hat = V.hardy_audit([V.interior_hat(m)], f, 0.25)
    assert hat.relative_margins[0] > 100


def test_hardy_constant_is_sharp(flat):
    # u_eps on a deep mesh has chi < 0.3, so gamma = 0.3 is violated
    eta = flat.eta0 / 2
    m = flat.mesh(4000, 1e-200, extra_breakpoints=(eta,))
    f = flat.forms(m)
    u = V.test_family_u_eps(0.01, eta, flat.profile, flat.cls, m, 2.0)
    assert V.hardy_audit([u], f, 0.3).min_margin < 0
    assert V.hardy_audit([u], f, 0.25).min_margin > 0
