"""Numerical laboratory for weighted Hardy inequalities near a boundary."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .weights import (REGISTRY, WeightSpec, Weight, WeightClass, make_weight,  # noqa: E402
                      parse_weight, classify, switching, is_doubling, check_monotone)
from .hardy_kernel import (HardyProfile, build_profile, eval_f, eval_F, eval_G,  # noqa: E402
                           verify_identities, estimate_F_asymptotics, check_admissible,
                           check_FG2_vanishes, check_limF_zero, auto_mu)
from .discretization import (Domain, Interval, Ball, make_domain, parse_domain,  # noqa: E402
                             Mesh, make_graded_mesh, mesh_ladder, GridFunction,
                             AssembledForms, assemble, norms)
from .variational import (Lambda_p, Problem, QuotientReport, chi, test_family_u_eps,  # noqa: E402
                          closed_form_pieces, direct_pieces, u_eps_quotient, cutoff_phi,
                          cutoff_energy, MinimizeResult, minimize_quotient,
                          euler_lagrange_residual, LambdaStarReport, lambda_star,
                          ConcentrationReport, concentration_diagnostic, deep_ladder,
                          supersolution_check, hardy_audit)
