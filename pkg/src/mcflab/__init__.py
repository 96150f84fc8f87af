"""mcflab: a numerical laboratory for rotationally symmetric mean curvature
flow with super-linear graph growth.

Builds the bowl translating-soliton profile, the matched formal solutions in
the tip and far-field regions, certified super-/subsolution barriers for the
rescaled flow, evolves trapped initial data with a semi-implicit solver, and
measures the predicted curvature blow-up rate and asymptotic profiles.
"""

from .geometry import (Chart, FlowParams, FlowState, CurvatureRecord,
                       convert, rescale_forward, rescale_backward, regrid,
                       parabolic_rescale, curvatures, ratio_R)
from .soliton import SolitonProfile, solve_bowl, FProfile, F_of_z, Ftilde_of_z
from .formal import (lambda_bar, exterior_y, exterior_lambda, PsiProfile, psi,
                     Lambda, interior_formal_y)
from .barriers import (BarrierConstants, Barrier, QProfile, build_Q, apply_Tz,
                       apply_Fphi, ProfileFn, patch, certify, choose_constants,
                       build_barriers, UPPER, LOWER)
from .evolve import (SolverConfig, FarFieldBC, Trajectory, make_initial_data,
                     step, run, ordered_pair_test)
from .asymptotics import (AsymptoticsReport, fit_blowup_exponent,
                          tip_profile_error, exterior_growth,
                          tip_supersolution_check)
from .io import RunConfig, load_config, save_config, save_manifest, emit_plot_data

__version__ = "0.1.0"
