"""Sampling and geometry experiments for logconcave densities.

Geometric random walks over convex bodies, isoperimetry and mixing
diagnostics, annealed volume estimation, sampling-based optimization,
isotropic rounding, and a discrete-time stochastic localization
simulator with needle-decomposition experiments.
"""

__version__ = "0.1.0"

from .bodies import (AxisCube, Ball, BallIntersection, Body, BodyError,
                     Ellipsoid, Polytope, RestrictedBody, TransformedBody,
                     simplex, simplex_moments, transform_body)
from .densities import (Boltzmann, Density, Exponential, Gaussian,
                        Pushforward, Tilted, Uniform, WithBody,
                        affine_pushforward, body_of, chord_profile)
from .diagnostics import (BallSet, ConstantsReport, HalfspaceSet, SlabSet,
                          ball_walk_mixing_estimate, compute_constants,
                          conductance_tv_bound, direction_family,
                          halfspace_isoperimetry, lipschitz_tail_check,
                          log_cheeger_halfspace, mixing_bounds,
                          poincare_family_min, poincare_ratio,
                          slicing_constant, subset_isoperimetry, thin_shell)
from .estimates import Estimate, mean_estimate
from .isotropy import (AffineMap, apply_to_body, estimate_mean_cov,
                       iterated_gaussian_isotropy, rounding_transform)
from .linalg import (CovMatrix, SingularCovarianceError, power_opnorm,
                     stieltjes_u, sym_inv_sqrt, sym_sqrt)
from .needles import NeedleCell, NeedleResult, balanced_split, needle_decompose
from .parallel import parallel_map
from .rng import RngStream, as_generator
from .sloc import (LocalizationState, ObservablePool, SlocError,
                   TrajectoryRecord, moment_inequality_check, sloc_closed_form,
                   sloc_init, sloc_run, sloc_step, stieltjes_potential)
from .volume import (AnnealSchedule, CutPlaneResult, OptimizeResult,
                     OracleInconsistencyError, VolumePhaseError, VolumeResult,
                     anneal_optimize, ball_schedule, cutting_plane_feasibility,
                     dfk_volume, exponential_schedule, gaussian_cooling_schedule,
                     gaussian_cooling_volume, log_ball_volume,
                     lv_annealing_volume, optimize_schedule, ratio_estimator,
                     separation_oracle_for)
from .walks import (ChainState, WalkError, ball_walk_step,
                    coordinate_hit_and_run_step, default_delta, exact_sample,
                    hit_and_run_step, make_stepper, metropolis_step, run_chain,
                    sample_chord_point, warm_start)
from .config import ConfigError, ExperimentConfig, parse_config
