"""Dual averaging over probability densities on compact metric spaces.

Learners play densities ``x_t = phi(eta_t (U_t + nu_t))_+`` built from the
cumulative reward ``U_t``; the package also ships online convex optimization
baselines, reward streams, regret accounting with bound calculators and
continuous two-player zero-sum games.
"""
from .adversaries import AlternatingAffineStream, QuadraticStream, RademacherStream, parse_stream
from .baselines import ALGORITHMS, make_learner
from .domains import Hypercube, Interval, LShape, parse_domain
from .dual_averaging import DensityState, LearningRate, da_step, dual_map, entropy_closed_form, solve_nu_star
from .errors import (
    ConfigError,
    EnvelopeError,
    MembershipError,
    NumericError,
    OutOfDomainError,
    SolverError,
    StaleStateError,
    StreamContractError,
    UnsupportedDomainError,
)
from .games import builtin_game, cdf_distance, empirical_distribution, partial_payoffs, run_repeated_game
from .potentials import ExponentialPotential, RhoNormPotential, parse_potential
from .regret import RegretLedger, bound_fdiv, bound_lower, fit_rate, worst_case_regret

__version__ = "0.1.0"
