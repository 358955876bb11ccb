"""Upper bounds on the volume of semi-algebraic sets via the moment-SOS
hierarchy, with and without Stokes constraints."""
from .assembly import (
    Certificate,
    DecodingMap,
    DegreeError,
    SolveError,
    Variant,
    assemble,
    assemble_moment,
    assemble_sos,
    decode,
)
from .moments import Box, LpBall, MomentVector, lp_ball_moments, moments_of, riesz
from .poly import MonomialBasis, Polynomial, enumerate_monomials
from .scenario import ScenarioSpec, get_scenario, registry
from .sdp import SdpProblem, SdpSolution, Status
from .solver import SolverOptions, residuals, solve

__version__ = "0.1.0"
