"""Exact polynomial martingales for processes with independent increments."""

from .algebra import RationalFunction, RFMatrix, TimePolynomial, determinant, solve_linear
from .errors import *  # noqa: F401,F403
from .martingale import (
    MartingaleFamily,
    SpaceTimePolynomial,
    build_family,
    conditional_expectation,
    cross_moment,
    family_from_members,
    iterated_conditional,
    joint_moment,
    linearize_product,
    second_moment,
    structural_matrix,
    to_martingale_basis,
)
from .model import MomentModel, builtin, levy_check, make_model, parse_model, serialize_model
from .report import CheckReport

__version__ = "0.1.0"
