"""Picard solver, localization certificates and fixed point index checks for
coupled semilinear Poisson systems on the unit disk."""

from .certify import (BoundSet, Certificate, LocalizationBox, check_nonnegativity,
                      check_solution_in_box, verify_conditions)
from .disk import Grid, GridFunction, greens_mass, integrate, norm_inf, sample
from .exprlang import Expr, evaluate, parse, to_source
from .hammerstein import (IterationTrace, ProblemSpec, SolutionPair, apply_T,
                          check_invariance, picard_solve)
from .index_oracle import (ConicalShell, MapUnderTest, brouwer_index, check_boundary_conditions,
                           retract_rho1, verify_theorem_cases)
from .poisson import LaplaceOperator, assemble, greens_apply, solve_poisson

__version__ = "0.1.0"
