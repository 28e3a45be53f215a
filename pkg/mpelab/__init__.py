"""Multiplicative Poisson equation toolkit for finite Markov chains."""
from .errors import MpeLabError
from .kernel import build_kernel, invariant_measure, iterate_kernel
from .models import FiniteKernel, MpeSolution, RewardFunction, SolveStatus, StateSpace
from .mpe import SolveOptions, existence_certificate, solve_mpe, verify_mpe

__version__ = "0.1.0"
