"""Nonlinear waveform relaxation with a shift-and-invert exponential block
Krylov inner solver, reference integrators and benchmark problems."""

from .bounds import BoundInputs, error_to_residual, inexact_rate, linear_rate, residual_to_error, superlinear_bound
from .ebk import EbkParams, WaveformSolution, ebk_solve
from .kernels import phi_scalar
from .ros2 import reference_solution, relative_error, ros2_integrate
from .sparse import Work, factorize_shifted, omega_estimate
from .wr import SplitOde, WrParams, wr_solve, wr_solve_windows

__version__ = "0.1.0"
