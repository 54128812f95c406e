"""Symmetric periodic orbits of the generalized Sitnikov problem.

The satellite moves on the axis of a D_d-symmetric n-body configuration,
z'' = -sum_j m_j z / (rho_j^2 + z^2)^(3/2). Orbits are seeded at the
circularized conservative problem and continued to the true primary motion.
Set SITNIKOV_DISABLE_JIT=1 before import to run the kernels uncompiled.
"""
__version__ = "0.1.0"

from ._jit import USE_NUMBA
from .errors import *  # noqa: F401,F403
from .primaries import (CircularOrbit, KeplerOrbit, PrimaryEnsemble, SampledOrbit, SymmetrySpec,
                        TrajectoryTable, build_circular_polygon, build_kepler_pair,
                        certify_symmetry, find_symmetry, ingest_trajectory, nbody_integrate,
                        radial_constants, read_trajectory)
from .field import FieldBounds, HomotopyField, field_bounds
from .conservative import (U0, amplitude_of_energy, energy_min, minimal_period,
                           period_by_integration, period_function, solve_seed,
                           variational_solution)
from .shooting import (FullProfile, count_zeros, full_from_shot, integrate_full, shoot,
                       verify_solution, winding_number)
from .continuation import (Branch, BranchPoint, ContinuationConfig, continue_branch,
                           distinctness_check, monitor_bound, monitor_trivial, polish_endpoint)
from .spectral import (SLWeight, SpectralReport, finite_difference_eigenvalues,
                       sturm_eigenvalues, verify_comparison_bounds)
