"""Contracted generalized polarization tensors of conductivities on a disk.

Forward maps (NtD operators, GPT tables, far fields), Frechet derivatives
and Landweber reconstruction of radial or gridded conductivities.
"""

from .basis import COS, SIN, BoundaryFunction, DiskGeometry, DiskGrid, HarmonicMode, volume_integrate
from .conductivity import BENCHMARK_EXPRESSION, GriddedConductivity, RadialConductivity, benchmark_profile
from .errors import ConvergenceError, GPTLabError, InadmissibleDataError, SolverError
from .gpt import (
    ContractedGPTTable,
    FirstOrderPT,
    contracted_gpts,
    far_field_eval,
    first_order_pt,
    gpt_boundary_formula,
    gpt_homogeneous_disk,
    gpt_volume_identity,
    positivity_bounds,
)
from .inversion import (
    ReconstructionConfig,
    ReconstructionState,
    Stage,
    discrepancies,
    discrepancy_functional,
    initial_guess,
    initial_state,
    landweber_step,
    recursive_reconstruct,
)
from .ntd import NtDOperator, ntd_exterior, ntd_harmonic, ntd_sigma
from .sensitivity import InteriorStates, frechet_adjoint, frechet_derivative, linearized_perturbation_map

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
