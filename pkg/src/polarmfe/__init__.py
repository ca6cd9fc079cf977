"""Polarized solutions of semilinear hyperbolic systems via modulated Fourier expansions."""
__version__ = "0.1.0"

from .errors import (AdmissibilityError, AssumptionError, BlowupError, BranchTrackingError,
                     DegenerateBranchError, GridMismatchError, MFEError, PeriodizationError,
                     ProjectionError, RecursionDepthError, StructuralError, TauMismatchError)
from .model import (Branch, EnvelopeSpec, SystemSpec, Trilinear, builtin_klein_gordon,
                    make_polarized_envelope, validate_system)
from .field import EnvelopeField, GridSpec, apply_B, shift_evaluate, trilinear_apply, wiener_norm
from .dispersion import DispersionData, compute_dispersion
from .mfe import IndexSet, MFEContext, ModulationHierarchy, assemble_vtilde, enumerate_terms, residual
from .schroedinger import HierarchyState, initial_state, propagate, solve_hierarchy
from .reconstruct import ReconstructionPlan, evaluate_mfe, make_plan, polarized_initial_data
from .reference import OscillatorySolverConfig, mode_propagator, reference_solve
from .config import RunConfig, RunSettings, load_config
from .study import RunReport, fit_log2_slope, run_convergence
