"""Exception hierarchy shared by all modules."""


class MFEError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class StructuralError(MFEError, ValueError):
    """A system matrix or wave vector violates a structural requirement."""

    exit_code = 2

    def __init__(self, matrix, defect, message=None):
        self.matrix = matrix
        self.defect = defect
        super().__init__(message or f"{matrix}: structural check failed (defect {defect:.3e})")


class AssumptionError(MFEError):
    """A solvability matrix L_j is numerically singular."""

    exit_code = 3

    def __init__(self, j, sigma_min, message=None):
        self.j = j
        self.sigma_min = sigma_min
        super().__init__(message or f"L_{j} is numerically singular (sigma_min = {sigma_min:.3e})")


class DegenerateBranchError(AssumptionError):
    """The selected eigenvalue is not simple."""

    def __init__(self, gap):
        super().__init__(1, gap, f"selected eigenvalue is not simple (gap = {gap:.3e})")
        self.gap = gap


class BranchTrackingError(AssumptionError):
    """Eigenvector overlap between neighbouring wave vectors is too small."""

    def __init__(self, overlap):
        super().__init__(1, overlap, f"lost track of eigenvalue branch (overlap = {overlap:.3f})")
        self.overlap = overlap


class PeriodizationError(MFEError, ValueError):
    exit_code = 2


class AdmissibilityError(MFEError, ValueError):
    exit_code = 2


class GridMismatchError(MFEError, ValueError):
    exit_code = 2


class ProjectionError(MFEError, ValueError):
    exit_code = 2


class TauMismatchError(MFEError, ValueError):
    exit_code = 2


class RecursionDepthError(MFEError, RuntimeError):
    """The derivative recursion revisited a field still under construction."""


class BlowupError(MFEError, FloatingPointError):
    exit_code = 4
