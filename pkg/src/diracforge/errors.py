"""Exception types shared across the package."""


class DiracForgeError(Exception):
    """Base class for all library errors."""


class StructuralError(DiracForgeError):
    """A dimension or shape mismatch in the input data."""


class SurfaceSampleError(DiracForgeError):
    """The Gauss-Newton projection onto the constraint surface did not converge."""


class ChainGenerationError(DiracForgeError):
    """A requested random chain profile is not realizable."""


class LadderError(DiracForgeError):
    """The projector ladder could not be built to tolerance."""


class NotSecondClassError(DiracForgeError):
    """The constraint matrix does not have full rank M at the working point."""


class MuConstructionError(DiracForgeError):
    """No invertible completion of the singular bracket matrix was found."""


class ParityError(DiracForgeError):
    """An odd-level block has odd size, so no antisymmetric sector form is invertible."""


class RecoveryError(DiracForgeError):
    """The reconstruction map of the irreducible constraints failed verification."""
