"""Exception types shared across the package."""


class MorphForgeError(Exception):
    """Base class for all package-specific errors."""


class DegenerateInput(MorphForgeError):
    """A geometric input is degenerate (zero or parallel basis vectors)."""


class ParseError(MorphForgeError):
    """A document could not be parsed into the expected structure."""


class ValidationError(MorphForgeError):
    """A parsed document or constructed value violates an invariant."""


class SamplingExhausted(MorphForgeError):
    """Rejection sampling hit its retry bound; parameters are likely infeasible."""


class ConstraintViolation(MorphForgeError):
    """Design parameters fall outside the constraint set of their mode."""


class BadSlot(MorphForgeError):
    """A modular slot index does not exist in the catalog."""


class DegeneratePair(MorphForgeError):
    """An (x, y) pair at the origin cannot be mapped to a joint angle."""


class ZeroVector(MorphForgeError):
    """A zero joint vector has no direction for cosine similarity."""


class NonFinite(MorphForgeError):
    """A loss or gradient evaluation produced NaN or infinity."""


class SpaceTooLarge(MorphForgeError):
    """The enumerable design space exceeds the configured cap."""


class JobCancelled(MorphForgeError):
    """A running job was cancelled at a stage boundary."""
