"""Exception types raised across the package."""


class StratGraphError(Exception):
    """Base class for all package errors."""


class InvalidArgument(StratGraphError, ValueError):
    pass


class NodeImmobileError(StratGraphError):
    """A node with zero self-weight was asked to respond."""


class DegenerateClassifierError(StratGraphError):
    """theta has zero norm, so the decision boundary is undefined."""


class InternalInvariantError(StratGraphError, RuntimeError):
    """Something that the theory guarantees did not happen. Indicates a bug."""


class TrainingFailure(StratGraphError, RuntimeError):
    pass


class BundleFormatError(StratGraphError):
    """A dataset bundle on disk is malformed or inconsistent."""
