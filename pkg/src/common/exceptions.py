"""
Error types raised across the package. Most derive from `ValueError`, so code that only catches `ValueError` keeps
working.
"""


class DimensionError(ValueError):
    """Tensor or vector widths do not agree."""


class ContractError(ValueError):
    """A precondition of an operation was violated by the caller."""


class NumericalError(FloatingPointError):
    """
    A NaN or infinite value showed up where finite values are required.

    Args:
        message (str): The error message.
        parameter_name (str, optional): Name of the offending parameter or tensor.
    """
    def __init__(self, message, parameter_name=None):
        super().__init__(message)
        self.parameter_name = parameter_name


class GraphCycleError(ValueError):
    """
    The strategy graph contains a directed cycle.

    Args:
        message (str): The error message.
        cycle (list of str): The node ids on the cycle, in edge order.
    """
    def __init__(self, message, cycle=None):
        super().__init__(message)
        self.cycle = list(cycle) if cycle is not None else []


class GraphReferenceError(ValueError):
    """A node refers to a parent that does not exist, or the node definition itself is malformed."""


class SequencingError(ValueError):
    """A node was evaluated before all of its parents were sampled."""


class DomainError(ValueError):
    """A value lies outside the domain of the operation (for example an action on its bound)."""


class ConfigurationError(ValueError):
    """A configuration file or object is invalid or incomplete."""


class CheckpointError(ValueError):
    """A checkpoint is unreadable or incompatible with the requested use."""


class EmptyInputError(ValueError):
    """An operation received no data to work on."""


class NonConvergenceError(RuntimeError):
    """
    An iterative procedure did not converge.

    Args:
        message (str): The error message.
        residuals (list of float): The residual history up to the failure.
    """
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []
