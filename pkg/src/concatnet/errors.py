"""Exception types shared across the pipeline."""


class ConcatnetError(Exception):
    """Base class for all errors raised by this package."""


class DataFormatError(ConcatnetError):
    """Malformed input data: ragged rows, unparseable cells, bad labels."""


class ConfigError(ConcatnetError):
    """Invalid configuration value or combination."""


class ShapeError(ConcatnetError):
    """Tensor or signal shape incompatible with the requested operation."""


class GraphError(ConcatnetError):
    """Autodiff misuse: backward on a detached node or a non-scalar."""


class NumericsError(ConcatnetError):
    """Non-finite value produced where finiteness is an invariant."""


class OptimizerError(ConcatnetError):
    """Optimizer invoked with missing or inconsistent gradients."""


class TrainingError(ConcatnetError):
    """Training cannot start or continue: bad splits, divergence."""


class EvaluationError(ConcatnetError):
    """Evaluation on empty or inconsistent inputs."""
