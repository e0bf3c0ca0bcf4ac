class GaitformerError(Exception):
    pass


class ConfigError(GaitformerError, ValueError):
    """Invalid hyperparameter or model configuration."""


class ShapeError(GaitformerError, ValueError):
    """Tensor extents that do not line up."""


class ContractError(GaitformerError, ValueError):
    """A caller broke an operation's precondition."""


class DegenerateMaskError(GaitformerError, ValueError):
    pass


class SchemaError(GaitformerError, ValueError):
    """Input file does not follow the documented layout."""


class DivergenceError(GaitformerError, RuntimeError):
    pass
