"""Exception hierarchy shared across the package."""


class NumericalError(RuntimeError):
    """A solver invariant broke mid-run.

    ``iteration`` is filled in by the solver loop (1-based) when known.
    """

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration

    def __str__(self) -> str:
        base = super().__str__()
        if self.iteration is None:
            return base
        return f"{base} (iteration {self.iteration})"


class ScalingViolation(NumericalError):
    """A pre-scaled gradient exceeded unit norm: the declared bound G is wrong."""


class WealthExhausted(NumericalError):
    """A bettor's wealth dropped to zero or below."""


class DataError(ValueError):
    """Base class for dataset ingestion problems."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class FormatError(ParseError):
    pass


class EmptyDatasetError(DataError):
    pass


class RemapError(DataError):
    def __init__(self, label: float):
        super().__init__(f"raw label {label!r} is not covered by the remap rule")
        self.label = label


class InfiniteDivergence(ValueError):
    """KL(p, q) with p_i > 0 where q_i = 0."""


class ConfigError(ValueError):
    pass
