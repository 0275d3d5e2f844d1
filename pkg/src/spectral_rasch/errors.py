"""Exception hierarchy shared by all modules."""


class SpectralRaschError(Exception):
    """Base class for every error raised by this package."""


class ContractError(SpectralRaschError, ValueError):
    """An input violates the documented precondition of an operation."""


class ParseError(SpectralRaschError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidNormalizerError(ContractError):
    """A normalizer is too small and would produce a negative diagonal."""


class NotErgodicError(SpectralRaschError):
    """The item graph is not strongly connected, so the stationary
    distribution is not unique."""

    def __init__(self, components):
        self.components = [sorted(int(i) for i in c) for c in components]
        shown = "; ".join(str(c) for c in self.components[:10])
        more = "" if len(self.components) <= 10 else f" (+{len(self.components) - 10} more)"
        super().__init__(
            f"item graph has {len(self.components)} strongly connected components: {shown}{more}"
        )


class ConvergenceError(SpectralRaschError):
    """An iterative solver ran out of iterations.

    ``last`` holds the final iterate and ``residual`` its residual so callers
    can still inspect or reuse them.
    """

    def __init__(self, message, last=None, residual=None, iterations=None):
        self.last = last
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class DegenerateItemError(SpectralRaschError):
    def __init__(self, items, message=None):
        self.items = [int(i) for i in items]
        super().__init__(message or f"degenerate item(s) {self.items}: parameter is not finite")


class IncompleteMatrixError(SpectralRaschError):
    def __init__(self, pair):
        self.pair = tuple(int(i) for i in pair)
        super().__init__(f"no differential measurements for item pair {self.pair}")


class UndefinedMetricError(SpectralRaschError):
    """A metric cannot be computed on the given input (e.g. one class only)."""
