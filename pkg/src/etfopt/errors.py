"""Exception types raised across the toolkit.

Every error derives from :class:`EtfoptError` so callers can catch the whole
family; most also derive from ``ValueError`` because they signal bad input.
"""


class EtfoptError(Exception):
    """Base class for toolkit errors."""


# -- market data ---------------------------------------------------------------

class DataError(EtfoptError, ValueError):
    pass


class MalformedRow(DataError):
    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: malformed row ({reason})")


class NonPositivePrice(DataError):
    def __init__(self, path, line, value):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: non-positive price {value!r}")


class DuplicateDate(DataError):
    def __init__(self, path, line, date):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: duplicate date {date}")


class EmptyIntersection(DataError):
    pass


class LengthMismatch(DataError):
    pass


class NoCoverage(DataError):
    pass


# -- portfolio / optimizers ----------------------------------------------------

class ZeroAssets(EtfoptError, ValueError):
    pass


class DimensionMismatch(EtfoptError, ValueError):
    pass


class WindowTooShort(EtfoptError, ValueError):
    pass


class SingularCovariance(EtfoptError, ValueError):
    pass


class DegenerateFrontier(EtfoptError, ValueError):
    pass


class NoTangency(EtfoptError, ValueError):
    pass


class ZeroRiskPortfolio(EtfoptError, ValueError):
    pass


class Infeasible(EtfoptError, ValueError):
    pass


class UnboundedDescent(EtfoptError, ValueError):
    pass


class SolverFailure(EtfoptError, RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        self.iterations = iterations
        self.residual = residual
        detail = []
        if iterations is not None:
            detail.append(f"iterations={iterations}")
        if residual is not None:
            detail.append(f"residual={residual:.3e}")
        if detail:
            message = f"{message} ({', '.join(detail)})"
        super().__init__(message)


# -- metrics -------------------------------------------------------------------

class MetricError(EtfoptError, ValueError):
    pass


class ZeroVolatility(MetricError):
    pass


class EmptySeries(MetricError):
    pass


class ZeroDrawdown(MetricError):
    pass


class TooFewObservations(MetricError):
    pass


class ZeroTailRisk(MetricError):
    pass


class EmptyTail(MetricError):
    pass


class NoDownside(MetricError):
    pass


class DegenerateBenchmark(MetricError):
    pass


# -- tail diagnostics / regression ---------------------------------------------

class InsufficientTail(EtfoptError, ValueError):
    pass


class NonPositiveTailValue(EtfoptError, ValueError):
    pass


class DegenerateX(EtfoptError, ValueError):
    pass


class NoConvergence(EtfoptError, RuntimeError):
    """Iterative fit stopped without meeting its tolerance.

    ``result`` carries the last iterate so callers may still use it.
    """

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


# -- dynamic engine ------------------------------------------------------------

class NonConvergence(NoConvergence):
    pass


class NonPDProjectionFailure(EtfoptError, ValueError):
    pass


class InvalidSeedState(EtfoptError, ValueError):
    pass


# -- backtest / cli ------------------------------------------------------------

class DateAxisMismatch(EtfoptError, ValueError):
    pass


class ConfigError(EtfoptError, ValueError):
    pass


class WindowFailure(EtfoptError, RuntimeError):
    """Unrecoverable error while processing one rolling window."""

    def __init__(self, module, date, cause):
        self.module = module
        self.date = date
        self.cause = cause
        super().__init__(f"[{module}] window ending {date}: {type(cause).__name__}: {cause}")


def origin_module(exc: BaseException) -> str:
    """Name of the innermost toolkit module in ``exc``'s traceback."""
    import os

    here = os.path.dirname(os.path.abspath(__file__))
    name = "etfopt"
    tb = exc.__traceback__
    while tb is not None:
        path = os.path.abspath(tb.tb_frame.f_code.co_filename)
        if os.path.dirname(path) == here:
            name = os.path.splitext(os.path.basename(path))[0]
        tb = tb.tb_next
    return name
