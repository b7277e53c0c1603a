"""Exception and warning types shared across the package."""


class SleepWakeError(Exception):
    """Base class for domain errors (mapped to exit code 1 by the CLI)."""


class InvalidFactor(SleepWakeError, ValueError):
    pass


class NonFiniteState(SleepWakeError, FloatingPointError):
    def __init__(self, t, component, message=None):
        self.t = t
        self.component = component
        super().__init__(message or f"non-finite value in component {component!r} at t={t!r}")


class ScheduleOutOfRange(SleepWakeError, ValueError):
    pass


class NoRootInInterval(SleepWakeError, ValueError):
    pass


class MultipleRoots(SleepWakeError):
    """More than one nullcline intersection in the search interval."""

    def __init__(self, roots):
        self.roots = list(roots)
        super().__init__(f"{len(self.roots)} fixed points in interval: "
                         + ", ".join(f"gaba={r.gaba_vlpo:.6g}" for r in self.roots))


class ConvergenceFailure(SleepWakeError):
    pass


class SingularSystem(SleepWakeError):
    pass


class SearchExhausted(SleepWakeError):
    def __init__(self, result):
        self.result = result
        super().__init__(f"no candidate accepted in {result.iterations} iterations; "
                         f"best max Re(lambda) = {result.max_real_part:.6g}")


class InsufficientEvents(SleepWakeError):
    pass


class IncompatibleKind(SleepWakeError, ValueError):
    pass


class ParseError(SleepWakeError, ValueError):
    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = ":".join(str(p) for p in (path, line, column) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(ParseError):
    pass


class AmbiguousTransition(UserWarning):
    """Zero crossing of AD - GABA_VLPO without the expected derivative signs."""


class NegativeConcentration(UserWarning):
    pass
