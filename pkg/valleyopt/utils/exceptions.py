from typing import Optional


class ValleyParseError(ValueError):
    """ Instance file could not be parsed """

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None,
                 column: Optional[int] = None):
        location = ""
        if path is not None:
            location += f"{path}"
        if line is not None:
            location += f":{line}"
            if column is not None:
                location += f":{column}"
        super().__init__(f"{location}: {message}" if location else message)
        self.path = path
        self.line = line
        self.column = column


class InfeasibleControlError(ValueError):
    """ A control outside the admissible range reached the dynamics. Signals a solver bug. """


class EmptyControlRangeError(ValueError):
    """ Not even the smallest turbine level is admissible. Signals inconsistent instance data. """


class OutOfBoxError(ValueError):
    """ Value function queried outside its state box beyond tolerance """


class BudgetExceededError(RuntimeError):
    """ An enumeration would exceed the configured computational budget """


class SampleCountError(ValueError):
    """ Monte Carlo estimation requested with no samples """


class ConvergenceWarning(UserWarning):
    """ Iterative method stopped before reaching its tolerance """
