"""
Exception hierarchy for tumorcal
"""

from typing import List, Optional


class TumorCalError(Exception):
    """Base class for every error raised by tumorcal"""


class DomainError(TumorCalError, ValueError):
    """Invalid grid geometry (empty mask, bad spacing, bad shape)"""


class GridMismatchError(TumorCalError, ValueError):
    """Two fields that must share a grid do not"""


class ParameterError(TumorCalError, ValueError):
    """A numeric constraint on a model or solver parameter is violated"""


class LinearSolveError(TumorCalError):
    """A sparse linear solve produced a non-finite or unconverged result"""


class TimestepDivergedError(TumorCalError):
    """Inner Newton iteration of an implicit timestep did not converge"""

    def __init__(
        self,
        step: Optional[int] = None,
        time: Optional[float] = None,
        iterations: int = 0,
        residual: float = float("nan"),
    ):
        self.step = step
        self.time = time
        self.iterations = iterations
        self.residual = residual
        where = f"step {step}" if step is not None else "step ?"
        if time is not None:
            where += f" (t={time:g})"
        super().__init__(
            f"timestep diverged at {where} after {iterations} Newton iterations, "
            f"residual {residual:.3e}"
        )


class LineSearchError(TumorCalError):
    """Armijo backtracking exhausted without an acceptable step"""

    def __init__(self, backtracks: int):
        self.backtracks = backtracks
        super().__init__(f"line search failed after {backtracks} backtracks")


class ConfigError(TumorCalError, ValueError):
    """Run configuration could not be parsed or validated"""

    def __init__(self, messages: List[str], path: Optional[str] = None):
        self.messages = list(messages)
        self.path = path
        head = f"invalid configuration {path}" if path else "invalid configuration"
        super().__init__(head + ": " + "; ".join(self.messages))
