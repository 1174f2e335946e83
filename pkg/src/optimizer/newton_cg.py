"""
Globalized inexact Newton-CG

Each outer iteration solves the forward and adjoint problems once (gradient),
runs CG on H s = -g with Hessian actions from incremental solves, stops CG
at the Eisenstat-Walker forcing tolerance or on negative curvature, and
globalizes with Armijo backtracking.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional, Union

import numpy as np
import pandas as pd

from src.errors import (
    LinearSolveError,
    LineSearchError,
    ParameterError,
    TimestepDivergedError,
    TumorCalError,
)
from src.grid.field import FieldPair, ParamPair, ScalarField
from src.inverse.adjoint import CostBreakdown, GradientPair
from src.inverse.observation import ObservationSet
from src.inverse.problem import MODES, CalibrationProblem
from src.inverse.regularization import RegOperator
from src.model.forward import TimeGrid

logger = logging.getLogger(__name__)

HessianApply = Callable[[FieldPair], GradientPair]

HISTORY_COLUMNS = [
    "iter",
    "cost",
    "misfit",
    "regD",
    "regG",
    "grad_norm",
    "cg_iters",
    "cg_exit",
    "alpha",
]


@dataclass(frozen=True)
class NewtonCGConfig:
    """Outer Newton, inner CG and line-search settings"""

    max_newton_iters: int = 50
    grad_rtol: float = 1e-6
    grad_atol: float = 1e-12
    cg_max_iters: int = 200
    forcing_exponent: float = 0.5
    forcing_cap: float = 0.5
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 25
    param_floor_D: float = 1e-10
    mode: str = "direct"
    gauss_newton: bool = False
    gauss_newton_iters: int = 0
    precondition: bool = False

    def __post_init__(self):
        errors = []
        if self.max_newton_iters < 0:
            errors.append("max_newton_iters must be >= 0")
        if not self.grad_rtol > 0 or not self.grad_atol > 0:
            errors.append("grad_rtol and grad_atol must be > 0")
        if self.cg_max_iters < 1:
            errors.append("cg_max_iters must be >= 1")
        if not self.forcing_exponent > 0:
            errors.append("forcing_exponent must be > 0")
        if not 0 < self.forcing_cap < 1:
            errors.append("forcing_cap must lie in (0, 1)")
        if not 0 < self.armijo_c < 1:
            errors.append("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            errors.append("backtrack_factor must lie in (0, 1)")
        if self.max_backtracks < 0:
            errors.append("max_backtracks must be >= 0")
        if not self.param_floor_D > 0:
            errors.append("param_floor_D must be > 0")
        if self.mode not in MODES:
            errors.append(f"mode must be one of {MODES}")
        if self.gauss_newton_iters < 0:
            errors.append("gauss_newton_iters must be >= 0")
        if errors:
            raise ParameterError("; ".join(errors))

    def uses_gauss_newton(self, iteration: int) -> bool:
        return self.gauss_newton or iteration < self.gauss_newton_iters


class CGResult(NamedTuple):
    direction: GradientPair
    exit_reason: str  # converged | negative_curvature | max_iterations
    iterations: int


class LineSearchResult(NamedTuple):
    alpha: float
    params: ParamPair
    cost: Union[float, CostBreakdown]
    backtracks: int


@dataclass
class IterationRecord:
    iter: int
    cost: float
    misfit: float
    regD: float
    regG: float
    grad_norm: float
    cg_iters: int = 0
    cg_exit: str = ""
    alpha: float = 0.0


@dataclass
class CalibrationResult:
    params_final: ParamPair
    history: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    @property
    def iterations(self) -> int:
        """Accepted Newton steps"""
        return max(len(self.history) - 1, 0)

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.history], columns=HISTORY_COLUMNS)

    def to_csv(self, path: Union[str, Path]):
        self.history_frame().to_csv(path, index=False, float_format="%.16e")


def cg_steihaug(
    hess_apply: HessianApply,
    g: GradientPair,
    forcing_tol: float,
    max_iters: int,
    preconditioner: Optional[Callable[[FieldPair], GradientPair]] = None,
) -> CGResult:
    """Approximately solve H s = -g, stopping on negative curvature

    On negative curvature at the first iteration the steepest-descent
    direction -g is returned; later, the current iterate.
    """
    if g.norm() == 0:
        raise ParameterError("cg_steihaug needs a nonzero gradient")

    precond = preconditioner or (lambda r: r)
    s = GradientPair.zeros_like(g)
    r = -g
    z = precond(r)
    d = z
    rz = r.dot(z)
    tol = forcing_tol * r.norm()

    for i in range(max_iters):
        Hd = hess_apply(d)
        curvature = d.dot(Hd)
        if curvature <= 0:
            if i == 0:
                return CGResult(-g, "negative_curvature", 1)
            return CGResult(s, "negative_curvature", i + 1)

        alpha = rz / curvature
        s = s + alpha * d
        r = r - alpha * Hd
        if r.norm() <= tol:
            return CGResult(s, "converged", i + 1)

        z = precond(r)
        rz_new = r.dot(z)
        d = z + (rz_new / rz) * d
        rz = rz_new

    if max_iters < 1:
        return CGResult(-g, "max_iterations", 0)
    return CGResult(s, "max_iterations", max_iters)


def _total(value: Union[float, CostBreakdown]) -> float:
    return value.total if isinstance(value, CostBreakdown) else float(value)


def armijo_linesearch(
    params: ParamPair,
    direction: FieldPair,
    g: FieldPair,
    cost_fn: Callable[[ParamPair], Union[float, CostBreakdown]],
    config: NewtonCGConfig,
    cost0: Optional[float] = None,
    retract: Optional[Callable[[ParamPair, FieldPair, float], ParamPair]] = None,
) -> LineSearchResult:
    """Largest alpha in {1, b, b^2, ...} with sufficient decrease and D above the floor"""
    retract = retract or (lambda p, s, a: p.shifted(s, a))
    slope = g.dot(direction)
    if not slope < 0:
        raise ParameterError(f"line search needs a descent direction, inner(g, s) = {slope:g}")
    if cost0 is None:
        cost0 = _total(cost_fn(params))

    alpha = 1.0
    for backtrack in range(config.max_backtracks + 1):
        if backtrack:
            alpha *= config.backtrack_factor
        try:
            trial = retract(params, direction, alpha)
        except ParameterError:
            logger.debug("alpha=%.3e rejected: infeasible parameters", alpha)
            continue
        if trial.D.min() <= config.param_floor_D:
            logger.debug("alpha=%.3e rejected: D below floor", alpha)
            continue
        try:
            value = cost_fn(trial)
        except (TimestepDivergedError, LinearSolveError) as e:
            logger.warning("alpha=%.3e rejected: forward solve failed (%s)", alpha, e)
            continue

        if _total(value) <= cost0 + config.armijo_c * alpha * slope:
            return LineSearchResult(alpha, trial, value, backtrack)

    raise LineSearchError(config.max_backtracks)


class NewtonCGSolver:
    """Inexact Newton-CG driver for a CalibrationProblem"""

    def __init__(self, problem: CalibrationProblem, config: Optional[NewtonCGConfig] = None):
        self.problem = problem
        self.config = config or NewtonCGConfig(mode=problem.mode)
        if self.config.mode != problem.mode:
            raise ParameterError(
                f"config mode {self.config.mode!r} differs from problem mode {problem.mode!r}"
            )

    def _record(self, it: int, cost: CostBreakdown, gnorm: float, **extra) -> IterationRecord:
        return IterationRecord(
            iter=it,
            cost=cost.total,
            misfit=cost.misfit,
            regD=cost.reg_D,
            regG=cost.reg_G,
            grad_norm=gnorm,
            **extra,
        )

    def solve(self, params0: ParamPair) -> CalibrationResult:
        cfg = self.config
        problem = self.problem
        if params0.D.min() <= cfg.param_floor_D:
            raise ParameterError(
                f"initial diffusivity must exceed the floor {cfg.param_floor_D:g}"
            )

        params = params0
        try:
            lin = problem.linearize(params)
        except TumorCalError as e:
            return CalibrationResult(params0, [], False, f"initial evaluation failed: {e}")

        g0 = lin.gradient.norm()
        tol = max(cfg.grad_rtol * g0, cfg.grad_atol)
        result = CalibrationResult(params0, [self._record(0, lin.cost, g0)])
        logger.info("Newton-CG start: cost %.6e, |g| %.6e, target %.3e", lin.cost.total, g0, tol)

        precond = problem.regularization_preconditioner() if cfg.precondition else None
        it = 0
        while True:
            gnorm = lin.gradient.norm()
            if gnorm <= tol:
                result.converged = True
                result.reason = "gradient tolerance reached"
                break
            if it >= cfg.max_newton_iters:
                result.reason = "maximum Newton iterations reached"
                break

            eta = min(cfg.forcing_cap, (gnorm / g0) ** cfg.forcing_exponent)
            hess = problem.hessian_operator(lin, gauss_newton=cfg.uses_gauss_newton(it))
            try:
                cg = cg_steihaug(hess, lin.gradient, eta, cfg.cg_max_iters, precond)
                ls = armijo_linesearch(
                    params,
                    cg.direction,
                    lin.gradient,
                    problem.cost,
                    cfg,
                    cost0=lin.cost.total,
                    retract=problem.retract,
                )
                params = ls.params
                lin = problem.linearize(params)
            except LineSearchError as e:
                result.reason = str(e)
                break
            except TumorCalError as e:
                result.reason = f"solver failure: {e}"
                break

            it += 1
            gnorm = lin.gradient.norm()
            result.history.append(
                self._record(
                    it,
                    lin.cost,
                    gnorm,
                    cg_iters=cg.iterations,
                    cg_exit=cg.exit_reason,
                    alpha=ls.alpha,
                )
            )
            logger.info(
                "iter %2d  cost %.6e  misfit %.3e  |g| %.3e  cg %3d (%s)  alpha %.3g  eta %.2e",
                it,
                lin.cost.total,
                lin.cost.misfit,
                gnorm,
                cg.iterations,
                cg.exit_reason,
                ls.alpha,
                eta,
            )

        result.params_final = params
        logger.info(
            "Newton-CG %s after %d iterations: %s",
            "converged" if result.converged else "stopped",
            it,
            result.reason,
        )
        return result


def newton_cg(
    params0: ParamPair,
    u0: ScalarField,
    time_grid: TimeGrid,
    obs: ObservationSet,
    regD: RegOperator,
    regG: RegOperator,
    config: Optional[NewtonCGConfig] = None,
) -> CalibrationResult:
    """Minimize J(D, G) from params0"""
    config = config or NewtonCGConfig()
    problem = CalibrationProblem(u0, time_grid, obs, regD, regG, mode=config.mode)
    return NewtonCGSolver(problem, config).solve(params0)


def relative_parameter_error(
    estimate: ParamPair, truth: ParamPair, support: Optional[ScalarField] = None
) -> float:
    """Joint relative L2 error ||estimate - truth|| / ||truth|| over support cells"""
    weight = np.ones(truth.D.values.size) if support is None else support.values
    num = sum(np.sum(weight * (e.values - t.values) ** 2) for e, t in zip(estimate.parts, truth.parts))
    den = sum(np.sum(weight * t.values**2) for t in truth.parts)
    if den == 0:
        raise ParameterError("truth has zero norm on the support")
    return float(np.sqrt(num / den))
