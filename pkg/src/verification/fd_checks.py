"""
Finite-difference verification of gradients and Hessian actions

One-sided Taylor tests along a random direction s:

    gradient:  r(eps) = | (J(x + eps s) - J(x)) / eps - inner(g(x), s) |
    Hessian:   r(eps) = || (g(x + eps s) - g(x)) / eps - H(x) s ||

Both residuals decay like O(eps) until roundoff takes over at small eps.
An eps whose trial point has negative D is skipped and reported as nan.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.config import Config
from src.errors import ParameterError
from src.grid.field import ParamPair, ScalarField
from src.grid.grid import Grid2D
from src.inverse.adjoint import GradientPair
from src.inverse.problem import CalibrationProblem

logger = logging.getLogger(__name__)

DEFAULT_EPSILONS = tuple(10.0**-k for k in range(1, 11))
FIT_WINDOW = (1e-5, 1e-2)
DECADE_RATIO_RANGE = (7.0, 13.0)


@dataclass(frozen=True)
class FDCheckReport:
    """Residuals r(eps) of one Taylor test and their fitted decay"""

    name: str
    epsilons: Tuple[float, ...]
    residuals: Tuple[float, ...]
    slope: float
    guide_constant: float
    seed: int

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        res = tuple(float(r) for r in self.residuals)
        if len(eps) != len(res):
            raise ParameterError(f"{len(eps)} epsilons but {len(res)} residuals")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ParameterError("epsilons must be strictly decreasing")
        if any(r < 0 for r in res):
            raise ParameterError("residuals must be nonnegative")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "residuals", res)

    def decade_ratios(self) -> List[Optional[float]]:
        """r(eps_i) / r(eps_{i+1}) for consecutive epsilons one decade apart

        None marks pairs that are not a decade apart or have a zero residual.
        """
        ratios = []
        for (e0, r0), (e1, r1) in zip(
            zip(self.epsilons, self.residuals), zip(self.epsilons[1:], self.residuals[1:])
        ):
            if r1 > 0 and np.isclose(e0 / e1, 10.0):
                ratios.append(r0 / r1)
            else:
                ratios.append(None)
        return ratios

    def linear_decades(self, ratio_range: Tuple[float, float] = DECADE_RATIO_RANGE) -> int:
        """Length of the longest run of decade ratios inside ratio_range"""
        lo, hi = ratio_range
        best = run = 0
        for ratio in self.decade_ratios():
            run = run + 1 if ratio is not None and lo <= ratio <= hi else 0
            best = max(best, run)
        return best

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"epsilon": self.epsilons, "r": self.residuals})

    def to_csv(self, path: Union[str, Path]):
        self.to_frame().to_csv(path, index=False, float_format="%.16e", na_rep="nan")


def fit_decay(
    epsilons: Sequence[float],
    residuals: Sequence[float],
    window: Tuple[float, float] = FIT_WINDOW,
) -> Tuple[float, float]:
    """Least-squares slope of log r vs log eps in window, and the constant C of r ~ C eps"""
    eps = np.asarray(epsilons, dtype=float)
    res = np.asarray(residuals, dtype=float)
    keep = (eps >= window[0] * (1 - 1e-12)) & (eps <= window[1] * (1 + 1e-12)) & (res > 0)
    if keep.sum() < 2:
        logger.warning("fewer than two usable residuals in the fit window %s", window)
        return float("nan"), float("nan")
    log_e = np.log10(eps[keep])
    log_r = np.log10(res[keep])
    slope = float(np.polyfit(log_e, log_r, 1)[0])
    guide = float(10.0 ** np.mean(log_r - log_e))
    return slope, guide


def random_direction(grid: Grid2D, seed: int) -> GradientPair:
    """White-noise direction, i.i.d. standard normal per cell and component"""
    rng = np.random.default_rng(seed)
    n = grid.n_active
    return GradientPair(
        ScalarField(grid, rng.standard_normal(n)), ScalarField(grid, rng.standard_normal(n))
    )


def _check_epsilons(epsilons: Sequence[float]) -> Tuple[float, ...]:
    eps = tuple(float(e) for e in epsilons)
    if not eps:
        raise ParameterError("at least one epsilon is required")
    if any(not 0 < e < 1 for e in eps):
        raise ParameterError("epsilons must lie in (0, 1)")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ParameterError("epsilons must be strictly decreasing")
    return eps


def _sweep(eps: Tuple[float, ...], name: str, show_progress: Optional[bool]):
    show = Config.SHOW_PROGRESS if show_progress is None else show_progress
    return tqdm(eps, desc=f"{name} check", unit="eps", disable=not show)


def _trial_point(
    problem: CalibrationProblem, params0: ParamPair, direction: GradientPair, eps: float
) -> Optional[ParamPair]:
    if problem.trial_min_diffusivity(params0, direction, eps) < 0:
        logger.warning("eps=%.1e skipped: trial point has negative diffusivity", eps)
        return None
    return problem.retract(params0, direction, eps)


def _report(name: str, eps, residuals, seed: int) -> FDCheckReport:
    slope, guide = fit_decay(eps, residuals)
    report = FDCheckReport(name, eps, tuple(residuals), slope, guide, seed)
    logger.info(
        "%s check: slope %.3f over [%g, %g], %d linear decades, C = %.3e",
        name,
        slope,
        *FIT_WINDOW,
        report.linear_decades(),
        guide,
    )
    return report


def fd_gradient_check(
    params0: ParamPair,
    problem: CalibrationProblem,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    seed: int = 0,
    show_progress: Optional[bool] = None,
) -> FDCheckReport:
    """Taylor test of the adjoint gradient at params0"""
    eps = _check_epsilons(epsilons)
    direction = random_direction(params0.grid, seed)
    lin = problem.linearize(params0)
    cost0 = lin.cost.total
    slope0 = lin.gradient.dot(direction)

    residuals = []
    for e in _sweep(eps, "gradient", show_progress):
        trial = _trial_point(problem, params0, direction, e)
        if trial is None:
            residuals.append(float("nan"))
            continue
        cost1 = problem.cost(trial).total
        residuals.append(abs((cost1 - cost0) / e - slope0))
        logger.debug("eps=%.1e r=%.6e", e, residuals[-1])
    return _report("gradient", eps, residuals, seed)


def fd_hessian_check(
    params0: ParamPair,
    problem: CalibrationProblem,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    seed: int = 0,
    show_progress: Optional[bool] = None,
    gauss_newton: bool = False,
) -> FDCheckReport:
    """Taylor test of the Hessian action at params0

    With ``gauss_newton`` the residual no longer decays at noisy or
    non-optimal points; it is there to expose the dropped terms.
    """
    eps = _check_epsilons(epsilons)
    direction = random_direction(params0.grid, seed)
    lin = problem.linearize(params0)
    g0 = lin.gradient
    Hs = problem.hessian_apply(lin, direction, gauss_newton=gauss_newton)

    residuals = []
    for e in _sweep(eps, "hessian", show_progress):
        trial = _trial_point(problem, params0, direction, e)
        if trial is None:
            residuals.append(float("nan"))
            continue
        g1 = problem.gradient(trial)
        residuals.append(((g1 - g0) * (1.0 / e) - Hs).norm())
        logger.debug("eps=%.1e r=%.6e", e, residuals[-1])
    return _report("hessian", eps, residuals, seed)


def hessian_symmetry_check(
    params0: ParamPair,
    problem: CalibrationProblem,
    n_pairs: int = 5,
    seed: int = 0,
    gauss_newton: bool = False,
) -> float:
    """max over random pairs of |inner(Hv, w) - inner(v, Hw)| / (|v| |w|)"""
    if n_pairs < 1:
        raise ParameterError(f"n_pairs must be >= 1, got {n_pairs}")
    lin = problem.linearize(params0)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        v = random_direction(params0.grid, int(rng.integers(2**31)))
        w = random_direction(params0.grid, int(rng.integers(2**31)))
        Hv = problem.hessian_apply(lin, v, gauss_newton=gauss_newton)
        Hw = problem.hessian_apply(lin, w, gauss_newton=gauss_newton)
        asym = abs(Hv.dot(w) - v.dot(Hw)) / (v.norm() * w.norm())
        worst = max(worst, asym)
    logger.info("Hessian symmetry: max relative asymmetry %.3e over %d pairs", worst, n_pairs)
    return worst
