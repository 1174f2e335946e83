"""
Observation operator, noise-weighted data misfit, and synthetic data

B restricts the state to observation steps (unit temporal weight per step)
and, optionally, to a spatial mask per observation. With full spatial
coverage B*B is the identity on observed snapshots.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from src.errors import ParameterError
from src.grid.field import ParamPair, ScalarField, check_same_grid, inner
from src.model.forward import StateTrajectory, TimeGrid, solve_forward

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Data d_k at observation steps, with noise level sigma_noise

    ``masks`` optionally restricts each observation to a subset of cells
    (entries 0/1); None means the whole domain is observed.
    """

    obs_steps: Tuple[int, ...]
    data: Tuple[ScalarField, ...]
    sigma_noise: float
    masks: Optional[Tuple[Optional[ScalarField], ...]] = None
    seed: Optional[int] = None

    def __post_init__(self):
        steps = tuple(int(k) for k in self.obs_steps)
        data = tuple(self.data)
        object.__setattr__(self, "obs_steps", steps)
        object.__setattr__(self, "data", data)

        if any(k < 0 for k in steps):
            raise ParameterError(f"observation steps must be nonnegative, got {steps}")
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise ParameterError(f"observation steps must be strictly increasing, got {steps}")
        if len(data) != len(steps):
            raise ParameterError(
                f"{len(steps)} observation steps but {len(data)} data fields"
            )
        if not (np.isfinite(self.sigma_noise) and self.sigma_noise > 0):
            raise ParameterError(f"sigma_noise must be positive, got {self.sigma_noise}")
        if data:
            check_same_grid(*data)

        if self.masks is not None:
            masks = tuple(self.masks)
            if len(masks) != len(steps):
                raise ParameterError(f"{len(steps)} observation steps but {len(masks)} masks")
            for m in masks:
                if m is None:
                    continue
                check_same_grid(m, data[0])
                if not np.all((m.values == 0) | (m.values == 1)):
                    raise ParameterError("observation masks must contain only 0 and 1")
            object.__setattr__(self, "masks", masks)

    def __len__(self) -> int:
        return len(self.obs_steps)

    def index_of(self, step: int) -> Optional[int]:
        try:
            return self.obs_steps.index(step)
        except ValueError:
            return None

    def restrict(self, idx: int, field: ScalarField) -> ScalarField:
        """Apply the spatial part of B for observation idx"""
        if self.masks is None or self.masks[idx] is None:
            return field
        return field * self.masks[idx]

    def with_sigma(self, sigma_noise: float) -> "ObservationSet":
        return ObservationSet(self.obs_steps, self.data, sigma_noise, self.masks, self.seed)

    def check_range(self, time_grid: TimeGrid):
        for k in self.obs_steps:
            if k > time_grid.Nt:
                raise ParameterError(
                    f"observation step {k} out of range for Nt={time_grid.Nt}"
                )


def _residual(traj: StateTrajectory, obs: ObservationSet, idx: int) -> ScalarField:
    k = obs.obs_steps[idx]
    return obs.restrict(idx, traj[k] - obs.data[idx])


def misfit_cost(traj: StateTrajectory, obs: ObservationSet) -> float:
    """(1 / 2 sigma^2) sum_k ||B(u_k - d_k)||^2"""
    obs.check_range(traj.time_grid)
    total = 0.0
    for idx in range(len(obs)):
        r = _residual(traj, obs, idx)
        total += inner(r, r)
    return total / (2.0 * obs.sigma_noise**2)


def obs_adjoint_source(traj: StateTrajectory, obs: ObservationSet, step: int) -> ScalarField:
    """(1 / sigma^2) B*B(u - d) at step; zero away from observation steps"""
    obs.check_range(traj.time_grid)
    idx = obs.index_of(step)
    if idx is None:
        return ScalarField.zeros(traj.grid)
    check_same_grid(traj[step], obs.data[idx])
    return obs.restrict(idx, _residual(traj, obs, idx)) / obs.sigma_noise**2


def generate_synthetic(
    params_true: ParamPair,
    u0: ScalarField,
    time_grid: TimeGrid,
    obs_steps: Sequence[int],
    sigma: float,
    seed: int,
    sigma_noise: Optional[float] = None,
) -> ObservationSet:
    """Forward-solve at params_true and add i.i.d. N(0, sigma^2) noise per cell

    ``sigma_noise`` is the noise level recorded for misfit weighting; it
    defaults to sigma, or to 1 for noiseless data.
    """
    if not (np.isfinite(sigma) and sigma >= 0):
        raise ParameterError(f"noise sigma must be nonnegative, got {sigma}")

    traj = solve_forward(params_true, u0, time_grid)
    steps = tuple(int(k) for k in obs_steps)
    for k in steps:
        if not 0 <= k <= time_grid.Nt:
            raise ParameterError(f"observation step {k} out of range for Nt={time_grid.Nt}")

    rng = np.random.default_rng(seed)
    data = []
    for k in steps:
        clean = traj[k]
        if sigma > 0:
            data.append(clean + sigma * rng.standard_normal(clean.values.size))
        else:
            data.append(clean)

    if sigma_noise is None:
        sigma_noise = sigma if sigma > 0 else 1.0
    logger.info(
        "generated %d synthetic observations (noise sigma=%g, seed=%d)", len(steps), sigma, seed
    )
    return ObservationSet(steps, tuple(data), sigma_noise, seed=seed)
