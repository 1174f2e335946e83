"""
Experiment commands behind the CLI

Each command builds the problem described by a RunConfig, runs one job and
writes its artifacts under an output directory. Commands return a
CommandOutcome; the CLI turns it into console output and an exit status.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import toml

from src.grid.field import ParamPair, ScalarField, smooth_field
from src.grid.grid import Grid2D, build_grid, disk_mask, square_mask
from src.inverse.observation import ObservationSet, generate_synthetic
from src.inverse.problem import CalibrationProblem
from src.inverse.regularization import RegOperator
from src.model.forward import TimeGrid, gaussian_bump, solve_forward
from src.optimizer.newton_cg import (
    NewtonCGConfig,
    NewtonCGSolver,
    relative_parameter_error,
)
from src.verification.fd_checks import (
    fd_gradient_check,
    fd_hessian_check,
    hessian_symmetry_check,
)
from src.experiment.files import (
    read_field,
    read_mask,
    read_observations,
    write_field,
    write_mask,
    write_observations,
    write_trajectory,
)
from src.experiment.run_config import RunConfig, save_config

logger = logging.getLogger(__name__)

# Exit status of a calibration that stopped without meeting its tolerance
NOT_CONVERGED = 3


@dataclass
class CommandOutcome:
    status: int = 0
    reason: str = ""
    artifacts: Dict[str, Path] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ExperimentSetup:
    """Discrete problem assembled from a RunConfig"""

    grid: Grid2D
    time_grid: TimeGrid
    u0: ScalarField
    truth: Optional[ParamPair]
    regD: RegOperator
    regG: RegOperator
    params0: ParamPair


def build_domain(cfg: RunConfig) -> Grid2D:
    if cfg.geometry == "file":
        return read_mask(cfg.mask_file)
    if cfg.geometry == "disk":
        return build_grid(disk_mask(cfg.nx, cfg.disk_radius), cfg.hx, cfg.hy)
    return build_grid(square_mask(cfg.nx, cfg.ny), cfg.hx, cfg.hy)


def build_initial_condition(cfg: RunConfig, grid: Grid2D) -> ScalarField:
    if cfg.u0_file is not None:
        return read_field(cfg.u0_file, grid)
    cx = cfg.u0_center_x if cfg.u0_center_x is not None else 0.5 * grid.nx * grid.hx
    cy = cfg.u0_center_y if cfg.u0_center_y is not None else 0.5 * grid.ny * grid.hy
    return gaussian_bump(grid, (cx, cy), cfg.u0_width, cfg.u0_amplitude)


def _field(grid: Grid2D, path: Optional[str], base: float, amplitude: float, seed: int):
    if path is not None:
        return read_field(path, grid)
    return smooth_field(grid, base, amplitude, seed)


def build_truth(cfg: RunConfig, grid: Grid2D) -> ParamPair:
    return ParamPair(
        D=_field(grid, cfg.D_true_file, cfg.D_true, cfg.D_true_amplitude, cfg.truth_seed),
        G=_field(grid, cfg.G_true_file, cfg.G_true, cfg.G_true_amplitude, cfg.truth_seed + 1),
    )


def build_regularization(cfg: RunConfig, grid: Grid2D):
    D_mean = _field(grid, cfg.D_mean_file, cfg.D_mean, 0.0, 0)
    G_mean = _field(grid, cfg.G_mean_file, cfg.G_mean, 0.0, 0)
    return (
        RegOperator(cfg.gamma_D, cfg.delta_D, D_mean),
        RegOperator(cfg.gamma_G, cfg.delta_G, G_mean),
    )


def build_initial_guess(cfg: RunConfig, grid: Grid2D, truth: ParamPair) -> ParamPair:
    D = read_field(cfg.D_init_file, grid) if cfg.D_init_file else truth.D * cfg.D_init_factor
    G = read_field(cfg.G_init_file, grid) if cfg.G_init_file else truth.G * cfg.G_init_factor
    return ParamPair(D=D, G=G)


def build_setup(cfg: RunConfig) -> ExperimentSetup:
    grid = build_domain(cfg)
    truth = build_truth(cfg, grid)
    regD, regG = build_regularization(cfg, grid)
    setup = ExperimentSetup(
        grid=grid,
        time_grid=TimeGrid(cfg.T, cfg.Nt),
        u0=build_initial_condition(cfg, grid),
        truth=truth if has_truth(cfg) else None,
        regD=regD,
        regG=regG,
        params0=build_initial_guess(cfg, grid, truth),
    )
    logger.info(
        "setup: %dx%d grid, %d active cells, T=%g, Nt=%d",
        grid.nx,
        grid.ny,
        grid.n_active,
        cfg.T,
        cfg.Nt,
    )
    return setup


def has_truth(cfg: RunConfig) -> bool:
    """True parameters are known for synthetic data or when both truth files are given"""
    return cfg.data_dir is None or (cfg.D_true_file is not None and cfg.G_true_file is not None)


def build_observations(cfg: RunConfig, setup: ExperimentSetup) -> ObservationSet:
    if cfg.data_dir is not None:
        obs = read_observations(cfg.data_dir, setup.grid)
        return obs.with_sigma(cfg.misfit_sigma) if cfg.misfit_sigma > 0 else obs
    return generate_synthetic(
        setup.truth,
        setup.u0,
        setup.time_grid,
        cfg.obs_steps,
        cfg.sigma,
        cfg.seed,
        sigma_noise=cfg.misfit_sigma or None,
    )


def build_problem(
    cfg: RunConfig, setup: ExperimentSetup, misfit_only: bool = False
) -> CalibrationProblem:
    return CalibrationProblem(
        setup.u0,
        setup.time_grid,
        build_observations(cfg, setup),
        setup.regD,
        setup.regG,
        mode=cfg.mode,
        misfit_only=misfit_only,
    )


def newton_config(cfg: RunConfig) -> NewtonCGConfig:
    return NewtonCGConfig(
        max_newton_iters=cfg.max_newton_iters,
        grad_rtol=cfg.grad_rtol,
        grad_atol=cfg.grad_atol,
        cg_max_iters=cfg.cg_max_iters,
        forcing_exponent=cfg.forcing_exponent,
        forcing_cap=cfg.forcing_cap,
        armijo_c=cfg.armijo_c,
        backtrack_factor=cfg.backtrack_factor,
        max_backtracks=cfg.max_backtracks,
        param_floor_D=cfg.param_floor_D,
        mode=cfg.mode,
        gauss_newton=cfg.gauss_newton,
        gauss_newton_iters=cfg.gauss_newton_iters,
        precondition=cfg.precondition,
    )


def _prepare(cfg: RunConfig, out_dir: Optional[Path]) -> Path:
    out_dir = Path(out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out_dir / "config.toml")
    return out_dir


def cmd_forward(cfg: RunConfig, out_dir: Optional[Path] = None) -> CommandOutcome:
    """Forward solve at the true parameters, dumping the selected snapshots"""
    out_dir = _prepare(cfg, out_dir)
    grid = build_domain(cfg)
    params = build_truth(cfg, grid)
    traj = solve_forward(params, build_initial_condition(cfg, grid), TimeGrid(cfg.T, cfg.Nt))

    outcome = CommandOutcome()
    write_mask(out_dir / "mask.txt", grid)
    outcome.artifacts["mask"] = out_dir / "mask.txt"
    outcome.artifacts["trajectory"] = write_trajectory(
        out_dir / "trajectory", traj, cfg.dump_steps or None
    )
    lo, hi = traj.bounds()
    outcome.summary.update(
        {
            "active_cells": grid.n_active,
            "initial_mass": traj[0].total(),
            "final_mass": traj.final.total(),
            "state_min": lo,
            "state_max": hi,
        }
    )
    return outcome


def cmd_synth(cfg: RunConfig, out_dir: Optional[Path] = None) -> CommandOutcome:
    """Synthetic observations plus the fields that generated them"""
    out_dir = _prepare(cfg, out_dir)
    grid = build_domain(cfg)
    truth = build_truth(cfg, grid)
    u0 = build_initial_condition(cfg, grid)
    obs = generate_synthetic(
        truth,
        u0,
        TimeGrid(cfg.T, cfg.Nt),
        cfg.obs_steps,
        cfg.sigma,
        cfg.seed,
        sigma_noise=cfg.misfit_sigma or None,
    )

    outcome = CommandOutcome()
    outcome.artifacts["observations"] = write_observations(out_dir / "observations", obs)
    outcome.artifacts["mask"] = out_dir / "mask.txt"
    write_mask(outcome.artifacts["mask"], grid)
    for name, value in (("u0", u0), ("D_true", truth.D), ("G_true", truth.G)):
        outcome.artifacts[name] = out_dir / f"{name}.txt"
        write_field(outcome.artifacts[name], value)
    outcome.summary.update(
        {"observations": len(obs), "steps": list(obs.obs_steps), "sigma": cfg.sigma, "seed": cfg.seed}
    )
    return outcome


def _parameter_error(setup: ExperimentSetup, params: ParamPair, threshold: float) -> float:
    peak = solve_forward(setup.truth, setup.u0, setup.time_grid).peak()
    support = ScalarField(setup.grid, (peak.values > threshold).astype(float))
    return relative_parameter_error(params, setup.truth, support)


def cmd_calibrate(cfg: RunConfig, out_dir: Optional[Path] = None) -> CommandOutcome:
    """Newton-CG calibration from the configured initial guess"""
    out_dir = _prepare(cfg, out_dir)
    setup = build_setup(cfg)
    problem = build_problem(cfg, setup)
    result = NewtonCGSolver(problem, newton_config(cfg)).solve(setup.params0)

    outcome = CommandOutcome()
    outcome.artifacts["history"] = out_dir / "history.csv"
    result.to_csv(outcome.artifacts["history"])
    for name, value in (("D_final", result.params_final.D), ("G_final", result.params_final.G)):
        outcome.artifacts[name] = out_dir / f"{name}.txt"
        write_field(outcome.artifacts[name], value)

    history = result.history
    summary = {
        "converged": result.converged,
        "reason": result.reason,
        "iterations": result.iterations,
        "initial_cost": history[0].cost if history else float("nan"),
        "final_cost": history[-1].cost if history else float("nan"),
        "initial_grad_norm": history[0].grad_norm if history else float("nan"),
        "final_grad_norm": history[-1].grad_norm if history else float("nan"),
    }
    if setup.truth is not None:
        summary["initial_parameter_error"] = _parameter_error(
            setup, setup.params0, cfg.support_threshold
        )
        summary["final_parameter_error"] = _parameter_error(
            setup, result.params_final, cfg.support_threshold
        )

    outcome.artifacts["summary"] = out_dir / "summary.toml"
    with open(outcome.artifacts["summary"], "w", encoding="utf-8") as f:
        toml.dump(summary, f)
    outcome.summary.update(summary)

    if not result.converged:
        outcome.status = NOT_CONVERGED
        outcome.reason = result.reason
    return outcome


def cmd_verify_grad(cfg: RunConfig, out_dir: Optional[Path] = None) -> CommandOutcome:
    """Taylor test of the gradient at the initial guess"""
    out_dir = _prepare(cfg, out_dir)
    setup = build_setup(cfg)
    problem = build_problem(cfg, setup, misfit_only=cfg.fd_misfit_only)
    report = fd_gradient_check(setup.params0, problem, cfg.fd_epsilons, cfg.seed)

    outcome = CommandOutcome()
    outcome.artifacts["fd_gradient"] = out_dir / "fd_gradient.csv"
    report.to_csv(outcome.artifacts["fd_gradient"])
    outcome.summary.update(
        {
            "slope": report.slope,
            "linear_decades": report.linear_decades(),
            "guide_constant": report.guide_constant,
        }
    )
    return outcome


def cmd_verify_hess(cfg: RunConfig, out_dir: Optional[Path] = None) -> CommandOutcome:
    """Taylor test of the Hessian action, then the symmetry check"""
    out_dir = _prepare(cfg, out_dir)
    setup = build_setup(cfg)
    problem = build_problem(cfg, setup, misfit_only=cfg.fd_misfit_only)
    base = setup.params0
    report = fd_hessian_check(base, problem, cfg.fd_epsilons, cfg.seed)
    asymmetry = hessian_symmetry_check(base, problem, cfg.symmetry_pairs, cfg.seed)

    outcome = CommandOutcome()
    outcome.artifacts["fd_hessian"] = out_dir / "fd_hessian.csv"
    report.to_csv(outcome.artifacts["fd_hessian"])
    outcome.artifacts["symmetry"] = out_dir / "symmetry.toml"
    with open(outcome.artifacts["symmetry"], "w", encoding="utf-8") as f:
        toml.dump(
            {"pairs": cfg.symmetry_pairs, "seed": cfg.seed, "max_relative_asymmetry": asymmetry}, f
        )
    outcome.summary.update(
        {
            "slope": report.slope,
            "linear_decades": report.linear_decades(),
            "guide_constant": report.guide_constant,
            "max_relative_asymmetry": asymmetry,
        }
    )
    return outcome


COMMANDS = {
    "forward": cmd_forward,
    "synth": cmd_synth,
    "calibrate": cmd_calibrate,
    "verify-grad": cmd_verify_grad,
    "verify-hess": cmd_verify_hess,
}
