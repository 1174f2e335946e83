"""
On-disk formats

Field file: header line "nx ny hx hy", then nx rows of ny values (row-major,
row i is x-index i); inactive cells hold NaN. Mask files use the same layout
with 0/1 entries. Trajectories and observation bundles are directories of
field files plus a manifest.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import toml

from src.config import Config
from src.errors import DomainError, GridMismatchError
from src.grid.field import ScalarField
from src.grid.grid import Grid2D, build_grid
from src.inverse.observation import ObservationSet
from src.model.forward import Trajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRAJECTORY_MANIFEST = "trajectory.csv"
OBSERVATION_MANIFEST = "observations.toml"


def _write_grid_file(path: PathLike, grid: Grid2D, array: np.ndarray, fmt: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{grid.nx} {grid.ny} {grid.hx!r} {grid.hy!r}\n")
        np.savetxt(f, array, fmt=fmt)


def _read_grid_file(path: PathLike) -> Tuple[int, int, float, float, np.ndarray]:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 4:
            raise DomainError(f"{path}: header must be 'nx ny hx hy'")
        nx, ny = int(header[0]), int(header[1])
        hx, hy = float(header[2]), float(header[3])
        values = np.loadtxt(f, dtype=float, ndmin=2)
    if values.shape != (nx, ny):
        raise DomainError(f"{path}: expected {nx}x{ny} values, found {values.shape}")
    return nx, ny, hx, hy, values


def write_field(path: PathLike, field: ScalarField, fmt: Optional[str] = None):
    _write_grid_file(path, field.grid, field.to_array(), fmt or Config.FIELD_FORMAT)


def read_field(path: PathLike, grid: Optional[Grid2D] = None) -> ScalarField:
    """Load a field file; without grid, the grid is rebuilt from the NaN pattern"""
    nx, ny, hx, hy, values = _read_grid_file(path)
    active = ~np.isnan(values)
    if grid is None:
        grid = build_grid(active, hx, hy)
    elif (
        grid.shape != (nx, ny)
        or not np.isclose(grid.hx, hx)
        or not np.isclose(grid.hy, hy)
        or not np.array_equal(grid.mask, active)
    ):
        raise GridMismatchError(f"{path}: field does not live on the given grid")
    return ScalarField.from_array(grid, np.where(active, values, 0.0))


def write_mask(path: PathLike, grid: Grid2D):
    _write_grid_file(path, grid, grid.mask.astype(int), "%d")


def read_mask(path: PathLike) -> Grid2D:
    _, _, hx, hy, values = _read_grid_file(path)
    if not np.all((values == 0) | (values == 1)):
        raise DomainError(f"{path}: mask entries must be 0 or 1")
    return build_grid(values.astype(bool), hx, hy)


def write_trajectory(
    out_dir: PathLike, traj: Trajectory, steps: Optional[Iterable[int]] = None, prefix: str = "u"
) -> Path:
    """One field file per selected snapshot plus a (step, time, filename) manifest"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    steps = range(len(traj)) if steps is None else sorted(set(steps))
    rows = []
    for k in steps:
        if not 0 <= k < len(traj):
            raise DomainError(f"snapshot {k} out of range 0..{len(traj) - 1}")
        name = f"{prefix}_{k:04d}.txt"
        write_field(out_dir / name, traj[k])
        rows.append({"step": k, "time": traj.time_grid.time(k), "filename": name})

    manifest = out_dir / TRAJECTORY_MANIFEST
    pd.DataFrame(rows, columns=["step", "time", "filename"]).to_csv(
        manifest, index=False, float_format="%.17g"
    )
    logger.info("wrote %d snapshots to %s", len(rows), out_dir)
    return manifest


def read_trajectory(out_dir: PathLike, grid: Optional[Grid2D] = None) -> Dict[int, ScalarField]:
    """Snapshots listed in a trajectory manifest, keyed by step"""
    out_dir = Path(out_dir)
    manifest = pd.read_csv(out_dir / TRAJECTORY_MANIFEST)
    return {
        int(row.step): read_field(out_dir / row.filename, grid)
        for row in manifest.itertuples(index=False)
    }


def write_observations(out_dir: PathLike, obs: ObservationSet) -> Path:
    """Observation bundle: manifest (steps, sigma, seed) and one field file per observation"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files: List[str] = []
    masks: List[str] = []
    for idx, k in enumerate(obs.obs_steps):
        name = f"obs_{k:04d}.txt"
        write_field(out_dir / name, obs.data[idx])
        files.append(name)
        if obs.masks is not None and obs.masks[idx] is not None:
            mask_name = f"obs_mask_{k:04d}.txt"
            write_field(out_dir / mask_name, obs.masks[idx])
            masks.append(mask_name)
        else:
            masks.append("")

    manifest = {
        "steps": list(obs.obs_steps),
        "sigma": obs.sigma_noise,
        "files": files,
    }
    if obs.seed is not None:
        manifest["seed"] = obs.seed
    if any(masks):
        manifest["masks"] = masks

    path = out_dir / OBSERVATION_MANIFEST
    with open(path, "w", encoding="utf-8") as f:
        toml.dump(manifest, f)
    logger.info("wrote %d observations to %s", len(files), out_dir)
    return path


def read_observations(out_dir: PathLike, grid: Optional[Grid2D] = None) -> ObservationSet:
    out_dir = Path(out_dir)
    manifest = toml.load(out_dir / OBSERVATION_MANIFEST)
    data = [read_field(out_dir / name, grid) for name in manifest["files"]]
    if grid is None and data:
        grid = data[0].grid
    masks = None
    if "masks" in manifest:
        masks = tuple(read_field(out_dir / m, grid) if m else None for m in manifest["masks"])
    return ObservationSet(
        tuple(manifest["steps"]),
        tuple(data),
        float(manifest["sigma"]),
        masks=masks,
        seed=manifest.get("seed"),
    )
