"""
Run configuration: a flat TOML file, one ``key = value`` per line

Every key is optional. Values are type-checked and constraint-checked at
load time and all violations are reported together, each naming its key.
Relative paths are resolved against the directory of the configuration file.
"""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import toml

from src.errors import ConfigError
from src.verification.fd_checks import DEFAULT_EPSILONS

logger = logging.getLogger(__name__)

GEOMETRIES = ("disk", "square", "file")
MODES = ("direct", "log")


def _key(default, kind: str, path: bool = False):
    return field(default=default, metadata={"kind": kind, "path": path})


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs"""

    # Geometry
    geometry: str = _key("disk", "str")
    mask_file: Optional[str] = _key(None, "str", path=True)
    nx: int = _key(32, "int")
    ny: int = _key(32, "int")
    disk_radius: float = _key(14.0, "float")
    hx: float = _key(1.0, "float")
    hy: float = _key(1.0, "float")

    # Time grid
    T: float = _key(10.0, "float")
    Nt: int = _key(20, "int")

    # Initial condition: file, or a Gaussian bump (center defaults to the domain center)
    u0_file: Optional[str] = _key(None, "str", path=True)
    u0_center_x: Optional[float] = _key(None, "float")
    u0_center_y: Optional[float] = _key(None, "float")
    u0_width: float = _key(3.0, "float")
    u0_amplitude: float = _key(0.5, "float")

    # True parameters: file, or constant plus a smooth random perturbation
    D_true: float = _key(1.0, "float")
    G_true: float = _key(0.3, "float")
    D_true_file: Optional[str] = _key(None, "str", path=True)
    G_true_file: Optional[str] = _key(None, "str", path=True)
    D_true_amplitude: float = _key(0.3, "float")
    G_true_amplitude: float = _key(0.1, "float")
    truth_seed: int = _key(1, "int")

    # Regularization means
    D_mean: float = _key(1.0, "float")
    G_mean: float = _key(0.3, "float")
    D_mean_file: Optional[str] = _key(None, "str", path=True)
    G_mean_file: Optional[str] = _key(None, "str", path=True)
    gamma_D: float = _key(0.1, "float")
    delta_D: float = _key(0.1, "float")
    gamma_G: float = _key(0.1, "float")
    delta_G: float = _key(0.1, "float")

    # Initial guess: factors applied to the true parameters unless files are given
    D_init_factor: float = _key(2.0, "float")
    G_init_factor: float = _key(0.5, "float")
    D_init_file: Optional[str] = _key(None, "str", path=True)
    G_init_file: Optional[str] = _key(None, "str", path=True)

    # Observations: synthetic, or an observation bundle in data_dir
    obs_steps: Tuple[int, ...] = _key((10, 20), "int_list")
    sigma: float = _key(0.0, "float")
    misfit_sigma: float = _key(0.0, "float")  # 0: sigma, or 1 for noiseless data
    seed: int = _key(0, "int")
    data_dir: Optional[str] = _key(None, "str", path=True)

    # Optimizer
    mode: str = _key("direct", "str")
    max_newton_iters: int = _key(50, "int")
    grad_rtol: float = _key(1e-6, "float")
    grad_atol: float = _key(1e-12, "float")
    cg_max_iters: int = _key(200, "int")
    forcing_exponent: float = _key(0.5, "float")
    forcing_cap: float = _key(0.5, "float")
    armijo_c: float = _key(1e-4, "float")
    backtrack_factor: float = _key(0.5, "float")
    max_backtracks: int = _key(25, "int")
    param_floor_D: float = _key(1e-10, "float")
    gauss_newton: bool = _key(False, "bool")
    gauss_newton_iters: int = _key(0, "int")
    precondition: bool = _key(False, "bool")
    support_threshold: float = _key(0.05, "float")

    # Verification
    fd_epsilons: Tuple[float, ...] = _key(DEFAULT_EPSILONS, "float_list")
    fd_misfit_only: bool = _key(False, "bool")
    symmetry_pairs: int = _key(5, "int")

    # Output
    dump_steps: Tuple[int, ...] = _key((), "int_list")
    output_dir: str = _key("output", "str", path=True)


KEYS = {f.name: f for f in fields(RunConfig)}


def _coerce(name: str, value: Any, kind: str) -> Any:
    """Convert a TOML value to the key's type or raise TypeError"""
    if kind == "bool":
        if not isinstance(value, bool):
            raise TypeError("expected true or false")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError("expected an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise TypeError("expected a string")
        return value
    if kind in ("int_list", "float_list"):
        if not isinstance(value, list):
            raise TypeError("expected a list")
        item = "int" if kind == "int_list" else "float"
        return tuple(_coerce(name, v, item) for v in value)
    raise TypeError(f"unknown kind {kind}")


def _check_constraints(cfg: RunConfig) -> List[str]:
    errors = []

    def need(ok: bool, key: str, message: str):
        if not ok:
            errors.append(f"{key}: {message}")

    need(cfg.geometry in GEOMETRIES, "geometry", f"must be one of {GEOMETRIES}")
    need(cfg.geometry != "file" or cfg.mask_file is not None, "mask_file", "required when geometry = 'file'")
    need(cfg.nx >= 1, "nx", "must be >= 1")
    need(cfg.geometry != "disk" or cfg.nx == cfg.ny, "ny", "disk geometry requires nx == ny")
    need(cfg.ny >= 1, "ny", "must be >= 1")
    need(cfg.disk_radius > 0, "disk_radius", "must be > 0")
    need(cfg.hx > 0, "hx", "must be > 0")
    need(cfg.hy > 0, "hy", "must be > 0")
    need(cfg.T > 0, "T", "must be > 0")
    need(cfg.Nt >= 1, "Nt", "must be >= 1")
    need(cfg.u0_width > 0, "u0_width", "must be > 0")
    need(0 <= cfg.u0_amplitude <= 1, "u0_amplitude", "must lie in [0, 1]")

    for key in ("D_true", "D_mean"):
        need(getattr(cfg, key) >= 0, key, "diffusivity must be >= 0")
    for key in ("D_true_amplitude", "G_true_amplitude"):
        need(getattr(cfg, key) >= 0, key, "must be >= 0")
    need(
        cfg.D_true - cfg.D_true_amplitude >= 0,
        "D_true_amplitude",
        "must not exceed D_true (diffusivity would turn negative)",
    )
    for key in ("gamma_D", "gamma_G"):
        need(getattr(cfg, key) > 0, key, "regularization requires gamma > 0")
    for key in ("delta_D", "delta_G"):
        need(getattr(cfg, key) >= 0, key, "regularization requires delta >= 0")
    need(cfg.D_init_factor > 0, "D_init_factor", "must be > 0")

    steps = cfg.obs_steps
    need(all(0 <= k <= cfg.Nt for k in steps), "obs_steps", f"must lie in [0, Nt={cfg.Nt}]")
    need(all(b > a for a, b in zip(steps, steps[1:])), "obs_steps", "must be strictly increasing")
    need(cfg.sigma >= 0, "sigma", "must be >= 0")
    need(cfg.misfit_sigma >= 0, "misfit_sigma", "must be >= 0")

    need(cfg.mode in MODES, "mode", f"must be one of {MODES}")
    need(cfg.max_newton_iters >= 0, "max_newton_iters", "must be >= 0")
    need(cfg.grad_rtol > 0, "grad_rtol", "must be > 0")
    need(cfg.grad_atol > 0, "grad_atol", "must be > 0")
    need(cfg.cg_max_iters >= 1, "cg_max_iters", "must be >= 1")
    need(cfg.forcing_exponent > 0, "forcing_exponent", "must be > 0")
    need(0 < cfg.forcing_cap < 1, "forcing_cap", "must lie in (0, 1)")
    need(0 < cfg.armijo_c < 1, "armijo_c", "must lie in (0, 1)")
    need(0 < cfg.backtrack_factor < 1, "backtrack_factor", "must lie in (0, 1)")
    need(cfg.max_backtracks >= 0, "max_backtracks", "must be >= 0")
    need(cfg.param_floor_D > 0, "param_floor_D", "must be > 0")
    need(cfg.gauss_newton_iters >= 0, "gauss_newton_iters", "must be >= 0")
    need(
        not cfg.precondition or (cfg.delta_D > 0 and cfg.delta_G > 0),
        "precondition",
        "requires delta_D > 0 and delta_G > 0",
    )
    need(cfg.support_threshold >= 0, "support_threshold", "must be >= 0")

    eps = cfg.fd_epsilons
    need(len(eps) > 0, "fd_epsilons", "must not be empty")
    need(all(0 < e < 1 for e in eps), "fd_epsilons", "must lie in (0, 1)")
    need(all(b < a for a, b in zip(eps, eps[1:])), "fd_epsilons", "must be strictly decreasing")
    need(cfg.symmetry_pairs >= 1, "symmetry_pairs", "must be >= 1")
    need(all(0 <= k <= cfg.Nt for k in cfg.dump_steps), "dump_steps", f"must lie in [0, Nt={cfg.Nt}]")

    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if not f.metadata["path"] or value is None or f.name in ("output_dir", "data_dir"):
            continue
        need(Path(value).is_file(), f.name, f"file not found: {value}")
    if cfg.data_dir is not None:
        need(Path(cfg.data_dir).is_dir(), "data_dir", f"directory not found: {cfg.data_dir}")

    return errors


def parse_config(raw: Dict[str, Any], base_dir: Union[str, Path] = ".") -> RunConfig:
    """Validate a key-value mapping into a RunConfig"""
    base_dir = Path(base_dir)
    errors = []
    values = {}
    for name, value in raw.items():
        spec = KEYS.get(name)
        if spec is None:
            errors.append(f"{name}: unknown key")
            continue
        try:
            value = _coerce(name, value, spec.metadata["kind"])
        except TypeError as e:
            errors.append(f"{name}: {e}")
            continue
        if spec.metadata["path"]:
            value = str((base_dir / value).resolve())
        values[name] = value

    if errors:
        raise ConfigError(errors)

    cfg = RunConfig(**values)
    if "output_dir" not in values:
        cfg = replace(cfg, output_dir=str((base_dir / cfg.output_dir).resolve()))
    errors = _check_constraints(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a run configuration file"""
    path = Path(path)
    try:
        raw = toml.load(path)
    except FileNotFoundError:
        raise ConfigError(["file not found"], str(path))
    except toml.TomlDecodeError as e:
        raise ConfigError([f"parse error: {e}"], str(path))

    nested = [k for k, v in raw.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError([f"{k}: tables are not supported" for k in nested], str(path))

    try:
        cfg = parse_config(raw, path.parent)
    except ConfigError as e:
        raise ConfigError(e.messages, str(path))
    logger.info("loaded run configuration %s", path)
    return cfg


def save_config(cfg: RunConfig, path: Union[str, Path]):
    """Write every key (None values omitted) so the file loads back unchanged"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = {}
    for name, value in asdict(cfg).items():
        if value is None:
            continue
        data[name] = list(value) if isinstance(value, tuple) else value
    with open(path, "w", encoding="utf-8") as f:
        toml.dump(data, f)
