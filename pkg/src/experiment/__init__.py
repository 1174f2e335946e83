"""Run configuration, file formats and experiment commands"""

from src.experiment.run_config import RunConfig, load_config, parse_config, save_config
from src.experiment.files import (
    read_field,
    read_mask,
    read_observations,
    read_trajectory,
    write_field,
    write_mask,
    write_observations,
    write_trajectory,
)
from src.experiment.commands import (
    COMMANDS,
    CommandOutcome,
    build_setup,
    cmd_calibrate,
    cmd_forward,
    cmd_synth,
    cmd_verify_grad,
    cmd_verify_hess,
)

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config",
    "save_config",
    "read_field",
    "read_mask",
    "read_observations",
    "read_trajectory",
    "write_field",
    "write_mask",
    "write_observations",
    "write_trajectory",
    "COMMANDS",
    "CommandOutcome",
    "build_setup",
    "cmd_calibrate",
    "cmd_forward",
    "cmd_synth",
    "cmd_verify_grad",
    "cmd_verify_hess",
]
