"""
Configuration management for tumorcal
"""

import logging
import os
from typing import List
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _env(name: str, default: str) -> str:
    return os.getenv(f"TUMORCAL_{name}", default)


class Config:
    """Process-wide numerical and runtime defaults"""

    # Logging
    LOG_LEVEL = _env("LOG_LEVEL", "INFO").upper()
    SHOW_PROGRESS = _env("SHOW_PROGRESS", "False").lower() == "true"

    # Inner Newton iteration of the implicit timestep
    NEWTON_MAX_ITERS = int(_env("NEWTON_MAX_ITERS", "50"))
    NEWTON_RTOL = float(_env("NEWTON_RTOL", "1e-11"))

    # Sparse linear solves
    LINEAR_SOLVER = _env("LINEAR_SOLVER", "cg").lower()  # cg or direct
    LINEAR_RTOL = float(_env("LINEAR_RTOL", "1e-12"))

    # Field files
    FIELD_FORMAT = _env("FIELD_FORMAT", "%.17g")

    @classmethod
    def validate(cls) -> List[str]:
        """Validate configuration and return list of errors"""
        errors = []

        if cls.LOG_LEVEL not in logging._nameToLevel:
            errors.append(f"Invalid LOG_LEVEL: {cls.LOG_LEVEL}")

        if cls.LINEAR_SOLVER not in ["cg", "direct"]:
            errors.append(f"Invalid LINEAR_SOLVER: {cls.LINEAR_SOLVER}")

        if cls.NEWTON_MAX_ITERS < 1:
            errors.append(f"NEWTON_MAX_ITERS must be >= 1, got {cls.NEWTON_MAX_ITERS}")

        if not 0 < cls.NEWTON_RTOL < 1:
            errors.append(f"NEWTON_RTOL must be in (0, 1), got {cls.NEWTON_RTOL}")

        if not 0 < cls.LINEAR_RTOL < 1:
            errors.append(f"LINEAR_RTOL must be in (0, 1), got {cls.LINEAR_RTOL}")

        try:
            cls.FIELD_FORMAT % 1.0
        except (TypeError, ValueError):
            errors.append(f"Invalid FIELD_FORMAT: {cls.FIELD_FORMAT!r}")

        return errors

    @classmethod
    def print_config(cls):
        """Print current configuration"""
        print("=== tumorcal Configuration ===")
        print(f"Log level: {cls.LOG_LEVEL}")
        print(f"Inner Newton: max {cls.NEWTON_MAX_ITERS} iterations, rtol {cls.NEWTON_RTOL:g}")
        print(f"Linear solver: {cls.LINEAR_SOLVER} (rtol {cls.LINEAR_RTOL:g})")
        print(f"Field format: {cls.FIELD_FORMAT}")
        print("=" * 30)
