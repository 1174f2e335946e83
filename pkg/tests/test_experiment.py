"""
Tests for run configuration, artifact files and the command line
"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import toml

from main import main
from src.config import Config
from src.errors import ConfigError, DomainError, GridMismatchError
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
from src.experiment.run_config import load_config, parse_config, save_config
from src.grid.field import ScalarField
from src.grid.grid import build_grid, square_mask
from src.inverse.observation import ObservationSet
from src.model.forward import solve_forward

DEFAULT_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.toml"

SMALL_RUN = {
    "geometry": "square",
    "nx": 8,
    "ny": 8,
    "T": 1.0,
    "Nt": 4,
    "u0_width": 2.0,
    "obs_steps": [2, 4],
    "sigma": 0.01,
    "fd_epsilons": [1e-2, 1e-3, 1e-4],
    "symmetry_pairs": 2,
}


def write_toml(path, data):
    with open(path, "w", encoding="utf-8") as f:
        toml.dump(data, f)
    return path


class TestRunConfig:
    """Test suite for run configuration parsing"""

    def test_defaults(self, tmp_path):
        """Test an empty file gives defaults with output_dir next to it"""
        cfg = load_config(write_toml(tmp_path / "run.toml", {}))
        assert cfg.nx == 32 and cfg.Nt == 20
        assert cfg.obs_steps == (10, 20)
        assert cfg.output_dir == str((tmp_path / "output").resolve())

    def test_round_trip(self, tmp_path):
        """Test save_config writes a file that loads back unchanged"""
        cfg = load_config(write_toml(tmp_path / "run.toml", SMALL_RUN))
        save_config(cfg, tmp_path / "saved" / "config.toml")
        assert load_config(tmp_path / "saved" / "config.toml") == cfg

    @pytest.mark.parametrize(
        "raw,key",
        [
            ({"gamma_D": 0.0}, "gamma_D"),
            ({"delta_G": -1.0}, "delta_G"),
            ({"obs_steps": [30]}, "obs_steps"),
            ({"obs_steps": [4, 2]}, "obs_steps"),
            ({"geometry": "hexagon"}, "geometry"),
            ({"nx": 16, "ny": 8}, "ny"),
            ({"forcing_cap": 1.0}, "forcing_cap"),
            ({"fd_epsilons": [1e-3, 1e-2]}, "fd_epsilons"),
            ({"precondition": True, "delta_D": 0.0}, "precondition"),
        ],
    )
    def test_constraint_violations(self, raw, key):
        """Test each violated constraint is reported under its key"""
        with pytest.raises(ConfigError) as exc:
            parse_config(raw)
        assert any(m.startswith(f"{key}:") for m in exc.value.messages)

    def test_unknown_key(self):
        """Test unknown keys are rejected"""
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config({"gama_D": 0.1})

    @pytest.mark.parametrize("raw", [{"nx": "big"}, {"nx": 3.5}, {"gauss_newton": 1}, {"obs_steps": 4}])
    def test_type_errors(self, raw):
        """Test values of the wrong type are rejected"""
        with pytest.raises(ConfigError):
            parse_config(raw)

    def test_ints_promote_to_float(self):
        """Test integer literals are accepted for float keys"""
        cfg = parse_config({"T": 5, "sigma": 0})
        assert cfg.T == 5.0 and isinstance(cfg.T, float)

    def test_relative_paths(self, tmp_path):
        """Test file keys resolve against the config directory"""
        grid = build_grid(square_mask(8, 8), 1.0, 1.0)
        write_mask(tmp_path / "mask.txt", grid)
        cfg = load_config(
            write_toml(tmp_path / "run.toml", {"geometry": "file", "mask_file": "mask.txt"})
        )
        assert cfg.mask_file == str((tmp_path / "mask.txt").resolve())

    def test_missing_file(self, tmp_path):
        """Test referenced files must exist"""
        with pytest.raises(ConfigError, match="file not found"):
            load_config(write_toml(tmp_path / "run.toml", {"u0_file": "nope.txt"}))

    def test_tables_rejected(self, tmp_path):
        """Test nested tables are not part of the format"""
        path = tmp_path / "run.toml"
        path.write_text("[solver]\nmode = 'log'\n")
        with pytest.raises(ConfigError, match="tables"):
            load_config(path)

    def test_error_names_file(self, tmp_path):
        """Test load errors carry the file path"""
        path = write_toml(tmp_path / "run.toml", {"Nt": 0})
        with pytest.raises(ConfigError) as exc:
            load_config(path)
        assert exc.value.path == str(path)
        assert isinstance(exc.value, ValueError)


class TestFieldFiles:
    """Test suite for field, mask, trajectory and observation files"""

    def test_field_round_trip(self, disk_grid, rng, tmp_path):
        """Test fields survive a write/read cycle bit for bit"""
        field = ScalarField(disk_grid, rng.standard_normal(disk_grid.n_active))
        write_field(tmp_path / "f.txt", field)
        back = read_field(tmp_path / "f.txt", disk_grid)
        assert np.array_equal(back.values, field.values)

    def test_field_rebuilds_grid(self, disk_grid, tmp_path):
        """Test the active set is recovered from the NaN pattern"""
        write_field(tmp_path / "f.txt", ScalarField.constant(disk_grid, 1.0))
        back = read_field(tmp_path / "f.txt")
        assert back.grid.matches(disk_grid)

    def test_grid_mismatch(self, disk_grid, square_grid, tmp_path):
        """Test reading onto another grid fails"""
        write_field(tmp_path / "f.txt", ScalarField.zeros(disk_grid))
        with pytest.raises(GridMismatchError):
            read_field(tmp_path / "f.txt", square_grid)

    def test_mask_round_trip(self, disk_grid, tmp_path):
        """Test masks store 0/1 and spacings"""
        write_mask(tmp_path / "mask.txt", disk_grid)
        assert read_mask(tmp_path / "mask.txt").matches(disk_grid)

    def test_bad_mask(self, tmp_path):
        """Test non-binary mask entries are rejected"""
        (tmp_path / "mask.txt").write_text("2 2 1.0 1.0\n1 2\n1 1\n")
        with pytest.raises(DomainError):
            read_mask(tmp_path / "mask.txt")

    def test_trajectory_manifest(self, truth, u0, time_grid, tmp_path):
        """Test selected snapshots are listed with their times"""
        traj = solve_forward(truth, u0, time_grid)
        manifest = write_trajectory(tmp_path / "traj", traj, steps=[8, 0, 4])
        frame = pd.read_csv(manifest)
        assert frame["step"].tolist() == [0, 4, 8]
        assert frame["time"].tolist() == pytest.approx([0.0, 1.0, 2.0])
        snaps = read_trajectory(tmp_path / "traj", traj.grid)
        assert np.array_equal(snaps[4].values, traj[4].values)

    def test_trajectory_range(self, truth, u0, time_grid, tmp_path):
        """Test out-of-range snapshot indices are rejected"""
        traj = solve_forward(truth, u0, time_grid)
        with pytest.raises(DomainError):
            write_trajectory(tmp_path / "traj", traj, steps=[9])

    def test_observation_bundle(self, noisy_obs, disk_grid, tmp_path):
        """Test observations, sigma and seed survive a write/read cycle"""
        write_observations(tmp_path / "obs", noisy_obs)
        back = read_observations(tmp_path / "obs", disk_grid)
        assert back.obs_steps == noisy_obs.obs_steps
        assert back.sigma_noise == noisy_obs.sigma_noise
        assert back.seed == 0
        assert np.array_equal(back.data[1].values, noisy_obs.data[1].values)

    def test_observation_masks(self, disk_grid, tmp_path):
        """Test per-observation masks are stored only where present"""
        mask = np.zeros(disk_grid.n_active)
        mask[:4] = 1.0
        obs = ObservationSet(
            (1, 2),
            (ScalarField.zeros(disk_grid), ScalarField.zeros(disk_grid)),
            0.1,
            masks=(ScalarField(disk_grid, mask), None),
        )
        write_observations(tmp_path / "obs", obs)
        back = read_observations(tmp_path / "obs")
        assert back.masks[1] is None
        assert np.array_equal(back.masks[0].values, mask)


class TestCommandLine:
    """Test suite for the CLI entry point"""

    @pytest.fixture
    def run_file(self, tmp_path):
        return write_toml(tmp_path / "run.toml", SMALL_RUN)

    def test_forward(self, run_file, tmp_path):
        """Test forward writes the mask, snapshots and saved config"""
        out = tmp_path / "fwd"
        assert main(["forward", "--config", str(run_file), "--out", str(out)]) == 0
        frame = pd.read_csv(out / "trajectory" / "trajectory.csv")
        assert frame["step"].tolist() == [0, 1, 2, 3, 4]
        assert read_mask(out / "mask.txt").n_active == 64
        assert load_config(out / "config.toml").Nt == 4

    def test_synth_then_calibrate_at_truth(self, tmp_path):
        """Test noiseless data with means and start at the truth need no iterations"""
        run = dict(SMALL_RUN, sigma=0.0)
        synth_dir = tmp_path / "synth"
        assert main(["synth", "-c", str(write_toml(tmp_path / "synth.toml", run)), "-o", str(synth_dir)]) == 0

        calib = dict(
            run,
            geometry="file",
            mask_file="synth/mask.txt",
            u0_file="synth/u0.txt",
            data_dir="synth/observations",
            D_true_file="synth/D_true.txt",
            G_true_file="synth/G_true.txt",
            D_mean_file="synth/D_true.txt",
            G_mean_file="synth/G_true.txt",
            D_init_factor=1.0,
            G_init_factor=1.0,
        )
        out = tmp_path / "calib"
        assert main(["calibrate", "-c", str(write_toml(tmp_path / "calib.toml", calib)), "-o", str(out)]) == 0

        summary = toml.load(out / "summary.toml")
        assert summary["converged"] is True
        assert summary["iterations"] == 0
        assert summary["final_parameter_error"] == 0.0
        assert len(pd.read_csv(out / "history.csv")) == 1
        D_final = read_field(out / "D_final.txt")
        assert np.array_equal(D_final.values, read_field(synth_dir / "D_true.txt").values)

    def test_calibrate_not_converged(self, run_file, tmp_path, capsys):
        """Test an exhausted iteration budget exits with status 3"""
        path = write_toml(tmp_path / "short.toml", dict(SMALL_RUN, max_newton_iters=0))
        assert main(["calibrate", "-c", str(path), "-o", str(tmp_path / "out")]) == 3
        assert "error=NotConverged" in capsys.readouterr().err

    def test_verify_grad(self, run_file, tmp_path):
        """Test verify-grad writes the residual table"""
        out = tmp_path / "vg"
        assert main(["verify-grad", "-c", str(run_file), "-o", str(out), "--seed", "3"]) == 0
        frame = pd.read_csv(out / "fd_gradient.csv")
        assert list(frame.columns) == ["epsilon", "r"]
        assert len(frame) == 3
        assert load_config(out / "config.toml").seed == 3

    def test_verify_hess(self, run_file, tmp_path):
        """Test verify-hess writes residuals and the symmetry summary"""
        out = tmp_path / "vh"
        assert main(["verify-hess", "-c", str(run_file), "-o", str(out)]) == 0
        assert len(pd.read_csv(out / "fd_hessian.csv")) == 3
        symmetry = toml.load(out / "symmetry.toml")
        assert symmetry["pairs"] == 2
        assert symmetry["max_relative_asymmetry"] <= 1e-8

    def test_bad_config(self, tmp_path, capsys):
        """Test a configuration error exits with status 1 and names the key"""
        path = write_toml(tmp_path / "bad.toml", {"gamma_D": 0.0})
        assert main(["forward", "-c", str(path), "-o", str(tmp_path / "out")]) == 1
        err = capsys.readouterr().err
        assert "error=ConfigError" in err
        assert "gamma_D" in err

    def test_missing_config(self, tmp_path, capsys):
        """Test a missing file is a configuration error"""
        assert main(["forward", "-c", str(tmp_path / "absent.toml")]) == 1
        assert "file not found" in capsys.readouterr().err

    def test_solver_failure_status(self, run_file, tmp_path, monkeypatch, capsys):
        """Test library errors exit with status 2"""
        monkeypatch.setattr(Config, "NEWTON_RTOL", 1e-300)
        assert main(["forward", "-c", str(run_file), "-o", str(tmp_path / "out")]) == 2
        assert "error=TimestepDivergedError" in capsys.readouterr().err

    def test_effective_settings_printed(self, run_file, tmp_path, capsys):
        """Test the process-wide settings are echoed before a run"""
        assert main(["forward", "-c", str(run_file), "-o", str(tmp_path / "out")]) == 0
        out = capsys.readouterr().out
        assert "=== tumorcal Configuration ===" in out
        assert f"Log level: {Config.LOG_LEVEL}" in out
        assert f"Linear solver: {Config.LINEAR_SOLVER}" in out


@pytest.mark.slow
def test_default_config_calibrates(tmp_path):
    """Test the shipped 32x32 experiment reaches the gradient tolerance"""
    out = tmp_path / "calibrate"
    assert main(["calibrate", "-c", str(DEFAULT_CONFIG), "-o", str(out)]) == 0
    summary = toml.load(out / "summary.toml")
    assert summary["converged"]
    assert summary["final_grad_norm"] <= 1e-6 * summary["initial_grad_norm"]
    assert summary["final_parameter_error"] < summary["initial_parameter_error"]
