"""Tests for the command-line front end."""

import json

import numpy as np
import pandas as pd
import pytest

from src.simq.cli import create_parser, main
from src.simq.cli import online as online_command
from src.simq.errors import DivergenceError
from src.simq.naf import analytic_model, load_model, save_model
from src.simq.schemas import SYSTEM_PRESETS, benchmark_config, desk_config, get_preset, resolve_ids


# -----------------------------------------------------------------------------
# Fixtures
# -----------------------------------------------------------------------------


@pytest.fixture
def run_dir(tmp_path):
    """Run directory holding hand-set members 1 and 2."""
    out = tmp_path / "run"
    save_model(out / "models" / "system-1.npz", analytic_model([[-4.0, -1.0]], [0.0]))
    save_model(out / "models" / "system-2.npz", analytic_model([[-8.0, -2.0]], [np.log(2.0)]))
    return out


def write_config(tmp_path, **sections) -> str:
    """Desk config with section fields overridden, written as JSON."""
    data = json.loads(desk_config().model_dump_json())
    for section, fields in sections.items():
        if isinstance(fields, dict):
            data[section].update(fields)
        else:
            data[section] = fields
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


# -----------------------------------------------------------------------------
# Parser
# -----------------------------------------------------------------------------


class TestCreateParser:
    """Tests for create_parser."""

    def test_every_command_accepts_common_flags(self):
        parser = create_parser()
        for command in ("pretrain", "online", "sweep", "surface", "score"):
            args = parser.parse_args([command, "--seed", "3", "--out", "x", "--preset", "desk", "--desk-scale"])
            assert args.command == command
            assert args.seed == 3
            assert args.desk_scale

    def test_requires_a_command(self):
        with pytest.raises(SystemExit):
            create_parser().parse_args([])

    def test_log_level_defaults_from_environment(self, monkeypatch):
        monkeypatch.setenv("SIMQ_LOG_LEVEL", "DEBUG")

        assert create_parser().parse_args(["score"]).log_level == "DEBUG"


class TestPresets:
    """Tests for preset names and their aliases."""

    def test_paper_is_an_alias_of_benchmark(self):
        assert get_preset("paper").model_dump() == benchmark_config().model_dump()

    def test_paper_8_names_all_eight_systems(self):
        known = benchmark_config().virtual_systems

        ids = resolve_ids(["paper-8"], SYSTEM_PRESETS, known)

        assert ids == resolve_ids(["benchmark-8"], SYSTEM_PRESETS, known)
        assert ids == ["1", "2", "3", "4", "5", "6", "7", "8"]

    def test_commands_accept_paper_preset(self, tmp_path):
        """Should run with --preset paper and snapshot the benchmark config."""
        out = tmp_path / "run"

        assert main(["pretrain", "--preset", "paper", "--systems", "", "--out", str(out)]) == 0

        snapshot = json.loads((out / "config.json").read_text())
        assert snapshot == json.loads(benchmark_config().model_dump_json())

    def test_unknown_preset_is_a_config_error(self, tmp_path):
        assert main(["pretrain", "--preset", "journal", "--systems", "", "--out", str(tmp_path / "run")]) == 1


# -----------------------------------------------------------------------------
# Commands
# -----------------------------------------------------------------------------


class TestPretrain:
    """Tests for the pretrain command."""

    def test_empty_system_list_is_a_no_op(self, tmp_path):
        out = tmp_path / "run"

        assert main(["pretrain", "--systems", "", "--out", str(out)]) == 0
        assert not (out / "models").exists()
        assert (out / "config.json").exists()

    def test_unknown_system_is_a_config_error(self, tmp_path):
        assert main(["pretrain", "--systems", "99", "--out", str(tmp_path / "run")]) == 1

    def test_trains_and_saves_requested_system(self, tmp_path):
        config = write_config(
            tmp_path, stage1={"episodes": 1, "steps_per_episode": 6, "batch_size": 4, "hidden": [4]}
        )
        out = tmp_path / "run"

        assert main(["pretrain", "--config", config, "--systems", "3", "--out", str(out)]) == 0

        model = load_model(out / "models" / "system-3.npz")
        assert model.config.hidden == (4,)
        log = pd.read_csv(out / "logs" / "train-3.csv")
        assert list(log.columns) == ["episode", "return", "mean_loss", "final_state_norm"]

    def test_same_seed_same_model(self, tmp_path):
        config = write_config(
            tmp_path, stage1={"episodes": 1, "steps_per_episode": 8, "batch_size": 4, "hidden": [4]}
        )
        for name in ("a", "b"):
            assert main(["pretrain", "--config", config, "--systems", "1", "--seed", "4", "--out", str(tmp_path / name)]) == 0

        first = load_model(tmp_path / "a" / "models" / "system-1.npz")
        second = load_model(tmp_path / "b" / "models" / "system-1.npz")
        np.testing.assert_array_equal(first.main.data, second.main.data)

    def test_invalid_config_file_exits_with_config_error(self, tmp_path):
        config = write_config(tmp_path, virtual_systems={"1": {"xi": [2.0, 5.0]}})

        assert main(["pretrain", "--config", config, "--out", str(tmp_path / "run")]) == 1


class TestOnline:
    """Tests for the online command."""

    def test_writes_online_log(self, tmp_path, run_dir):
        config = write_config(tmp_path, stage2={"steps": 20, "initial_state": [0.2, 0.0]})

        assert main(["online", "--config", config, "--basis", "1,2", "--out", str(run_dir)]) == 0

        df = pd.read_csv(run_dir / "online.csv")
        assert len(df) == 20
        assert {"w_1", "w_2", "abs_delta"} <= set(df.columns)
        np.testing.assert_allclose(df["w_1"] + df["w_2"], 1.0)

    def test_single_member_basis(self, tmp_path, run_dir):
        config = write_config(tmp_path, stage2={"steps": 5})

        assert main(["online", "--config", config, "--basis", "2", "--out", str(run_dir)]) == 0

        np.testing.assert_allclose(pd.read_csv(run_dir / "online.csv")["w_1"], 1.0)

    def test_missing_member_file_is_a_config_error(self, tmp_path, run_dir):
        assert main(["online", "--preset", "desk", "--basis", "1,7", "--out", str(run_dir)]) == 1

    def test_xi_outside_region_is_a_config_error(self, run_dir):
        assert main(["online", "--basis", "1", "--xi", "0.5,60", "--out", str(run_dir)]) == 1

    def test_divergence_exits_with_numeric_code(self, run_dir, monkeypatch):
        def diverge(*args, **kwargs):
            raise DivergenceError("state norm exceeded")

        monkeypatch.setattr(online_command, "cmd_online", diverge)

        assert main(["online", "--basis", "1", "--out", str(run_dir)]) == 2


class TestSweep:
    """Tests for the sweep command."""

    def test_one_cell_member_sweep(self, tmp_path, run_dir):
        config = write_config(tmp_path, eval={"xi1_values": [0.95], "xi2_values": [5.5]})

        assert main(["sweep", "--config", config, "--member", "2", "--out", str(run_dir)]) == 0

        df = pd.read_csv(run_dir / "sweep-member-2.csv")
        assert len(df) == 1
        assert list(df.columns) == ["xi1", "xi2", "score", "success", "seed"]

    def test_online_sweep_is_deterministic(self, tmp_path, run_dir):
        config = write_config(
            tmp_path,
            eval={"xi1_values": [0.25, 0.75], "xi2_values": [10.5]},
            stage2={"steps": 15, "initial_state": [0.1, 0.0]},
        )
        args = ["sweep", "--config", config, "--basis", "1,2", "--seed", "2", "--out", str(run_dir)]

        assert main(args) == 0
        first = pd.read_csv(run_dir / "sweep.csv")
        assert main(args) == 0
        second = pd.read_csv(run_dir / "sweep.csv")

        pd.testing.assert_frame_equal(first, second)
        assert len(first) == 2


class TestSurfaceAndScore:
    """Tests for the surface and score commands."""

    def test_single_point_surface(self, tmp_path, run_dir):
        config = write_config(tmp_path, eval={"surface_x1": [0.0, 0.0, 1], "surface_x2": [0.0, 0.0, 1]})

        assert main(["surface", "--config", config, "--member", "1", "--out", str(run_dir)]) == 0

        df = pd.read_csv(run_dir / "surface-member-1.csv")
        assert len(df) == 1
        assert df.loc[0, "action"] == 0.0

    def test_ensemble_surface_with_weights(self, tmp_path, run_dir):
        config = write_config(tmp_path, eval={"surface_x1": [-1.0, 1.0, 3], "surface_x2": [-1.0, 1.0, 2]})

        assert main(
            ["surface", "--config", config, "--basis", "1,2", "--weights", "0.3,0.7", "--out", str(run_dir)]
        ) == 0

        assert len(pd.read_csv(run_dir / "surface-ensemble.csv")) == 6

    def test_weights_off_simplex_are_rejected(self, run_dir):
        assert main(["surface", "--basis", "1,2", "--weights", "0.5,0.6", "--out", str(run_dir)]) == 1

    def test_score_writes_full_trace(self, run_dir):
        assert main(["score", "--member", "2", "--out", str(run_dir)]) == 0

        df = pd.read_csv(run_dir / "trace-member-2.csv")
        assert len(df) == 1001
        assert df.loc[0, "x1"] == pytest.approx(np.pi)

    def test_output_directory_from_environment(self, tmp_path, run_dir, monkeypatch):
        monkeypatch.setenv("SIMQ_OUTPUT_DIR", str(run_dir))

        assert main(["score", "--member", "1", "--xi", "0.5,30"]) == 0

        assert (run_dir / "trace-member-1.csv").exists()
