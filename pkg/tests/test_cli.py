"""Tests for ``hamel_oc.cli``."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from hamel_oc.cli import EXIT_NO_CONVERGENCE, EXIT_USAGE, LOG_ENV, main
from hamel_oc.models import builtin
from hamel_oc.solvers import evaluate_cost
from hamel_oc.writers import read_trajectory_csv


def _fields(text: str) -> dict[str, str]:
    """``key: value`` lines of the command summary."""
    found = {}
    for line in text.splitlines():
        key, sep, value = line.partition(": ")
        if sep:
            found[key] = value
    return found


def _exit_code(argv: list[str]) -> int:
    with pytest.raises(SystemExit) as info:
        main(argv)
    return int(info.value.code)


class TestList:
    """Tests for ``hamel-oc list``."""

    def test_lists_models_and_scenarios(
        self, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Every model is printed with its dimensions and scenarios."""
        main(["list"])
        out = capsys.readouterr().out

        assert "heisenberg: n=3 m=1 layouts=kinematicOC" in out
        assert "  - steer_z (kinematicOC):" in out
        assert "sphere_dyn: n=3 m=0 layouts=dynamicOC, mechanics" in out
        assert "  - fig2 (dynamicOC):" in out
        assert "  - turn: alias of fig2" in out


class TestSolve:
    """Tests for ``hamel-oc solve``."""

    def test_heisenberg_lift(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """The printed cost is reproduced from the written CSV."""
        out = tmp_path / "lift.csv"
        argv = ["solve", "--model", "heisenberg", "--scenario", "steer_z"]
        main([*argv, "--out", str(out)])
        fields = _fields(capsys.readouterr().out)
        trajectory, meta = read_trajectory_csv(out)
        cost = evaluate_cost(builtin("heisenberg").kinematic_ocp, trajectory)

        assert fields["converged"] == "true"
        assert fields["output"] == str(out)
        assert float(fields["cost"]) == pytest.approx(cost, abs=1e-12)
        assert float(fields["cost"]) == pytest.approx(np.pi, abs=1e-5)
        assert meta["converged"] == "true"
        assert float(meta["cost"]) == float(fields["cost"])

    def test_json_output(self, tmp_path: Path) -> None:
        """``--format json`` writes diagnostics next to the table."""
        out = tmp_path / "drive.json"
        main(
            [
                "solve",
                "--model",
                "vertical_disc_kin",
                "--scenario",
                "drive",
                "--format",
                "json",
                "--out",
                str(out),
            ]
        )
        payload = json.loads(out.read_text(encoding="utf-8"))

        assert payload["meta"]["converged"] is True
        assert payload["meta"]["cost"] == pytest.approx(0.5)
        assert payload["diagnostics"]["augmented_cost"] == pytest.approx(0.5)
        assert payload["columns"][:5] == ["t", "q1", "q2", "q3", "q4"]

    def test_malformed_vector(
        self, tmp_path: Path, caplog: pytest.LogCaptureFixture
    ) -> None:
        """A bad ``--q0`` exits 1 and names the flag."""
        code = _exit_code(
            [
                "solve",
                "--model",
                "heisenberg",
                "--q0",
                "0,zero,0",
                "--out",
                str(tmp_path / "x.csv"),
            ]
        )

        assert code == EXIT_USAGE
        assert "--q0: cannot parse" in caplog.text
        assert not (tmp_path / "x.csv").exists()

    def test_sphere_reorientation(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """The rest-to-rest sphere turn converges under its registered name."""
        out = tmp_path / "sphere.csv"
        argv = ["solve", "--model", "sphere_dyn", "--scenario", "fig2"]
        main([*argv, "--out", str(out)])
        fields = _fields(capsys.readouterr().out)
        trajectory, meta = read_trajectory_csv(out)

        assert fields["converged"] == "true"
        assert float(fields["residual"]) <= 1e-6
        assert meta["scenario"] == "fig2"
        assert trajectory.states.shape == (401, 12)
        np.testing.assert_allclose(
            trajectory.final.q, [np.pi, -np.pi / 4.0, np.pi / 5.0], atol=1e-6
        )

    def test_singular_endpoint(
        self, tmp_path: Path, caplog: pytest.LogCaptureFixture
    ) -> None:
        """A q0 outside the chart exits 1 with the field named, no traceback."""
        code = _exit_code(
            [
                "solve",
                "--model",
                "falling_disc_kin",
                "--q0",
                "0,0,0,0,0",
                "--out",
                str(tmp_path / "x.csv"),
            ]
        )

        assert code == EXIT_USAGE
        assert "q0: quasi-velocity frame singular" in caplog.text
        assert not (tmp_path / "x.csv").exists()

    def test_unknown_model(self, caplog: pytest.LogCaptureFixture) -> None:
        """Unregistered models exit 1 with the valid names."""
        assert _exit_code(["solve", "--model", "unicycle"]) == EXIT_USAGE
        assert "valid names" in caplog.text

    def test_missing_model(self, caplog: pytest.LogCaptureFixture) -> None:
        """Neither ``--model`` nor ``--config`` is a usage error."""
        assert _exit_code(["solve"]) == EXIT_USAGE
        assert "pass --model or --config" in caplog.text

    def test_mechanics_scenario_is_refused(
        self, caplog: pytest.LogCaptureFixture
    ) -> None:
        """Initial-value scenarios belong to ``simulate``."""
        code = _exit_code(
            ["solve", "--model", "vertical_disc_dyn", "--scenario", "push"]
        )

        assert code == EXIT_USAGE
        assert "use simulate" in caplog.text

    def test_no_convergence(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """An unreachable tolerance exits 2 and marks the file unconverged."""
        out = tmp_path / "fail.csv"
        code = _exit_code(
            [
                "solve",
                "--model",
                "heisenberg",
                "--tol",
                "1e-300",
                "--max-iters",
                "2",
                "--out",
                str(out),
            ]
        )

        assert code == EXIT_NO_CONVERGENCE
        assert _fields(capsys.readouterr().out)["converged"] == "false"
        assert out.read_text(encoding="utf-8").startswith("# converged=false\n")

    def test_config_file(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """A TOML scenario drives the solve; flags override it."""
        out = tmp_path / "from-config.csv"
        config = tmp_path / "drive.toml"
        config.write_text(
            '[model]\nname = "vertical_disc_kin"\n\n'
            "[bc]\nq1 = [2.0, 0.0, 2.0, 0.0]\n\n"
            '[output]\npath = "ignored.csv"\n',
            encoding="utf-8",
        )
        main(["solve", "--config", str(config), "--t1", "2", "--out", str(out)])
        fields = _fields(capsys.readouterr().out)

        assert fields["converged"] == "true"
        assert float(fields["cost"]) == pytest.approx(1.0)
        assert out.exists()


class TestSimulate:
    """Tests for ``hamel-oc simulate``."""

    def test_push(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """A unit rolling torque turns the disc by 1/3 rad in unit time."""
        out = tmp_path / "push.csv"
        main(
            [
                "simulate",
                "--model",
                "vertical_disc_dyn",
                "--forces",
                "1,0",
                "--t1",
                "1",
                "--steps",
                "100",
                "--out",
                str(out),
            ]
        )
        fields = _fields(capsys.readouterr().out)
        trajectory, meta = read_trajectory_csv(out)

        assert trajectory.final.q[2] == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert meta["scenario"] == "push"
        assert meta["steps"] == "100"
        assert fields["output"] == str(out)
        lines = out.read_text(encoding="utf-8").splitlines()
        header = next(line for line in lines if not line.startswith("#"))
        assert header.endswith(",Q3,Q4")

    def test_wrong_force_count(self, caplog: pytest.LogCaptureFixture) -> None:
        """Force vectors must have one entry per free slot."""
        code = _exit_code(
            ["simulate", "--model", "vertical_disc_dyn", "--forces", "1,0,0"]
        )

        assert code == EXIT_USAGE
        assert "--forces: length 3, expected 2" in caplog.text

    def test_model_without_mechanics(self, caplog: pytest.LogCaptureFixture) -> None:
        """The Heisenberg system cannot be simulated."""
        assert _exit_code(["simulate", "--model", "heisenberg"]) == EXIT_USAGE
        assert "mechanics layout" in caplog.text


class TestVerify:
    """Tests for ``hamel-oc verify``."""

    def test_single_model(self, tmp_path: Path) -> None:
        """Frame and right-hand-side checks pass for one model."""
        out = tmp_path / "verify.json"
        main(["verify", "--model", "heisenberg", "--no-bvp", "--out", str(out)])
        summary = json.loads(out.read_text(encoding="utf-8"))

        assert summary["passed"] is True
        assert [report["subject"] for report in summary["reports"]] == ["heisenberg"]
        assert summary["reports"][0]["seed"] == 0xB01

    def test_report_to_stdout(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Without ``--out`` the report is printed."""
        main(["verify", "--model", "sphere_dyn", "--no-bvp", "--seed", "7"])
        summary = json.loads(capsys.readouterr().out)

        assert summary["reports"][0]["seed"] == 7

    def test_unknown_model(self) -> None:
        """Unregistered models exit 1."""
        assert _exit_code(["verify", "--model", "unicycle"]) == EXIT_USAGE


class TestLogging:
    """Tests for the log level switch."""

    def test_unknown_level_warns(
        self,
        monkeypatch: pytest.MonkeyPatch,
        caplog: pytest.LogCaptureFixture,
        capsys: pytest.CaptureFixture[str],
    ) -> None:
        """A bogus level falls back to info with a warning."""
        monkeypatch.setenv(LOG_ENV, "loud")
        with caplog.at_level(logging.WARNING):
            main(["list"])

        assert f"Unknown {LOG_ENV} value 'loud'" in caplog.text
        assert "heisenberg" in capsys.readouterr().out
