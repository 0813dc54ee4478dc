"""Command line entry point: exit codes, reports, logs, serve mode."""

import json
import os
import signal
import socket
import subprocess
import sys
import time

import pytest

from inpipe.cli import main

from conftest import scenario_text


def write_scenario(tmp_path, name="scenario.json", **kwargs):
    path = tmp_path / name
    path.write_text(scenario_text(**kwargs), encoding="utf-8")
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestUsageErrors:
    def test_nothing_to_do(self, capsys, tmp_path):
        path = write_scenario(tmp_path)
        code, _, err = run_cli(capsys, "--scenario", path)
        assert code == 1
        assert "nothing to do" in err
        assert "--autopilot" in err

    def test_missing_scenario_file(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "--scenario", str(tmp_path / "absent.json"), "--autopilot"
        )
        assert code == 1
        assert "cannot read scenario" in err

    def test_invalid_scenario_json(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        code, _, err = run_cli(capsys, "--scenario", str(path), "--autopilot")
        assert code == 1
        assert err.startswith("error:")

    def test_rejected_scenario_geometry(self, capsys, tmp_path):
        path = write_scenario(tmp_path, diameter=700.0)
        code, _, err = run_cli(capsys, "--scenario", path, "--autopilot")
        assert code == 1
        assert err.startswith("error:")

    def test_serve_and_replay_are_mutually_exclusive(self, capsys, tmp_path):
        path = write_scenario(tmp_path)
        code, _, err = run_cli(
            capsys, "--scenario", path, "--serve", "--replay", "x.log"
        )
        assert code == 1
        assert "mutually exclusive" in err

    def test_seed_must_be_unsigned_64_bit(self, capsys, tmp_path):
        path = write_scenario(tmp_path)
        code, _, err = run_cli(
            capsys, "--scenario", path, "--autopilot", "--seed", "-1"
        )
        assert code == 1
        assert "unsigned 64-bit" in err

    def test_replay_of_non_log_file(self, capsys, tmp_path):
        scenario = write_scenario(tmp_path)
        junk = tmp_path / "junk.log"
        junk.write_text("hello\n", encoding="utf-8")
        code, _, err = run_cli(capsys, "--scenario", scenario, "--replay", str(junk))
        assert code == 1
        assert err.startswith("error:")

    def test_serve_port_already_taken(self, capsys, tmp_path):
        path = write_scenario(tmp_path)
        blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        try:
            blocker.bind(("127.0.0.1", 0))
            blocker.listen(1)
            port = blocker.getsockname()[1]
            code, _, err = run_cli(
                capsys,
                "--scenario",
                path,
                "--serve",
                "--port",
                str(port),
                "--bridge-port",
                str(port + 1),
            )
        finally:
            blocker.close()
        assert code == 1
        assert "cannot bind" in err


class TestAutopilotRuns:
    def test_mission_report_and_log(self, capsys, tmp_path):
        scenario = write_scenario(tmp_path)
        report_path = tmp_path / "report.json"
        log_path = tmp_path / "run.log"
        code, out, err = run_cli(
            capsys,
            "--scenario",
            scenario,
            "--autopilot",
            "--report",
            str(report_path),
            "--log",
            str(log_path),
        )
        assert code == 0
        assert err == ""
        assert "joint" in out  # table header
        assert "final=DONE" in out

        doc = json.loads(report_path.read_text(encoding="utf-8"))
        assert doc["final_state"] == "DONE"
        assert doc["totals"]["faults"] == []
        assert doc["joints"][0]["finished"] is True

        # The log written alongside the run replays cleanly.
        code, out, err = run_cli(
            capsys, "--scenario", scenario, "--replay", str(log_path)
        )
        assert code == 0
        assert "matched" in out

    def test_fault_exits_2_with_cause_on_stderr(self, capsys, tmp_path):
        scenario = write_scenario(
            tmp_path, joints=[{"axial_pos_mm": 5000.0, "axial_offset_mm": 120.0}]
        )
        code, out, err = run_cli(capsys, "--scenario", scenario, "--autopilot")
        assert code == 2
        assert "final=FAULT" in out
        assert "FAULT: joint unreachable" in err

    def test_seed_override_changes_hash_not_outcome(self, capsys, tmp_path):
        scenario = write_scenario(tmp_path)
        hashes = []
        for seed in ("11", "12"):
            report_path = tmp_path / f"report-{seed}.json"
            code, _, _ = run_cli(
                capsys,
                "--scenario",
                scenario,
                "--autopilot",
                "--seed",
                seed,
                "--report",
                str(report_path),
            )
            assert code == 0
            doc = json.loads(report_path.read_text(encoding="utf-8"))
            assert doc["final_state"] == "DONE"
            assert doc["seed"] == int(seed)
            hashes.append(doc["final_state_hash"])
        assert hashes[0] != hashes[1]

    def test_replay_with_other_seed_is_refused(self, capsys, tmp_path):
        scenario = write_scenario(tmp_path)
        log_path = tmp_path / "run.log"
        code, _, _ = run_cli(
            capsys, "--scenario", scenario, "--autopilot", "--log", str(log_path)
        )
        assert code == 0
        code, _, err = run_cli(
            capsys, "--scenario", scenario, "--replay", str(log_path), "--seed", "99"
        )
        assert code == 1
        assert "error:" in err

    def test_tampered_log_exits_3(self, capsys, tmp_path):
        scenario = write_scenario(tmp_path)
        log_path = tmp_path / "run.log"
        code, _, _ = run_cli(
            capsys, "--scenario", scenario, "--autopilot", "--log", str(log_path)
        )
        assert code == 0

        lines = log_path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines):
            record = json.loads(line)
            if record.get("checkpoint", 0) > 0:
                digest = record["hash"]
                record["hash"] = ("0" if digest[0] != "0" else "1") + digest[1:]
                lines[i] = json.dumps(record)
                break
        else:
            pytest.fail("no checkpoint record found to tamper with")
        log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

        code, _, err = run_cli(
            capsys, "--scenario", scenario, "--replay", str(log_path)
        )
        assert code == 3
        assert "replay diverged:" in err
        assert "diverged at tick" in err


def _wait_for_port(port, deadline):
    while time.monotonic() < deadline:
        try:
            with socket.create_connection(("127.0.0.1", port), timeout=0.2):
                return
        except OSError:
            time.sleep(0.05)
    raise AssertionError(f"port {port} never came up")


class TestSubprocessEntryPoint:
    def test_module_invocation_runs_a_mission(self, tmp_path):
        scenario = write_scenario(tmp_path)
        proc = subprocess.run(
            [sys.executable, "-m", "inpipe.cli", "--scenario", scenario, "--autopilot"],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0, proc.stderr
        assert "final=DONE" in proc.stdout

    def test_serve_shuts_down_cleanly_on_interrupt(self, tmp_path):
        scenario = write_scenario(tmp_path)
        log_path = tmp_path / "serve.log"
        report_path = tmp_path / "serve_report.json"
        port = 34851 + (os.getpid() % 2000) * 2
        proc = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "inpipe.cli",
                "--scenario",
                scenario,
                "--serve",
                "--tps",
                "1000",
                "--port",
                str(port),
                "--bridge-port",
                str(port + 1),
                "--log",
                str(log_path),
                "--report",
                str(report_path),
            ],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            _wait_for_port(port, time.monotonic() + 30.0)
            time.sleep(0.5)  # let it tick for a while
            proc.send_signal(signal.SIGINT)
            out, err = proc.communicate(timeout=30)
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.communicate()
        assert proc.returncode == 0, err
        assert "serving on" in out
        assert "shut down cleanly" in out

        # Serve mode writes the session's mission report on shutdown.
        doc = json.loads(report_path.read_text())
        assert doc["final_state"] == "DRIVING"  # nobody drove it anywhere
        assert doc["joints"][0]["finished"] is False

        # The log the server kept while idling replays cleanly.
        result = subprocess.run(
            [
                sys.executable,
                "-m",
                "inpipe.cli",
                "--scenario",
                scenario,
                "--replay",
                str(log_path),
            ],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert result.returncode == 0, result.stderr
        assert "matched" in result.stdout
