import contextlib
import io
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import numpy as np

from auxstate import cli
from auxstate.harness.runner import read_records


def _call(command, argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = command(argv)
    return code, out.getvalue(), err.getvalue()


def _write(base: Path, name: str, text: str) -> Path:
    path = base / name
    path.write_text(text, encoding="utf-8")
    return path


class CheckCommandTests(unittest.TestCase):
    def test_valid_config(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(Path(tmpdir), "ok.yaml", "env: lobster\nagent: pf\n")
            code, output, _ = _call(cli.check_command, [str(path)])
        self.assertEqual(code, 0)
        self.assertTrue(output.startswith("config_hash: "))
        self.assertIn("agent: pf", output)

    def test_scale_flag(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(Path(tmpdir), "ok.yaml", "env: fishing2\nagent: trace\n")
            code, output, _ = _call(cli.check_command, [str(path), "--scale", "paper"])
        self.assertEqual(code, 0)
        self.assertIn("steps: 12000000", output)
        self.assertIn("learn.approximator: cnn", output)

    def test_config_error_diagnostic(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(Path(tmpdir), "bad.yaml", "env: lobster\nagent: trace\nlearn:\n  alpha: 0\n")
            code, output, _ = _call(cli.check_command, [str(path)])
        self.assertEqual(code, 1)
        self.assertIn("Config error: learn.alpha: step size must be positive", output)
        self.assertIn("bad.yaml:4:10", output)
        self.assertIn("^", output)

    def test_missing_file(self):
        code, output, _ = _call(cli.check_command, ["/nonexistent/config.yaml"])
        self.assertEqual(code, 1)
        self.assertIn("cannot read config", output)

    def test_missing_argument_is_usage_error(self):
        code, _, err = _call(cli.check_command, [])
        self.assertEqual(code, 2)
        self.assertIn("usage:", err)


class RunCommandTests(unittest.TestCase):
    def test_run_writes_records(self):
        with tempfile.TemporaryDirectory() as tmpdir, mock.patch.dict(os.environ, {"AUX_THREADS": "1"}):
            base = Path(tmpdir)
            path = _write(base, "run.yaml", "env: lobster\nagent: trace\nsteps: 200\nseeds: [0]\n")
            code, output, _ = _call(cli.run_command, ["--config", str(path), "--out", str(base / "runs")])
            config_hash = output.split()[0]
            records = read_records(base / "runs" / config_hash / "records.csv")
        self.assertEqual(code, 0)
        self.assertIn("1 seeds", output)
        self.assertEqual([r.metric for r in records], ["return"])

    def test_invalid_thread_count(self):
        with tempfile.TemporaryDirectory() as tmpdir, mock.patch.dict(os.environ, {"AUX_THREADS": "none"}):
            base = Path(tmpdir)
            path = _write(base, "run.yaml", "env: lobster\nagent: trace\nsteps: 200\nseeds: [0]\n")
            code, output, _ = _call(cli.run_command, ["--config", str(path), "--out", str(base / "runs")])
        self.assertEqual(code, 1)
        self.assertIn("AUX_THREADS must be a positive integer", output)


class PlotCommandTests(unittest.TestCase):
    def test_plot_writes_svg(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            base = Path(tmpdir)
            csv_path = _write(base, "records.csv",
                              "config_hash,seed,step,metric,value\nabc,0,200,return,1.0\nabc,0,400,return,2.0\n")
            code, output, _ = _call(cli.plot_command, ["--in", str(csv_path), "--out", str(base / "c.svg")])
            self.assertTrue((base / "c.svg").is_file())
        self.assertEqual(code, 0)
        self.assertIn("1 curves", output)

    def test_unknown_metric(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            base = Path(tmpdir)
            csv_path = _write(base, "records.csv", "config_hash,seed,step,metric,value\nabc,0,200,return,1.0\n")
            code, output, _ = _call(cli.plot_command, ["--in", str(csv_path), "--out", str(base / "c.svg"),
                                                       "--metric", "offline_return"])
        self.assertEqual(code, 1)
        self.assertIn("metric 'offline_return' not found", output)


class OracleCommandTests(unittest.TestCase):
    def test_dump_lobster_mdp(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            out = Path(tmpdir) / "lobster.npz"
            code, output, _ = _call(cli.oracle_command, ["dump-mdp", "lobster", "--out", str(out)])
            with np.load(out) as data:
                self.assertEqual(data["transitions"].shape, (12, 3, 12))
                self.assertAlmostEqual(float(data["gamma"]), 0.9)
        self.assertEqual(code, 0)
        self.assertIn("lobster.npz", output)

    def test_dump_rocksample_is_unsupported(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            out = Path(tmpdir) / "rs.npz"
            code, output, _ = _call(cli.oracle_command, ["dump-mdp", "rocksample_7_8", "--out", str(out)])
        self.assertEqual(code, 1)
        self.assertIn("Unsupported:", output)

    def test_lobster_baseline(self):
        code, output, _ = _call(cli.oracle_command, ["lobster-baseline", "--runs", "5"])
        self.assertEqual(code, 0)
        self.assertIn("over 5 segments", output)


class PresetsCommandTests(unittest.TestCase):
    def test_list(self):
        code, output, _ = _call(cli.presets_command, [])
        self.assertEqual(code, 0)
        self.assertEqual(output.split(), ["lobster", "compass9", "rocksample_7_8", "fishing1", "fishing2"])

    def test_dump(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            code, _, _ = _call(cli.presets_command, ["--dump", tmpdir])
            names = sorted(p.name for p in Path(tmpdir).iterdir())
        self.assertEqual(code, 0)
        self.assertIn("fishing2.yaml", names)
        self.assertEqual(len(names), 5)


class GeometryCommandTests(unittest.TestCase):
    def test_geometry_from_checkpoint(self):
        with tempfile.TemporaryDirectory() as tmpdir, mock.patch.dict(os.environ, {"AUX_THREADS": "1"}):
            base = Path(tmpdir)
            path = _write(base, "run.yaml", "env: lobster\nagent: trace\nsteps: 200\nseeds: [0]\n")
            _, output, _ = _call(cli.run_command, ["--config", str(path), "--out", str(base / "runs")])
            ckpt = base / "runs" / output.split()[0] / "seed_0.npz"
            code, output, _ = _call(cli.geometry_command, ["--agent", str(ckpt), "--out", str(base / "g.csv")])
            self.assertTrue((base / "g.csv").is_file())
        self.assertEqual(code, 0)
        self.assertIn("points", output)

    def test_missing_checkpoint(self):
        code, output, _ = _call(cli.geometry_command, ["--agent", "/nonexistent.npz", "--out", "unused.csv"])
        self.assertEqual(code, 1)
        self.assertIn("cannot read checkpoint", output)


class SweepCommandTests(unittest.TestCase):
    def test_sweep_reports_selection(self):
        with tempfile.TemporaryDirectory() as tmpdir, mock.patch.dict(os.environ, {"AUX_THREADS": "1"}):
            base = Path(tmpdir)
            grid = _write(base, "grid.yaml", "env: lobster\nagent: trace\nsteps: 200\nseeds: [0]\n"
                                             "grid:\n  learn.alpha: [0.01, 0.001]\n")
            code, output, _ = _call(cli.sweep_command, ["--grid", str(grid), "--out", str(base / "sweeps")])
            self.assertTrue((base / "sweeps" / "sweep.csv").is_file())
        self.assertEqual(code, 0)
        self.assertIn("2 configurations; selected", output)


if __name__ == "__main__":
    unittest.main()
