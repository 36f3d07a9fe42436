"""Command-line driver: sweeps, fixtures, validation, comparison, exit codes."""

import io
import json

import numpy as np
import pytest
from PIL import Image

from geodispose.cli import (EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_RUNTIME,
                            main)
from geodispose.evaluation import parse_csv
from geodispose.proposals import load_manifest


def run_cli(*argv):
    return main(list(argv))


def png_bytes(arr):
    img = Image.fromarray(arr.astype(np.uint16))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def make_tum_fixture(root, n=3):
    (root / "depth").mkdir(parents=True)
    rgb_lines, depth_lines, gt_lines = [], [], []
    for i in range(n):
        ts = f"{1.0 + 0.05 * i:.6f}"
        arr = np.full((480, 640), 5000 + 100 * i, dtype=np.uint16)
        (root / "depth" / f"{ts}.png").write_bytes(png_bytes(arr))
        rgb_lines.append(f"{ts} rgb/{ts}.png")
        depth_lines.append(f"{ts} depth/{ts}.png")
        gt_lines.append(f"{ts} {0.01 * i} 0 0 0 0 0 1")
    (root / "rgb.txt").write_text("\n".join(rgb_lines) + "\n")
    (root / "depth.txt").write_text("\n".join(depth_lines) + "\n")
    (root / "groundtruth.txt").write_text("\n".join(gt_lines) + "\n")


class TestRunSynthetic:
    def test_artifacts_and_structure(self, tmp_path):
        out = tmp_path / "res"
        code = run_cli("run", "--synthetic", "--frames", "6",
                       "--strides", "1,2", "--init", "identity",
                       "--workers", "2", "--out", str(out))
        assert code == EXIT_OK
        assert (out / "results.txt").exists()
        assert (out / "config.json").exists()
        summaries = parse_csv((out / "results.csv").read_text())
        assert {s.stride for s in summaries} == {1, 2}
        assert all(s.init_mode == "identity" for s in summaries)
        # config echo records the resolved thresholds
        cfg = json.loads((out / "config.json").read_text())
        assert cfg["icp"]["residual_accept_thresh"] == 0.03
        assert cfg["seed"] == 0
        # per-pair logs and trajectories per cell
        assert (out / "pairs_synthetic_s1_identity.tsv").exists()
        assert (out / "traj_synthetic_s2_identity.txt").exists()

    def test_identity_init_accurate_on_synthetic(self, tmp_path):
        out = tmp_path / "res"
        assert run_cli("run", "--synthetic", "--frames", "5", "--strides",
                       "1", "--init", "identity", "--out", str(out)) == EXIT_OK
        s, = parse_csv((out / "results.csv").read_text())
        assert s.rot_mean < 0.1 and s.trans_mean < 0.002
        assert s.rejected_count == 0

    def test_rerun_byte_identical(self, tmp_path):
        args = ("run", "--synthetic", "--frames", "5", "--strides", "1,2",
                "--init", "identity,gt-perturbed", "--seed", "3")
        assert run_cli(*args, "--out", str(tmp_path / "a")) == EXIT_OK
        assert run_cli(*args, "--out", str(tmp_path / "b")) == EXIT_OK
        for name in ("results.csv", "results.txt",
                     "pairs_synthetic_s1_gt-perturbed.tsv",
                     "traj_synthetic_s1_identity.txt"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_config_file_flags_win(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"frames": 4, "strides": "1",
                                   "synthetic": True, "seed": 9}))
        out = tmp_path / "res"
        code = run_cli("run", "--config", str(cfg), "--out", str(out))
        assert code == EXIT_OK
        echoed = json.loads((out / "config.json").read_text())
        assert echoed["seed"] == 9

    def test_residual_thresh_flag(self, tmp_path):
        out = tmp_path / "res"
        code = run_cli("run", "--synthetic", "--frames", "4", "--strides",
                       "1", "--init", "identity", "--residual-thresh",
                       "0.007", "--out", str(out))
        assert code == EXIT_OK
        cfg = json.loads((out / "config.json").read_text())
        assert cfg["icp"]["residual_accept_thresh"] == 0.007


class TestExitCodes:
    def test_missing_inputs_is_config_error(self, tmp_path):
        assert run_cli("run", "--strides", "1",
                       "--out", str(tmp_path / "x")) == EXIT_CONFIG

    def test_file_init_without_manifest(self, tmp_path):
        assert run_cli("run", "--synthetic", "--init", "file",
                       "--out", str(tmp_path / "x")) == EXIT_CONFIG

    def test_missing_dataset_is_data_error(self, tmp_path):
        assert run_cli("run", "--dataset", str(tmp_path / "nope"),
                       "--sequence", "seq",
                       "--out", str(tmp_path / "x")) == EXIT_DATA

    def test_bad_subcommand_is_config_error(self):
        assert run_cli("frobnicate") == EXIT_CONFIG

    def test_missing_manifest_file(self, tmp_path):
        assert run_cli("run", "--synthetic", "--init", "file", "--manifest",
                       str(tmp_path / "none.manifest"),
                       "--out", str(tmp_path / "x")) == EXIT_DATA


class TestValidate:
    def test_ok_fixture(self, tmp_path, capsys):
        root = tmp_path / "seq"
        make_tum_fixture(root)
        assert run_cli("validate", str(root)) == EXIT_OK
        out = capsys.readouterr().out
        assert "OK, 3 pairs" in out

    def test_truncated_depth_file(self, tmp_path, capsys):
        root = tmp_path / "seq"
        make_tum_fixture(root)
        victim = next((root / "depth").iterdir())
        victim.write_bytes(victim.read_bytes()[:20])
        assert run_cli("validate", str(root)) == EXIT_DATA
        assert victim.name in capsys.readouterr().err

    def test_drop_rate_reported(self, tmp_path, capsys):
        root = tmp_path / "seq"
        make_tum_fixture(root)
        # one extra rgb record with no depth partner -> 25% drop
        with open(root / "rgb.txt", "a") as f:
            f.write("9.000000 rgb/9.000000.png\n")
        assert run_cli("validate", str(root)) == EXIT_OK
        assert "25.0%" in capsys.readouterr().out

    def test_missing_directory(self, tmp_path):
        assert run_cli("validate", str(tmp_path / "nope")) == EXIT_DATA


class TestRenderFixtures:
    def test_manifest_loads_and_file_mode_runs(self, tmp_path):
        fix = tmp_path / "fix"
        assert run_cli("render-fixtures", "--out", str(fix), "--frames", "5",
                       "--strides", "1") == EXIT_OK
        m = load_manifest(fix / "proposals.manifest")
        assert len(m.entries) == 4
        out = tmp_path / "res"
        code = run_cli("run", "--synthetic", "--frames", "5", "--strides",
                       "1", "--init", "file", "--manifest",
                       str(fix / "proposals.manifest"), "--out", str(out))
        assert code == EXIT_OK
        s, = parse_csv((out / "results.csv").read_text())
        # fixture poses are the true motions, so file-init errors are tiny
        assert s.rot_mean < 0.1 and s.rejected_count == 0


class TestCompare:
    def run_two_inits(self, tmp_path):
        out = tmp_path / "res"
        assert run_cli("run", "--synthetic", "--frames", "6", "--strides",
                       "1,3", "--init", "identity,gt-perturbed",
                       "--out", str(out)) == EXIT_OK
        return out / "results.csv"

    def test_init_columns_agree(self, tmp_path, capsys):
        csv = self.run_two_inits(tmp_path)
        assert run_cli("compare", str(csv)) == EXIT_OK
        assert "0 cell(s) out of tolerance" in capsys.readouterr().out

    def test_two_files_identical(self, tmp_path):
        csv = self.run_two_inits(tmp_path)
        assert run_cli("compare", str(csv), str(csv)) == EXIT_OK

    def test_out_of_tolerance_fails(self, tmp_path, capsys):
        csv = self.run_two_inits(tmp_path)
        other = tmp_path / "shifted.csv"
        text = csv.read_text()
        summaries = parse_csv(text)
        lines = [text.splitlines()[0]]
        for s in summaries:
            lines.append(",".join([
                s.sequence, str(s.stride), s.init_mode, s.depth_mode,
                str(s.n), repr(s.rot_mean + 1.0), repr(s.rot_p95 + 1.0),
                repr(s.trans_mean), repr(s.trans_p95),
                str(s.rejected_count)]))
        other.write_text("\n".join(lines) + "\n")
        assert run_cli("compare", str(csv), str(other)) == EXIT_RUNTIME
        assert "FAIL" in capsys.readouterr().out
