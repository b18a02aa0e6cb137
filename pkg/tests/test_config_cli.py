import json
import os
import subprocess
import sys
import textwrap

import pytest

from basinlab.cli import EXIT_CONFIG, EXIT_CONSTRUCTION, EXIT_INCONCLUSIVE, EXIT_OK, main
from basinlab.config import ANALYSES, parse_config
from basinlab.errors import ConfigError
from basinlab.skew import PRESETS


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


KAN_GRID = """
    [run]
    preset = kan
    analysis = basin_grid
    seed = 7

    [grid]
    base = 0, 1, 2
    x = 0.1, 0.9, 2

    [analysis]
    samples = 50
    horizon = 2000
"""

WALK = """
    [run]
    preset = thm2_walk
    analysis = walk
    seed = 3

    [analysis]
    trials = 2000
"""


class TestParse:
    def test_defaults_filled(self):
        cfg = parse_config("[run]\npreset = kan\nanalysis = basin_grid\nseed = 1\n")
        assert cfg.params == {} and cfg.options == ANALYSES["basin_grid"]
        assert cfg.seed == 1 and cfg.grid.n_cells == 1

    def test_param_override_and_types(self):
        cfg = parse_config("[run]\npreset = thm3_flowtime\nanalysis = limitset\nseed = 2\n"
                           "[params]\ndelta = 0.2\n[analysis]\nhorizon = 1e5\n")
        assert cfg.params == {"delta": 0.2} and cfg.options["horizon"] == 100_000

    def test_all_errors_reported_together(self):
        text = ("[run]\npreset = thick41\nanalysis = thickness\nseed = -4\n"
                "[params]\nwidth = 3\n[analysis]\ndepth = 20\n")
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        msgs = info.value.errors
        assert len(msgs) == 3
        assert any("seed" in m for m in msgs)
        assert any("'width'" in m for m in msgs)
        assert any("depth must be at least 40" in m for m in msgs)

    def test_seed_range(self):
        parse_config(f"[run]\npreset = kan\nanalysis = basin_grid\nseed = {2**64 - 1}\n",
                     check_construction=False)
        with pytest.raises(ConfigError):
            parse_config(f"[run]\npreset = kan\nanalysis = basin_grid\nseed = {2**64}\n")

    def test_unknown_preset_lists_known(self):
        with pytest.raises(ConfigError) as info:
            parse_config("[run]\npreset = nope\nanalysis = walk\nseed = 1\n")
        assert "kan" in info.value.errors[0]

    def test_analysis_preset_mismatch(self):
        with pytest.raises(ConfigError, match="needs preset thm2_walk"):
            parse_config("[run]\npreset = kan\nanalysis = walk\nseed = 1\n")

    def test_construction_failure_names_derivative_product(self):
        with pytest.raises(ConfigError, match=r"f0'\(0\) f1'\(0\) > 1"):
            parse_config("[run]\npreset = thick41\nanalysis = thickness\nseed = 1\n"
                         "[params]\nc0 = 0.9\n")

    def test_malformed(self):
        with pytest.raises(ConfigError, match="malformed"):
            parse_config("preset = kan\n")


class TestCli:
    def test_presets(self, capsys):
        assert main(["presets"]) == EXIT_OK
        out = capsys.readouterr().out
        for name in PRESETS:
            assert name in out
        assert "capture_radius = 0.001  [float]" in out and "nsub = 100  [int]" in out

    def test_validate_ok(self, tmp_path, capsys):
        path = write(tmp_path, "[run]\npreset = thm3_flowtime\nanalysis = limitset\nseed = 1\n"
                               "[params]\ndelta = 0.2\n")
        assert main(["validate", path]) == EXIT_OK
        out = capsys.readouterr().out
        assert "integral of s(u, p_N) du < 0" in out and "all construction checks pass" in out

    def test_validate_construction(self, tmp_path, capsys):
        path = write(tmp_path, "[run]\npreset = thick41\nanalysis = thickness\nseed = 1\n"
                               "[params]\nc0 = 0.9\n")
        assert main(["validate", path]) == EXIT_CONSTRUCTION
        assert "f0'(0) f1'(0) > 1" in capsys.readouterr().err

    def test_run_construction(self, tmp_path):
        path = write(tmp_path, "[run]\npreset = thick41\nanalysis = thickness\nseed = 1\n"
                               "[params]\nc0 = 0.9\n")
        assert main(["run", path, "--out", str(tmp_path / "o")]) == EXIT_CONSTRUCTION
        assert not (tmp_path / "o").exists()

    def test_config_errors(self, tmp_path, capsys):
        path = write(tmp_path, "[run]\npreset = kan\nanalysis = basin_grid\nseed = x\n"
                               "[analysis]\nsamples = 10\n")
        assert main(["run", path]) == EXIT_CONFIG
        err = capsys.readouterr().err
        assert err.count("config error") == 2

    def test_bad_seed_override(self, tmp_path):
        path = write(tmp_path, KAN_GRID)
        assert main(["run", path, "--seed", "-1"]) == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.ini")]) == EXIT_CONFIG

    def test_thickness_inconclusive(self, tmp_path):
        path = write(tmp_path, "[run]\npreset = thick41\nanalysis = thickness\nseed = 1\n"
                               "[analysis]\nwords = 500\n")
        out = tmp_path / "o"
        assert main(["run", path, "--out", str(out)]) == EXIT_INCONCLUSIVE
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "inconclusive"
        assert "inconclusive" in (out / "thickness.csv").read_text()


class TestOutputs:
    def test_kan_grid_files(self, tmp_path, capsys):
        out = tmp_path / "o"
        # a horizon this short leaves Kan cells undecided, so the verdict may be inconclusive
        code = main(["run", write(tmp_path, KAN_GRID), "--out", str(out)])
        assert code in (EXIT_OK, EXIT_INCONCLUSIVE)
        assert sorted(p.name for p in out.iterdir()) == ["basins.csv", "basins.pgm", "manifest.json"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 7 and manifest["config"]["preset"] == "kan"
        assert set(manifest["outputs"]) == {"basins.csv", "basins.pgm"}
        assert (out / "basins.pgm").read_text().startswith("P2\n")
        status = "inconclusive" if code == EXIT_INCONCLUSIVE else "ok"
        assert manifest["status"] == status and f"status: {status}" in capsys.readouterr().out

    def test_identical_reruns(self, tmp_path):
        path = write(tmp_path, KAN_GRID)
        main(["run", path, "--out", str(tmp_path / "a")])
        main(["run", path, "--out", str(tmp_path / "b")])
        a = json.loads((tmp_path / "a" / "manifest.json").read_text())["outputs"]
        b = json.loads((tmp_path / "b" / "manifest.json").read_text())["outputs"]
        assert a == b
        for name in a:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        path = write(tmp_path, WALK)
        main(["run", path, "--out", str(tmp_path / "a")])
        main(["run", path, "--seed", "4", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "walk.csv").read_text() != (tmp_path / "b" / "walk.csv").read_text()

    def test_walk_has_oracle_columns(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", write(tmp_path, WALK), "--out", str(out)]) == EXIT_OK
        lines = (out / "walk.csv").read_text().splitlines()
        cols = lines[1].split(",")
        assert {"mc_p_S", "mc_stderr", "oracle_P", "chain_M", "truncation_drift"} <= set(cols)
        row = dict(zip(cols, lines[2].split(",")))
        assert abs(float(row["z_score"])) < 4

    @pytest.mark.parametrize("analysis,extra,files", [
        ("stationary", "", {"stationary.csv", "proposition.csv"}),
        ("lyapunov", "[analysis]\nn = 20000\n", {"lyapunov.csv"}),
        ("limitset", "[analysis]\nhorizon = 20000\noccupancy_steps = 500\n",
         {"limitset.csv", "occupancy.csv"}),
    ])
    def test_other_analyses(self, tmp_path, analysis, extra, files):
        text = f"[run]\npreset = thm2_walk\nanalysis = {analysis}\nseed = 5\n{extra}"
        out = tmp_path / "o"
        assert main(["run", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
        assert set(json.loads((out / "manifest.json").read_text())["outputs"]) == files

    def test_flow_analysis(self, tmp_path):
        text = "[run]\npreset = example7_flow\nanalysis = flow\nseed = 5\n[analysis]\nstarts = 5\n"
        out = tmp_path / "o"
        assert main(["run", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
        summary = json.loads((out / "manifest.json").read_text())["summary"]
        assert summary["max_difference"] < 1e-8
        assert abs(summary["tau_over_t"] - summary["quadrature_mean"]) < 1e-3


def test_thread_count_does_not_change_output(tmp_path):
    path = write(tmp_path, KAN_GRID)
    digests = []
    for threads in ("1", "2"):
        env = dict(os.environ, BASINLAB_THREADS=threads)
        out = tmp_path / f"t{threads}"
        proc = subprocess.run([sys.executable, "-m", "basinlab.cli", "run", path, "--out", str(out)],
                              env=env, capture_output=True, text=True, timeout=600)
        assert proc.returncode in (EXIT_OK, EXIT_INCONCLUSIVE), proc.stderr
        digests.append(json.loads((out / "manifest.json").read_text())["outputs"])
    assert digests[0] == digests[1]
