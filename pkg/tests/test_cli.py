import json
import subprocess
import sys

import pytest

from lindbundle.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, build_parser, config_from_args, main


def stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


class TestParsing:
    def test_flags_map_onto_config(self, tmp_path):
        args = build_parser().parse_args(
            ["run", "--scenario", "heating", "--seed", "18446744073709551615", "--realizations", "5",
             "--mode", "jk2", "--bundles", "6", "--out", str(tmp_path), "--set", "t_final=3"])
        cfg = config_from_args(args)
        assert (cfg.scenario, cfg.seed, cfg.realizations, cfg.mode, cfg.bundles) == (
            "heating", 2**64 - 1, 5, "jk2", 6)
        assert cfg.output_dir == str(tmp_path) and cfg.t_final == 3

    def test_config_file_then_flags(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"scenario": "custom", "s": 1.0, "bundles": 4}))
        args = build_parser().parse_args(["run", "--config", str(path), "--bundles", "10"])
        cfg = config_from_args(args)
        assert cfg.s == 1.0 and cfg.bundles == 10

    def test_seed_range(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--seed", str(2**64)])

    def test_mode_choices(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "--mode", "bundled8"])


class TestExitCodes:
    def test_run_ok(self, tmp_path, capsys):
        rc = main(["run", "--scenario", "cooling", "--set", "t_final=2", "--out", str(tmp_path)])
        assert rc == EXIT_OK
        assert json.loads(capsys.readouterr().out)["derived"]["N"] == 31
        assert (tmp_path / "reference.csv").exists()

    def test_odd_jackknife(self, tmp_path, capsys):
        rc = main(["run", "--mode", "jk1", "--bundles", "5", "--out", str(tmp_path)])
        assert rc == EXIT_CONFIG
        diag = stderr_json(capsys)
        assert diag["error"] == "config"
        assert [f["field"] for f in diag["fields"]] == ["bundles"]

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
        assert stderr_json(capsys)["fields"][0]["field"] == "config"

    def test_bad_json(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert main(["run", "--config", str(p)]) == EXIT_CONFIG

    def test_numerical_failure(self, tmp_path, capsys):
        rc = main(["run", "--scenario", "custom", "--set", "gamma_star=1e6", "--set", "dt=1",
                   "--set", "t_final=50", "--out", str(tmp_path)])
        assert rc == EXIT_NUMERIC
        diag = stderr_json(capsys)
        assert diag["error"] == "numerical" and diag["step"] is not None

    def test_validate(self, capsys):
        assert main(["validate"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "FAIL" not in out and "checks passed" in out

    def test_converge_and_scale(self, tmp_path, capsys):
        out = tmp_path / "c"
        rc = main(["converge", "--set", "t_final=2", "--realizations", "2", "--m-values", "2,4",
                   "--modes", "bundled", "--out", str(out)])
        assert rc == EXIT_OK and (out / "convergence.csv").exists()
        out = tmp_path / "s"
        rc = main(["scale", "--spins", "0,0.5,1", "--bundles", "2", "--kernel", "sparse",
                   "--out", str(out)])
        assert rc == EXIT_OK and (out / "scaling.csv").exists()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "lindbundle", "run", "--mode", "jk2",
                          "--bundles", "3"], capture_output=True, text=True)
    assert res.returncode == EXIT_CONFIG
    assert json.loads(res.stderr)["error"] == "config"
