import json
import math
import os

import numpy as np
import pytest

from spingas.cli import main
from spingas.config import ConfigError, parse_config


class TestConfig:
    def test_defaults_match_reference_values(self):
        cfg = parse_config()
        assert cfg.gamma() == 58.0
        coll = cfg.collisions()
        assert coll.q_slowdown == 4.57
        assert coll.gamma_c == pytest.approx(2 * math.pi * 1.86e9)
        assert coll.gamma_q == pytest.approx(2 * math.pi * 265e6)
        assert coll.gamma_p == pytest.approx(2 * math.pi * 219e6)
        assert cfg["fields", "pump_detuning"] == pytest.approx(2 * math.pi * 7e8)
        assert cfg["fields", "bias_detuning"] == pytest.approx(2 * math.pi * 1.2e9)
        assert cfg["fields", "b_z"] == 1.0
        atom = cfg.atom()
        assert float(atom.nuclear_spin) == 3.5
        assert atom.a_ground == pytest.approx(2 * math.pi * 2.3e9)
        assert all(v == "default" for v in cfg.provenance.values())

    def test_file_and_provenance(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[relaxation]\ngamma = 70 /s\n")
        cfg = parse_config(str(path))
        assert cfg.gamma() == 70.0
        assert cfg.provenance[("relaxation", "gamma")] == "user"
        assert cfg.provenance[("collisions", "q_slowdown")] == "default"

    def test_unknown_key_rejected_with_line(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[relaxation]\nbogus = 3\n")
        with pytest.raises(ConfigError) as err:
            parse_config(str(path))
        assert "line 2" in str(err.value)

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[nonsense]\n")
        with pytest.raises(ConfigError):
            parse_config(str(path))

    def test_missing_unit_tag(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[relaxation]\ngamma = 58\n")
        with pytest.raises(ConfigError) as err:
            parse_config(str(path))
        assert "relaxation.gamma" in str(err.value)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ConfigError) as err:
            parse_config(overrides={"relaxation.gamma": "-5 /s"})
        assert "relaxation.gamma" in str(err.value)

    def test_temperature_law(self):
        cfg = parse_config(overrides={"relaxation.temperature_c": "87"})
        assert cfg.gamma() == pytest.approx(58.0 + 0.35 * 12)

    def test_hash_ignores_workers(self):
        a = parse_config()
        b = parse_config(overrides={"sweep.workers": "3"})
        c = parse_config(overrides={"relaxation.gamma": "70 /s"})
        assert a.hash() == b.hash()
        assert a.hash() != c.hash()


class TestCli:
    def test_table2_csv(self, tmp_path, capsys):
        out = tmp_path / "t2.csv"
        assert main(["table2", "--csv", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# spingas")
        row = lines[2].split(",")
        assert float(row[1]) == pytest.approx(0.5, abs=1e-12)
        captured = capsys.readouterr()
        assert "0.9655172414" in captured.out

    def test_simulate_and_reproducibility(self, tmp_path, capsys):
        prefix = str(tmp_path / "runA")
        rc = main(["simulate", "--i", "0.4", "--j", "1.0", "--t-end", "0.02",
                   "--out", prefix])
        assert rc == 0
        first = open(prefix + "_summary.json").read()
        first_traj = open(prefix + "_trajectory.csv").read()
        rc = main(["simulate", "--i", "0.4", "--j", "1.0", "--t-end", "0.02",
                   "--out", prefix])
        assert rc == 0
        assert open(prefix + "_summary.json").read() == first
        assert open(prefix + "_trajectory.csv").read() == first_traj
        payload = json.loads(first)
        assert payload["tool_version"]
        assert payload["config_hash"]

    def test_sweep_contour_pipeline(self, tmp_path, capsys):
        cfgfile = tmp_path / "cfg.ini"
        cfgfile.write_text("[sweep]\ni_over_gamma = 0.2,0.4\nj_over_gamma = 0.8,1.2\n")
        prefix = str(tmp_path / "sw")
        rc = main(["--config", str(cfgfile), "sweep", "--out", prefix, "--gnuplot"])
        assert rc == 0
        assert os.path.exists(prefix + "_cells.csv")
        assert os.path.exists(prefix + "_m_abs.gp")
        out_csv = str(tmp_path / "contour.csv")
        rc = main(["contour", "--cells", prefix + "_cells.csv",
                   "--manifest", prefix + "_manifest.json",
                   "--axis", "fixed-J", "--value", "0.8", "--out", out_csv])
        assert rc == 0
        body = open(out_csv).read().splitlines()
        assert body[1] == "I_over_Gamma,m_abs"

    def test_fit_roundtrip(self, tmp_path):
        from spingas.critfit import synthetic_series
        x = np.linspace(1.0, 3.2, 40)
        y = synthetic_series("beta", 0.6, 1.6, 0.5, x)
        series = tmp_path / "series.csv"
        series.write_text("x,y\n" + "\n".join(f"{a},{b}" for a, b in zip(x, y)))
        prefix = str(tmp_path / "fit")
        rc = main(["fit", "--input", str(series), "--form", "beta", "--out", prefix])
        assert rc == 0
        payload = json.load(open(prefix + "_fit.json"))
        assert payload["exponent"] == pytest.approx(0.5, rel=1e-5)
        assert os.path.exists(prefix + "_residuals.csv")
        assert os.path.exists(prefix + "_loglog.csv")

    def test_missing_input_is_io_error(self, tmp_path, capsys):
        rc = main(["fit", "--input", str(tmp_path / "nope.csv"),
                   "--form", "beta", "--out", str(tmp_path / "f")])
        assert rc == 5
        assert not os.path.exists(str(tmp_path / "f_fit.json"))

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[relaxation]\ngamma = -2 /s\n")
        rc = main(["--config", str(bad), "table2"])
        assert rc == 2

    def test_set_overrides(self, tmp_path, capsys):
        rc = main(["--set", "numerics.seed_polarization=2e-4", "simulate",
                   "--i", "0.0", "--j", "0.5", "--t-end", "0.01",
                   "--out", str(tmp_path / "r")])
        assert rc == 0
        payload = json.loads(open(str(tmp_path / "r_summary.json")).read())
        assert payload["params"]["seed_polarization"] == 2e-4

    def test_susceptibility_subcommand(self, tmp_path, capsys):
        out = str(tmp_path / "chi.csv")
        rc = main(["susceptibility", "--j", "2.3", "--i-values", "0.0,0.4",
                   "--out", out])
        assert rc == 0
        lines = open(out).read().splitlines()
        assert lines[1].startswith("I_over_Gamma")
        first = float(lines[2].split(",")[1])
        assert first * 58.0 == pytest.approx(1.0, rel=0.02)

    def test_dump_optics(self, tmp_path):
        rc = main(["simulate", "--i", "0.5", "--j", "1.0", "--t-end", "0.01",
                   "--dump-optics", str(tmp_path / "opt"),
                   "--out", str(tmp_path / "r")])
        assert rc == 0
        w_csv = (tmp_path / "opt_w0.csv").read_text().splitlines()
        assert w_csv[1] == "row,col,re,im"
        assert len(w_csv) == 2 + 256
        assert os.path.exists(tmp_path / "opt_rho_e.csv")

    def test_mode_and_seed_flags(self, tmp_path):
        rc = main(["--set", "fields.b_z=0.1 mG",
                   "simulate", "--i", "0.5", "--j", "1.0", "--t-end", "0.005",
                   "--mode", "hyperfine", "--seed", "1e-3",
                   "--out", str(tmp_path / "r")])
        assert rc == 0
        payload = json.loads((tmp_path / "r_summary.json").read_text())
        assert payload["params"]["projection_mode"] == "hyperfine"
        assert payload["params"]["seed_polarization"] == 1e-3
        assert payload["invariants"]["trace_deviation"] < 1e-9
