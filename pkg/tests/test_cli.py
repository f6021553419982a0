import json

import numpy as np
import pytest

from moconv.cli import main

SMALL_CONFIG = """\
# small test device
d13 = 1.63e-32 Cm
d23 = 1.15e-32 Cm
tau3 = 11 ms
tau2 = 11 s
g_mu = 6.5345 Hz
g_o = 326.1 Hz
omega_12 = 2pi*5 GHz
omega_13 = 2pi*195 THz
gamma_mu_c = 2pi*1.5 MHz
gamma_mu_i = 2pi*650 kHz
gamma_o_c = 2pi*1.7 MHz
gamma_o_i = 2pi*7.95 MHz
n_total = 1e12
n_o = 1e12
sigma_o = 2pi*419 MHz
sigma_mu = 2pi*5 MHz
temperature = 100 mK
beta_in = 1
rabi = 2pi*300 kHz
delta_a_mu_center = 2pi*15 MHz
delta_a_o_center = 2pi*1.2 GHz
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "device.cfg"
    path.write_text(SMALL_CONFIG)
    return path


class TestSteady:
    def test_prints_density_matrix(self, config_file, capsys):
        code = main(
            [
                "steady",
                "--config",
                str(config_file),
                "--delta-a-mu",
                "2pi*1 MHz",
                "--beta",
                "0.5",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "steady-state density matrix" in out
        assert "populations:" in out

    def test_missing_config_exits_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["steady", "--config", str(tmp_path / "nope.cfg")])
        assert exc.value.code == 2
        assert "not found" in capsys.readouterr().err

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("n_total = 1e12\n")
        with pytest.raises(SystemExit) as exc:
            main(["steady", "--config", str(bad)])
        assert exc.value.code == 2


class TestScan:
    def test_writes_csv_and_manifest(self, config_file, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            [
                "scan",
                "--config",
                str(config_file),
                "--out",
                str(out),
                "--workers",
                "1",
                "--dmu-min",
                "2pi*10 MHz",
                "--dmu-max",
                "2pi*20 MHz",
                "--dmu-points",
                "2",
                "--dao-min",
                "2pi*1 GHz",
                "--dao-max",
                "2pi*2 GHz",
                "--dao-points",
                "2",
            ]
        )
        assert code == 0
        lines = (out / "scan.csv").read_text().splitlines()
        assert lines[0].startswith("# moconv scan schema")
        header = lines[1].split(",")
        assert header[:3] == ["delta_a_mu", "delta_a_o", "efficiency"]
        assert len(lines) == 2 + 4  # comment + header + 2x2 grid
        effs = [float(line.split(",")[2]) for line in lines[2:]]
        assert all(0.0 <= e <= 1.0 for e in effs if np.isfinite(e))

        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["tool"] == "moconv"
        assert manifest["command"] == "scan"
        assert "n_total = 1e12" in manifest["config"]
        assert manifest["timings_s"]["scan"] > 0


class TestValidate:
    def test_all_checks_pass(self, capsys):
        assert main(["validate"]) == 0
        out = capsys.readouterr().out
        assert "all checks passed" in out
        assert "FAIL" not in out


class TestArgumentErrors:
    def test_no_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_unknown_sweep_variable_rejected(self, config_file):
        with pytest.raises(SystemExit) as exc:
            main(
                [
                    "sweep",
                    "--config",
                    str(config_file),
                    "--variable",
                    "bogus",
                    "--values",
                    "1,2",
                ]
            )
        assert exc.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "moconv" in capsys.readouterr().out
