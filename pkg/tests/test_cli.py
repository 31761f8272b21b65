import json

import numpy as np
import pytest

from pmelab import io
from pmelab.cli import main
from pmelab.norms import morrey_norm
from pmelab.params import ProblemParams
from pmelab.traces import envelope_constant

GAUSS_CFG = """\
[problem]
n = 1
m = 2
p = 5

[grid]
lo = -2
hi = 2
h = 0.0625

[initial]
kind = gaussian
amplitude = 1.0
width = 0.5

[run]
horizon = 0.125
snapshots = 0.0625
record_stride = 4
"""

CRIT_CFG = """\
[problem]
n = 1
m = 2
p = 4

[grid]
lo = -2
hi = 2
h = 0.0625

[initial]
kind = mu_c
c = 0.05

[run]
horizon = 0.5
snapshots = 0.05
"""


@pytest.fixture
def gauss_cfg(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(GAUSS_CFG, encoding="utf-8")
    return path


@pytest.fixture
def crit_cfg(tmp_path):
    path = tmp_path / "crit.cfg"
    path.write_text(CRIT_CFG, encoding="utf-8")
    return path


class TestSolve:
    def test_writes_series_field_and_log(self, gauss_cfg, tmp_path):
        series = tmp_path / "series.csv"
        field = tmp_path / "final.csv"
        log = tmp_path / "run.jsonl"
        code = main(["solve", str(gauss_cfg), "--out", str(series),
                     "--field-out", str(field), "--log", str(log)])
        assert code == 0
        text = series.read_text(encoding="utf-8")
        assert text.startswith("# series-csv/1\n")
        assert "# status: completed" in text
        fld, meta = io.read_field_csv(field)
        assert meta["t"] == 0.125
        assert fld.values.shape == (64,)
        events = [json.loads(ln) for ln in
                  log.read_text(encoding="utf-8").splitlines()]
        assert len(events) == 1
        assert events[0]["event"] == "solve"
        assert events[0]["status"] == "completed"
        assert events[0]["t_final"] == 0.125
        assert events[0]["blow_time"] is None

    def test_stdout_default(self, gauss_cfg, capsys):
        assert main(["solve", str(gauss_cfg)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("# series-csv/1\n")

    def test_byte_identical_reruns(self, gauss_cfg, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["solve", str(gauss_cfg), "--out", str(a)]) == 0
        assert main(["solve", str(gauss_cfg), "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_blowup_is_data_not_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "blow.cfg"
        cfg.write_text(GAUSS_CFG.replace("amplitude = 1.0",
                                         "amplitude = 30.0"),
                       encoding="utf-8")
        assert main(["solve", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "# status: step_underflow" in out or "# status: blow_up" in out

    def test_missing_config_exits_1(self, tmp_path, capsys):
        assert main(["solve", str(tmp_path / "absent.cfg")]) == 1
        assert "pmelab:" in capsys.readouterr().err

    def test_bad_exponents_exit_1(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(GAUSS_CFG.replace("p = 5", "p = 2"), encoding="utf-8")
        assert main(["solve", str(cfg)]) == 1
        assert "m < p" in capsys.readouterr().err

    def test_step_budget_exhaustion_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "budget.cfg"
        cfg.write_text(GAUSS_CFG + "max_steps = 50\n", encoding="utf-8")
        assert main(["solve", str(cfg)]) == 2
        assert "numerical failure" in capsys.readouterr().err


class TestArgparseContract:
    def test_help_exits_0(self, capsys):
        assert main(["--help"]) == 0
        assert "solve" in capsys.readouterr().out

    def test_unknown_subcommand_exits_1(self, capsys):
        assert main(["bogus"]) == 1

    def test_unknown_flag_exits_1(self, gauss_cfg, capsys):
        assert main(["solve", str(gauss_cfg), "--warp"]) == 1


class TestNorm:
    @pytest.fixture
    def field_csv(self, gauss_cfg, tmp_path):
        field = tmp_path / "final.csv"
        assert main(["solve", str(gauss_cfg), "--out",
                     str(tmp_path / "s.csv"), "--field-out",
                     str(field)]) == 0
        return field

    def test_morrey_matches_library(self, field_csv, capsys):
        assert main(["norm", str(field_csv), "--kind", "morrey",
                     "--q", "1.5", "--cap", "0.5"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("# norm-csv/1\n")
        value = float(out.splitlines()[-1].split(",")[1])
        fld, _ = io.read_field_csv(field_csv)
        assert value == morrey_norm(fld, q=1.5, cap=0.5)

    def test_morrey_without_q_exits_1(self, field_csv, capsys):
        assert main(["norm", str(field_csv), "--kind", "morrey"]) == 1
        assert "--q" in capsys.readouterr().err

    def test_orlicz_eta_needs_borderline_params(self, field_csv, capsys):
        # the saved field came from a p > m + 2/n run
        assert main(["norm", str(field_csv), "--kind", "orlicz-eta",
                     "--cap", "0.5"]) == 1
        assert "borderline" in capsys.readouterr().err

    def test_orlicz_eta_on_borderline_field(self, crit_cfg, tmp_path,
                                            capsys):
        field = tmp_path / "crit.csv"
        assert main(["solve", str(crit_cfg), "--out", str(tmp_path / "s.csv"),
                     "--field-out", str(field)]) == 0
        assert main(["norm", str(field), "--kind", "orlicz-eta",
                     "--alpha", "1.0", "--horizon", "0.5",
                     "--cap", "0.5"]) == 0
        value = float(capsys.readouterr().out.splitlines()[-1].split(",")[1])
        assert np.isfinite(value) and value > 0.0


class TestDichotomy:
    def test_end_to_end_and_determinism(self, gauss_cfg, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        log = tmp_path / "d.jsonl"
        args = ["dichotomy", str(gauss_cfg), "--c-lo", "0.05",
                "--c-hi", "80", "--steps", "3"]
        assert main(args + ["--out", str(a), "--log", str(log)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        text = a.read_text(encoding="utf-8")
        assert text.startswith("# dichotomy-csv/1\n")
        assert "# c_exist: " in text and "# c_blow: " in text
        lines = log.read_text(encoding="utf-8").splitlines()
        assert sum('"event":"trial"' in ln for ln in lines) == len(lines) - 1
        assert '"event":"bracket"' in lines[-1]

    def test_bad_seeds_exit_1(self, gauss_cfg, capsys):
        assert main(["dichotomy", str(gauss_cfg), "--c-lo", "-1",
                     "--c-hi", "80", "--steps", "3"]) == 1
        assert main(["dichotomy", str(gauss_cfg), "--c-lo", "0.05",
                     "--c-hi", "80", "--steps", "0"]) == 1


class TestTraceCheck:
    def test_slope_report(self, crit_cfg, capsys):
        assert main(["trace-check", str(crit_cfg), "--tau0", "0.05",
                     "--sigma-min", "0.1", "--sigma-max", "0.5",
                     "--count", "8"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("# trace-csv/1\n")
        assert "# slope: " in out

    def test_envelope_flag(self, crit_cfg, capsys):
        assert main(["trace-check", str(crit_cfg), "--tau0", "0.05",
                     "--sigma-min", "0.1", "--sigma-max", "0.5",
                     "--count", "6", "--envelope"]) == 0
        assert "# envelope_passed: 1" in capsys.readouterr().out

    def test_envelope_ladder_cap(self, crit_cfg, capsys):
        assert main(["trace-check", str(crit_cfg), "--tau0", "0.05",
                     "--sigma-min", "0.1", "--sigma-max", "5.0",
                     "--count", "6", "--envelope"]) == 1
        assert "horizon^theta" in capsys.readouterr().err

    def test_bad_ladder_exits_1(self, crit_cfg):
        assert main(["trace-check", str(crit_cfg), "--sigma-min", "0.5",
                     "--sigma-max", "0.1"]) == 1


class TestConstants:
    def test_matches_library(self, capsys):
        assert main(["constants", "--N", "1", "--m", "2", "--p", "5",
                     "--T", "10"]) == 0
        out = capsys.readouterr().out
        row = out.splitlines()[-1].split(",")
        const = envelope_constant(ProblemParams(1, 2.0, 5.0), 10.0)
        assert float(row[0]) == const.value
        assert row[1] == "power"

    def test_bad_horizon_exits_1(self, capsys):
        assert main(["constants", "--N", "1", "--m", "2", "--p", "5",
                     "--T", "-1"]) == 1

    def test_bad_exponents_exit_1(self, capsys):
        assert main(["constants", "--N", "1", "--m", "3", "--p", "2"]) == 1


class TestValidate:
    def test_suite_passes(self, tmp_path):
        out = tmp_path / "suite.csv"
        assert main(["validate", "--out", str(out)]) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# validate-csv/1"
        rows = lines[2:]
        assert len(rows) >= 8
        assert all(row.split(",")[1] == "1" for row in rows)
