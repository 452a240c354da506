import json
from unittest.mock import patch

import pandas as pd

from app.cli import main
from app.models.experiment import CheckResult, PropertyReport
from app.services.scenario import load_config


class TestCli:
    def test_gen_config(self, tmp_path):
        path = tmp_path / "near_far.json"
        assert main(["gen-config", "--profile", "near_far", "--seed", "4", str(path)]) == 0
        config = load_config(path)
        assert config.num_devices == 2
        assert config.seed == 4

    def test_run_spec(self, tmp_path):
        spec = {
            "base_config": {"num_elements": 4, "num_devices": 2},
            "axis": "N",
            "values": [2, 4],
            "schemes": ["no_irs"],
            "seeds": [0],
            "output": str(tmp_path / "out.csv"),
        }
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        assert main(["run", str(spec_path), "--workers", "1"]) == 0
        frame = pd.read_csv(tmp_path / "out.csv")
        assert frame["N"].tolist() == [2, 4]

    def test_invalid_spec_exit_code(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps({"axis": "N", "values": [], "schemes": ["static"], "seeds": [0]}))
        assert main(["run", str(spec_path)]) == 2

    def test_props_exit_code_follows_report(self):
        failing = PropertyReport(passed=False, checks=[CheckResult(name="cauchy_gap_fuzz", passed=False)], runtime_s=0.1)
        with patch("app.cli.run_property_suite", return_value=failing) as suite:
            assert main(["props", "--seeds", "2"]) == 1
        assert suite.call_args[0][1].seeds == 2

        passing = PropertyReport(passed=True, checks=[CheckResult(name="cauchy_gap_fuzz", passed=True)], runtime_s=0.1)
        with patch("app.cli.run_property_suite", return_value=passing):
            assert main(["props"]) == 0

    def test_compare(self, tmp_path, capsys):
        frame = pd.DataFrame(
            {"axis_value": [1.0, 1.0], "scheme": ["static", "no_irs"], "throughput_bps_hz": [2.0, 1.0], "status": ["optimal"] * 2}
        )
        frame.to_csv(tmp_path / "a.csv", index=False)
        assert main(["compare", str(tmp_path / "a.csv")]) == 0
        assert "static" in capsys.readouterr().out
