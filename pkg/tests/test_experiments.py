from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from sqlalchemy.pool import StaticPool

from app.models.beamforming import ScaOptions
from app.models.database import Base
from app.models.experiment import RESULT_COLUMNS, ExperimentSpec
from app.models.result import ResultRecord
from app.models.system import SystemConfig, dbm_to_watts
from app.services.errors import UnknownSchemeError
from app.services.experiment_service import (
    SchemeRunner,
    compare,
    replay_plan,
    run_sweep,
    save_results,
    scheme_averages,
    summarize,
    sweep_config,
    sweep_workers,
)
from app.services.scenario import generate_scenario


def small_spec(tmp_path, **overrides):
    data = dict(
        name="unit",
        base_config=SystemConfig(num_elements=4, num_devices=2),
        axis="P_A_dbm",
        values=[30.0, 40.0],
        schemes=["static", "ul_adaptive", "random", "no_irs"],
        seeds=[0, 1],
        output=tmp_path / "results.csv",
        random_trials=3,
        sca=ScaOptions(restarts=1, max_outer_iters=10),
    )
    data.update(overrides)
    return ExperimentSpec(**data)


def memory_session():
    engine = create_engine("sqlite://", connect_args={"check_same_thread": False}, poolclass=StaticPool)
    Base.metadata.create_all(bind=engine)
    return sessionmaker(bind=engine)()


class TestExperimentSpec:
    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(axis="N", values=[4], schemes=["magic"], seeds=[0])

    def test_empty_values_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(axis="N", values=[], schemes=["static"], seeds=[0])

    def test_unknown_axis_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentSpec(axis="K", values=[2], schemes=["static"], seeds=[0])


class TestSweepConfig:
    def setup_method(self):
        self.base = SystemConfig(num_elements=4, num_devices=2)

    def test_axis_updates(self):
        spec = ExperimentSpec(base_config=self.base, axis="P_A_dbm", values=[30], schemes=["static"], seeds=[0])
        assert sweep_config(spec, 30.0, 4).hap_power_dbm == 30.0
        assert sweep_config(spec, 30.0, 4).seed == 4
        spec = spec.model_copy(update={"axis": "N"})
        assert sweep_config(spec, 8, 0).num_elements == 8
        spec = spec.model_copy(update={"axis": "irs_x"})
        assert sweep_config(spec, 12.5, 0).irs_pos == (12.5, 0.0, 4.0)

    def test_vector_axis_keeps_instance(self):
        spec = ExperimentSpec(base_config=self.base, axis="J", values=[2], schemes=["general"], seeds=[0])
        assert sweep_config(spec, 2, 0).num_elements == 4

    def test_default_base_is_desk_profile(self):
        spec = ExperimentSpec(axis="P_A_dbm", values=[30], schemes=["static"], seeds=[0])
        assert sweep_config(spec, 30, 0).num_elements == 16

    def test_workers_from_environment(self, monkeypatch):
        monkeypatch.setenv("IRS_WPCN_WORKERS", "3")
        assert sweep_workers() == 3
        monkeypatch.setenv("IRS_WPCN_WORKERS", "many")
        assert sweep_workers() == 1


class TestSchemeRunner:
    def setup_method(self):
        self.runner = SchemeRunner(ScaOptions(restarts=1, max_outer_iters=10), random_trials=3, sdr_samples=5)
        self.scenario = generate_scenario(SystemConfig(num_elements=4, num_devices=2))

    def test_static_is_cached(self):
        first = self.runner.run(self.scenario, "static")
        assert self.runner.run(self.scenario, "static") is first

    def test_ul_adaptive_reports_static_value(self):
        static = self.runner.run(self.scenario, "static")
        ul = self.runner.run(self.scenario, "ul_adaptive")
        assert ul.throughput == pytest.approx(static.throughput, rel=1e-9)

    def test_hybrid_vectors_clipped_to_devices(self):
        sol = self.runner.run(self.scenario, "hybrid", num_vectors=5)
        assert sol.plan.num_ul_vectors == 2

    def test_general_chain_is_monotone(self):
        values = [self.runner.run(self.scenario, "general", num_vectors=j).throughput for j in range(4)]
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))

    def test_upper_bound_dominates(self):
        bound = self.runner.run(self.scenario, "upper_bound")
        adaptive = self.runner.run(self.scenario, "user_adaptive")
        assert bound.throughput >= adaptive.throughput * (1 - 1e-6)

    def test_upper_bound_skipped_for_large_surfaces(self):
        scenario = generate_scenario(SystemConfig(num_elements=33, num_devices=1))
        assert self.runner.run(scenario, "upper_bound") is None

    def test_unknown_scheme(self):
        with pytest.raises(UnknownSchemeError):
            self.runner.run(self.scenario, "oracle")


class TestRunSweep:
    def test_csv_and_summary(self, tmp_path):
        spec = small_spec(tmp_path)
        outcome = run_sweep(spec, workers=1)
        frame = pd.read_csv(outcome.csv_path)
        assert list(frame.columns) == RESULT_COLUMNS
        assert len(frame) == 2 * 2 * 4
        assert set(frame["status"]) <= {"optimal", "max-iters", "numerical-failure"}
        assert np.all(frame["throughput_bps_hz"] >= 0)
        hap_energy = frame["P_A_dbm"].map(dbm_to_watts) * frame["tau0_s"]
        np.testing.assert_allclose(frame["hap_energy_j"], hap_energy, atol=1e-9)
        summary = pd.read_csv(outcome.summary_path)
        assert len(summary) == 2 * 4
        assert "throughput_bps_hz_mean" in summary.columns

    def test_throughput_grows_with_power(self, tmp_path):
        outcome = run_sweep(small_spec(tmp_path, schemes=["no_irs", "static"]), workers=1)
        frame = pd.read_csv(outcome.csv_path)
        means = frame.groupby(["scheme", "axis_value"])["throughput_bps_hz"].mean()
        for scheme in ("no_irs", "static"):
            assert means[(scheme, 40.0)] > means[(scheme, 30.0)]

    def test_rerun_is_reproducible(self, tmp_path):
        first = pd.read_csv(run_sweep(small_spec(tmp_path), workers=1).csv_path)
        second = pd.read_csv(run_sweep(small_spec(tmp_path, output=tmp_path / "again.csv"), workers=1).csv_path)
        pd.testing.assert_frame_equal(first.drop(columns="runtime_ms"), second.drop(columns="runtime_ms"))

    def test_failed_scheme_becomes_error_row(self, tmp_path):
        with patch("app.services.experiment_service.baseline_no_irs", side_effect=RuntimeError("boom")):
            outcome = run_sweep(small_spec(tmp_path, schemes=["static", "no_irs"]), workers=1)
        frame = pd.read_csv(outcome.csv_path)
        assert set(frame.loc[frame["scheme"] == "no_irs", "status"]) == {"error"}
        assert set(frame.loc[frame["scheme"] == "static", "status"]) != {"error"}
        summary = pd.read_csv(outcome.summary_path)
        assert set(summary["scheme"]) == {"static"}

    def test_vector_sweep_is_monotone_per_seed(self, tmp_path):
        spec = small_spec(tmp_path, axis="J", values=[2, 0, 1], schemes=["general"], seeds=[0])
        frame = pd.read_csv(run_sweep(spec, workers=1).csv_path)
        assert frame["axis_value"].tolist() == [0.0, 1.0, 2.0]
        values = frame["throughput_bps_hz"].to_numpy()
        assert np.all(np.diff(values) >= -1e-9)
        assert frame["overhead_coefficients"].tolist() == [4, 8, 12]

    def test_stored_plans_replay_to_reported_throughput(self, tmp_path):
        schemes = ["upper_bound", "user_adaptive", "ul_adaptive", "static", "general", "hybrid", "random", "no_irs"]
        spec = small_spec(tmp_path, values=[40.0], seeds=[0], schemes=schemes, sdr_samples=5)
        db = memory_session()
        outcome = run_sweep(spec, db=db, workers=1)

        frame = pd.read_csv(outcome.csv_path)
        records = db.query(ResultRecord).filter(ResultRecord.sweep_id == outcome.sweep_id).all()
        stored = [(r.scheme, r.axis_value, r.seed, r.plan, r.throughput_bps_hz) for r in records]
        reloaded = [(r.scheme, r.axis_value, int(r.seed), r.plan, r.throughput_bps_hz) for r in frame.itertuples()]
        assert len(stored) == len(reloaded) == len(schemes)
        for scheme, axis_value, seed, plan, throughput in stored + reloaded:
            replayed = replay_plan(spec, axis_value, seed, scheme, plan)
            if scheme == "upper_bound":
                assert replayed.throughput <= throughput * (1 + 1e-6)
            else:
                assert replayed.throughput == pytest.approx(throughput, rel=1e-6)

    def test_rows_persisted(self, tmp_path):
        db = memory_session()
        outcome = run_sweep(small_spec(tmp_path, schemes=["no_irs"]), db=db, workers=1)
        stored = db.query(ResultRecord).filter(ResultRecord.sweep_id == outcome.sweep_id).all()
        assert len(stored) == 4
        averages = scheme_averages(db, outcome.sweep_id)
        assert averages["no_irs"]["runs"] == 4


class TestSummaries:
    def test_summarize_skips_failed_rows(self):
        frame = pd.DataFrame(
            {
                "axis_value": [1.0, 1.0, 1.0],
                "scheme": ["static"] * 3,
                "throughput_bps_hz": [1.0, 3.0, 0.0],
                "tau0_s": [0.5, 0.5, 0.0],
                "harvested_energy_total_j": [1.0, 1.0, 0.0],
                "min_device_throughput": [0.1, 0.1, 0.0],
                "runtime_ms": [1.0, 1.0, 0.0],
                "status": ["optimal", "max-iters", "error"],
            }
        )
        summary = summarize(frame)
        assert summary.loc[0, "throughput_bps_hz_mean"] == pytest.approx(2.0)

    def test_compare_files(self, tmp_path):
        spec = small_spec(tmp_path, schemes=["no_irs"], seeds=[0])
        first = run_sweep(spec, workers=1).csv_path
        second = run_sweep(spec.model_copy(update={"output": tmp_path / "other.csv"}), workers=1).csv_path
        table = compare([first, second])
        assert {"results", "other"} <= set(table.columns)
        np.testing.assert_allclose(table["results"], table["other"])

    def test_save_results_counts_rows(self, tmp_path):
        db = memory_session()
        rows = run_sweep(small_spec(tmp_path, schemes=["no_irs"], seeds=[0]), workers=1).rows
        assert save_results(rows, db, "manual") == 2
        assert db.query(ResultRecord).count() == 2
