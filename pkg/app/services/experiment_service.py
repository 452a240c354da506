import logging
import os
import uuid
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from sqlalchemy import func
from sqlalchemy.orm import Session

from ..models.beamforming import PhasePlan, ScaOptions, Solution
from ..models.experiment import RESULT_COLUMNS, SCHEMES, ExperimentSpec, ResultRow
from ..models.result import ResultRecord
from ..models.system import Scenario, SystemConfig
from .allocation import finish_solution
from .errors import UnknownSchemeError
from .scenario import generate_scenario, load_config, profile_config
from .sca import (
    baseline_no_irs,
    baseline_random_phases,
    solve_general,
    solve_hybrid,
    solve_static,
    solve_user_adaptive,
    ul_adaptive_from_static,
)
from .sdr import MAX_LIFT_ELEMENTS, solve_upper_bound

load_dotenv()

logger = logging.getLogger(__name__)

SUMMARY_METRICS = ["throughput_bps_hz", "tau0_s", "harvested_energy_total_j", "min_device_throughput", "runtime_ms"]
OK_STATUSES = ("optimal", "max-iters", "numerical-failure")


def sweep_workers() -> int:
    """Worker processes for sweeps, from IRS_WPCN_WORKERS"""
    try:
        return max(1, int(os.getenv("IRS_WPCN_WORKERS", "1")))
    except ValueError:
        logger.warning("IRS_WPCN_WORKERS is not an integer; running sweeps serially")
        return 1


class SchemeRunner:
    """Runs benchmark schemes on one scenario, reusing the static optimum as a warm start"""

    def __init__(self, opts: Optional[ScaOptions] = None, random_trials: int = 100, sdr_samples: int = 200):
        self.opts = opts or ScaOptions()
        self.random_trials = random_trials
        self.sdr_samples = sdr_samples
        self._config: Optional[SystemConfig] = None
        self._static: Optional[Solution] = None
        self._general: Dict[int, Solution] = {}

    def _reset_for(self, scenario: Scenario) -> None:
        if self._config != scenario.config:
            self._config = scenario.config
            self._static = None
            self._general = {}

    def static(self, scenario: Scenario) -> Solution:
        self._reset_for(scenario)
        if self._static is None:
            self._static = solve_static(scenario, self.opts)
        return self._static

    def general(self, scenario: Scenario, num_vectors: int) -> Solution:
        """General scheme warm-started from the largest smaller J already solved on this scenario"""
        self._reset_for(scenario)
        if num_vectors not in self._general:
            smaller = [j for j in self._general if j < num_vectors]
            warm = self._general[max(smaller)] if smaller else self.static(scenario)
            self._general[num_vectors] = solve_general(scenario, num_vectors, self.opts, warm_start=warm)
        return self._general[num_vectors]

    def run(self, scenario: Scenario, scheme: str, num_vectors: int = 1) -> Optional[Solution]:
        """Solve one scheme; None when the scheme does not apply to this instance size"""
        self._reset_for(scenario)
        if scheme == "static":
            return self.static(scenario)
        if scheme == "ul_adaptive":
            return ul_adaptive_from_static(self.static(scenario), scenario)
        if scheme == "user_adaptive":
            return solve_user_adaptive(scenario, self.opts, warm_start=self.static(scenario))
        if scheme == "hybrid":
            return solve_hybrid(scenario, min(num_vectors, scenario.num_devices), self.opts, warm_start=self.static(scenario))
        if scheme == "general":
            return self.general(scenario, num_vectors)
        if scheme == "random":
            return baseline_random_phases(scenario, self.random_trials, seed=self.opts.seed)
        if scheme == "no_irs":
            return baseline_no_irs(scenario)
        if scheme == "upper_bound":
            if scenario.num_elements > MAX_LIFT_ELEMENTS:
                return None
            return solve_upper_bound(scenario, samples=self.sdr_samples, seed=self.opts.seed)[0]
        raise UnknownSchemeError(f"Unknown scheme: {scheme}; choose from {list(SCHEMES)}")


def base_config(spec: ExperimentSpec) -> SystemConfig:
    if spec.base_config is not None:
        return spec.base_config
    if spec.base_config_path is not None:
        return load_config(spec.base_config_path)
    return profile_config("desk")


def sweep_config(spec: ExperimentSpec, axis_value: float, seed: int) -> SystemConfig:
    """Base config with the swept field and the seed overridden"""
    base = base_config(spec)
    updates: Dict[str, object] = {"seed": seed}
    if spec.axis == "P_A_dbm":
        updates["hap_power_dbm"] = float(axis_value)
    elif spec.axis == "N":
        updates["num_elements"] = int(axis_value)
    elif spec.axis == "irs_x":
        updates["irs_pos"] = (float(axis_value), base.irs_pos[1], base.irs_pos[2])
    return SystemConfig.model_validate({**base.model_dump(), **updates})


def _vector_count(spec: ExperimentSpec, axis_value: float) -> int:
    return int(axis_value) if spec.axis == "J" else spec.num_vectors


def result_row(spec: ExperimentSpec, axis_value: float, scenario: Scenario, scheme: str, sol: Optional[Solution], status: Optional[str] = None) -> ResultRow:
    cfg = scenario.config
    common = dict(
        scheme=scheme,
        seed=cfg.seed,
        axis=spec.axis,
        axis_value=float(axis_value),
        N=cfg.num_elements,
        K=cfg.num_devices,
        P_A_dbm=cfg.hap_power_dbm,
    )
    if sol is None:
        return ResultRow(
            **common,
            J=0,
            throughput_bps_hz=0.0,
            min_device_throughput=0.0,
            device_throughputs="",
            tau0_s=0.0,
            harvested_energy_total_j=0.0,
            hap_energy_j=0.0,
            overhead_coefficients=0,
            outer_iters=0,
            runtime_ms=0.0,
            status=status or "skipped",
        )
    per_device = np.asarray(sol.device_throughputs, dtype=float)
    return ResultRow(
        **common,
        J=sol.plan.num_ul_vectors,
        throughput_bps_hz=max(float(sol.throughput), 0.0),
        min_device_throughput=float(per_device.min()) if per_device.size else 0.0,
        device_throughputs=";".join(f"{r:.10g}" for r in per_device),
        tau0_s=float(sol.alloc.tau0),
        harvested_energy_total_j=float(np.sum(sol.harvested_energy)),
        hap_energy_j=cfg.hap_power * float(sol.alloc.tau0),
        overhead_coefficients=sol.overhead_coefficients,
        outer_iters=sol.iterations,
        runtime_ms=float(sol.runtime_ms),
        status=status or sol.status,
        plan=sol.plan.to_json(),
    )


def run_work_item(spec: ExperimentSpec, axis_values: Sequence[float], seed: int) -> List[ResultRow]:
    """All schemes on the scenarios of one seed; J sweeps share one runner so general solutions chain"""
    runner = SchemeRunner(spec.sca, spec.random_trials, spec.sdr_samples)
    rows: List[ResultRow] = []
    for value in axis_values:
        scenario = generate_scenario(sweep_config(spec, value, seed))
        for scheme in spec.schemes:
            try:
                sol = runner.run(scenario, scheme, _vector_count(spec, value))
                rows.append(result_row(spec, value, scenario, scheme, sol))
            except Exception as e:
                logger.error(f"Scheme {scheme} failed at {spec.axis}={value}, seed={seed}: {e}")
                rows.append(result_row(spec, value, scenario, scheme, None, status="error"))
    return rows


def replay_plan(spec: ExperimentSpec, axis_value: float, seed: int, scheme: str, plan_json: str) -> Solution:
    """Optimal allocation for a stored plan on the regenerated scenario of (axis value, seed).

    For ``upper_bound`` rows the stored plan is the randomized one, so the
    replayed throughput lower-bounds the reported bound instead of matching it.
    """
    scenario = generate_scenario(sweep_config(spec, axis_value, seed))
    if scheme == "no_irs":
        scenario = scenario.without_irs()
    return finish_solution(scenario, PhasePlan.from_json(plan_json), scheme=scheme)


def _work_items(spec: ExperimentSpec) -> List[Tuple[Tuple[float, ...], int]]:
    if spec.axis == "J":
        values = tuple(sorted(spec.values))
        return [(values, seed) for seed in spec.seeds]
    return [((value,), seed) for value in spec.values for seed in spec.seeds]


def _run_item(args: Tuple[ExperimentSpec, Tuple[float, ...], int]) -> List[ResultRow]:
    return run_work_item(*args)


@dataclass
class SweepOutcome:
    sweep_id: str
    csv_path: Path
    summary_path: Path
    rows: List[ResultRow]


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean and standard deviation of the headline metrics per (axis value, scheme)"""
    ok = frame[frame["status"].isin(OK_STATUSES)]
    summary = ok.groupby(["axis_value", "scheme"], sort=True)[SUMMARY_METRICS].agg(["mean", "std"])
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    return summary.reset_index()


def summary_path_for(csv_path: Path) -> Path:
    return csv_path.with_name(f"{csv_path.stem}_summary.csv")


def save_results(rows: Sequence[ResultRow], db: Session, sweep_id: str) -> int:
    """Persist result rows to the results store"""
    records = [
        ResultRecord(
            sweep_id=sweep_id,
            axis=row.axis,
            axis_value=row.axis_value,
            scheme=row.scheme,
            seed=row.seed,
            num_elements=row.N,
            num_devices=row.K,
            num_vectors=row.J,
            hap_power_dbm=row.P_A_dbm,
            throughput_bps_hz=row.throughput_bps_hz,
            min_device_throughput=row.min_device_throughput,
            device_throughputs=row.device_throughputs,
            tau0_s=row.tau0_s,
            harvested_energy_total_j=row.harvested_energy_total_j,
            hap_energy_j=row.hap_energy_j,
            overhead_coefficients=row.overhead_coefficients,
            outer_iters=row.outer_iters,
            runtime_ms=row.runtime_ms,
            status=row.status,
            plan=row.plan,
        )
        for row in rows
    ]
    try:
        db.add_all(records)
        db.commit()
    except Exception as e:
        db.rollback()
        logger.error(f"Failed to persist sweep {sweep_id}: {e}")
        raise
    logger.info(f"Persisted {len(records)} rows for sweep {sweep_id}")
    return len(records)


def run_sweep(spec: ExperimentSpec, db: Optional[Session] = None, workers: Optional[int] = None) -> SweepOutcome:
    """Run every (axis value, seed, scheme) combination and write the results CSV plus its summary"""
    workers = workers or sweep_workers()
    items = [(spec, values, seed) for values, seed in _work_items(spec)]
    logger.info(f"Sweep {spec.name}: {len(items)} work items over {spec.axis}, schemes {spec.schemes}, {workers} workers")

    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_item, items))
    else:
        batches = [_run_item(item) for item in items]
    rows = [row for batch in batches for row in batch]
    rows.sort(key=lambda r: (r.axis_value, r.seed, spec.schemes.index(r.scheme)))

    csv_path = Path(spec.output)
    try:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame([row.model_dump() for row in rows], columns=RESULT_COLUMNS)
        frame.to_csv(csv_path, index=False)
        summary_path = summary_path_for(csv_path)
        summarize(frame).to_csv(summary_path, index=False)
    except OSError as e:
        logger.error(f"Cannot write sweep results to {csv_path}: {e}")
        raise
    sweep_id = f"{spec.name}-{uuid.uuid4().hex[:8]}"
    if db is not None:
        save_results(rows, db, sweep_id)
    logger.info(f"Sweep {spec.name} wrote {len(rows)} rows to {csv_path}")
    return SweepOutcome(sweep_id=sweep_id, csv_path=csv_path, summary_path=summary_path, rows=rows)


def compare(paths: Iterable[Union[str, Path]]) -> pd.DataFrame:
    """Mean throughput per (axis value, scheme), one column per results file"""
    frames = []
    for path in paths:
        frame = pd.read_csv(path)
        frame = frame[frame["status"].isin(OK_STATUSES)]
        frames.append(frame.assign(source=Path(path).stem))
    if not frames:
        return pd.DataFrame()
    combined = pd.concat(frames, ignore_index=True)
    return combined.pivot_table(
        index=["axis_value", "scheme"], columns="source", values="throughput_bps_hz", aggfunc="mean"
    ).reset_index()


def scheme_averages(db: Session, sweep_id: Optional[str] = None) -> Dict[str, Dict[str, float]]:
    """Mean throughput and tau0 per scheme in the results store"""
    query = db.query(
        ResultRecord.scheme,
        func.avg(ResultRecord.throughput_bps_hz),
        func.avg(ResultRecord.tau0_s),
        func.count(ResultRecord.id),
    ).filter(ResultRecord.status.in_(OK_STATUSES))
    if sweep_id:
        query = query.filter(ResultRecord.sweep_id == sweep_id)
    return {
        scheme: {"mean_throughput": float(throughput), "mean_tau0": float(tau0), "runs": int(count)}
        for scheme, throughput, tau0, count in query.group_by(ResultRecord.scheme).all()
    }
