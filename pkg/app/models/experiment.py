from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .beamforming import ScaOptions
from .system import SystemConfig

SCHEMES = ("upper_bound", "user_adaptive", "ul_adaptive", "static", "general", "hybrid", "random", "no_irs")
SweepAxis = Literal["P_A_dbm", "N", "J", "irs_x"]


class ExperimentSpec(BaseModel):
    """One sweep: every (axis value, seed) pair runs every listed scheme"""

    model_config = ConfigDict(extra="forbid")

    name: str = "sweep"
    base_config_path: Optional[Path] = None
    base_config: Optional[SystemConfig] = None
    axis: SweepAxis
    values: List[float] = Field(..., min_length=1)
    schemes: List[str] = Field(..., min_length=1)
    seeds: List[int] = Field(..., min_length=1)
    output: Path = Path("results.csv")
    num_vectors: int = Field(1, ge=0)
    random_trials: int = Field(100, ge=1)
    sdr_samples: int = Field(200, ge=1)
    sca: ScaOptions = Field(default_factory=ScaOptions)

    @field_validator("schemes")
    @classmethod
    def _known_schemes(cls, schemes: List[str]) -> List[str]:
        unknown = [s for s in schemes if s not in SCHEMES]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}; choose from {list(SCHEMES)}")
        return schemes

    @field_validator("seeds")
    @classmethod
    def _nonnegative_seeds(cls, seeds: List[int]) -> List[int]:
        if any(seed < 0 for seed in seeds):
            raise ValueError("seeds must be nonnegative")
        return seeds


class ResultRow(BaseModel):
    scheme: str
    seed: int
    axis: str
    axis_value: float
    N: int
    K: int
    J: int
    P_A_dbm: float
    throughput_bps_hz: float = Field(..., ge=0)
    min_device_throughput: float
    device_throughputs: str
    tau0_s: float
    harvested_energy_total_j: float
    hap_energy_j: float
    overhead_coefficients: int
    outer_iters: int
    runtime_ms: float
    status: str
    plan: str = ""  # PhasePlan.to_json of the reported solution


RESULT_COLUMNS = list(ResultRow.model_fields)


class PropertySuiteOptions(BaseModel):
    """Sizes of the acceptance run; the defaults reproduce the desk-scale suite"""

    model_config = ConfigDict(extra="forbid")

    seeds: int = Field(20, ge=1)
    small_elements: int = Field(8, ge=1)
    small_devices: int = Field(2, ge=1)
    plateau_seeds: int = Field(3, ge=1)
    near_far_seeds: int = Field(5, ge=1)
    allocation_instances: int = Field(100, ge=1)
    grid_steps: int = Field(200, ge=10)
    fuzz_draws: int = Field(100_000, ge=1)
    sdr_samples: int = Field(200, ge=1)
    trend_seeds: int = Field(3, ge=1)
    trend_powers_dbm: List[float] = Field(default_factory=lambda: [30.0, 36.0, 42.0], min_length=2)
    trend_elements: List[int] = Field(default_factory=lambda: [4, 8, 16], min_length=2)
    trend_tol: float = Field(0.01, ge=0)
    random_gain_ratio: float = Field(0.5, gt=0)
    sca: ScaOptions = Field(default_factory=ScaOptions)
    report_path: Optional[Path] = None


class CheckResult(BaseModel):
    name: str
    passed: bool
    details: Dict[str, Any] = Field(default_factory=dict)


class PropertyReport(BaseModel):
    passed: bool
    checks: List[CheckResult]
    runtime_s: float

    def failed(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]
