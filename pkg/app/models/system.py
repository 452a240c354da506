from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

Point = Tuple[float, float, float]


def dbm_to_watts(value_dbm: float) -> float:
    """Convert a power level in dBm to watts"""
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


class SystemConfig(BaseModel):
    """Network instance parameters; mirrors the JSON config file field for field"""

    model_config = ConfigDict(extra="forbid")

    num_elements: int = Field(16, ge=1)
    num_devices: int = Field(4, ge=1)
    hap_power_dbm: float = 40.0
    noise_power_dbm: float = -80.0
    total_time: float = Field(1.0, gt=0)
    efficiencies: List[float] = Field(default_factory=lambda: [0.8])
    weights: Optional[List[float]] = None

    hap_pos: Point = (0.0, 0.0, 0.0)
    irs_pos: Point = (10.0, 0.0, 4.0)
    device_center: Point = (10.0, 0.0, 0.0)
    device_radius: float = Field(1.5, ge=0)
    device_positions: Optional[List[Point]] = None

    pathloss_hap_irs: float = Field(2.2, gt=0)
    pathloss_irs_device: float = Field(2.2, gt=0)
    pathloss_hap_device: float = Field(3.4, gt=0)
    ref_loss_db: float = 30.0
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_per_device_fields(self) -> "SystemConfig":
        k = self.num_devices
        if len(self.efficiencies) == 1 and k > 1:
            self.efficiencies = self.efficiencies * k
        if len(self.efficiencies) != k:
            raise ValueError(f"efficiencies must have 1 or {k} entries")
        if any(not (0.0 < eta <= 1.0) for eta in self.efficiencies):
            raise ValueError("efficiencies must lie in (0, 1]")
        if self.weights is not None:
            if len(self.weights) != k:
                raise ValueError(f"weights must have {k} entries")
            if any(w < 0 for w in self.weights):
                raise ValueError("weights must be nonnegative")
        if self.device_positions is not None and len(self.device_positions) != k:
            raise ValueError(f"device_positions must have {k} entries")
        return self

    @property
    def hap_power(self) -> float:
        return dbm_to_watts(self.hap_power_dbm)

    @property
    def noise_power(self) -> float:
        return dbm_to_watts(self.noise_power_dbm)

    @property
    def efficiency_array(self) -> np.ndarray:
        return np.asarray(self.efficiencies, dtype=float)

    @property
    def weight_array(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.num_devices)
        return np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class Scenario:
    """Immutable network instance: channels plus the config that produced them.

    ``q[k]`` is stored so that ``np.vdot(q[k], v)`` (that is q_k^H v) equals
    h_{r,k}^H diag(v) g, and ``q_bar[k] = [q[k], conj(h_d[k])]`` so that
    ``np.vdot(q_bar[k], [v, 1]) = h_d[k] + q_k^H v``.
    """

    config: SystemConfig
    positions: np.ndarray  # (K, 3)
    g: np.ndarray  # (N,)
    h_r: np.ndarray  # (K, N)
    h_d: np.ndarray  # (K,)
    q: np.ndarray  # (K, N)
    q_bar: np.ndarray  # (K, N + 1)

    @property
    def num_elements(self) -> int:
        return self.g.shape[0]

    @property
    def num_devices(self) -> int:
        return self.h_d.shape[0]

    def without_irs(self) -> "Scenario":
        """Same instance with every reflected link removed"""
        zeros_q = np.zeros_like(self.q)
        q_bar = np.concatenate([zeros_q, np.conj(self.h_d)[:, None]], axis=1)
        return replace(self, g=np.zeros_like(self.g), h_r=np.zeros_like(self.h_r), q=zeros_q, q_bar=q_bar)
