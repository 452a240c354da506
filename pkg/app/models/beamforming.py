import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

UNIT_MODULUS_TOL = 1e-9


@dataclass(frozen=True)
class PhaseVector:
    """IRS reflection vector, bare (length N) or augmented (length N+1, last entry 1)"""

    values: np.ndarray
    augmented: bool = True
    degenerate: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("phase vector must be a nonempty 1-D array")
        if np.any(np.abs(np.abs(values) - 1.0) > UNIT_MODULUS_TOL):
            raise ValueError("phase vector entries must have unit modulus")
        if self.augmented and values[-1] != 1.0:
            raise ValueError("augmented phase vector must end with 1")

    @property
    def bare(self) -> np.ndarray:
        return self.values[:-1] if self.augmented else self.values

    @property
    def full(self) -> np.ndarray:
        """Augmented representation [v; 1]"""
        if self.augmented:
            return self.values
        return np.append(self.values, 1.0 + 0.0j)

    @property
    def num_elements(self) -> int:
        return self.bare.shape[0]

    @classmethod
    def ones(cls, num_elements: int) -> "PhaseVector":
        return cls(np.ones(num_elements + 1, dtype=complex), augmented=True)


@dataclass(frozen=True)
class PhasePlan:
    """DL vector v0, J UL vectors, and the device -> slot association (slot 0 is v0)"""

    v0: PhaseVector
    ul_vectors: Tuple[PhaseVector, ...] = ()
    assignment: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ul_vectors", tuple(self.ul_vectors))
        object.__setattr__(self, "assignment", tuple(int(a) for a in self.assignment))
        for slot in self.assignment:
            if slot < 0 or slot > self.num_ul_vectors:
                raise ValueError(f"slot index {slot} out of range 0..{self.num_ul_vectors}")

    @property
    def num_ul_vectors(self) -> int:
        return len(self.ul_vectors)

    @property
    def num_slots(self) -> int:
        return self.num_ul_vectors + 1

    def slot_vector(self, slot: int) -> PhaseVector:
        return self.v0 if slot == 0 else self.ul_vectors[slot - 1]

    def slot_matrix(self) -> np.ndarray:
        """Augmented vectors of every slot stacked as rows, shape (J+1, N+1)"""
        return np.stack([self.slot_vector(j).full for j in range(self.num_slots)])

    def to_json(self) -> str:
        """Phases in radians per slot (bare entries only) plus the association"""
        return json.dumps(
            {
                "phases": [np.angle(self.slot_vector(j).bare).tolist() for j in range(self.num_slots)],
                "assignment": list(self.assignment),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PhasePlan":
        data = json.loads(text)
        vectors = [PhaseVector(np.append(np.exp(1j * np.asarray(p, dtype=float)), 1.0 + 0.0j)) for p in data["phases"]]
        return cls(v0=vectors[0], ul_vectors=tuple(vectors[1:]), assignment=tuple(data["assignment"]))


@dataclass(frozen=True)
class Allocation:
    """Harvest-then-transmit allocation; t and e are indexed (device, slot)"""

    tau0: float
    t: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", np.atleast_2d(np.asarray(self.t, dtype=float)))
        object.__setattr__(self, "e", np.atleast_2d(np.asarray(self.e, dtype=float)))
        if self.t.shape != self.e.shape:
            raise ValueError("time and energy tables must have the same shape")

    @property
    def p(self) -> np.ndarray:
        """Transmit powers in watts; zero where no time is allocated"""
        out = np.zeros_like(self.e)
        used = self.t > 0
        out[used] = self.e[used] / self.t[used]
        return out

    @property
    def device_times(self) -> np.ndarray:
        return self.t.sum(axis=1)

    @property
    def total_time(self) -> float:
        return float(self.tau0 + self.t.sum())


@dataclass(frozen=True)
class EffectiveRates:
    """Per-device composite coefficients c_k = eta_k P_A gamma_DL gamma_UL / sigma^2"""

    c: np.ndarray
    weights: np.ndarray
    harvest_power: Optional[np.ndarray] = None  # eta_k P_A gamma_DL, watts

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if np.any(c < 0):
            raise ValueError("composite coefficients must be nonnegative")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))


@dataclass
class Solution:
    plan: PhasePlan
    alloc: Allocation
    throughput: float
    scheme: str = ""
    device_throughputs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    harvested_energy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    trace: List[float] = field(default_factory=list)
    restarts_used: int = 0
    iterations: int = 0
    status: str = "optimal"
    runtime_ms: float = 0.0

    @property
    def num_vectors(self) -> int:
        return self.plan.num_slots

    @property
    def overhead_coefficients(self) -> int:
        """Phase coefficients the HAP must feed back to the IRS controller"""
        return self.num_vectors * self.plan.v0.num_elements


class ScaOptions(BaseModel):
    max_outer_iters: int = Field(50, ge=1)
    convergence_tol: float = Field(1e-6, gt=0)
    restarts: int = Field(5, ge=1)
    subproblem_tol: float = Field(1e-8, gt=0)
    seed: int = Field(0, ge=0)
    trace_path: Optional[Path] = None
    debug_dump_dir: Optional[Path] = None
