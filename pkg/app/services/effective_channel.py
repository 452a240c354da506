import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from ..models.beamforming import PhaseVector
from ..models.system import Scenario
from .errors import DegeneratePhaseError, DimensionMismatchError

logger = logging.getLogger(__name__)

PhaseLike = Union[PhaseVector, np.ndarray]


def _bare(v: PhaseLike) -> np.ndarray:
    return v.bare if isinstance(v, PhaseVector) else np.asarray(v, dtype=complex)


def effective_gain(h_d: complex, q: np.ndarray, v: PhaseLike) -> float:
    """|h_d + q^H v|^2"""
    q = np.asarray(q, dtype=complex)
    v = _bare(v)
    if q.shape != v.shape:
        raise DimensionMismatchError(f"channel has {q.shape[0]} entries, phase vector {v.shape[0]}")
    return float(np.abs(h_d + np.vdot(q, v)) ** 2)


def align_phases(h_d: complex, q: np.ndarray) -> Tuple[PhaseVector, float]:
    """Closed-form single-user optimum: co-phase every reflected path with the direct one"""
    q = np.asarray(q, dtype=complex)
    reference = np.angle(h_d) if h_d != 0 else 0.0
    # [v]_n = exp(j(arg h_d - arg [q^H]_n)) and arg [q^H]_n = -arg q_n
    v = np.exp(1j * (reference + np.angle(q)))
    v[q == 0] = 1.0
    gamma = float((np.abs(h_d) + np.abs(q).sum()) ** 2)
    return PhaseVector(np.append(v, 1.0 + 0.0j), augmented=True), gamma


def project_unit_modulus(v: np.ndarray, augmented: bool = True, strict: bool = False) -> PhaseVector:
    """Entrywise v_n / |v_n|; augmented vectors are first rotated so the last entry is real positive.

    Zero entries have no phase; they map to 1 and are counted in ``degenerate``
    unless ``strict`` asks for an error instead.
    """
    v = np.asarray(v, dtype=complex).copy()
    if augmented and v[-1] != 0:
        v = v * np.exp(-1j * np.angle(v[-1]))
    modulus = np.abs(v)
    zero = modulus == 0
    degenerate = int(zero.sum())
    if degenerate:
        if strict:
            raise DegeneratePhaseError(f"{degenerate} zero-modulus entries have no phase")
        logger.warning(f"Projecting {degenerate} zero-modulus IRS entries to phase 0")
    out = np.ones_like(v)
    out[~zero] = v[~zero] / modulus[~zero]
    if augmented:
        out[-1] = 1.0
    return PhaseVector(out, augmented=augmented, degenerate=degenerate)


@dataclass(frozen=True)
class NormalizedChannels:
    """Per-device channels rescaled to unit aligned amplitude.

    q_hat[k] = q_bar[k] / (|h_d| + sum |q_n|), so |q_hat^H v| <= 1 for any
    feasible v, and ``composite[k] = eta_k P_A gamma_k^2 / sigma^2`` carries
    every physical constant of device k.
    """

    q_hat: np.ndarray  # (K, N+1)
    gamma: np.ndarray  # aligned gains (|h_d| + sum |q_n|)^2
    composite: np.ndarray
    weights: np.ndarray
    active: np.ndarray  # devices that can contribute throughput

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "NormalizedChannels":
        cfg = scenario.config
        amplitude = np.abs(scenario.q_bar).sum(axis=1)
        gamma = amplitude**2
        safe = np.where(amplitude > 0, amplitude, 1.0)
        q_hat = scenario.q_bar / safe[:, None]
        composite = cfg.efficiency_array * cfg.hap_power * gamma**2 / cfg.noise_power
        weights = cfg.weight_array
        active = (amplitude > 0) & (weights > 0)
        return cls(q_hat=q_hat, gamma=gamma, composite=composite, weights=weights, active=active)

    @property
    def num_devices(self) -> int:
        return self.q_hat.shape[0]

    def gains(self, v_bar: np.ndarray) -> np.ndarray:
        """Normalized gains |q_hat_k^H v|^2 for every device; v may be a single vector or (J, N+1)"""
        return np.abs(np.conj(self.q_hat) @ np.asarray(v_bar).T) ** 2

    def strength_order(self) -> np.ndarray:
        """Devices by descending aligned gain, ties to the lower index"""
        return np.argsort(-self.gamma, kind="stable")
