import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

from ..models.system import Scenario, SystemConfig
from .errors import InvalidGeometryError

logger = logging.getLogger(__name__)

# spawn-key roots of the per-link random streams
_HAP_IRS_STREAM = 0
_DEVICE_STREAM = 1
_POSITION, _DIRECT, _REFLECTED = 0, 1, 2


def pathloss(distance: float, exponent: float, ref_loss_db: float) -> float:
    """Linear power gain of a link: 10^(-L0/10) * d^(-alpha), 1 m reference"""
    if not distance > 0:
        raise InvalidGeometryError(f"link distance must be positive, got {distance}")
    return 10.0 ** (-ref_loss_db / 10.0) * distance ** (-exponent)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for one named stream; independent of draw order elsewhere"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _cn(rng: np.random.Generator, size) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples"""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def _device_positions(config: SystemConfig) -> np.ndarray:
    if config.device_positions is not None:
        return np.asarray(config.device_positions, dtype=float)
    center = np.asarray(config.device_center, dtype=float)
    positions = np.empty((config.num_devices, 3))
    for k in range(config.num_devices):
        rng = stream(config.seed, _DEVICE_STREAM, k, _POSITION)
        radius = config.device_radius * np.sqrt(rng.uniform())
        angle = 2.0 * np.pi * rng.uniform()
        positions[k] = center + np.array([radius * np.cos(angle), radius * np.sin(angle), 0.0])
    return positions


def generate_scenario(config: SystemConfig) -> Scenario:
    """Draw Rayleigh-faded channels scaled by distance pathloss"""
    n, k_devices = config.num_elements, config.num_devices
    hap = np.asarray(config.hap_pos, dtype=float)
    irs = np.asarray(config.irs_pos, dtype=float)
    positions = _device_positions(config)

    pl_hi = pathloss(float(np.linalg.norm(irs - hap)), config.pathloss_hap_irs, config.ref_loss_db)
    g = np.sqrt(pl_hi) * _cn(stream(config.seed, _HAP_IRS_STREAM), n)

    h_r = np.empty((k_devices, n), dtype=complex)
    h_d = np.empty(k_devices, dtype=complex)
    for k in range(k_devices):
        d_id = float(np.linalg.norm(positions[k] - irs))
        d_hd = float(np.linalg.norm(positions[k] - hap))
        pl_id = pathloss(d_id, config.pathloss_irs_device, config.ref_loss_db)
        pl_hd = pathloss(d_hd, config.pathloss_hap_device, config.ref_loss_db)
        h_r[k] = np.sqrt(pl_id) * _cn(stream(config.seed, _DEVICE_STREAM, k, _REFLECTED), n)
        h_d[k] = np.sqrt(pl_hd) * _cn(stream(config.seed, _DEVICE_STREAM, k, _DIRECT), 1)[0]

    # q_k^H v = h_r^H diag(v) g  <=>  q_k = h_r * conj(g)
    q = h_r * np.conj(g)[None, :]
    q_bar = np.concatenate([q, np.conj(h_d)[:, None]], axis=1)

    logger.info(f"Generated scenario N={n} K={k_devices} seed={config.seed}")
    return Scenario(config=config, positions=positions, g=g, h_r=h_r, h_d=h_d, q=q, q_bar=q_bar)


def load_config(path: Union[str, Path]) -> SystemConfig:
    return SystemConfig.model_validate_json(Path(path).read_text())


def save_config(config: SystemConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(config.model_dump(mode="json"), indent=2))


def profile_config(name: str, seed: int = 0) -> SystemConfig:
    """Named parameter sets: desk-scale default, full simulation setting, two-device near-far"""
    if name == "desk":
        return SystemConfig(num_elements=16, num_devices=4, seed=seed)
    if name == "full":
        return SystemConfig(num_elements=50, num_devices=10, seed=seed)
    if name == "near_far":
        return SystemConfig(
            num_elements=16,
            num_devices=2,
            device_positions=[(7.0, 0.0, 0.0), (10.0, 0.0, 0.0)],
            irs_pos=(10.0, 0.0, 1.0),
            seed=seed,
        )
    raise ValueError(f"Unknown profile: {name}")
