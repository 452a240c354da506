import logging
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import lambertw

from ..models.beamforming import Allocation, EffectiveRates, PhasePlan, Solution
from ..models.system import Scenario
from .effective_channel import effective_gain
from .errors import UnassignedDeviceError

logger = logging.getLogger(__name__)

# below this multiplier the Lambert-W form loses digits; use the series of the stationarity equation
_SERIES_LIMIT = 1e-8


def perspective_rate(a: np.ndarray, tau: np.ndarray, weights: np.ndarray) -> float:
    """sum_k w_k tau_k log2(1 + a_k / tau_k), with the tau_k = 0 terms taken as their limit 0"""
    used = tau > 0
    return float(np.sum(weights[used] * tau[used] * np.log2(1.0 + a[used] / tau[used])))


def _snr_at_multiplier(ratio: np.ndarray) -> np.ndarray:
    """Solve ln(1+x) - x/(1+x) = r for x >= 0, entrywise"""
    x = np.empty_like(ratio)
    small = ratio < _SERIES_LIMIT
    root = np.sqrt(2.0 * ratio[small])
    x[small] = root + (2.0 / 3.0) * root**2
    # with u = 1/(1+x): u e^{-u} = e^{-(1+r)}, principal branch
    u = -lambertw(-np.exp(-(1.0 + ratio[~small])), 0).real
    x[~small] = 1.0 / u - 1.0
    return x


def inner_split(a: np.ndarray, t_ul: float, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Split the uplink budget t_ul among devices to maximize sum_k w_k tau_k log2(1 + a_k / tau_k).

    Every device with a_k > 0 and w_k > 0 sits at the common multiplier nu of
    w_k [ln(1 + x_k) - x_k / (1 + x_k)] = nu with x_k = a_k / tau_k; nu is
    found by root bracketing so that the times fill t_ul.
    """
    a = np.asarray(a, dtype=float)
    weights = np.ones_like(a) if weights is None else np.asarray(weights, dtype=float)
    if t_ul < 0:
        raise ValueError(f"uplink time must be nonnegative, got {t_ul}")

    tau = np.zeros_like(a)
    active = (a > 0) & (weights > 0)
    if t_ul == 0 or not active.any():
        return tau

    aa, ww = a[active], weights[active]
    if aa.size == 1 or np.ptp(ww) == 0:
        # equal weights give equal SNR everywhere, so times are proportional to a
        tau[active] = t_ul * aa / aa.sum()
        return tau

    def excess(log_nu: float) -> float:
        x = _snr_at_multiplier(np.exp(log_nu) / ww)
        return float(np.sum(aa / x) - t_ul)

    lo, hi = 0.0, 0.0
    while excess(lo) <= 0:
        lo -= 4.0
    while excess(hi) >= 0:
        hi += 4.0
    log_nu = brentq(excess, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500)
    split = aa / _snr_at_multiplier(np.exp(log_nu) / ww)
    tau[active] = split * (t_ul / split.sum())
    return tau


def allocate(rates: EffectiveRates, total_time: float) -> Tuple[Allocation, float]:
    """Optimal harvest-then-transmit allocation for fixed composite coefficients.

    Maximizes f(tau0) = sum_k w_k tau_k log2(1 + c_k tau0 / tau_k), which is
    concave in tau0, over [0, total_time] with the inner split solved exactly
    at each trial point. Energies follow causality with equality on the
    devices that transmit.
    """
    if total_time <= 0:
        raise ValueError(f"total time must be positive, got {total_time}")
    c, weights = rates.c, rates.weights
    num_devices = c.shape[0]
    if not np.any((c > 0) & (weights > 0)):
        zeros = np.zeros((num_devices, 1))
        return Allocation(tau0=0.0, t=zeros, e=zeros.copy()), 0.0

    def negative_value(tau0: float) -> float:
        tau = inner_split(c * tau0, total_time - tau0, weights)
        return -perspective_rate(c * tau0, tau, weights)

    result = minimize_scalar(
        negative_value,
        bounds=(0.0, total_time),
        method="bounded",
        options={"xatol": 1e-12 * total_time, "maxiter": 500},
    )
    tau0 = float(result.x)
    tau = inner_split(c * tau0, total_time - tau0, weights)
    harvest = rates.harvest_power if rates.harvest_power is not None else c
    energy = np.where(tau > 0, harvest * tau0, 0.0)
    value = perspective_rate(c * tau0, tau, weights)
    return Allocation(tau0=tau0, t=tau[:, None], e=energy[:, None]), value


def allocation_value(c: np.ndarray, weights: np.ndarray, total_time: float) -> float:
    """Optimal weighted sum throughput for composite coefficients c"""
    return allocate(EffectiveRates(c=np.maximum(c, 0.0), weights=weights), total_time)[1]


def _check_assignment(scenario: Scenario, plan: PhasePlan) -> None:
    if len(plan.assignment) != scenario.num_devices:
        raise UnassignedDeviceError(
            f"plan assigns {len(plan.assignment)} of {scenario.num_devices} devices to an uplink slot"
        )


def slot_gains(scenario: Scenario, plan: PhasePlan) -> np.ndarray:
    """Effective power gains |h_d,k + q_k^H v_j|^2 indexed (device, slot)"""
    vectors = plan.slot_matrix()
    return np.abs(np.conj(scenario.q_bar) @ vectors.T) ** 2


def harvested_energy(scenario: Scenario, plan: PhasePlan, tau0: float) -> np.ndarray:
    """Energy each device collects during the charging phase, joules"""
    cfg = scenario.config
    gains = slot_gains(scenario, plan)[:, 0]
    return cfg.efficiency_array * cfg.hap_power * gains * tau0


def evaluate_throughput(scenario: Scenario, plan: PhasePlan, alloc: Allocation) -> Tuple[float, np.ndarray]:
    """Weighted sum throughput and per-device throughput R_k = sum_j t_kj log2(1 + p_kj gamma_kj / sigma^2)"""
    gains = slot_gains(scenario, plan)[:, : alloc.t.shape[1]]
    used = alloc.t > 0
    snr = np.zeros_like(alloc.t)
    snr[used] = alloc.e[used] * gains[used] / (alloc.t[used] * scenario.config.noise_power)
    per_device = np.sum(np.where(used, alloc.t * np.log2(1.0 + snr), 0.0), axis=1)
    weighted = float(np.dot(scenario.config.weight_array, per_device))
    return weighted, per_device


def build_solution(scenario: Scenario, plan: PhasePlan, alloc: Allocation, scheme: str = "", **diagnostics) -> Solution:
    """Wrap a feasible (plan, allocation) pair, re-evaluating its throughput from scratch"""
    throughput, per_device = evaluate_throughput(scenario, plan, alloc)
    return Solution(
        plan=plan,
        alloc=alloc,
        throughput=throughput,
        scheme=scheme,
        device_throughputs=per_device,
        harvested_energy=harvested_energy(scenario, plan, alloc.tau0),
        **diagnostics,
    )


def finish_solution(scenario: Scenario, plan: PhasePlan, scheme: str = "", **diagnostics) -> Solution:
    """Optimal time and energy allocation for a fixed, feasible phase plan"""
    _check_assignment(scenario, plan)
    cfg = scenario.config
    gains = slot_gains(scenario, plan)
    dl_gain = gains[:, 0]
    ul_gain = gains[np.arange(scenario.num_devices), np.asarray(plan.assignment)]
    harvest = cfg.efficiency_array * cfg.hap_power * dl_gain
    rates = EffectiveRates(c=harvest * ul_gain / cfg.noise_power, weights=cfg.weight_array, harvest_power=harvest)

    single, _ = allocate(rates, cfg.total_time)
    t = np.zeros((scenario.num_devices, plan.num_slots))
    e = np.zeros_like(t)
    rows = np.arange(scenario.num_devices)
    t[rows, plan.assignment] = single.t[:, 0]
    e[rows, plan.assignment] = single.e[:, 0]
    return build_solution(scenario, plan, Allocation(tau0=single.tau0, t=t, e=e), scheme=scheme, **diagnostics)
