import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..models.beamforming import Allocation, EffectiveRates, PhasePlan, PhaseVector, ScaOptions, Solution
from ..models.system import Scenario
from .allocation import allocate, allocation_value, build_solution, finish_solution, slot_gains
from .convex_kernel import ConvexSubproblem, SubproblemBuilder, solve_subproblem
from .effective_channel import NormalizedChannels, align_phases, project_unit_modulus
from .scenario import stream
from .surrogates import linearized_gain, surrogate_dl_energy, surrogate_exp_product, surrogate_quartic

logger = logging.getLogger(__name__)

_INTERIOR = 1.0 - 1e-4
_GAIN_FLOOR = 1e-12
_TIME_MARGIN = 1e-6
_SIDE_SHARE = 1e-3
_RESTART_STREAM = 2
_RANDOM_BASELINE_STREAM = 3


@dataclass
class ScaRun:
    """Outcome of one SCA trajectory on the relaxed problem"""

    vectors: np.ndarray  # (J+1, N+1) last accepted relaxed vectors
    trace: List[float]
    iterations: int = 0
    status: str = "optimal"
    records: List[Dict] = field(default_factory=list)
    split: Optional[Tuple[float, np.ndarray, np.ndarray]] = None  # tau0, t, normalized e


def _pull_inside(vectors: np.ndarray) -> np.ndarray:
    """Shrink bare entries whose modulus exceeds the interior radius; the direct-path entry stays 1"""
    out = np.array(vectors, dtype=complex, copy=True)
    bare = out[..., :-1]
    modulus = np.abs(bare)
    factor = np.where(modulus > _INTERIOR, _INTERIOR / np.where(modulus > 0, modulus, 1.0), 1.0)
    out[..., :-1] = bare * factor
    return out


def _aligned_vector(scenario: Scenario, device: int) -> PhaseVector:
    return align_phases(scenario.h_d[device], scenario.q[device])[0]


def _write_trace(path: Optional[Path], records: List[Dict]) -> None:
    if path is None or not records:
        return
    path = Path(path)
    frame = pd.DataFrame.from_records(records)
    frame.to_csv(path, mode="a", header=not path.exists(), index=False)


class _ScaEngine:
    """Outer SCA loop shared by every scheme; subclasses build the convex subproblems"""

    label = "sca"

    def __init__(self, channels: NormalizedChannels, total_time: float, opts: ScaOptions):
        self.channels = channels
        self.total_time = total_time
        self.opts = opts

    def value(self, vectors: np.ndarray) -> float:
        raise NotImplementedError

    def subproblem(self, vectors: np.ndarray):
        raise NotImplementedError

    def read_split(self, problem: ConvexSubproblem, z: np.ndarray):
        return None

    def run(self, vectors: np.ndarray, restart: int = 0) -> ScaRun:
        current = np.atleast_2d(np.asarray(vectors, dtype=complex))
        value = self.value(current)
        run = ScaRun(vectors=current, trace=[value])
        for iteration in range(1, self.opts.max_outer_iters + 1):
            built = self.subproblem(current)
            if built is None:
                break
            problem, start = built
            if self.opts.debug_dump_dir is not None:
                problem.dump(Path(self.opts.debug_dump_dir) / f"{self.label}_r{restart}_it{iteration}.json")
            z, report = solve_subproblem(problem, start, tol=self.opts.subproblem_tol)
            if report.status != "optimal":
                run.status = report.status
            candidate = self.read_vectors(problem, z, current)
            new_value = self.value(candidate)
            run.records.append(
                {
                    "scheme": self.label,
                    "restart": restart,
                    "iteration": iteration,
                    "objective": new_value,
                    "step_norm": float(np.linalg.norm(candidate - current)),
                    "newton_steps": report.iterations,
                    "subproblem_status": report.status,
                }
            )
            if new_value < value:
                drop = (value - new_value) / max(abs(value), 1e-300)
                if drop > 1e-9:
                    logger.warning(f"{self.label}: rejected SCA step {iteration} (objective {value:.6g} drops by {drop:.3e} relative)")
                break
            previous = value
            current, value = candidate, new_value
            run.vectors = current
            run.trace.append(value)
            run.iterations = iteration
            split = self.read_split(problem, z)
            if split is not None:
                run.split = split
            if value - previous <= self.opts.convergence_tol * max(abs(previous), 1e-300):
                break
        return run

    @staticmethod
    def read_vectors(problem: ConvexSubproblem, z: np.ndarray, current: np.ndarray) -> np.ndarray:
        out = current.copy()
        for j in range(current.shape[0]):
            out[j, :-1] = problem.variables[f"v{j}"].value(z)
        return out


class SharedDownlinkSca(_ScaEngine):
    """SCA over (tau0, tau, v0) when every uplink vector is either v0 itself or a fixed aligned vector.

    Devices on v0 see the quartic target tau0 |q^H v0|^4; devices with a
    dedicated aligned vector only need the downlink energy tau0 |q^H v0|^2.
    """

    def __init__(self, channels: NormalizedChannels, dedicated: np.ndarray, total_time: float, opts: ScaOptions, label: str):
        super().__init__(channels, total_time, opts)
        self.dedicated = np.asarray(dedicated, dtype=bool)
        self.label = label

    def rates(self, vectors: np.ndarray) -> np.ndarray:
        d = self.channels.gains(vectors[0])
        return self.channels.composite * d * np.where(self.dedicated, 1.0, d)

    def value(self, vectors: np.ndarray) -> float:
        return allocation_value(self.rates(vectors), self.channels.weights, self.total_time)

    def subproblem(self, vectors: np.ndarray):
        ch = self.channels
        v_bar = vectors[0]
        d = ch.gains(v_bar)
        alloc, _ = allocate(EffectiveRates(c=self.rates(vectors), weights=ch.weights), self.total_time)
        t0, tau = alloc.tau0, alloc.t[:, 0]
        if t0 <= 0:
            return None

        candidates = np.flatnonzero(ch.active & (d > _GAIN_FLOOR) & (tau > 0))
        if candidates.size == 0:
            return None
        scale = min(1.0, (1.0 - _TIME_MARGIN) * self.total_time / (t0 + tau[candidates].sum()))
        tau0_start = t0 * scale
        v_start = _pull_inside(v_bar)

        members, bounds, u_start = [], [], []
        for k in candidates:
            build = surrogate_dl_energy if self.dedicated[k] else surrogate_quartic
            bound = build(ch.q_hat[k], v_bar, t0)
            room = bound(v_start, tau0_start)
            if room > 0:
                members.append(k)
                bounds.append(bound)
                u_start.append(0.9 * room)
        if not members:
            return None

        builder = SubproblemBuilder()
        tau0 = builder.add_real("tau0")[0]
        taus = builder.add_real("tau", len(members))
        us = builder.add_real("u", len(members))
        v = builder.add_complex("v0", v_bar.shape[0] - 1)
        builder.add_linear_le(builder.affine(-self.total_time).add(tau0, 1.0).add(taus, 1.0))
        builder.add_unit_disk(v)
        for i, (k, bound) in enumerate(zip(members, bounds)):
            builder.add_perspective(taus[i], us[i], ch.composite[k], ch.weights[k])
            bound.constrain(builder, tau0, v, builder.affine().add(us[i], 1.0))
        problem = builder.build()

        z = np.zeros(problem.num_vars)
        z[tau0] = tau0_start
        z[taus] = tau[members] * scale
        z[us] = u_start
        v.assign(z, v_start[:-1])
        return problem, z


class GeneralSca(_ScaEngine):
    """SCA over (tau0, t_kj, e_kj, v_0..v_J) with energies split across uplink slots.

    Energies are normalized per device by eta_k P_A gamma_k, so causality reads
    sum_j e_kj <= tau0 |q^H v0|^2 and the SNR of pair (k, j) is
    composite_k e_kj |q^H v_j|^2 / t_kj.
    """

    label = "general"

    def __init__(self, channels: NormalizedChannels, allowed: Sequence[int], total_time: float, opts: ScaOptions, label: str):
        super().__init__(channels, total_time, opts)
        self.allowed = np.asarray(allowed, dtype=int)
        self.label = label

    def best_slots(self, d: np.ndarray) -> np.ndarray:
        return self.allowed[np.argmax(d[:, self.allowed], axis=1)]

    def rates(self, vectors: np.ndarray) -> np.ndarray:
        d = self.channels.gains(vectors)
        return self.channels.composite * d[:, 0] * d[:, self.allowed].max(axis=1)

    def value(self, vectors: np.ndarray) -> float:
        return allocation_value(self.rates(vectors), self.channels.weights, self.total_time)

    def subproblem(self, vectors: np.ndarray):
        ch = self.channels
        num_slots, n_bar = vectors.shape
        d = ch.gains(vectors)
        best = self.best_slots(d)
        alloc, _ = allocate(EffectiveRates(c=self.rates(vectors), weights=ch.weights), self.total_time)
        t0, tau = alloc.tau0, alloc.t[:, 0]
        if t0 <= 0:
            return None

        v_start = _pull_inside(vectors)
        raw_time = t0
        pairs: List[Tuple[int, int]] = []
        start: Dict[Tuple[int, int], Dict[str, float]] = {}
        dl_bounds = {}
        for k in np.flatnonzero(ch.active & (d[:, 0] > _GAIN_FLOOR) & (tau > 0)):
            slots = [j for j in self.allowed if d[k, j] > _GAIN_FLOOR]
            if best[k] not in slots:
                continue
            energy = t0 * d[k, 0]
            side = len(slots) - 1
            device_pairs = []
            for j in slots:
                main = j == best[k]
                e_cur = energy * (1.0 - _SIDE_SHARE) if main else energy * _SIDE_SHARE / side
                t_cur = tau[k] if main else tau[k] * _SIDE_SHARE / side
                b, const = linearized_gain(ch.q_hat[k], vectors[j])
                gain_room = float(np.real(np.vdot(b, v_start[j]))) + const
                if gain_room <= 0:
                    if main:
                        device_pairs = []
                        break
                    continue
                x_hat, y_hat = np.log(e_cur), np.log(d[k, j])
                x_start = x_hat - 0.2
                y_start = min(y_hat - 0.1, np.log(0.5 * gain_room))
                bound = surrogate_exp_product(x_hat, y_hat)
                s_room = bound(x_start, y_start)
                if s_room <= 0:
                    if main:
                        device_pairs = []
                        break
                    continue
                device_pairs.append((int(k), int(j)))
                start[(int(k), int(j))] = {
                    "t": t_cur,
                    "e": 0.9 * e_cur,
                    "x": x_start,
                    "y": y_start,
                    "s": 0.5 * min(np.exp(x_start + y_start), s_room),
                    "gain_b": b,
                    "gain_const": const,
                    "bound": bound,
                }
            if not device_pairs:
                continue
            dl = surrogate_dl_energy(ch.q_hat[k], vectors[0], t0)
            dl_bounds[int(k)] = dl
            pairs.extend(device_pairs)
            raw_time += sum(start[p]["t"] for p in device_pairs)
        if not pairs:
            return None

        scale = min(1.0, (1.0 - _TIME_MARGIN) * self.total_time / raw_time)
        tau0_start = t0 * scale
        for k, dl in list(dl_bounds.items()):
            room = dl(v_start[0], tau0_start)
            spent = sum(start[p]["e"] for p in pairs if p[0] == k)
            if room <= 0:
                pairs = [p for p in pairs if p[0] != k]
                del dl_bounds[k]
            elif spent >= 0.99 * room:
                shrink = 0.5 * room / spent
                for p in pairs:
                    if p[0] == k:
                        start[p]["e"] *= shrink
                        start[p]["x"] += np.log(shrink)
                        start[p]["s"] *= shrink
        if not pairs:
            return None

        builder = SubproblemBuilder()
        tau0 = builder.add_real("tau0")[0]
        m = len(pairs)
        t = builder.add_real("t", m)
        e = builder.add_real("e", m)
        s = builder.add_real("s", m)
        x = builder.add_real("x", m)
        y = builder.add_real("y", m)
        blocks = [builder.add_complex(f"v{j}", n_bar - 1) for j in range(num_slots)]
        builder.add_linear_le(builder.affine(-self.total_time).add(tau0, 1.0).add(t, 1.0))
        for block in blocks:
            builder.add_unit_disk(block)
        for i, (k, j) in enumerate(pairs):
            info = start[(k, j)]
            builder.add_perspective(t[i], s[i], ch.composite[k], ch.weights[k])
            builder.add_exp_le(x[i], builder.affine().add(e[i], 1.0))
            gain = builder.affine(info["gain_const"] + float(np.real(info["gain_b"][-1])))
            builder.add_exp_le(y[i], gain.add_inner(blocks[j], info["gain_b"][:-1]))
            bound = info["bound"]
            builder.add_linear_le(builder.affine(-bound.intercept).add(s[i], 1.0).add([x[i], y[i]], -bound.slope))
        for k, dl in dl_bounds.items():
            spent = builder.affine()
            for i, p in enumerate(pairs):
                if p[0] == k:
                    spent.add(e[i], 1.0)
            dl.constrain(builder, tau0, blocks[0], spent)
        problem = builder.build()

        z = np.zeros(problem.num_vars)
        z[tau0] = tau0_start
        for i, p in enumerate(pairs):
            info = start[p]
            z[t[i]] = info["t"] * scale
            z[e[i]] = info["e"]
            z[s[i]] = info["s"]
            z[x[i]] = info["x"]
            z[y[i]] = info["y"]
        for j, block in enumerate(blocks):
            block.assign(z, v_start[j, :-1])
        self._pairs = pairs
        return problem, z

    def read_split(self, problem: ConvexSubproblem, z: np.ndarray):
        num_devices = self.channels.num_devices
        num_slots = sum(1 for name in problem.variables if name.startswith("v"))
        t = np.zeros((num_devices, num_slots))
        e = np.zeros_like(t)
        t_idx, e_idx = problem.variables["t"], problem.variables["e"]
        for i, (k, j) in enumerate(self._pairs):
            t[k, j] = z[t_idx[i]]
            e[k, j] = z[e_idx[i]]
        return float(z[problem.variables["tau0"][0]]), t, e


def _static_starts(scenario: Scenario, channels: NormalizedChannels, opts: ScaOptions) -> List[np.ndarray]:
    """Aligned vector of the strongest device, then uniform random phases"""
    strongest = int(channels.strength_order()[0])
    starts = [_aligned_vector(scenario, strongest).full]
    for restart in range(1, opts.restarts):
        rng = stream(opts.seed, _RESTART_STREAM, scenario.config.seed, restart)
        phases = np.exp(2j * np.pi * rng.uniform(size=scenario.num_elements))
        starts.append(np.append(phases, 1.0 + 0.0j))
    return starts


def _elapsed_ms(started: float) -> float:
    return (time.perf_counter() - started) * 1000.0


def solve_static(scenario: Scenario, opts: Optional[ScaOptions] = None) -> Solution:
    """Single shared vector for DL and UL, optimized by SCA from several starts"""
    opts = opts or ScaOptions()
    started = time.perf_counter()
    channels = NormalizedChannels.from_scenario(scenario)
    engine = SharedDownlinkSca(channels, np.zeros(scenario.num_devices, dtype=bool), scenario.config.total_time, opts, "static")
    assignment = (0,) * scenario.num_devices

    best: Optional[Solution] = None
    records: List[Dict] = []
    starts = _static_starts(scenario, channels, opts)
    for restart, v_start in enumerate(starts):
        run = engine.run(v_start, restart=restart)
        records.extend(run.records)
        for v_bar in (v_start, run.vectors[0]):
            plan = PhasePlan(v0=project_unit_modulus(v_bar), assignment=assignment)
            sol = finish_solution(
                scenario, plan, scheme="static", trace=list(run.trace), iterations=run.iterations, status=run.status
            )
            if best is None or sol.throughput > best.throughput:
                best = sol
    best.restarts_used = len(starts)
    best.runtime_ms = _elapsed_ms(started)
    _write_trace(opts.trace_path, records)
    logger.info(f"static: R={best.throughput:.6f} after {best.iterations} SCA iterations, {len(starts)} starts")
    return best


def _solve_dedicated(
    scenario: Scenario,
    devices: Sequence[int],
    opts: ScaOptions,
    warm_start: Optional[Solution],
    scheme: str,
) -> Solution:
    """Devices in ``devices`` get their aligned vectors in slots 1..len(devices); the rest stay on v0"""
    started = time.perf_counter()
    if warm_start is None:
        warm_start = solve_static(scenario, opts)
    channels = NormalizedChannels.from_scenario(scenario)
    dedicated = np.zeros(scenario.num_devices, dtype=bool)
    dedicated[list(devices)] = True
    assignment = np.zeros(scenario.num_devices, dtype=int)
    for slot, k in enumerate(devices, start=1):
        assignment[k] = slot
    ul_vectors = tuple(_aligned_vector(scenario, int(k)) for k in devices)

    engine = SharedDownlinkSca(channels, dedicated, scenario.config.total_time, opts, scheme)
    v_start = warm_start.plan.v0.full
    run = engine.run(v_start)
    best: Optional[Solution] = None
    for v_bar in (v_start, run.vectors[0]):
        plan = PhasePlan(v0=project_unit_modulus(v_bar), ul_vectors=ul_vectors, assignment=tuple(assignment))
        sol = finish_solution(scenario, plan, scheme=scheme, trace=list(run.trace), iterations=run.iterations, status=run.status)
        if best is None or sol.throughput > best.throughput:
            best = sol
    best.restarts_used = 1
    best.runtime_ms = _elapsed_ms(started)
    _write_trace(opts.trace_path, run.records)
    logger.info(f"{scheme}: R={best.throughput:.6f} with {len(devices)} dedicated vectors, {best.iterations} SCA iterations")
    return best


def solve_hybrid(
    scenario: Scenario, num_vectors: int, opts: Optional[ScaOptions] = None, warm_start: Optional[Solution] = None
) -> Solution:
    """Low-complexity dynamic scheme: the J strongest devices get dedicated aligned UL vectors"""
    opts = opts or ScaOptions()
    if num_vectors < 0 or num_vectors > scenario.num_devices:
        raise ValueError(f"hybrid scheme needs 0 <= J <= K, got J={num_vectors}, K={scenario.num_devices}")
    if num_vectors == 0:
        return replace(warm_start or solve_static(scenario, opts), scheme="hybrid")
    order = NormalizedChannels.from_scenario(scenario).strength_order()
    return _solve_dedicated(scenario, [int(k) for k in order[:num_vectors]], opts, warm_start, "hybrid")


def solve_user_adaptive(
    scenario: Scenario, opts: Optional[ScaOptions] = None, warm_start: Optional[Solution] = None
) -> Solution:
    """One aligned UL vector per device (device k -> slot k+1), DL vector by SCA"""
    opts = opts or ScaOptions()
    return _solve_dedicated(scenario, list(range(scenario.num_devices)), opts, warm_start, "user_adaptive")


def round_association(sol: Solution, scenario: Scenario, exclude_dl_slot: bool = False) -> Solution:
    """Move every device onto its strongest slot, pooling its time and energy there.

    Ties go to the lower slot index, except that a device already using a
    single tied-best slot keeps it. With v1 = v0, a device transmitting only
    in slot 1 stays on slot 1, while a device split over slots 0 and 1 moves
    to slot 0. The pooled allocation is compared with a fresh optimal
    allocation for the rounded plan and the better one is kept.
    """
    plan, alloc = sol.plan, sol.alloc
    gains = slot_gains(scenario, plan)
    first = 1 if exclude_dl_slot else 0
    num_devices = scenario.num_devices
    assignment = np.empty(num_devices, dtype=int)
    for k in range(num_devices):
        candidates = gains[k, first:]
        chosen = first + int(np.argmax(candidates))
        used = np.flatnonzero(alloc.t[k] > 0)
        if used.size == 1 and used[0] >= first and gains[k, used[0]] >= candidates.max():
            chosen = int(used[0])
        assignment[k] = chosen

    rows = np.arange(num_devices)
    t = np.zeros((num_devices, plan.num_slots))
    e = np.zeros_like(t)
    t[rows, assignment] = alloc.device_times
    e[rows, assignment] = alloc.e.sum(axis=1)
    rounded = PhasePlan(v0=plan.v0, ul_vectors=plan.ul_vectors, assignment=tuple(assignment))
    diagnostics = dict(trace=list(sol.trace), iterations=sol.iterations, status=sol.status, restarts_used=sol.restarts_used)
    pooled = build_solution(scenario, rounded, Allocation(tau0=alloc.tau0, t=t, e=e), scheme=sol.scheme, **diagnostics)
    finished = finish_solution(scenario, rounded, scheme=sol.scheme, **diagnostics)
    return finished if finished.throughput >= pooled.throughput else pooled


def _initial_ul_vectors(
    scenario: Scenario, channels: NormalizedChannels, warm: Solution, num_vectors: int, decoupled: bool
) -> List[List[np.ndarray]]:
    """Candidate UL starts.

    The first candidate keeps the warm vectors and tops them up with the
    aligned vectors of the strongest devices not already alone on a UL slot
    of the warm plan. When the warm plan has fewer than J vectors, the aligned
    vectors of the J strongest devices are a second candidate.
    """
    kept = [v.full for v in warm.plan.ul_vectors[:num_vectors]]
    missing = num_vectors - len(kept)
    if decoupled:
        return [kept + [warm.plan.v0.full] * missing]
    if missing <= 0:
        return [kept]

    order = [int(k) for k in channels.strength_order()]
    assignment = np.asarray(warm.plan.assignment)
    occupancy = np.bincount(assignment, minlength=warm.plan.num_slots)
    alone = {k for k in order if 1 <= assignment[k] <= len(kept) and occupancy[assignment[k]] == 1}
    seeds = [k for k in order if k not in alone] + order
    topped = kept + [_aligned_vector(scenario, seeds[i % len(seeds)]).full for i in range(missing)]
    fresh = [_aligned_vector(scenario, order[i % len(order)]).full for i in range(num_vectors)]
    return [topped, fresh]


def _best_slot_plan(scenario: Scenario, v0: PhaseVector, ul_vectors, exclude_dl_slot: bool) -> PhasePlan:
    plan = PhasePlan(v0=v0, ul_vectors=tuple(ul_vectors), assignment=(0,) * scenario.num_devices)
    gains = slot_gains(scenario, plan)
    first = 1 if exclude_dl_slot else 0
    assignment = first + np.argmax(gains[:, first:], axis=1)
    return PhasePlan(v0=v0, ul_vectors=tuple(ul_vectors), assignment=tuple(int(a) for a in assignment))


def _split_solution(scenario: Scenario, plan_vectors: Tuple[PhaseVector, Tuple[PhaseVector, ...]], split, scheme: str) -> Solution:
    """Feasible multi-slot solution from the last SCA subproblem, energies clipped to projected causality"""
    v0, ul_vectors = plan_vectors
    tau0, t, e_hat = split
    cfg = scenario.config
    channels = NormalizedChannels.from_scenario(scenario)
    energy = e_hat * (cfg.efficiency_array * cfg.hap_power * channels.gamma)[:, None]
    template = PhasePlan(v0=v0, ul_vectors=ul_vectors, assignment=(0,) * scenario.num_devices)
    harvest = cfg.efficiency_array * cfg.hap_power * slot_gains(scenario, template)[:, 0] * tau0
    spent = energy.sum(axis=1)
    factor = np.where(spent > harvest, harvest / np.where(spent > 0, spent, 1.0), 1.0)
    energy = energy * factor[:, None]
    energy[t <= 0] = 0.0
    assignment = tuple(int(j) for j in np.argmax(t, axis=1))
    plan = PhasePlan(v0=v0, ul_vectors=ul_vectors, assignment=assignment)
    return build_solution(scenario, plan, Allocation(tau0=tau0, t=t, e=energy), scheme=scheme)


def solve_general(
    scenario: Scenario,
    num_vectors: int,
    opts: Optional[ScaOptions] = None,
    warm_start: Optional[Solution] = None,
    exclude_dl_slot: bool = False,
    scheme: str = "general",
) -> Solution:
    """Dynamic beamforming with J UL vectors and free device association.

    ``warm_start`` is the static solution or a general solution with fewer
    vectors; the result is never worse than it. With ``exclude_dl_slot`` no
    device may transmit under v0, which turns J=1 into the UL-adaptive scheme.
    """
    opts = opts or ScaOptions()
    if num_vectors < 0:
        raise ValueError(f"number of UL vectors must be nonnegative, got {num_vectors}")
    if num_vectors == 0:
        return replace(warm_start or solve_static(scenario, opts), scheme=scheme)
    started = time.perf_counter()
    if warm_start is None:
        warm_start = solve_static(scenario, opts)

    channels = NormalizedChannels.from_scenario(scenario)
    ul_start, best = None, None
    for candidate in _initial_ul_vectors(scenario, channels, warm_start, num_vectors, exclude_dl_slot):
        plan = _best_slot_plan(scenario, warm_start.plan.v0, [PhaseVector(v) for v in candidate], exclude_dl_slot)
        sol = finish_solution(scenario, plan, scheme=scheme)
        if best is None or sol.throughput > best.throughput:
            ul_start, best = candidate, sol

    allowed = list(range(1 if exclude_dl_slot else 0, num_vectors + 1))
    engine = GeneralSca(channels, allowed, scenario.config.total_time, opts, scheme)
    vectors = np.stack([warm_start.plan.v0.full, *ul_start])
    run = engine.run(vectors)

    v0 = project_unit_modulus(run.vectors[0])
    ul_vectors = tuple(project_unit_modulus(v) for v in run.vectors[1:])
    if run.split is not None:
        split_sol = _split_solution(scenario, (v0, ul_vectors), run.split, scheme)
        rounded = round_association(split_sol, scenario, exclude_dl_slot=exclude_dl_slot)
    else:
        rounded = finish_solution(scenario, _best_slot_plan(scenario, v0, ul_vectors, exclude_dl_slot), scheme=scheme)
    if rounded.throughput > best.throughput:
        best = rounded
    best.trace, best.iterations, best.status = list(run.trace), run.iterations, run.status
    best.restarts_used = 1
    best.runtime_ms = _elapsed_ms(started)
    _write_trace(opts.trace_path, run.records)
    logger.info(f"{scheme}: R={best.throughput:.6f} with J={num_vectors}, {run.iterations} SCA iterations")
    return best


def solve_ul_adaptive(
    scenario: Scenario, opts: Optional[ScaOptions] = None, warm_start: Optional[Solution] = None
) -> Solution:
    """One common UL vector decoupled from the DL vector, solved directly"""
    return solve_general(scenario, 1, opts, warm_start=warm_start, exclude_dl_slot=True, scheme="ul_adaptive")


def ul_adaptive_from_static(static: Solution, scenario: Scenario) -> Solution:
    """Report the UL-adaptive scheme from the static optimum (v1 = v0, every device on slot 1)"""
    plan = PhasePlan(v0=static.plan.v0, ul_vectors=(static.plan.v0,), assignment=(1,) * scenario.num_devices)
    idle = np.zeros((scenario.num_devices, 1))
    alloc = Allocation(
        tau0=static.alloc.tau0,
        t=np.hstack([idle, static.alloc.t.sum(axis=1, keepdims=True)]),
        e=np.hstack([idle, static.alloc.e.sum(axis=1, keepdims=True)]),
    )
    return build_solution(
        scenario,
        plan,
        alloc,
        scheme="ul_adaptive",
        trace=list(static.trace),
        iterations=static.iterations,
        status=static.status,
        restarts_used=static.restarts_used,
        runtime_ms=static.runtime_ms,
    )


def baseline_random_phases(scenario: Scenario, trials: int = 100, seed: int = 0) -> Solution:
    """Best of ``trials`` uniformly random static vectors, each with optimal allocation"""
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    started = time.perf_counter()
    assignment = (0,) * scenario.num_devices
    best: Optional[Solution] = None
    for trial in range(trials):
        rng = stream(seed, _RANDOM_BASELINE_STREAM, scenario.config.seed, trial)
        phases = np.exp(2j * np.pi * rng.uniform(size=scenario.num_elements))
        plan = PhasePlan(v0=PhaseVector(np.append(phases, 1.0 + 0.0j)), assignment=assignment)
        sol = finish_solution(scenario, plan, scheme="random")
        if best is None or sol.throughput > best.throughput:
            best = sol
    best.restarts_used = trials
    best.runtime_ms = _elapsed_ms(started)
    return best


def baseline_no_irs(scenario: Scenario) -> Solution:
    """Direct links only, with optimal allocation"""
    started = time.perf_counter()
    plan = PhasePlan(v0=PhaseVector.ones(scenario.num_elements), assignment=(0,) * scenario.num_devices)
    sol = finish_solution(scenario.without_irs(), plan, scheme="no_irs")
    sol.runtime_ms = _elapsed_ms(started)
    return sol
