import logging
import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from ..models.beamforming import Allocation, PhasePlan, Solution
from ..models.system import Scenario
from .allocation import evaluate_throughput, finish_solution
from .convex_kernel import SubproblemBuilder, solve_subproblem
from .effective_channel import NormalizedChannels, align_phases, project_unit_modulus
from .errors import DegenerateLiftError
from .scenario import stream

logger = logging.getLogger(__name__)

MAX_LIFT_ELEMENTS = 32
EIGEN_FLOOR = 1e-12
DEFAULT_SAMPLES = 200
_RANDOMIZATION_STREAM = 4


@dataclass(frozen=True)
class LiftedMatrix:
    """W0 = tau0 * v v^H relaxed to any Hermitian PSD matrix with constant diagonal tau0"""

    W0: np.ndarray
    tau0: float

    def __post_init__(self):
        W0 = np.asarray(self.W0, dtype=complex)
        W0 = 0.5 * (W0 + W0.conj().T)
        object.__setattr__(self, "W0", W0)
        tol = 1e-9 * max(1.0, abs(self.tau0))
        if np.linalg.eigvalsh(W0).min() < -tol:
            raise ValueError("lifted matrix is not positive semidefinite")
        if np.max(np.abs(np.real(np.diag(W0)) - self.tau0)) > tol:
            raise ValueError("lifted matrix diagonal must equal tau0")

    @property
    def size(self) -> int:
        return self.W0.shape[0]

    def rank(self, rel_tol: float = 1e-6) -> int:
        eig = np.linalg.eigvalsh(self.W0)
        return int(np.sum(eig > rel_tol * max(eig.max(), 1e-300)))


def hermitian_basis(size: int) -> np.ndarray:
    """Real-parameter basis of Hermitian matrices: diagonal units, then Re/Im pairs above the diagonal"""
    basis = []
    for i in range(size):
        unit = np.zeros((size, size), dtype=complex)
        unit[i, i] = 1.0
        basis.append(unit)
    for i in range(size):
        for j in range(i + 1, size):
            sym = np.zeros((size, size), dtype=complex)
            sym[i, j] = sym[j, i] = 1.0
            skew = np.zeros((size, size), dtype=complex)
            skew[i, j], skew[j, i] = 1j, -1j
            basis.extend((sym, skew))
    return np.array(basis)


def solve_relaxed(scenario: Scenario, tol: float = 1e-8) -> Tuple[LiftedMatrix, Allocation, float]:
    """Rank-relaxed user-adaptive problem; returns the lift, its allocation and a certified upper bound.

    Each device uses its aligned UL vector, so only the DL lift W0 is free.
    The bound adds the barrier duality gap to the attained objective.
    """
    n = scenario.num_elements
    if n > MAX_LIFT_ELEMENTS:
        raise ValueError(f"upper bound is limited to N <= {MAX_LIFT_ELEMENTS}, got N={n}")
    started = time.perf_counter()
    cfg = scenario.config
    channels = NormalizedChannels.from_scenario(scenario)
    total = cfg.total_time
    size = n + 1
    basis = hermitian_basis(size)
    members = np.flatnonzero(channels.active)

    builder = SubproblemBuilder()
    tau0 = builder.add_real("tau0")[0]
    params = builder.add_real("W", basis.shape[0])
    taus = builder.add_real("tau", members.size)
    energies = builder.add_real("e", members.size)
    builder.add_positive(tau0)
    builder.set_psd_block(params, basis)
    builder.add_linear_le(builder.affine(-total).add(tau0, 1.0).add(taus, 1.0))
    for i in range(size):
        builder.add_linear_eq(builder.affine().add(params[i], 1.0).add(tau0, -1.0))
    for pos, k in enumerate(members):
        q = channels.q_hat[k]
        trace_coef = np.real(np.einsum("i,pij,j->p", q.conj(), basis, q))
        builder.add_perspective(taus[pos], energies[pos], channels.composite[k], channels.weights[k])
        builder.add_linear_le(builder.affine().add(energies[pos], 1.0).add(params, -trace_coef))
    problem = builder.build()

    z = np.zeros(problem.num_vars)
    z[tau0] = 0.5 * total
    z[params[:size]] = 0.5 * total
    if members.size:
        z[taus] = 0.45 * total / members.size
        z[energies] = 0.5 * z[tau0] * np.sum(np.abs(channels.q_hat[members]) ** 2, axis=1)
    z, report = solve_subproblem(problem, z, tol=tol)

    W0 = problem.psd_matrix(z)
    lifted = LiftedMatrix(W0=W0, tau0=float(z[tau0]))
    t = np.zeros((scenario.num_devices, scenario.num_devices + 1))
    e = np.zeros_like(t)
    energy_scale = cfg.efficiency_array * cfg.hap_power * channels.gamma
    t[members, members + 1] = z[taus]
    e[members, members + 1] = z[energies] * energy_scale[members]
    alloc = Allocation(tau0=lifted.tau0, t=t, e=e)
    upper = report.objective + report.gap
    logger.info(
        f"SDR bound {upper:.6f} (status {report.status}, rank {lifted.rank()}, "
        f"{report.iterations} Newton steps, {(time.perf_counter() - started) * 1000:.0f} ms)"
    )
    return lifted, alloc, upper


def _aligned_plan_vectors(scenario: Scenario):
    ul = tuple(align_phases(scenario.h_d[k], scenario.q[k])[0] for k in range(scenario.num_devices))
    assignment = tuple(range(1, scenario.num_devices + 1))
    return ul, assignment


def gaussian_randomize(
    lifted: LiftedMatrix, scenario: Scenario, samples: int = DEFAULT_SAMPLES, seed: int = 0
) -> Solution:
    """Recover a unit-modulus DL vector from the lift: principal eigenvector plus CN(0, W0/tau0) draws"""
    if samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")
    if not lifted.tau0 > 0:
        raise DegenerateLiftError("lifted matrix has zero charging time")
    started = time.perf_counter()
    covariance = lifted.W0 / lifted.tau0
    size = covariance.shape[0]
    _, vecs = np.linalg.eigh(covariance)
    chol = scipy.linalg.cholesky(covariance + EIGEN_FLOOR * np.eye(size), lower=True)
    rng = stream(seed, _RANDOMIZATION_STREAM, scenario.config.seed)
    draws = (rng.standard_normal((samples, size)) + 1j * rng.standard_normal((samples, size))) / np.sqrt(2.0)
    candidates = np.vstack([vecs[:, -1][None, :], draws @ chol.T])

    ul_vectors, assignment = _aligned_plan_vectors(scenario)
    best: Optional[Solution] = None
    for candidate in candidates:
        plan = PhasePlan(v0=project_unit_modulus(candidate), ul_vectors=ul_vectors, assignment=assignment)
        sol = finish_solution(scenario, plan, scheme="sdr_randomized")
        if best is None or sol.throughput > best.throughput:
            best = sol
    best.restarts_used = candidates.shape[0]
    best.runtime_ms = (time.perf_counter() - started) * 1000.0
    return best


def solve_upper_bound(scenario: Scenario, samples: int = DEFAULT_SAMPLES, seed: int = 0) -> Tuple[Solution, Solution]:
    """The relaxed bound packaged as a Solution, plus the best randomized feasible solution.

    The bound's plan is the randomized one; its allocation and per-device
    rates are those of the relaxed optimum.
    """
    started = time.perf_counter()
    lifted, alloc, upper = solve_relaxed(scenario)
    randomized = gaussian_randomize(lifted, scenario, samples=samples, seed=seed)
    _, per_device = evaluate_throughput(scenario, randomized.plan, alloc)
    bound = Solution(
        plan=randomized.plan,
        alloc=alloc,
        throughput=upper,
        scheme="upper_bound",
        device_throughputs=per_device,
        harvested_energy=alloc.e.sum(axis=1),
        runtime_ms=(time.perf_counter() - started) * 1000.0,
    )
    return bound, randomized
