"""Dense log-barrier interior point solver for the per-iteration SCA programs.

Problems are maximizations over a real vector z (complex unknowns are stored as
real/imaginary pairs):

    maximize    sum_i w_i t_i log2(1 + a_i s_i / t_i) + c^T z
    subject to  G z <= h,  A z = b
                exp(z_i) <= a_i^T z + b_i
                re_n^2 + im_n^2 <= 1
                beta_i z_tau^(-p_i) <= a_i^T z + b_i
                sum_p z_p B_p  positive definite   (optional)

Every perspective pair and every ratio denominator is kept strictly positive
by its own log barrier.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.linalg

from .errors import InfeasibleStartError

logger = logging.getLogger(__name__)

LN2 = float(np.log(2.0))
BARRIER_GROWTH = 10.0
ARMIJO_SLOPE = 0.25
BACKTRACK = 0.5
PURE_NEWTON_DECREMENT = 0.05
MIN_STEP = 1e-14


@dataclass(frozen=True)
class ComplexBlock:
    re: np.ndarray
    im: np.ndarray

    def value(self, z: np.ndarray) -> np.ndarray:
        return z[self.re] + 1j * z[self.im]

    def assign(self, z: np.ndarray, values: np.ndarray) -> None:
        z[self.re] = np.real(values)
        z[self.im] = np.imag(values)


@dataclass
class AffineForm:
    """a^T z + const, built incrementally"""

    coef: np.ndarray
    const: float = 0.0

    def add(self, idx, value) -> "AffineForm":
        np.add.at(self.coef, np.atleast_1d(idx), value)
        return self

    def add_inner(self, block: ComplexBlock, b: np.ndarray, scale: float = 1.0) -> "AffineForm":
        """Add scale * Re{b^H x} for the complex block x"""
        b = np.asarray(b, dtype=complex)
        np.add.at(self.coef, block.re, scale * b.real)
        np.add.at(self.coef, block.im, scale * b.imag)
        return self

    def shift(self, value: float) -> "AffineForm":
        self.const += float(value)
        return self

    def __call__(self, z: np.ndarray) -> float:
        return float(self.coef @ z[: self.coef.shape[0]] + self.const)


@dataclass(frozen=True)
class SolverReport:
    status: str  # optimal | max-iters | numerical-failure
    objective: float
    iterations: int
    gap: float


def _stack(forms: List[AffineForm], n: int) -> Tuple[np.ndarray, np.ndarray]:
    matrix = np.zeros((len(forms), n))
    for row, form in enumerate(forms):
        matrix[row, : form.coef.shape[0]] = form.coef
    return matrix, np.array([form.const for form in forms], dtype=float)


@dataclass
class ConvexSubproblem:
    num_vars: int
    variables: Dict[str, Union[np.ndarray, ComplexBlock]]
    persp_t: np.ndarray
    persp_s: np.ndarray
    persp_scale: np.ndarray
    persp_weight: np.ndarray
    c: np.ndarray
    obj_const: float
    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray
    exp_idx: np.ndarray
    exp_A: np.ndarray
    exp_b: np.ndarray
    disk_re: np.ndarray
    disk_im: np.ndarray
    ratio_idx: np.ndarray
    ratio_beta: np.ndarray
    ratio_power: np.ndarray
    ratio_A: np.ndarray
    ratio_b: np.ndarray
    positive: np.ndarray
    psd_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    psd_basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, 0), dtype=complex))

    @property
    def psd_size(self) -> int:
        return self.psd_basis.shape[1] if self.psd_idx.size else 0

    @property
    def barrier_parameter(self) -> float:
        """Number of log terms in the barrier; bounds the duality gap as nu / t"""
        return float(
            self.h.size + self.exp_idx.size + self.disk_re.size + self.ratio_idx.size + self.positive.size + self.psd_size
        )

    def objective(self, z: np.ndarray) -> float:
        t, s = z[self.persp_t], z[self.persp_s]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(t > 0, t * np.log1p(self.persp_scale * s / np.where(t > 0, t, 1.0)), 0.0)
        return float(np.sum(self.persp_weight * terms) / LN2 + self.c @ z + self.obj_const)

    def psd_matrix(self, z: np.ndarray) -> np.ndarray:
        return np.tensordot(z[self.psd_idx], self.psd_basis, axes=1)

    def slacks(self, z: np.ndarray) -> np.ndarray:
        """All scalar inequality slacks; strictly positive inside the domain"""
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            tau = z[self.ratio_idx]
            parts = [
                self.h - self.G @ z,
                self.exp_A @ z + self.exp_b - np.exp(z[self.exp_idx]),
                1.0 - z[self.disk_re] ** 2 - z[self.disk_im] ** 2,
                self.ratio_A @ z + self.ratio_b - self.ratio_beta * tau ** (-self.ratio_power),
                z[self.positive],
            ]
        return np.concatenate(parts)

    def max_violation(self, z: np.ndarray) -> float:
        """Largest constraint violation, 0 for interior points"""
        worst = float(max(0.0, -np.min(self.slacks(z), initial=np.inf)))
        if self.b.size:
            worst = max(worst, float(np.max(np.abs(self.A @ z - self.b))))
        if self.psd_idx.size:
            worst = max(worst, float(max(0.0, -np.linalg.eigvalsh(self.psd_matrix(z)).min())))
        return worst

    def is_strictly_feasible(self, z: np.ndarray, eq_tol: float = 1e-9) -> bool:
        if not np.all(np.isfinite(z)):
            return False
        slack = self.slacks(z)
        if not (np.all(np.isfinite(slack)) and np.all(slack > 0)):
            return False
        if self.b.size and np.max(np.abs(self.A @ z - self.b)) > eq_tol * max(1.0, np.abs(self.b).max()):
            return False
        return self._psd_logdet(z) is not None

    def _psd_logdet(self, z: np.ndarray) -> Optional[float]:
        if not self.psd_idx.size:
            return 0.0
        try:
            chol = scipy.linalg.cholesky(self.psd_matrix(z), lower=True)
        except (scipy.linalg.LinAlgError, ValueError):
            return None
        return float(2.0 * np.sum(np.log(np.real(np.diag(chol)))))

    def dump(self, path: Union[str, Path]) -> None:
        """Write the problem data as JSON for offline inspection"""
        def encode(value):
            if isinstance(value, ComplexBlock):
                return {"re": value.re.tolist(), "im": value.im.tolist()}
            if isinstance(value, np.ndarray):
                if np.iscomplexobj(value):
                    return {"real": value.real.tolist(), "imag": value.imag.tolist()}
                return value.tolist()
            return value

        payload = {name: encode(getattr(self, name)) for name in self.__dataclass_fields__ if name != "variables"}
        payload["variables"] = {name: encode(block) for name, block in self.variables.items()}
        Path(path).write_text(json.dumps(payload))
        logger.info(f"Dumped subproblem with {self.num_vars} variables to {path}")


class SubproblemBuilder:
    """Declare variables first, then objective terms and constraints"""

    def __init__(self):
        self.num_vars = 0
        self.variables: Dict[str, Union[np.ndarray, ComplexBlock]] = {}
        self._persp: List[Tuple[int, int, float, float]] = []
        self._linear_obj: Dict[int, float] = {}
        self._obj_const = 0.0
        self._le: List[AffineForm] = []
        self._eq: List[AffineForm] = []
        self._exp: List[Tuple[int, AffineForm]] = []
        self._disks: List[Tuple[int, int]] = []
        self._ratio: List[Tuple[int, float, float, AffineForm]] = []
        self._positive: set = set()
        self._psd_idx = np.zeros(0, dtype=int)
        self._psd_basis = np.zeros((0, 0, 0), dtype=complex)

    def add_real(self, name: str, size: int = 1) -> np.ndarray:
        idx = np.arange(self.num_vars, self.num_vars + size)
        self.num_vars += size
        self.variables[name] = idx
        return idx

    def add_complex(self, name: str, size: int) -> ComplexBlock:
        start = self.num_vars
        block = ComplexBlock(re=np.arange(start, start + size), im=np.arange(start + size, start + 2 * size))
        self.num_vars += 2 * size
        self.variables[name] = block
        return block

    def affine(self, const: float = 0.0) -> AffineForm:
        return AffineForm(coef=np.zeros(self.num_vars), const=float(const))

    def add_perspective(self, t: int, s: int, scale: float, weight: float = 1.0) -> None:
        """weight * t log2(1 + scale s / t), concave in (t, s)"""
        self._persp.append((int(t), int(s), float(scale), float(weight)))
        self._positive.update((int(t), int(s)))

    def add_linear_objective(self, idx, coef) -> None:
        for i, value in zip(np.atleast_1d(idx), np.broadcast_to(coef, np.atleast_1d(idx).shape)):
            self._linear_obj[int(i)] = self._linear_obj.get(int(i), 0.0) + float(value)

    def add_objective_constant(self, value: float) -> None:
        self._obj_const += float(value)

    def add_linear_le(self, form: AffineForm) -> None:
        """form(z) <= 0"""
        self._le.append(form)

    def add_linear_eq(self, form: AffineForm) -> None:
        """form(z) == 0"""
        self._eq.append(form)

    def add_exp_le(self, idx: int, rhs: AffineForm) -> None:
        """exp(z_idx) <= rhs(z)"""
        self._exp.append((int(idx), rhs))

    def add_unit_disk(self, block: ComplexBlock) -> None:
        self._disks.extend(zip(block.re.tolist(), block.im.tolist()))

    def add_ratio_le(self, tau: int, beta: float, power: float, rhs: AffineForm) -> None:
        """beta * z_tau^(-power) <= rhs(z)"""
        self._ratio.append((int(tau), float(beta), float(power), rhs))
        self._positive.add(int(tau))

    def add_positive(self, idx) -> None:
        self._positive.update(int(i) for i in np.atleast_1d(idx))

    def set_psd_block(self, idx: np.ndarray, basis: np.ndarray) -> None:
        """Require sum_p z[idx_p] basis_p to be positive definite"""
        self._psd_idx = np.asarray(idx, dtype=int)
        self._psd_basis = np.asarray(basis, dtype=complex)

    def build(self) -> ConvexSubproblem:
        n = self.num_vars
        c = np.zeros(n)
        for i, value in self._linear_obj.items():
            c[i] = value
        persp = np.array(self._persp, dtype=float).reshape(-1, 4)
        G, neg_h = _stack(self._le, n)
        A, neg_b = _stack(self._eq, n)
        exp_A, exp_b = _stack([form for _, form in self._exp], n)
        ratio_A, ratio_b = _stack([form for *_, form in self._ratio], n)
        disks = np.array(self._disks, dtype=int).reshape(-1, 2)
        return ConvexSubproblem(
            num_vars=n,
            variables=dict(self.variables),
            persp_t=persp[:, 0].astype(int),
            persp_s=persp[:, 1].astype(int),
            persp_scale=persp[:, 2],
            persp_weight=persp[:, 3],
            c=c,
            obj_const=self._obj_const,
            G=G,
            h=-neg_h,
            A=A,
            b=-neg_b,
            exp_idx=np.array([i for i, _ in self._exp], dtype=int),
            exp_A=exp_A,
            exp_b=exp_b,
            disk_re=disks[:, 0],
            disk_im=disks[:, 1],
            ratio_idx=np.array([r[0] for r in self._ratio], dtype=int),
            ratio_beta=np.array([r[1] for r in self._ratio], dtype=float),
            ratio_power=np.array([r[2] for r in self._ratio], dtype=float),
            ratio_A=ratio_A,
            ratio_b=ratio_b,
            positive=np.array(sorted(self._positive), dtype=int),
            psd_idx=self._psd_idx,
            psd_basis=self._psd_basis,
        )


def _barrier_value(p: ConvexSubproblem, z: np.ndarray, tb: float) -> float:
    """phi(z) = -tb * objective(z) - sum log(slacks) - log det(psd block); inf outside the domain"""
    if not np.all(np.isfinite(z)):
        return np.inf
    slack = p.slacks(z)
    if not (np.all(np.isfinite(slack)) and np.all(slack > 0)):
        return np.inf
    logdet = p._psd_logdet(z)
    if logdet is None:
        return np.inf
    return -tb * p.objective(z) - float(np.sum(np.log(slack))) - logdet


def _barrier_derivatives(p: ConvexSubproblem, z: np.ndarray, tb: float) -> Tuple[np.ndarray, np.ndarray]:
    n = p.num_vars
    grad = -tb * p.c.copy()
    hess = np.zeros((n, n))

    if p.persp_t.size:
        t, s = z[p.persp_t], z[p.persp_s]
        a, w = p.persp_scale, tb * p.persp_weight / LN2
        r = t + a * s
        np.add.at(grad, p.persp_t, -w * (np.log1p(a * s / t) - a * s / r))
        np.add.at(grad, p.persp_s, -w * a * t / r)
        k = w * a**2 / (t * r**2)
        np.add.at(hess, (p.persp_t, p.persp_t), k * s**2)
        np.add.at(hess, (p.persp_s, p.persp_s), k * t**2)
        np.add.at(hess, (p.persp_t, p.persp_s), -k * s * t)
        np.add.at(hess, (p.persp_s, p.persp_t), -k * s * t)

    if p.h.size:
        inv = 1.0 / (p.h - p.G @ z)
        grad += p.G.T @ inv
        hess += (p.G.T * inv**2) @ p.G

    if p.exp_idx.size:
        ez = np.exp(z[p.exp_idx])
        rows = np.arange(p.exp_idx.size)
        jac = p.exp_A.copy()
        jac[rows, p.exp_idx] -= ez
        slack = p.exp_A @ z + p.exp_b - ez
        grad -= jac.T @ (1.0 / slack)
        hess += (jac.T / slack**2) @ jac
        np.add.at(hess, (p.exp_idx, p.exp_idx), ez / slack)

    if p.disk_re.size:
        x, y = z[p.disk_re], z[p.disk_im]
        slack = 1.0 - x**2 - y**2
        np.add.at(grad, p.disk_re, 2.0 * x / slack)
        np.add.at(grad, p.disk_im, 2.0 * y / slack)
        outer = 4.0 / slack**2
        np.add.at(hess, (p.disk_re, p.disk_re), outer * x * x + 2.0 / slack)
        np.add.at(hess, (p.disk_im, p.disk_im), outer * y * y + 2.0 / slack)
        np.add.at(hess, (p.disk_re, p.disk_im), outer * x * y)
        np.add.at(hess, (p.disk_im, p.disk_re), outer * x * y)

    if p.ratio_idx.size:
        tau = z[p.ratio_idx]
        beta, power = p.ratio_beta, p.ratio_power
        rows = np.arange(p.ratio_idx.size)
        jac = p.ratio_A.copy()
        jac[rows, p.ratio_idx] += beta * power * tau ** (-power - 1.0)
        slack = p.ratio_A @ z + p.ratio_b - beta * tau ** (-power)
        grad -= jac.T @ (1.0 / slack)
        hess += (jac.T / slack**2) @ jac
        np.add.at(hess, (p.ratio_idx, p.ratio_idx), beta * power * (power + 1.0) * tau ** (-power - 2.0) / slack)

    if p.positive.size:
        zp = z[p.positive]
        np.add.at(grad, p.positive, -1.0 / zp)
        np.add.at(hess, (p.positive, p.positive), 1.0 / zp**2)

    if p.psd_idx.size:
        m = p.psd_size
        inv = np.linalg.inv(p.psd_matrix(z))
        mb = inv[None, :, :] @ p.psd_basis
        flat = mb.reshape(mb.shape[0], m * m)
        flat_t = mb.transpose(0, 2, 1).reshape(mb.shape[0], m * m)
        np.add.at(grad, p.psd_idx, -np.real(np.einsum("pii->p", mb)))
        hess[np.ix_(p.psd_idx, p.psd_idx)] += np.real(flat @ flat_t.T)

    return grad, hess


def _newton_direction(hess: np.ndarray, grad: np.ndarray, A: np.ndarray) -> np.ndarray:
    n = grad.shape[0]
    if A.shape[0] == 0:
        scale = max(1.0, float(np.abs(np.diag(hess)).max(initial=0.0)))
        reg = 0.0
        for _ in range(8):
            try:
                factor = scipy.linalg.cho_factor(hess + reg * np.eye(n))
                return -scipy.linalg.cho_solve(factor, grad)
            except scipy.linalg.LinAlgError:
                reg = 1e-12 * scale if reg == 0.0 else reg * 100.0
        raise scipy.linalg.LinAlgError("barrier Hessian is not positive definite")
    m = A.shape[0]
    kkt = np.block([[hess, A.T], [A, np.zeros((m, m))]])
    rhs = np.concatenate([-grad, np.zeros(m)])
    return scipy.linalg.solve(kkt, rhs, assume_a="sym")[:n]


def _center(p: ConvexSubproblem, z: np.ndarray, tb: float, budget: int) -> Tuple[np.ndarray, int, str]:
    """Damped Newton minimization of the barrier function at parameter tb"""
    phi = _barrier_value(p, z, tb)
    for step in range(budget):
        grad, hess = _barrier_derivatives(p, z, tb)
        try:
            dz = _newton_direction(hess, grad, p.A)
        except (scipy.linalg.LinAlgError, ValueError):
            return z, step, "numerical-failure"
        slope = float(grad @ dz)
        decrement = -slope
        if decrement / 2.0 <= max(1e-10, 1e-13 * abs(phi)):
            return z, step, "optimal"
        if decrement < 0:
            return z, step, "numerical-failure"

        alpha = 1.0
        trial = _barrier_value(p, z + dz, tb)
        while alpha > MIN_STEP and not np.isfinite(trial):
            alpha *= BACKTRACK
            trial = _barrier_value(p, z + alpha * dz, tb)
        if decrement >= PURE_NEWTON_DECREMENT:
            while alpha > MIN_STEP and trial > phi + ARMIJO_SLOPE * alpha * slope:
                alpha *= BACKTRACK
                trial = _barrier_value(p, z + alpha * dz, tb)
        if alpha <= MIN_STEP or not np.isfinite(trial):
            return z, step, "optimal" if decrement < 1e-6 else "numerical-failure"
        z = z + alpha * dz
        phi = trial
    return z, budget, "max-iters"


def solve_subproblem(
    problem: ConvexSubproblem, start: np.ndarray, tol: float = 1e-8, max_newton: int = 2000
) -> Tuple[np.ndarray, SolverReport]:
    """Maximize the subproblem from a strictly feasible start.

    Returns the better of the start and the barrier path end point, so the
    objective never decreases.
    """
    z = np.asarray(start, dtype=float).copy()
    if z.shape != (problem.num_vars,) or not problem.is_strictly_feasible(z):
        raise InfeasibleStartError("subproblem start is not strictly feasible")

    start_objective = problem.objective(z)
    nu = problem.barrier_parameter
    tb = float(np.clip(nu / max(abs(start_objective), 1.0), 1e-6, 1e6)) if nu > 0 else 1.0
    iterations = 0
    status = "optimal"
    while True:
        z, steps, stage = _center(problem, z, tb, max_newton - iterations)
        iterations += steps
        if stage != "optimal":
            status = stage
            break
        if nu == 0 or nu / tb <= tol:
            break
        tb *= BARRIER_GROWTH

    gap = nu / tb
    objective = problem.objective(z)
    if objective < start_objective:
        z, objective = np.asarray(start, dtype=float).copy(), start_objective
    if status != "optimal":
        logger.warning(f"Subproblem stopped with status {status} after {iterations} Newton steps, gap {gap:.3e}")
    return z, SolverReport(status=status, objective=objective, iterations=iterations, gap=gap)
