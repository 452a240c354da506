import logging
from dataclasses import dataclass

import numpy as np

from .convex_kernel import AffineForm, ComplexBlock, SubproblemBuilder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhaseSurrogate:
    """Concave minorant Re{b^H v} - coef * tau^(-power) + const of a channel-dependent target.

    ``b`` has the augmented length N+1; the last entry multiplies the fixed
    direct-path slot [v]_{N+1} = 1.
    """

    b: np.ndarray
    coef: float
    power: float
    const: float

    def __call__(self, v_bar: np.ndarray, tau: float) -> float:
        return float(np.real(np.vdot(self.b, v_bar)) - self.coef * tau ** (-self.power) + self.const)

    def constrain(self, builder: SubproblemBuilder, tau: int, v: ComplexBlock, lhs: AffineForm) -> None:
        """Add lhs(z) <= surrogate(v, tau) to a subproblem over the bare block v"""
        rhs = builder.affine(self.const + float(np.real(self.b[-1])))
        rhs.add_inner(v, self.b[:-1])
        rhs.coef -= lhs.coef
        rhs.const -= lhs.const
        builder.add_ratio_le(tau, self.coef, self.power, rhs)


def _check_expansion_time(t0: float) -> None:
    if not t0 > 0:
        raise ValueError(f"expansion time must be positive, got {t0}")


def surrogate_quartic(q_bar: np.ndarray, w0: np.ndarray, t0: float) -> PhaseSurrogate:
    """Minorant of tau |q^H v|^4, tight at (w0, t0)"""
    _check_expansion_time(t0)
    z0 = np.vdot(q_bar, w0)
    g0 = float(np.abs(z0) ** 2)
    return PhaseSurrogate(
        b=4.0 * t0 * g0 * z0 * np.asarray(q_bar, dtype=complex),
        coef=2.0 * g0**2 * t0**1.5,
        power=0.5,
        const=-(g0**2) * t0,
    )


def surrogate_dl_energy(q_bar: np.ndarray, w0: np.ndarray, t0: float) -> PhaseSurrogate:
    """Minorant of tau |q^H v|^2, tight at (w0, t0)"""
    _check_expansion_time(t0)
    z0 = np.vdot(q_bar, w0)
    g0 = float(np.abs(z0) ** 2)
    return PhaseSurrogate(b=2.0 * t0 * z0 * np.asarray(q_bar, dtype=complex), coef=t0**2 * g0, power=1.0, const=0.0)


@dataclass(frozen=True)
class ExpProductSurrogate:
    """First-order minorant of exp(x + y) at (x_hat, y_hat)"""

    x_hat: float
    y_hat: float

    @property
    def slope(self) -> float:
        return float(np.exp(self.x_hat + self.y_hat))

    @property
    def intercept(self) -> float:
        return self.slope * (1.0 - self.x_hat - self.y_hat)

    def __call__(self, x: float, y: float) -> float:
        return self.slope * (x + y) + self.intercept


def surrogate_exp_product(x_hat: float, y_hat: float) -> ExpProductSurrogate:
    return ExpProductSurrogate(float(x_hat), float(y_hat))


def linearized_gain(q_bar: np.ndarray, w: np.ndarray):
    """Minorant 2 Re{w^H Q v} - w^H Q w of |q^H v|^2 as (b, const) with value Re{b^H v} + const"""
    z0 = np.vdot(q_bar, w)
    return 2.0 * z0 * np.asarray(q_bar, dtype=complex), -float(np.abs(z0) ** 2)
