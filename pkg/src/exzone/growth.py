"""Bistable (strong Allee) prey growth.

The kinetics are the cubic ``f(s) = r s (s/theta - 1)(1 - s)`` with roots
0 < theta < 1 and potential ``F(s) = int_0^s f``.  Several routines further
downstream work with densities extremely close to 1 (the boundary value of a
long monotone profile can sit 1e-27 below 1), so the class also exposes the
kinetics written in terms of the deficit ``s = 1 - u``; those forms are free
of cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, HypothesisError

__all__ = ["GrowthFn", "make_growth"]


@dataclass(frozen=True)
class GrowthFn:
    r: float
    theta: float
    theta_prime: float = field(init=False, compare=False)

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise DomainError(f"growth amplitude r must be positive, got {self.r!r}")
        if not (0.0 < self.theta < 1.0):
            raise DomainError(f"theta must lie in (0, 1), got {self.theta!r}")
        if self.theta >= 0.5:
            # int_0^1 f = r (1 - 2 theta) / (12 theta)
            raise HypothesisError(
                f"theta={self.theta} >= 1/2 gives int_0^1 f <= 0 (no positive total growth)"
            )
        object.__setattr__(self, "theta_prime", _theta_prime(self.r, self.theta))

    @property
    def k(self) -> float:
        """Leading coefficient r/theta of the cubic."""
        return self.r / self.theta

    def f(self, s):
        return self.k * s * (s - self.theta) * (1.0 - s)

    def f_prime(self, s):
        th = self.theta
        # d/ds [-s^3 + (1+th) s^2 - th s]
        return self.k * (-3.0 * s * s + 2.0 * (1.0 + th) * s - th)

    def F(self, s):
        th = self.theta
        return self.k * s * s * (-s * s / 4.0 + (1.0 + th) * s / 3.0 - th / 2.0)

    @property
    def F1(self) -> float:
        return self.k * (1.0 - 2.0 * self.theta) / 12.0

    @property
    def nu(self) -> float:
        """-f'(1) > 0."""
        return self.k * (1.0 - self.theta)

    def f_deficit(self, s):
        """f(1 - s) evaluated without forming 1 - s."""
        return self.k * s * (1.0 - s) * (1.0 - self.theta - s)

    def F_deficit(self, s):
        """F(1) - F(1 - s) = int_0^s f(1 - sigma) d sigma."""
        th = self.theta
        return self.k * s * s * ((1.0 - th) / 2.0 - (2.0 - th) * s / 3.0 + s * s / 4.0)

    def gap_quotient(self, eps, s):
        """(F(1-eps) - F(1-s)) / (s - eps), factored so that s -> eps is exact."""
        th = self.theta
        return self.k * (
            (1.0 - th) * (s + eps) / 2.0
            - (2.0 - th) * (s * s + s * eps + eps * eps) / 3.0
            + (s + eps) * (s * s + eps * eps) / 4.0
        )

    def __call__(self, s):
        return self.f(s)


def make_growth(r: float, theta: float) -> GrowthFn:
    return GrowthFn(float(r), float(theta))


def _theta_prime(r: float, theta: float) -> float:
    # F(s) = (r/theta) s^2 (-3 s^2 + 4(1+theta) s - 6 theta) / 12; smaller root of the quadratic.
    b = 4.0 * (1.0 + theta)
    c = 6.0 * theta
    disc = math.sqrt(b * b - 12.0 * c)
    s = 2.0 * c / (b + disc)
    g = GrowthFnView(r, theta)
    # one Newton step on F for conditioning
    fs = g.f(s)
    if fs != 0.0:
        s -= g.F(s) / fs
    return s


@dataclass(frozen=True)
class GrowthFnView:
    """Bare cubic evaluator used while a GrowthFn is still being built."""

    r: float
    theta: float

    def f(self, s):
        return self.r / self.theta * s * (s - self.theta) * (1.0 - s)

    def F(self, s):
        th = self.theta
        return self.r / self.theta * s * s * (-s * s / 4.0 + (1.0 + th) * s / 3.0 - th / 2.0)


def sup_f_over_s(g: GrowthFn) -> float:
    """max over (0, 1] of f(s)/s, attained at s = (1 + theta)/2."""
    s = 0.5 * (1.0 + g.theta)
    return float(g.f(s) / s)


def max_neg_f_prime(g: GrowthFn) -> float:
    """max over [0, 1] of -f'(s)."""
    return float(np.max(-g.f_prime(np.array([0.0, 1.0]))))
