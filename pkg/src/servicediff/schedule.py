"""Economic objects recovered from a solved choice schedule.

Given ``q*(theta)``, the indirect utility is ``V(theta) = int_0^theta
v(q*(s)) ds`` and the price charged for congestion ``q`` is
``p(q) = t v(q) - V(t)`` where ``t`` is the (smallest) type choosing ``q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, InconsistencyError
from .numerics import integrate, integrate_clustered, invert_increasing
from .solver import ABUNDANT, ChoiceSchedule

__all__ = [
    "PriceSchedule",
    "indirect_utility",
    "recover_prices",
    "profit",
    "profit_components",
    "user_surplus",
    "capacity_profile",
    "ic_violation",
]

PROFIT_TOL = 1e-6
_Q_SLACK = 1e-12


def indirect_utility(sched: ChoiceSchedule, theta) -> np.ndarray:
    """``V(theta)``: surplus of each type under the optimal menu."""
    theta = np.asarray(theta, dtype=float)
    scalar = theta.ndim == 0
    theta = np.atleast_1d(theta)
    out = np.zeros_like(theta)
    served = theta > sched.theta_hat
    if np.any(served):
        vf = sched.virtuals
        pts = np.unique(theta[served])
        kinks = [k for k in sched.kinks if sched.theta_hat < k < pts[-1]]
        edges = np.unique(np.concatenate([[sched.theta_hat], kinks, pts]))
        pieces = integrate_clustered(lambda t: vf.quality.v(sched.choice(t)), edges,
                                     vf.numerics.quad_tol)
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        out[served] = cum[np.searchsorted(edges, theta[served])]
    return out[0] if scalar else out


@dataclass(frozen=True)
class PriceSchedule:
    """Optimal tariff ``p(q)`` over the offered congestion interval.

    ``q_lo`` and ``q_hi`` bound the offered classes; the opt-out class
    ``q = 1`` at price zero is always available as well.
    """

    schedule: ChoiceSchedule
    q_lo: float
    q_hi: float

    @property
    def Q_star(self):
        return (self.q_lo, self.q_hi)

    def _check_domain(self, q):
        inside = (q >= self.q_lo - _Q_SLACK) & (q <= self.q_hi + _Q_SLACK)
        bad = ~(inside | (q >= 1.0 - _Q_SLACK))
        if np.any(bad):
            raise DomainError(f"congestion {q[bad][0]!r} is not offered; "
                              f"offered classes span [{self.q_lo}, {self.q_hi}] and 1")

    def type_of(self, q):
        """Smallest type whose optimal choice is ``q``."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        self._check_domain(q)
        sched = self.schedule
        return invert_increasing(lambda t: -sched.choice(t), -q, sched.theta_hat, 1.0,
                                 sched.virtuals.numerics.root_tol)

    def price(self, q):
        """Price of congestion level ``q``; zero for the opt-out class."""
        q = np.asarray(q, dtype=float)
        scalar = q.ndim == 0
        q = np.atleast_1d(q)
        self._check_domain(q)
        out = np.zeros_like(q)
        paid = q < 1.0 - _Q_SLACK
        if np.any(paid):
            t = self.type_of(q[paid])
            v = self.schedule.virtuals.quality.v
            out[paid] = t * v(q[paid]) - indirect_utility(self.schedule, t)
        return out[0] if scalar else out

    __call__ = price

    def utility(self, theta):
        return indirect_utility(self.schedule, theta)

    def table(self, n: int | None = None):
        """Sampled ``(theta, q*, p(q*), V)`` on ``n`` evenly spaced types."""
        n = n or self.schedule.virtuals.numerics.grid
        theta = np.linspace(0.0, 1.0, n)
        q = self.schedule.choice(theta)
        V = indirect_utility(self.schedule, theta)
        v = self.schedule.virtuals.quality.v
        p = np.where(q >= 1.0, 0.0, theta * v(q) - V)
        return theta, q, p, V

    def curve(self, n: int | None = None):
        """Sampled ``(q, p(q))`` over the offered interval."""
        n = n or self.schedule.virtuals.numerics.grid
        if self.q_lo == self.q_hi:
            q = np.array([self.q_lo])
        else:
            q = np.linspace(self.q_lo, self.q_hi, n)
        return q, self.price(q)


def recover_prices(sched: ChoiceSchedule) -> PriceSchedule:
    """Tariff implementing ``sched`` with zero surplus for the lowest type."""
    q_lo = float(sched.choice(np.array([1.0]))[0])
    if sched.regime == ABUNDANT:
        return PriceSchedule(sched, 0.0, 0.0)
    q_hi = float(sched.choice(np.array([sched.theta_hat]))[0])
    return PriceSchedule(sched, q_lo, q_hi)


def profit_components(sched: ChoiceSchedule):
    """Gross revenue computed directly and through virtual surplus.

    Returns ``(direct, virtual)`` where ``direct = int (t v(q*) - V) f``
    and ``virtual = int G v(q*) f``.
    """
    vf = sched.virtuals
    lo, tol = sched.theta_hat, vf.numerics.quad_tol
    if lo >= 1.0:
        return 0.0, 0.0
    v, pdf, cdf = vf.quality.v, vf.dist.pdf, vf.dist.cdf

    def direct(t):
        return (t * v(sched.choice(t)) - indirect_utility(sched, t)) * pdf(t)

    def virtual(t):
        # G(t) f(t) = t f(t) - (1 - F(t))
        return v(sched.choice(t)) * (t * pdf(t) - (1.0 - cdf(t)))

    return (integrate(direct, lo, 1.0, tol, sched.kinks),
            integrate(virtual, lo, 1.0, tol, sched.kinks))


def profit(sched: ChoiceSchedule, prices: PriceSchedule | None = None) -> float:
    """Optimal profit, net of the capacity cost for variable capacity.

    Both revenue formulas are evaluated and must agree within 1e-6.
    """
    direct, virtual = profit_components(sched)
    if abs(direct - virtual) > PROFIT_TOL:
        raise InconsistencyError(
            f"revenue formulas disagree: {direct:.12g} vs {virtual:.12g}")
    return direct - sched.capacity_cost


def user_surplus(sched: ChoiceSchedule, prices: PriceSchedule | None = None,
                 n: int | None = None):
    """Total surplus ``int_0^1 V`` and ``V`` sampled on ``n`` types."""
    vf = sched.virtuals
    n = n or vf.numerics.grid
    theta = np.linspace(0.0, 1.0, n)
    curve = indirect_utility(sched, theta)
    if sched.theta_hat >= 1.0:
        return 0.0, theta, curve
    total = integrate(lambda t: indirect_utility(sched, t), sched.theta_hat, 1.0,
                      vf.numerics.quad_tol, sched.kinks)
    return total, theta, curve


def capacity_profile(sched: ChoiceSchedule, n: int | None = None):
    """Cumulative consumption ``W(theta)`` on ``n`` types, and ``W(1)``."""
    vf = sched.virtuals
    n = n or vf.numerics.grid
    theta = np.linspace(0.0, 1.0, n)
    W = np.zeros(n)
    served = theta > sched.theta_hat
    if np.any(served):
        edges = np.unique(np.concatenate(
            [[sched.theta_hat], [k for k in sched.kinks if k > sched.theta_hat],
             theta[served]]))
        pieces = integrate_clustered(
            lambda t: vf.quality.w(sched.choice(t)) * vf.dist.pdf(t), edges,
            vf.numerics.quad_tol)
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        W[served] = cum[np.searchsorted(edges, theta[served])]
    return theta, W, float(W[-1])


def ic_violation(prices: PriceSchedule, n_types: int = 128, n_classes: int = 256) -> float:
    """Largest utility gain any sampled type gets from a non-assigned class.

    Types are sampled uniformly on ``[0, 1]`` and classes uniformly on the
    offered interval plus the opt-out class. A nonpositive result means
    the tariff is incentive compatible on the sample.
    """
    sched = prices.schedule
    v = sched.virtuals.quality.v
    theta = np.linspace(0.0, 1.0, n_types)
    if prices.q_lo == prices.q_hi:
        qs = np.array([prices.q_lo, 1.0])
    else:
        qs = np.append(np.linspace(prices.q_lo, prices.q_hi, n_classes), 1.0)
    p = prices.price(qs)
    assigned = sched.choice(theta)
    own = theta * v(assigned) - prices.price(assigned)
    best = np.max(theta[:, None] * v(qs)[None, :] - p[None, :], axis=1)
    return float(np.max(best - own))
