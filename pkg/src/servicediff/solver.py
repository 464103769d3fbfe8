"""Optimal user-choice schedules for fixed and variable capacity.

For a shadow price ``mu > 0`` the optimal congestion of a type ``theta``
balances its virtual valuation against the cost of capacity:
``G(theta) = mu * h(q)``, so ``q*(theta) = h_inv(G(theta) / mu)`` for
served types and ``q* = 1`` (the opt-out class) below the marginal type
``theta_hat = G_inv(mu * h(1))``. Types above ``theta_bar =
G_inv(mu * h(0))`` are pooled in the uncongested class ``q = 0``.

The fixed-capacity solver searches ``mu`` so the schedule consumes
exactly the available capacity; the variable-capacity solver finds the
consumption level whose marginal cost reproduces itself.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .exceptions import (
    AssumptionViolation,
    InvalidParameterError,
    NoSolutionError,
    NumericalFailure,
)
from .numerics import integrate
from .primitives import INFINITY, VirtualFunctions

__all__ = [
    "INTERIOR",
    "ABUNDANT",
    "CapacityCost",
    "expansion_cost",
    "linear_cost",
    "free_cost",
    "ChoiceSchedule",
    "schedule_at_price",
    "consumption",
    "abundance_threshold",
    "solve_fixed",
    "solve_variable",
    "bunching_threshold",
    "shadow_price_curve",
]

INTERIOR = "interior"
ABUNDANT = "single-class-abundant"

MU_LO = 1e-12
VARIABLE_CAP = 1e6


@dataclass(frozen=True)
class CapacityCost:
    """Convex, nondecreasing cost of consuming capacity, with ``S(0) = 0``."""

    S: Callable[[float], float]
    dS: Callable[[float], float]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def check(self, upper: float, points: int = 256, tol: float = 1e-12) -> None:
        """Spot-check ``S(0) = 0``, monotonicity and midpoint convexity."""
        if abs(self.S(0.0)) > tol:
            raise AssumptionViolation("capacity cost", "S(0) must be zero")
        c = np.linspace(0.0, upper, points)
        s = np.array([self.S(x) for x in c])
        scale = tol * max(1.0, float(np.max(np.abs(s))))
        if np.any(np.diff(s) < -scale):
            raise AssumptionViolation("capacity cost", "S must be nondecreasing")
        mid = np.array([self.S(x) for x in 0.5 * (c[1:] + c[:-1])])
        if np.any(mid > 0.5 * (s[1:] + s[:-1]) + scale):
            raise AssumptionViolation("capacity cost", "S must be convex")


def expansion_cost(t: float, base: float = 0.1) -> CapacityCost:
    """Free up to ``base``, then ``t * (c - base)**2`` for the excess."""
    if not t >= 0:
        raise InvalidParameterError("t must be nonnegative")
    if not base >= 0:
        raise InvalidParameterError("base capacity must be nonnegative")
    return CapacityCost(
        S=lambda c: t * max(c - base, 0.0) ** 2,
        dS=lambda c: 2.0 * t * max(c - base, 0.0),
        name="expansion",
        params={"t": t, "base": base},
    )


def linear_cost(price: float) -> CapacityCost:
    if not price >= 0:
        raise InvalidParameterError("capacity price must be nonnegative")
    return CapacityCost(S=lambda c: price * c, dS=lambda c: price,
                        name="linear", params={"price": price})


def free_cost() -> CapacityCost:
    return CapacityCost(S=lambda c: 0.0, dS=lambda c: 0.0, name="free")


@dataclass(frozen=True)
class ChoiceSchedule:
    """Solved optimal choice function ``q*(theta)`` and its summary.

    ``mu`` is the shadow price of capacity, or the marginal cost at the
    optimum for variable capacity. ``capacity_cost`` is ``S(W_total)`` and
    zero for fixed capacity.
    """

    virtuals: VirtualFunctions
    regime: str
    mu: float
    theta_hat: float
    theta_bar: float
    W_total: float
    scenario: str = "fixed"
    target: float = math.nan
    capacity_cost: float = 0.0

    @property
    def residual(self) -> float:
        """Gap between consumed capacity and the capacity target."""
        return abs(self.W_total - self.target)

    @property
    def kinks(self):
        return tuple(sorted({self.theta_hat, self.theta_bar}))

    def choice(self, theta):
        """Congestion level chosen by each type in ``theta``."""
        theta = np.asarray(theta, dtype=float)
        out = np.ones_like(theta)
        # the marginal type itself is indifferent and takes q = h_inv(h(1)) = 1
        served = theta > self.theta_hat
        if not np.any(served):
            return out
        if self.regime == ABUNDANT:
            out[served] = 0.0
            return out
        vf = self.virtuals
        # pin the pooled region so the kink sits exactly on theta_bar; with
        # theta_bar capped at 1 there is no pooling and type 1 is interior
        inner = served & ((theta < self.theta_bar) | (self.theta_bar >= 1.0))
        out[served] = 0.0
        if np.any(inner):
            out[inner] = vf.h_inv(vf.G(theta[inner]) / self.mu)
        return out

    __call__ = choice


def _thresholds(vf: VirtualFunctions, mu: float):
    # G(1) = 1 since F(1) = 1; targets at or above it map exactly to type 1
    def g_inv(y):
        if y <= 0.0:
            return vf.theta0
        return 1.0 if y >= 1.0 else float(vf.G_inv(y))

    theta_hat = g_inv(mu * vf.h_at_1)
    theta_bar = 1.0 if math.isinf(vf.h_at_0) else g_inv(mu * vf.h_at_0)
    return theta_hat, theta_bar


def schedule_at_price(vf: VirtualFunctions, mu: float, **extra) -> ChoiceSchedule:
    """Schedule induced by the shadow price ``mu`` (``mu = 0``: abundance)."""
    if mu < 0:
        raise InvalidParameterError("shadow price must be nonnegative")
    if mu == 0:
        if math.isinf(vf.w_at_0):
            raise NoSolutionError("zero shadow price with unbounded unit capacity")
        sched = ChoiceSchedule(vf, ABUNDANT, 0.0, vf.theta0, vf.theta0,
                               abundance_threshold(vf))
    else:
        theta_hat, theta_bar = _thresholds(vf, mu)
        sched = ChoiceSchedule(vf, INTERIOR, float(mu), theta_hat, theta_bar, math.nan)
        sched = _with(sched, W_total=_consumed(sched))
    return _with(sched, **extra)


def _with(sched, **changes):
    if not changes:
        return sched
    return ChoiceSchedule(**{**sched.__dict__, **changes})


def _consumed(sched: ChoiceSchedule) -> float:
    vf = sched.virtuals
    if sched.theta_hat >= 1.0:
        return 0.0

    def integrand(theta):
        return vf.quality.w(sched.choice(theta)) * vf.dist.pdf(theta)

    # types below theta_hat take q = 1 and consume nothing
    return integrate(integrand, sched.theta_hat, 1.0, vf.numerics.quad_tol,
                     breakpoints=sched.kinks)


def consumption(vf: VirtualFunctions, mu: float) -> float:
    """Total capacity consumed by the schedule at shadow price ``mu``."""
    return schedule_at_price(vf, mu).W_total


def abundance_threshold(vf: VirtualFunctions) -> float:
    """Capacity beyond which serving ``[theta0, 1]`` uncongested is optimal."""
    if math.isinf(vf.w_at_0):
        return INFINITY
    return float((1.0 - vf.dist.cdf(np.array([vf.theta0]))[0]) * vf.w_at_0)


class _Converged(Exception):
    pass


def _search_price(vf: VirtualFunctions, excess, lo: float):
    """Find a zero of the decreasing map ``excess(mu)``.

    ``excess(lo)`` must be positive. The upper end is doubled until the
    sign changes. Returns the schedule at the final price.
    """
    num = vf.numerics
    hi = 1.0
    while True:
        s_hi, r_hi = excess(hi)
        if r_hi < 0:
            break
        if abs(r_hi) <= 0.1 * num.capacity_tol:
            return s_hi
        hi *= 2.0
        if hi > num.bracket_limit:
            raise NoSolutionError("shadow price bracket exceeded its limit; "
                                  "model is likely inadmissible")
    best = [s_hi, r_hi]

    def signed(mu):
        sched, r = excess(mu)
        if abs(r) < abs(best[1]):
            best[:] = sched, r
        if abs(r) <= 0.1 * num.capacity_tol:
            raise _Converged
        return r

    # Brent's method on the bracket: W is smooth in mu, so this needs far
    # fewer consumption integrals than bisection
    try:
        brentq(signed, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=400)
    except _Converged:
        return best[0]
    except (RuntimeError, ValueError):
        pass
    if abs(best[1]) <= num.capacity_tol:
        return best[0]
    raise NumericalFailure(f"capacity residual {abs(best[1]):.3g} above tolerance")


def solve_fixed(vf: VirtualFunctions, capacity: float) -> ChoiceSchedule:
    """Optimal schedule when at most ``capacity`` units are available.

    At or above the abundance threshold the single uncongested class is
    optimal and the shadow price is zero; a capacity within ``root_tol``
    below the threshold is treated as abundant too.
    """
    try:
        capacity = float(capacity)
    except (TypeError, ValueError):
        raise InvalidParameterError("capacity must be a number") from None
    if not capacity > 0 or math.isnan(capacity):
        raise InvalidParameterError(f"capacity must be positive, got {capacity}")
    c_bar = abundance_threshold(vf)
    if c_bar - capacity <= vf.numerics.root_tol:
        return schedule_at_price(vf, 0.0, target=capacity)

    # memoised: the bracketing and the root finder revisit the same prices
    @functools.lru_cache(maxsize=None)
    def excess(mu):
        sched = schedule_at_price(vf, mu, target=capacity)
        return sched, sched.W_total - capacity

    # walk down from mu = 1 rather than starting at MU_LO: with unbounded
    # unit capacity the consumption at MU_LO is astronomically large
    lo = 1.0
    while excess(lo)[1] <= 0:
        lo *= 0.5
        if lo < MU_LO:
            lo = 0.0
            break
    return _search_price(vf, excess, lo)


def solve_variable(vf: VirtualFunctions, cost: CapacityCost) -> ChoiceSchedule:
    """Optimal schedule when capacity is bought at cost ``S``.

    Finds ``W`` with ``W = consumption(S'(W))`` by bisection on ``W``; the
    map ``W - consumption(S'(W))`` is increasing because ``S'`` is.
    """
    num = vf.numerics
    c_bar = abundance_threshold(vf)
    upper = c_bar if math.isfinite(c_bar) else VARIABLE_CAP
    if vf.h_at_1 > 0:
        # beyond this marginal cost every type is excluded
        w = 1e-6
        while w < upper and cost.dS(w) * vf.h_at_1 < 1.0:
            w *= 2.0
        upper = min(upper, w)
    cost.check(max(upper, 1e-9))

    def state(W):
        mu = float(cost.dS(W))
        if mu < 0:
            raise AssumptionViolation("capacity cost", "S must be nondecreasing")
        sched = schedule_at_price(vf, mu)
        return sched, sched.W_total - W

    def finish(sched, W):
        return _with(sched, scenario="variable", target=W,
                     capacity_cost=float(cost.S(sched.W_total)))

    lo, hi = 0.0, upper
    s_lo, r_lo = state(lo)
    if r_lo <= 0:
        return finish(s_lo, lo)
    s_hi, r_hi = state(hi)
    if r_hi > 0:
        raise NoSolutionError("no consumption fixed point below the capacity cap")
    best = (s_hi, r_hi, hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        s_mid, r_mid = state(mid)
        if abs(r_mid) < abs(best[1]):
            best = (s_mid, r_mid, mid)
        if abs(r_mid) <= 0.1 * num.capacity_tol:
            break
        if r_mid > 0:
            lo = mid
        else:
            hi = mid
    sched, resid, W = best
    if abs(resid) > num.capacity_tol:
        raise NumericalFailure(f"fixed-point residual {abs(resid):.3g} above tolerance")
    return finish(sched, W)


def bunching_threshold(vf: VirtualFunctions) -> float:
    """Capacity above which the highest types are pooled at ``q = 0``.

    Equals the consumption at shadow price ``G(1) / h(0) = 1 / h(0)``;
    infinite when ``h(0)`` is.
    """
    if math.isinf(vf.h_at_0):
        return INFINITY
    return consumption(vf, 1.0 / vf.h_at_0)


def shadow_price_curve(vf: VirtualFunctions, capacities: Sequence[float]):
    """Shadow price for each capacity in ``(0, C_bar)``."""
    c_bar = abundance_threshold(vf)
    out = []
    for c in capacities:
        if not 0 < c < c_bar:
            raise InvalidParameterError(f"capacity {c} outside (0, {c_bar})")
        out.append((float(c), solve_fixed(vf, c).mu))
    return out
