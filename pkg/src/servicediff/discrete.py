"""Finite service menus: demand partition, benchmarks and brute force.

A menu is a list of classes ``(price, congestion)`` sorted with prices
strictly decreasing and congestion strictly increasing. Users pick the
class with the highest utility ``theta * v(q) - p`` or opt out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import EmptyClassError, InvalidParameterError, NoSolutionError
from .primitives import QualityModel, ValuationDistribution
from .schedule import recover_prices
from .solver import ChoiceSchedule

__all__ = [
    "ServiceMenu",
    "MarketOutcome",
    "partition_demand",
    "simulate_choices",
    "menu_from_thresholds",
    "optimal_single_class",
    "brute_force_menu",
    "discretize_schedule",
    "feasible_discretization",
]

MAX_CLASSES = 8
MAX_RESOLUTION = 64


@dataclass(frozen=True)
class ServiceMenu:
    """Ordered finite menu; the opt-out class ``(0, 1)`` is implicit."""

    prices: tuple
    congestion: tuple

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        q = np.asarray(self.congestion, dtype=float)
        if p.shape != q.shape or p.ndim != 1 or p.size == 0:
            raise InvalidParameterError("menu needs matching nonempty price and congestion lists")
        if np.any(p <= 0):
            raise InvalidParameterError("prices must be positive")
        if np.any(q < 0) or np.any(q >= 1):
            raise InvalidParameterError("congestion levels must lie in [0, 1)")
        for i in range(1, p.size):
            if not (p[i] < p[i - 1] and q[i] > q[i - 1]):
                raise EmptyClassError(
                    i, "classes must have strictly decreasing prices and increasing congestion")
        object.__setattr__(self, "prices", tuple(float(x) for x in p))
        object.__setattr__(self, "congestion", tuple(float(x) for x in q))

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        return cls(tuple(p for p, _ in pairs), tuple(q for _, q in pairs))

    def __len__(self):
        return len(self.prices)


@dataclass(frozen=True)
class MarketOutcome:
    """Demand split induced by a menu.

    ``thresholds[i]`` is the lowest type in class ``i + 1``; the top of
    class 1 is type 1.
    """

    menu: ServiceMenu
    thresholds: np.ndarray
    demands: np.ndarray
    revenue: float
    capacities: np.ndarray
    total_capacity: float

    def feasible(self, capacity: float, tol: float = 1e-12) -> bool:
        return self.total_capacity <= capacity + tol


def _outcome(menu, dist, quality, thresholds, demands):
    p = np.asarray(menu.prices)
    caps = demands * quality.w(np.asarray(menu.congestion))
    return MarketOutcome(menu, thresholds, demands, float(np.dot(p, demands)),
                         caps, float(np.sum(caps)))


def partition_demand(menu: ServiceMenu, dist: ValuationDistribution,
                     quality: QualityModel) -> MarketOutcome:
    """Class thresholds and demands in closed form.

    Raises :class:`EmptyClassError` naming the first class whose threshold
    breaks ``1 >= theta_1 >= ... >= theta_N``.
    """
    p = np.asarray(menu.prices)
    v = quality.v(np.asarray(menu.congestion))
    n = p.size
    thresholds = np.empty(n)
    thresholds[:-1] = (p[:-1] - p[1:]) / (v[:-1] - v[1:])
    thresholds[-1] = p[-1] / v[-1]
    upper = 1.0
    for i, t in enumerate(thresholds):
        if t > upper:
            raise EmptyClassError(i + 1 if i else 1,
                                  f"threshold {t:.6g} exceeds the one above it ({upper:.6g})")
        upper = t
    edges = np.concatenate([[1.0], thresholds])
    F = dist.cdf(edges)
    demands = F[:-1] - F[1:]
    return _outcome(menu, dist, quality, thresholds, demands)


def simulate_choices(menu: ServiceMenu, dist: ValuationDistribution,
                     quality: QualityModel, grid_size: int = 100_000) -> MarketOutcome:
    """Demand by letting every type on a grid pick its best class.

    Each of ``grid_size`` equal cells of ``[0, 1]`` is represented by its
    midpoint and carries the cell's probability mass. Ties go to the least
    congested class; the opt-out class only wins strictly.
    """
    if grid_size < 1000:
        raise InvalidParameterError("grid_size must be at least 1000")
    edges = np.linspace(0.0, 1.0, grid_size + 1)
    theta = 0.5 * (edges[1:] + edges[:-1])
    mass = np.diff(dist.cdf(edges))
    p = np.asarray(menu.prices)
    v = quality.v(np.asarray(menu.congestion))
    n = p.size
    # classes are stored by increasing congestion so argmax favours low q
    utility = theta[:, None] * v[None, :] - p[None, :]
    best = np.argmax(utility, axis=1)
    best_u = utility[np.arange(grid_size), best]
    choice = np.where(best_u >= 0.0, best, n)
    demands = np.bincount(choice, weights=mass, minlength=n + 1)[:n]
    thresholds = np.array([theta[choice == i].min() if np.any(choice == i) else np.nan
                           for i in range(n)])
    return _outcome(menu, dist, quality, thresholds, demands)


def menu_from_thresholds(thresholds, congestion, quality: QualityModel) -> ServiceMenu:
    """Prices making ``thresholds`` the class boundaries of the menu."""
    t = np.asarray(thresholds, dtype=float)
    v = quality.v(np.asarray(congestion, dtype=float))
    prices = _prices(t, v)
    return ServiceMenu(tuple(prices), tuple(float(x) for x in congestion))


def _prices(t, v):
    # p_N = t_N v_N, p_i = p_{i+1} + t_i (v_i - v_{i+1}); works on batches
    v_next = np.concatenate([v[..., 1:], np.zeros(v.shape[:-1] + (1,))], axis=-1)
    steps = t * (v - v_next)
    return np.flip(np.cumsum(np.flip(steps, -1), -1), -1)


def optimal_single_class(dist: ValuationDistribution, quality: QualityModel,
                         capacity: float, tol: float = 1e-8):
    """Best one-class menu ``(p, q, profit)`` under a capacity limit.

    For a fixed congestion ``q`` the price only sets the marginal type
    ``x = p / v(q)``; revenue ``v(q) x (1 - F(x))`` is maximised at the
    unconstrained optimum ``x0`` unless serving ``1 - F(x0)`` users breaks
    the capacity, in which case the capacity binds. The outer search over
    ``q`` is a coarse scan followed by golden-section refinement.
    """
    if not capacity > 0:
        raise InvalidParameterError("capacity must be positive")
    x_grid = np.linspace(0.0, 1.0, 20001)
    x_rev = x_grid * (1.0 - dist.cdf(x_grid))
    k = int(np.argmax(x_rev))
    x0 = minimize_scalar(lambda x: -x * (1.0 - dist.cdf(np.array([x]))[0]),
                         bracket=(x_grid[max(k - 1, 0)], x_grid[k], x_grid[min(k + 1, 20000)]),
                         method="golden", tol=tol).x \
        if 0 < k < 20000 else x_grid[k]

    def marginal_type(q):
        w = float(quality.w(np.array([q]))[0])
        if w * (1.0 - float(dist.cdf(np.array([x0]))[0])) <= capacity:
            return x0
        return max(x0, float(dist.quantile(np.array([1.0 - capacity / w]))[0]))

    def revenue(q):
        x = marginal_type(q)
        return float(quality.v(np.array([q]))[0]) * x * (1.0 - float(dist.cdf(np.array([x]))[0]))

    qs = np.linspace(0.0, 1.0, 401)[:-1]
    vals = np.array([revenue(q) for q in qs])
    j = int(np.argmax(vals))
    if 0 < j < qs.size - 1:
        res = minimize_scalar(lambda q: -revenue(q), bracket=(qs[j - 1], qs[j], qs[j + 1]),
                              method="golden", tol=tol)
        q_best = float(res.x) if -res.fun >= vals[j] else float(qs[j])
    else:
        q_best = float(qs[j])
    x = marginal_type(q_best)
    v = float(quality.v(np.array([q_best]))[0])
    return x * v, q_best, revenue(q_best)


def _menu_scores(t, q, dist, quality, lam=None):
    """Revenue and capacity for a batch of threshold/congestion arrays."""
    v = quality.v(q)
    top = np.concatenate([np.ones(t.shape[:-1] + (1,)), t[..., :-1]], axis=-1)
    d = dist.cdf(top) - dist.cdf(t)
    v_next = np.concatenate([v[..., 1:], np.zeros(v.shape[:-1] + (1,))], axis=-1)
    revenue = np.sum(t * (v - v_next) * (1.0 - dist.cdf(t)), axis=-1)
    cap = np.sum(d * quality.w(q), axis=-1)
    return revenue, cap


def _coordinate_search(t, q, score, resolution, rounds, sweeps=6):
    """Grid coordinate ascent on thresholds and congestion levels.

    Each coordinate is moved over ``resolution`` points between its
    neighbours (so orderings are preserved); later rounds shrink the
    window around the incumbent.
    """
    k = t.size
    best = score(t[None], q[None])[0]
    for r in range(rounds + 1):
        shrink = 0.25 ** r
        for _ in range(sweeps):
            improved = False
            for i in range(k):
                for which in ("t", "q"):
                    x = t if which == "t" else q
                    if which == "t":
                        lo = t[i + 1] if i + 1 < k else 0.0
                        hi = t[i - 1] if i > 0 else 1.0
                    else:
                        lo = q[i - 1] if i > 0 else 0.0
                        hi = q[i + 1] if i + 1 < k else 1.0
                    span = (hi - lo) * shrink
                    a, b = max(lo, x[i] - span / 2), min(hi, x[i] + span / 2)
                    cand = np.linspace(a, b, resolution + 2)[1:-1]
                    if which == "q" and i == 0 and a == 0.0:
                        cand[0] = 0.0
                    T = np.repeat(t[None], cand.size, 0)
                    Q = np.repeat(q[None], cand.size, 0)
                    (T if which == "t" else Q)[:, i] = cand
                    s = score(T, Q)
                    j = int(np.argmax(s))
                    if s[j] > best + 1e-15:
                        best = s[j]
                        x[i] = cand[j]
                        improved = True
            if not improved:
                break
    return t, q, best


def brute_force_menu(dist: ValuationDistribution, quality: QualityModel, capacity: float,
                     K: int, resolution: int = 64, rounds: int = 3):
    """Best ``K``-class menu found by grid search; returns ``(menu, profit)``.

    Menus are parameterised by class thresholds and congestion levels, so
    every candidate is admissible. The capacity limit is handled with a
    multiplier: for each multiplier the penalised revenue is maximised by
    coordinate search, the multiplier is bisected until the incumbent just
    fits, and a final constrained search polishes the result. The search
    is deterministic and returns a feasible menu whose revenue is a lower
    bound on the true optimum.
    """
    if not 1 <= K <= MAX_CLASSES:
        raise InvalidParameterError(f"K must be between 1 and {MAX_CLASSES}")
    if not 2 <= resolution <= MAX_RESOLUTION:
        raise InvalidParameterError(f"resolution must be between 2 and {MAX_RESOLUTION}")
    if not capacity > 0:
        raise InvalidParameterError("capacity must be positive")

    t0 = 1.0 - np.arange(1, K + 1) / (K + 1)
    q0 = np.arange(K) / K * 0.9

    def run(lam, t, q):
        def score(T, Q):
            rev, cap = _menu_scores(T, Q, dist, quality)
            return rev - lam * cap
        return _coordinate_search(t.copy(), q.copy(), score, resolution, rounds)

    def feasible_revenue(t, q):
        rev, cap = _menu_scores(t[None], q[None], dist, quality)
        return (rev[0] if cap[0] <= capacity else -np.inf), cap[0]

    t, q, _ = run(0.0, t0, q0)
    rev, cap = feasible_revenue(t, q)
    best = (rev, t, q)
    if cap > capacity:
        lo, hi = 0.0, 1.0
        while True:
            th, qh, _ = run(hi, t0, q0)
            rev, cap = feasible_revenue(th, qh)
            if cap <= capacity:
                best = max(best, (rev, th, qh), key=lambda b: b[0])
                break
            lo, hi = hi, hi * 2.0
            if hi > 1e6:
                break
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            tm, qm, _ = run(mid, t0, q0)
            rev, cap = feasible_revenue(tm, qm)
            if cap <= capacity:
                hi = mid
                best = max(best, (rev, tm, qm), key=lambda b: b[0])
            else:
                lo = mid

    def constrained(T, Q):
        rev, cap = _menu_scores(T, Q, dist, quality)
        return np.where(cap <= capacity, rev, -np.inf)

    if np.isfinite(best[0]):
        t, q, rev = _coordinate_search(best[1].copy(), best[2].copy(), constrained,
                                       resolution, rounds)
    else:
        t, q, rev = best[1], best[2], 0.0
    keep = np.concatenate([[True], t[1:] < t[:-1]]) & (t < 1.0)
    t, q = t[keep], q[keep]
    menu = menu_from_thresholds(t, q, quality)
    return menu, float(rev)


def discretize_schedule(sched: ChoiceSchedule, K: int) -> ServiceMenu:
    """K-class menu sampled from a continuous schedule.

    Class ``i`` offers the congestion chosen by the midpoint type of the
    ``i``-th equal-population slice of the served types, at the
    continuum price for that congestion.
    """
    if K < 1:
        raise InvalidParameterError("K must be positive")
    vf = sched.virtuals
    prices = recover_prices(sched)
    lo = float(vf.dist.cdf(np.array([sched.theta_hat]))[0])
    u = lo + (1.0 - lo) * (K - np.arange(1, K + 1) + 0.5) / K
    q = sched.choice(np.asarray(vf.dist.quantile(u), dtype=float))
    keep = (q < 1.0) & np.concatenate([[True], np.diff(q) > 0])
    q = q[keep]
    p = prices.price(q)
    return ServiceMenu(tuple(p), tuple(q))


def feasible_discretization(vf, capacity: float, K: int, tol: float = 1e-9):
    """Discretised optimal menu that fits within ``capacity``.

    Sampling a schedule at finitely many types changes its capacity use,
    so the shadow price is re-tuned by bisection until the K-class menu
    just fits. Returns ``(menu, outcome)``.
    """
    from .solver import schedule_at_price, solve_fixed

    def use(mu):
        menu = discretize_schedule(schedule_at_price(vf, mu), K)
        return menu, partition_demand(menu, vf.dist, vf.quality)

    base = solve_fixed(vf, capacity)
    menu, out = use(base.mu) if base.mu > 0 else (None, None)
    if base.mu == 0.0:
        menu = discretize_schedule(base, K)
        return menu, partition_demand(menu, vf.dist, vf.quality)
    lo = hi = base.mu
    if out.total_capacity > capacity:
        while use(hi)[1].total_capacity > capacity:
            lo, hi = hi, hi * 2.0
            if hi > vf.numerics.bracket_limit:
                raise NoSolutionError("no feasible discretisation found")
    else:
        while lo > 1e-12 and use(lo)[1].total_capacity <= capacity:
            hi, lo = lo, lo * 0.5
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if use(mid)[1].total_capacity > capacity:
            lo = mid
        else:
            hi = mid
    return use(hi)
