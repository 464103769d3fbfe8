"""Scenario execution: solve, recover prices, compute metrics, export."""

from __future__ import annotations

import math
import os

import numpy as np

from ..discrete import (ServiceMenu, brute_force_menu, optimal_single_class, partition_demand,
                        simulate_choices)
from ..estimator import QUALITY_MODELS
from ..exceptions import InconsistencyError
from ..primitives import derive_virtual_functions, make_power_distribution, payg_transform
from ..schedule import capacity_profile, profit, recover_prices, user_surplus
from ..solver import (ABUNDANT, abundance_threshold, expansion_cost, free_cost, linear_cost,
                      solve_fixed, solve_variable)
from .output import line_chart, write_csv
from .scenario import Scenario

__all__ = [
    "build_virtuals", "build_cost", "solve", "Solution", "single_class_benchmark",
    "export_solution", "run_sweep", "trend", "price_ordering", "evaluate_menu",
    "run_brute_force",
]


def build_virtuals(sc: Scenario):
    quality = QUALITY_MODELS[sc.quality]()
    if sc.payg:
        quality = payg_transform(quality)
    return derive_virtual_functions(make_power_distribution(sc.alpha), quality, sc.numerics)


def build_cost(sc: Scenario):
    if sc.cost == "expansion":
        return expansion_cost(sc.t, sc.base)
    if sc.cost == "linear":
        return linear_cost(sc.price)
    return free_cost()


class Solution:
    """A solved scenario together with its derived quantities."""

    def __init__(self, vf, sched):
        self.virtuals = vf
        self.schedule = sched
        self.prices = recover_prices(sched)
        self.profit = profit(sched, self.prices)
        self.surplus = user_surplus(sched, self.prices)[0]

    def summary(self) -> dict:
        s = self.schedule
        return {
            "scenario": s.scenario,
            "regime": s.regime,
            "mu": s.mu,
            "theta0": self.virtuals.theta0,
            "theta_hat": s.theta_hat,
            "theta_bar": s.theta_bar,
            "q_lo": self.prices.q_lo,
            "q_hi": self.prices.q_hi,
            "C_bar": abundance_threshold(self.virtuals),
            "W_total": s.W_total,
            "capacity_residual": 0.0 if s.regime == ABUNDANT else s.residual,
            "capacity_cost": s.capacity_cost,
            "J": self.profit,
            "s": self.surplus,
        }


def solve(sc: Scenario, vf=None) -> Solution:
    vf = vf if vf is not None else build_virtuals(sc)
    if sc.regime == "fixed":
        sched = solve_fixed(vf, sc.capacity)
    else:
        sched = solve_variable(vf, build_cost(sc))
    return Solution(vf, sched)


def single_class_benchmark(vf, capacity: float) -> dict:
    """Optimal one-class offer and its total user surplus.

    A single class ``(p, q)`` serves every type above ``x = p / v(q)``,
    each getting ``theta v(q) - p``; integrating over types gives
    ``v(q) (1 - x)**2 / 2``.
    """
    p, q, j = optimal_single_class(vf.dist, vf.quality, capacity)
    v = float(vf.quality.v(np.array([q]))[0])
    x = p / v
    return {"single_p": p, "single_q": q, "single_J": j, "single_x": x,
            "single_s": 0.5 * v * (1.0 - x) ** 2}


def single_class_curve(vf, bench, theta):
    v = float(vf.quality.v(np.array([bench["single_q"]]))[0])
    return np.maximum(theta * v - bench["single_p"], 0.0)


def export_solution(sol: Solution, out: str, artifacts, svg=False, prefix=""):
    """Write the requested per-solution artifacts into ``out``."""
    written = []
    n = sol.virtuals.numerics.grid
    name = (lambda stem: os.path.join(out, prefix + stem))
    theta, q, p, V = sol.prices.table(n)
    _, W, _ = capacity_profile(sol.schedule, n)
    if "schedule" in artifacts:
        written.append(write_csv(name("schedule.csv"), ["theta", "q", "price", "V", "W"],
                                 zip(theta, q, p, V, W)))
        if svg:
            written.append(line_chart(name("schedule.svg"), [("q*", theta, q)],
                                      "Optimal choice", "theta", "congestion"))
    if "prices" in artifacts:
        qc, pc = sol.prices.curve(n)
        written.append(write_csv(name("prices.csv"), ["q", "price"], zip(qc, pc)))
        if svg:
            written.append(line_chart(name("prices.svg"), [("p*", qc, pc)],
                                      "Price schedule", "congestion", "price"))
    if "surplus" in artifacts:
        written.append(write_csv(name("surplus.csv"), ["theta", "V"], zip(theta, V)))
        if svg:
            written.append(line_chart(name("surplus.svg"), [("V", theta, V)],
                                      "User surplus", "theta", "surplus"))
    if "capacity" in artifacts:
        written.append(write_csv(name("capacity.csv"), ["theta", "W"], zip(theta, W)))
        if svg:
            written.append(line_chart(name("capacity.svg"), [("W", theta, W)],
                                      "Cumulative capacity", "theta", "capacity"))
    return written


def trend(values, direction, strict=False, tol=0.0):
    """Whether ``values`` move in ``direction`` ("up" or "down")."""
    d = np.diff(np.asarray(values, dtype=float))
    if direction == "down":
        d = -d
    return bool(np.all(d > tol) if strict else np.all(d >= -tol))


def price_ordering(sol_small: Solution, sol_large: Solution, n=64):
    """Whether the larger-capacity tariff is lower on the common classes.

    Returns ``None`` when the offered intervals do not overlap.
    """
    lo = max(sol_small.prices.q_lo, sol_large.prices.q_lo)
    hi = min(sol_small.prices.q_hi, sol_large.prices.q_hi)
    if hi <= lo:
        return None
    q = np.linspace(lo, hi, n)
    return bool(np.all(sol_large.prices.price(q) <= sol_small.prices.price(q) + 1e-12))


SWEEP_COLUMNS = ("value", "regime", "mu", "theta0", "theta_hat", "theta_bar", "q_lo", "q_hi",
                 "W_total", "capacity_cost", "J", "s")

_SWEEP_FIELD = {"capacity": "capacity", "alpha": "alpha", "t": "t"}


def run_sweep(sc: Scenario, out: str, svg=False):
    """Solve once per sweep value; returns ``(rows, report_lines, files)``.

    Trends that hold as theorems are checked and a failure raises
    :class:`InconsistencyError`; the remaining ones are only reported.
    """
    param = sc.sweep_parameter
    values = sorted(sc.sweep_values)
    sols = []
    vf = None if param == "alpha" else build_virtuals(sc)
    for x in values:
        variant = sc.with_(**{_SWEEP_FIELD[param]: x})
        sols.append(solve(variant, vf))
    rows = [[x] + [sol.summary()[c] for c in SWEEP_COLUMNS[1:]] for x, sol in zip(values, sols)]
    J = [s.profit for s in sols]
    report, proved_failures = [], []

    def note(text, ok, proved):
        status = "holds" if ok else "fails"
        kind = "theorem" if proved else "observation"
        report.append(f"{kind}: {text}: {status}")
        if proved and ok is False:
            proved_failures.append(text)

    if param == "capacity":
        interior = [s for s in sols if s.schedule.regime != ABUNDANT]
        note("J nondecreasing in capacity", trend(J, "up", tol=1e-9), True)
        note("shadow price decreasing in capacity",
             trend([s.schedule.mu for s in interior], "down", strict=True), True)
        note("marginal type nonincreasing in capacity",
             trend([s.schedule.theta_hat for s in sols], "down", tol=1e-8), True)
        for a, b, ca, cb in zip(sols, sols[1:], values, values[1:]):
            ok = price_ordering(a, b)
            if ok is not None:
                note(f"prices at capacity {cb:g} below those at {ca:g}", ok, False)
    elif param == "t":
        note("W_total nonincreasing in t",
             trend([s.schedule.W_total for s in sols], "down", tol=1e-8), False)
        note("J nonincreasing in t", trend(J, "down", tol=1e-9), False)
    else:
        note("theta0 increasing in alpha",
             trend([s.virtuals.theta0 for s in sols], "up", strict=True), False)
        note("marginal type increasing in alpha",
             trend([s.schedule.theta_hat for s in sols], "up", strict=True), False)
        note("J increasing in alpha", trend(J, "up", strict=True), False)

    files = [write_csv(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS, rows)]
    with open(os.path.join(out, "sweep_report.txt"), "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(report) + "\n")
    files.append(os.path.join(out, "sweep_report.txt"))
    if svg:
        files.append(line_chart(os.path.join(out, "sweep.svg"), [("J", values, J)],
                                f"Profit versus {param}", param, "J"))
    if proved_failures:
        raise InconsistencyError("sweep violates: " + "; ".join(proved_failures))
    return rows, report, files


def evaluate_menu(sc: Scenario, vf, out: str):
    """Partition demand for the scenario's menu and cross-check by simulation."""
    menu = ServiceMenu(sc.menu_prices, sc.menu_congestion)
    res = partition_demand(menu, vf.dist, vf.quality)
    sim = simulate_choices(menu, vf.dist, vf.quality, vf.numerics.oracle_grid)
    rows = [[i + 1, p, q, t, d, c, ds] for i, (p, q, t, d, c, ds) in enumerate(zip(
        menu.prices, menu.congestion, res.thresholds, res.demands, res.capacities,
        sim.demands))]
    files = [write_csv(os.path.join(out, "menu.csv"),
                       ["class", "price", "q", "threshold", "demand", "capacity",
                        "simulated_demand"], rows)]
    summary = {
        "classes": len(menu),
        "revenue": res.revenue,
        "simulated_revenue": sim.revenue,
        "total_capacity": res.total_capacity,
        "max_demand_gap": float(np.max(np.abs(res.demands - sim.demands))),
    }
    if sc.regime == "fixed":
        summary["capacity"] = sc.capacity
        summary["feasible"] = res.feasible(sc.capacity)
    return summary, files


def run_brute_force(sc: Scenario, vf, out: str):
    menu, rev = brute_force_menu(vf.dist, vf.quality, sc.capacity, sc.classes, sc.resolution)
    res = partition_demand(menu, vf.dist, vf.quality)
    analytic = Solution(vf, solve_fixed(vf, sc.capacity))
    rows = [[i + 1, p, q, t, d, c] for i, (p, q, t, d, c) in enumerate(zip(
        menu.prices, menu.congestion, res.thresholds, res.demands, res.capacities))]
    files = [write_csv(os.path.join(out, "brute_force_menu.csv"),
                       ["class", "price", "q", "threshold", "demand", "capacity"], rows)]
    summary = {
        "classes": len(menu),
        "capacity": sc.capacity,
        "revenue": rev,
        "total_capacity": res.total_capacity,
        "J_analytic": analytic.profit,
        "ratio": rev / analytic.profit if analytic.profit > 0 else math.nan,
    }
    return summary, files

