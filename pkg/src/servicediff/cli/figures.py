"""Figure presets.

Each preset solves a fixed family of uniform or power-law markets with
the canonical quality model and writes the curves as CSV (and SVG on
request) together with a ``report.txt`` of trend checks.
"""

from __future__ import annotations

import os

import numpy as np

from ..exceptions import InconsistencyError
from .output import line_chart, write_csv
from .pipeline import (build_virtuals, price_ordering, single_class_benchmark,
                       single_class_curve, solve, trend)
from .scenario import Scenario

__all__ = ["FIGURES", "reproduce", "FIG1_CAPACITIES", "FIG2_COSTS", "FIG3_ALPHAS",
           "FIG4_CAPACITIES", "FIG5_CAPACITIES"]

FIG1_CAPACITIES = (0.05, 0.1, 0.2, 0.3345, 0.45)
FIG2_COSTS = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
FIG3_ALPHAS = (0.5, 1.0, 2.0, 4.0)
FIG3_CAPACITY = 0.1
FIG4_CAPACITIES = (0.02, 0.05, 0.08, 0.11, 0.15, 0.22, 0.3, 0.4, 0.5)
FIG5_CAPACITIES = (0.11, 0.22)


class _Report:
    def __init__(self):
        self.lines = []
        self.failures = []

    def check(self, text, ok, asserted=True):
        kind = "check" if asserted else "observation"
        self.lines.append(f"{kind}: {text}: {'holds' if ok else 'fails'}")
        if asserted and not ok:
            self.failures.append(text)


def _long_rows(items):
    for k, (xs, ys) in items:
        for x, y in zip(xs, ys):
            yield [k, x, y]


def _base(sc: Scenario) -> Scenario:
    return sc.with_(alpha=1.0, quality="canonical", regime="fixed")


def fig1(sc, out, svg, rep):
    """Price schedules for a grid of capacities."""
    base = _base(sc)
    vf = build_virtuals(base)
    sols = [(c, solve(base.with_(capacity=c), vf)) for c in FIG1_CAPACITIES]
    n = base.numerics.grid
    curves = [(c, s.prices.curve(n)) for c, s in sols]
    choices = [(c, (np.linspace(0, 1, n), s.schedule.choice(np.linspace(0, 1, n))))
               for c, s in sols]
    files = [
        write_csv(os.path.join(out, "prices.csv"), ["C_M", "q", "price"], _long_rows(curves)),
        write_csv(os.path.join(out, "choice.csv"), ["C_M", "theta", "q"],
                  _long_rows(choices)),
        write_csv(os.path.join(out, "summary.csv"),
                  ["C_M", "regime", "mu", "theta_hat", "theta_bar", "q_lo", "q_hi", "J"],
                  [[c, s.schedule.regime, s.schedule.mu, s.schedule.theta_hat,
                    s.schedule.theta_bar, s.prices.q_lo, s.prices.q_hi, s.profit]
                   for c, s in sols]),
    ]
    if svg:
        files.append(line_chart(os.path.join(out, "prices.svg"),
                                [(f"C_M={c:g}", *xy) for c, xy in curves],
                                "Optimal pricing", "congestion", "price"))
    rep.check("offered range widens with capacity",
              trend([s.prices.q_lo for _, s in sols], "down", tol=1e-9))
    rep.check("profit increases with capacity", trend([s.profit for _, s in sols], "up", strict=True))
    for (ca, a), (cb, b) in zip(sols, sols[1:]):
        ok = price_ordering(a, b)
        if ok is not None:
            rep.check(f"prices at C_M={cb:g} below those at C_M={ca:g}", ok, asserted=False)
    return files


def fig2(sc, out, svg, rep):
    """Capacity bought and profit against the expansion cost scale ``t``."""
    base = _base(sc).with_(regime="variable", cost="expansion", base=0.1)
    vf = build_virtuals(base)
    sols = [(t, solve(base.with_(t=t), vf)) for t in FIG2_COSTS]
    rows = [[t, s.schedule.W_total, s.schedule.mu, s.schedule.theta_hat, s.schedule.capacity_cost,
             s.profit] for t, s in sols]
    files = [write_csv(os.path.join(out, "cost.csv"),
                       ["t", "W_total", "marginal_cost", "theta_hat", "capacity_cost", "J"], rows)]
    if svg:
        files.append(line_chart(os.path.join(out, "capacity.svg"),
                                [("W*(1)", FIG2_COSTS, [r[1] for r in rows])],
                                "Optimal capacity", "t", "W"))
        files.append(line_chart(os.path.join(out, "profit.svg"),
                                [("J*", FIG2_COSTS, [r[5] for r in rows])],
                                "Optimal profit", "t", "J"))
    rep.check("capacity decreases with t", trend([r[1] for r in rows], "down", tol=1e-9))
    rep.check("profit decreases with t", trend([r[5] for r in rows], "down", tol=1e-9))
    rep.check("capacity stays above the free 0.1", all(r[1] >= 0.1 - 1e-9 for r in rows))
    return files


def fig3(sc, out, svg, rep):
    """Pricing and choice for several user distributions at C_M = 0.1."""
    base = _base(sc).with_(capacity=FIG3_CAPACITY)
    sols = [(a, solve(base.with_(alpha=a))) for a in FIG3_ALPHAS]
    n = base.numerics.grid
    theta = np.linspace(0, 1, n)
    curves = [(a, s.prices.curve(n)) for a, s in sols]
    choices = [(a, (theta, s.schedule.choice(theta))) for a, s in sols]
    files = [
        write_csv(os.path.join(out, "prices.csv"), ["alpha", "q", "price"],
                  _long_rows(curves)),
        write_csv(os.path.join(out, "choice.csv"), ["alpha", "theta", "q"],
                  _long_rows(choices)),
        write_csv(os.path.join(out, "summary.csv"),
                  ["alpha", "theta0", "theta_hat", "theta_bar", "q_lo", "q_hi", "mu", "J"],
                  [[a, s.virtuals.theta0, s.schedule.theta_hat, s.schedule.theta_bar,
                    s.prices.q_lo, s.prices.q_hi, s.schedule.mu, s.profit] for a, s in sols]),
    ]
    if svg:
        files.append(line_chart(os.path.join(out, "prices.svg"),
                                [(f"alpha={a:g}", *xy) for a, xy in curves],
                                "Pricing by distribution", "congestion", "price"))
        files.append(line_chart(os.path.join(out, "choice.svg"),
                                [(f"alpha={a:g}", *xy) for a, xy in choices],
                                "Choice by distribution", "theta", "congestion"))
    rep.check("marginal type increases with alpha",
              trend([s.schedule.theta_hat for _, s in sols], "up", strict=True))
    rep.check("best offered class degrades with alpha",
              trend([s.prices.q_lo for _, s in sols], "up", tol=1e-12), asserted=False)
    rep.check("bunching vanishes for large alpha",
              sols[-1][1].schedule.theta_bar >= 1.0, asserted=False)
    rep.check("profit increases with alpha", trend([s.profit for _, s in sols], "up", strict=True),
              asserted=False)
    return files


def fig4(sc, out, svg, rep):
    """Differentiated against single-class profit and surplus."""
    base = _base(sc)
    vf = build_virtuals(base)
    rows = []
    for c in FIG4_CAPACITIES:
        s = solve(base.with_(capacity=c), vf)
        b = single_class_benchmark(vf, c)
        gap = (s.profit - b["single_J"]) / s.profit
        rows.append([c, s.profit, b["single_J"], gap, s.surplus, b["single_s"],
                     s.schedule.theta_hat, b["single_x"]])
    files = [write_csv(os.path.join(out, "benefits.csv"),
                       ["C_M", "J", "single_J", "relative_gap", "s", "single_s", "theta_hat",
                        "single_marginal_type"], rows)]
    caps = [r[0] for r in rows]
    if svg:
        files.append(line_chart(os.path.join(out, "profit.svg"),
                                [("differentiated", caps, [r[1] for r in rows]),
                                 ("single class", caps, [r[2] for r in rows])],
                                "Profit", "C_M", "J"))
        files.append(line_chart(os.path.join(out, "surplus.svg"),
                                [("differentiated", caps, [r[4] for r in rows]),
                                 ("single class", caps, [r[5] for r in rows])],
                                "Total user surplus", "C_M", "s"))
    rep.check("differentiation earns at least the single-class profit",
              all(r[1] >= r[2] - 1e-6 for r in rows))
    peak = int(np.argmax([r[3] for r in rows]))
    rep.check("relative profit gap shrinks with capacity",
              trend([r[3] for r in rows], "down", tol=1e-6), asserted=False)
    rep.check(f"relative profit gap shrinks beyond its peak at C_M={rows[peak][0]:g}",
              trend([r[3] for r in rows[peak:]], "down", tol=1e-6), asserted=False)
    rep.check("differentiation serves more users",
              all(r[6] <= r[7] + 1e-9 for r in rows), asserted=False)
    rep.check("differentiated surplus at least the single-class surplus",
              all(r[4] >= r[5] - 1e-9 for r in rows), asserted=False)
    return files


def fig5(sc, out, svg, rep):
    """Per-type surplus at two capacities."""
    base = _base(sc)
    vf = build_virtuals(base)
    n = base.numerics.grid
    theta = np.linspace(0, 1, n)
    files = []
    for c in FIG5_CAPACITIES:
        s = solve(base.with_(capacity=c), vf)
        b = single_class_benchmark(vf, c)
        V = s.prices.utility(theta)
        Vs = single_class_curve(vf, b, theta)
        tag = f"{c:g}".replace(".", "p")
        files.append(write_csv(os.path.join(out, f"surplus_{tag}.csv"),
                               ["theta", "V", "single_V"], zip(theta, V, Vs)))
        if svg:
            files.append(line_chart(os.path.join(out, f"surplus_{tag}.svg"),
                                    [("differentiated", theta, V), ("single class", theta, Vs)],
                                    f"Surplus of each user, C_M={c:g}", "theta", "V"))
        served = theta[V > 0]
        served_single = theta[Vs > 0]
        rep.check(f"more users subscribe at C_M={c:g}",
                  served.size >= served_single.size)
        rep.check(f"top type gains from differentiation at C_M={c:g}", V[-1] >= Vs[-1] - 1e-12,
                  asserted=False)
    return files


FIGURES = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4, "fig5": fig5}


def reproduce(name: str, sc: Scenario, out: str, svg=False):
    """Run a preset; returns ``(files, report_lines)``.

    Checks marked as such raise :class:`InconsistencyError` when they
    fail, after the report has been written.
    """
    rep = _Report()
    os.makedirs(out, exist_ok=True)
    files = FIGURES[name](sc, out, svg, rep)
    path = os.path.join(out, "report.txt")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(rep.lines) + "\n")
    files.append(path)
    if rep.failures:
        raise InconsistencyError(f"{name}: " + "; ".join(rep.failures))
    return files, rep.lines
