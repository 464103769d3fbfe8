"""Acceptance criteria 1 to 10.

Each test prints one ``criterion N: PASS|FAIL`` line with its runtime and
a short detail, then enforces the criterion's tolerance and time budget.
Run with ``pytest tests/test_acceptance.py -v`` to see the lines.
"""

import contextlib
import time

import numpy as np
import pytest

from servicediff import (ABUNDANT, ServiceMenu, abundance_threshold, bunching_threshold,
                         canonical_quality, expansion_cost, ic_violation, indirect_utility,
                         linear_quality, make_power_distribution, menu_from_thresholds,
                         optimal_single_class, partition_demand, profit, recover_prices,
                         simulate_choices, solve_variable)
from servicediff.discrete import brute_force_menu
from servicediff.schedule import profit_components

from conftest import fixed, virtuals

CRITERION_1_CAPACITIES = (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.49)
CRITERION_2_CAPACITIES = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.499)
CRITERION_7_COSTS = (0.5, 1.0, 2.0, 4.0, 8.0)
CRITERION_8_CAPACITIES = (0.08, 0.11, 0.22, 0.4)
CRITERION_8_ABUNDANT = (0.5, 0.6)


@pytest.fixture
def criterion(capsys):
    """Yields a reporter; the PASS/FAIL line is printed on exit."""

    @contextlib.contextmanager
    def report(number, budget):
        state = {"detail": ""}
        start = time.perf_counter()
        ok = False
        try:
            yield state
            ok = True
        finally:
            elapsed = time.perf_counter() - start
            within = elapsed < budget
            status = "PASS" if ok and within else "FAIL"
            note = state["detail"] + ("" if within else f"; over budget {budget:g}s")
            with capsys.disabled():
                print(f"\ncriterion {number}: {status} ({elapsed:.2f}s) {note}")
        assert elapsed < budget, f"criterion {number} took {elapsed:.1f}s (budget {budget}s)"

    return report


def check_exclusion(quality):
    vf = virtuals(1.0, quality)
    c_bar = abundance_threshold(vf)
    caps = [c for c in CRITERION_1_CAPACITIES if c < c_bar]
    worst = max(abs(fixed(c, 1.0, quality).theta_hat - 0.5) for c in caps)
    return worst, caps


def check_residuals(quality, capacities):
    scheds = [fixed(c, 1.0, quality) for c in capacities]
    return max(s.residual for s in scheds if s.regime != ABUNDANT)


def check_ic(scheds):
    ic, v_hat, v_zero, formulas = 0.0, 0.0, 0.0, 0.0
    for s in scheds:
        prices = recover_prices(s)
        ic = max(ic, ic_violation(prices, 128, 256))
        if s.theta_hat < 1.0:
            v_hat = max(v_hat, abs(float(indirect_utility(s, s.theta_hat))))
        v_zero = max(v_zero, abs(float(indirect_utility(s, 0.0))))
        direct, virtual = profit_components(s)
        formulas = max(formulas, abs(direct - virtual))
    return ic, v_hat, v_zero, formulas


def test_criterion_1_exclusion_at_virtual_zero(criterion):
    with criterion(1, 1.0) as rep:
        worst, caps = check_exclusion("canonical")
        rep["detail"] = f"max |theta_hat - 0.5| = {worst:.2e} over {len(caps)} capacities"
        assert worst <= 1e-6


def test_criterion_2_profit_limit(criterion):
    with criterion(2, 10.0) as rep:
        J = [profit(fixed(c)) for c in CRITERION_2_CAPACITIES]
        rep["detail"] = f"J(0.499) = {J[-1]:.8f}, min step {min(np.diff(J)):.2e}"
        assert all(b > a for a, b in zip(J, J[1:]))
        assert J[-1] == pytest.approx(0.25, abs=1e-3)


def test_criterion_3_capacity_residual(criterion):
    with criterion(3, 10.0) as rep:
        worst = check_residuals("canonical", CRITERION_1_CAPACITIES + CRITERION_2_CAPACITIES)
        rep["detail"] = f"max residual {worst:.2e}"
        assert worst <= 1e-8


def test_criterion_4_bunching_transition(criterion):
    with criterion(4, 2.0) as rep:
        vf = virtuals()
        c_hat = bunching_threshold(vf)
        above = fixed(1.02 * c_hat)
        below = fixed(0.98 * c_hat)
        q_top = float(above.choice(np.array([1.0]))[0])
        rep["detail"] = (f"C_hat = {c_hat:.6f}; theta_bar {above.theta_bar:.6f} above, "
                         f"{below.theta_bar:.6f} below; q*(1) = {q_top:g}")
        assert above.theta_bar < 1.0 - 1e-4
        assert q_top == 0.0
        assert below.theta_bar >= 1.0 - 1e-4


def random_menus(count, seed=20240611):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        K = int(rng.integers(1, 6))
        alpha = float(rng.choice([0.5, 1.0, 2.0, 4.0]))
        quality = canonical_quality() if rng.random() < 0.5 else linear_quality()
        t = np.sort(rng.uniform(0.02, 0.98, K))[::-1]
        q = np.sort(rng.uniform(0.0, 0.95, K))
        if K > 1 and (np.min(-np.diff(t)) < 1e-3 or np.min(np.diff(q)) < 1e-3):
            continue
        out.append((menu_from_thresholds(t, q, quality), make_power_distribution(alpha), quality))
    return out


def test_criterion_5_discrete_oracle(criterion):
    with criterion(5, 30.0) as rep:
        worst = 0.0
        for menu, dist, quality in random_menus(50):
            exact = partition_demand(menu, dist, quality)
            sim = simulate_choices(menu, dist, quality, 100_000)
            worst = max(worst, float(np.max(np.abs(exact.demands - sim.demands))))
        worked = partition_demand(ServiceMenu((0.5, 0.2), (0.2, 0.6)),
                                  make_power_distribution(1.0), linear_quality())
        rep["detail"] = (f"max demand gap {worst:.2e} on 50 menus; worked example thresholds "
                         f"{worked.thresholds.tolist()}, revenue {worked.revenue!r}")
        assert worst <= 1e-4
        assert worked.thresholds.tolist() == pytest.approx([0.75, 0.5], abs=1e-15)
        assert worked.revenue == pytest.approx(0.175, abs=1e-15)


@pytest.mark.slow
def test_criterion_6_continuum_oracle(criterion):
    with criterion(6, 300.0) as rep:
        vf = virtuals()
        J = profit(fixed(0.1))
        revenue = {K: brute_force_menu(vf.dist, vf.quality, 0.1, K)[1] for K in (1, 2, 4, 8)}
        rep["detail"] = (f"J* = {J:.8f}; brute force "
                         + ", ".join(f"K={K}: {r:.8f}" for K, r in revenue.items()))
        assert 0.98 * J <= revenue[8] <= J + 1e-6
        values = list(revenue.values())
        assert all(b >= a for a, b in zip(values, values[1:]))


def test_criterion_7_variable_capacity(criterion):
    with criterion(7, 5.0) as rep:
        vf = virtuals()
        stiff = solve_variable(vf, expansion_cost(1e9))
        sweep = [solve_variable(vf, expansion_cost(t)) for t in CRITERION_7_COSTS]
        W = [s.W_total for s in sweep]
        J = [profit(s) for s in sweep]
        rep["detail"] = f"W*(1) at t=1e9: {stiff.W_total:.8f}; W over t sweep {np.round(W, 5)}"
        assert stiff.W_total == pytest.approx(0.1, abs=1e-4)
        assert all(b <= a + 1e-12 for a, b in zip(W, W[1:]))
        assert all(b <= a + 1e-12 for a, b in zip(J, J[1:]))


def test_criterion_8_single_class_dominance(criterion):
    # The gap decrease fails genuinely: the relative gap peaks near C_M = 0.11
    # (both profits are confirmed by independent oracles); see the README.
    with criterion(8, 30.0) as rep:
        vf = virtuals()
        rows = []
        for c in CRITERION_8_CAPACITIES:
            J = profit(fixed(c))
            single = optimal_single_class(vf.dist, vf.quality, c)[2]
            rows.append((c, J, single, (J - single) / J))
        dominance = all(J >= s - 1e-9 for _, J, s, _ in rows)
        gaps = [r[3] for r in rows]
        decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
        coincide = []
        for c in CRITERION_8_ABUNDANT:
            J = profit(fixed(c))
            single = optimal_single_class(vf.dist, vf.quality, c)[2]
            coincide.append(max(abs(J - 0.25), abs(single - 0.25)))
        rep["detail"] = (f"dominance {dominance}; relative gaps "
                         + ", ".join(f"{c:g}: {g:.4f}" for c, _, _, g in rows)
                         + f"; decreasing {decreasing}; abundant error {max(coincide):.1e}")
        assert dominance
        assert max(coincide) <= 1e-6
        assert decreasing, f"relative gap not decreasing in C_M: {np.round(gaps, 4)}"


def criterion_scenarios(quality="canonical"):
    caps = set(CRITERION_1_CAPACITIES) | set(CRITERION_2_CAPACITIES)
    if quality == "canonical":
        c_hat = bunching_threshold(virtuals())
        caps |= {1.02 * c_hat, 0.98 * c_hat}
        caps |= set(CRITERION_8_CAPACITIES) | set(CRITERION_8_ABUNDANT)
    c_bar = abundance_threshold(virtuals(1.0, quality))
    scheds = [fixed(c, 1.0, quality) for c in sorted(caps) if c < c_bar or quality == "canonical"]
    if quality == "canonical":
        vf = virtuals()
        scheds += [solve_variable(vf, expansion_cost(t)) for t in CRITERION_7_COSTS + (1e9,)]
    return scheds


def test_criterion_9_incentive_compatibility(criterion):
    with criterion(9, 30.0) as rep:
        scheds = criterion_scenarios()
        ic, v_hat, v_zero, formulas = check_ic(scheds)
        rep["detail"] = (f"{len(scheds)} solves; IC gain {ic:.1e}, |V(theta_hat)| {v_hat:.1e}, "
                         f"|V(0)| {v_zero:.1e}, formula gap {formulas:.1e}")
        assert ic <= 1e-9
        assert v_hat <= 1e-12 and v_zero <= 1e-12
        assert formulas <= 1e-6


def test_criterion_10_payg_regression(criterion):
    with criterion(10, 10.0) as rep:
        worst, caps = check_exclusion("payg")
        residual = check_residuals("payg", caps)
        ic, v_hat, v_zero, formulas = check_ic(criterion_scenarios("payg"))
        rep["detail"] = (f"PAYG: max |theta_hat - 0.5| {worst:.1e} on {len(caps)} capacities, "
                         f"residual {residual:.1e}, IC gain {ic:.1e}, formula gap {formulas:.1e}")
        assert caps and worst <= 1e-6
        assert residual <= 1e-8
        assert ic <= 1e-9
        assert v_hat <= 1e-12 and v_zero <= 1e-12
        assert formulas <= 1e-6
