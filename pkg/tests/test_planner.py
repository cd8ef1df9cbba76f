"""Resource ratio and allocation tests, including exhaustive-enumeration
oracle equivalence and the balance/scale-invariance properties."""

import random

import pytest

from offload_planner.planner import (
    CPU_ONLY,
    Allocation,
    CapExceeded,
    CpuOnly,
    Infeasible,
    NonPositiveTime,
    PriceBook,
    ResourceRatio,
    compute_ratio,
    plan_amount,
    ratio_distance,
    round_half_up,
)


def oracle_plan(ratio, prices, budget):
    """Brute force over every affordable unit pair under the stated
    objective and tie-breaks."""
    p_c, p_g = prices.cpu_unit_price, prices.dev_unit_price
    best = None
    best_key = None
    limit_c = int(budget // p_c) + 1
    limit_g = int(budget // p_g) + 1
    for c in range(1, limit_c + 1):
        for g in range(1, limit_g + 1):
            if c * p_c + g * p_g > budget:
                continue
            kept = (c % ratio.cpu == 0 and g % ratio.dev == 0
                    and c // ratio.cpu == g // ratio.dev)
            # ratio-kept multiples win; among them the largest
            key = (0, -(c // ratio.cpu)) if kept else (
                1, ratio_distance(c, g, ratio), -(c + g), -c)
            if best_key is None or key < best_key:
                best_key = key
                best = (c, g, kept)
    return best


def test_ratio_paper_example():
    assert compute_ratio(10.0, 5.0) == ResourceRatio(2, 1)


def test_ratio_equal_times():
    assert compute_ratio(7.0, 7.0) == ResourceRatio(1, 1)


def test_ratio_device_heavier_rounds_half_up():
    # 12/5 = 2.4 rounds down to 2
    assert compute_ratio(5.0, 12.0) == ResourceRatio(1, 2)
    # 12.5/5 = 2.5 rounds up to 3
    assert compute_ratio(5.0, 12.5) == ResourceRatio(1, 3)


def test_ratio_cpu_only():
    assert compute_ratio(4.2, 0.0) is CPU_ONLY


def test_ratio_rejects_non_positive_times():
    with pytest.raises(NonPositiveTime):
        compute_ratio(0.0, 1.0)
    with pytest.raises(NonPositiveTime):
        compute_ratio(-1.0, 1.0)
    with pytest.raises(NonPositiveTime):
        compute_ratio(1.0, -0.5)


def test_ratio_floor_of_one():
    # times nearly equal with t_cpu slightly larger: 1.2 rounds to 1
    assert compute_ratio(1.2, 1.0) == ResourceRatio(1, 1)


def test_scale_invariance():
    rng = random.Random(17)
    for _ in range(300):
        t_cpu = rng.uniform(1e-6, 100.0)
        t_dev = rng.uniform(0.0, 100.0)
        scale = rng.uniform(1e-3, 1e3)
        a = compute_ratio(t_cpu, t_dev)
        b = compute_ratio(t_cpu * scale, t_dev * scale)
        if isinstance(a, CpuOnly):
            assert isinstance(b, CpuOnly)
        else:
            assert a == b


def test_amount_paper_budget_10000():
    alloc = plan_amount(ResourceRatio(2, 1), PriceBook(1000, 4000), 10000)
    assert (alloc.cpu_units, alloc.dev_units) == (2, 1)
    assert alloc.monthly_cost == 6000
    assert alloc.ratio_kept


def test_amount_paper_budget_5000_fallback():
    alloc = plan_amount(ResourceRatio(2, 1), PriceBook(1000, 4000), 5000)
    assert (alloc.cpu_units, alloc.dev_units) == (1, 1)
    assert alloc.monthly_cost == 5000
    assert not alloc.ratio_kept


def test_amount_budget_13000_takes_largest_multiple():
    alloc = plan_amount(ResourceRatio(2, 1), PriceBook(1000, 4000), 13000)
    assert (alloc.cpu_units, alloc.dev_units) == (4, 2)
    assert alloc.monthly_cost == 12000
    assert alloc.ratio_kept


def test_amount_infeasible():
    with pytest.raises(Infeasible):
        plan_amount(ResourceRatio(2, 1), PriceBook(1000, 4000), 4500)
    with pytest.raises(Infeasible):
        plan_amount(ResourceRatio(1, 1), PriceBook(1000, 4000), 0)


def test_amount_cpu_only():
    alloc = plan_amount(CPU_ONLY, PriceBook(1000, 4000), 10500)
    assert (alloc.cpu_units, alloc.dev_units) == (10, 0)
    assert alloc.monthly_cost == 10000
    with pytest.raises(Infeasible):
        plan_amount(CPU_ONLY, PriceBook(1000, 4000), 999)


def test_budget_safety_and_maximality():
    rng = random.Random(23)
    for _ in range(300):
        ratio = compute_ratio(rng.uniform(0.1, 20), rng.uniform(0.1, 20))
        prices = PriceBook(rng.uniform(100, 5000), rng.uniform(100, 5000))
        budget = rng.uniform(200, 60000)
        try:
            alloc = plan_amount(ratio, prices, budget)
        except Infeasible:
            assert prices.cpu_unit_price + prices.dev_unit_price > budget
            continue
        assert alloc.monthly_cost <= budget
        if alloc.ratio_kept:
            grown = ((alloc.cpu_units + ratio.cpu) * prices.cpu_unit_price
                     + (alloc.dev_units + ratio.dev) * prices.dev_unit_price)
            assert grown > budget


def test_oracle_equivalence_randomized():
    rng = random.Random(20260810)
    checked = 0
    while checked < 1000:
        ratio = ResourceRatio(*rng.choice(
            [(1, 1), (2, 1), (3, 1), (1, 2), (1, 3), (1, 5), (7, 1), (1, 9)]))
        prices = PriceBook(float(rng.randint(1, 50)), float(rng.randint(1, 50)))
        budget = float(rng.randint(2, 2000))
        if prices.cpu_unit_price + prices.dev_unit_price > budget:
            continue
        if budget / prices.cpu_unit_price > 100 or budget / prices.dev_unit_price > 100:
            continue  # keep unit counts <= 100 as stated
        alloc = plan_amount(ratio, prices, budget)
        c, g, kept = oracle_plan(ratio, prices, budget)
        assert (alloc.cpu_units, alloc.dev_units, alloc.ratio_kept) == (c, g, kept)
        checked += 1


def test_balance_property():
    rng = random.Random(31)
    checked = 0
    while checked < 1000:
        t_cpu = rng.uniform(0.05, 50)
        t_dev = rng.uniform(0.05, 50)
        ratio = compute_ratio(t_cpu, t_dev)
        prices = PriceBook(rng.uniform(10, 100), rng.uniform(10, 100))
        bundle = ratio.cpu * prices.cpu_unit_price + ratio.dev * prices.dev_unit_price
        budget = bundle * rng.uniform(1.0, 4.0)
        alloc = plan_amount(ratio, prices, budget)
        if not alloc.ratio_kept:
            continue
        scaled_cpu = t_cpu / alloc.cpu_units
        scaled_dev = t_dev / alloc.dev_units
        quotient = scaled_cpu / scaled_dev
        assert 2.0 / 3.0 - 1e-12 <= quotient <= 1.5 + 1e-12, (t_cpu, t_dev)
        checked += 1


def test_fallback_enumeration_cap():
    # the ratio multiple never fits, and the feasible grid is ~4e6 pairs
    with pytest.raises(CapExceeded):
        plan_amount(ResourceRatio(1, 999999), PriceBook(1.0, 1.0), 2000.0)


def test_round_half_up():
    assert round_half_up(2.4) == 2
    assert round_half_up(2.5) == 3
    assert round_half_up(2.6) == 3
    assert round_half_up(0.5) == 1


def test_ratio_validation():
    with pytest.raises(ValueError):
        ResourceRatio(2, 4)
    with pytest.raises(ValueError):
        ResourceRatio(0, 1)


def test_allocation_json():
    alloc = Allocation(2, 1, 6000.0, True)
    assert alloc.to_json() == {"cpu_units": 2, "dev_units": 1,
                               "monthly_cost": 6000.0, "ratio_kept": True}
