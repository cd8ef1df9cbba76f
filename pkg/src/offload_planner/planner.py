"""CPU:device resource ratio and budget-constrained allocation sizing.

The ratio equalizes the order of the measured CPU-side and device-side
processing times: the slower side gets proportionally more units, rounded
half-up to an integer against the other side's single unit. The allocation
keeps that ratio if any whole multiple of it fits the monthly budget
(taking the largest); otherwise it searches all feasible unit pairs for
the one closest to the ratio in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class NonPositiveTime(Exception):
    pass


class Infeasible(Exception):
    pass


class CapExceeded(Exception):
    pass


ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class ResourceRatio:
    cpu: int
    dev: int

    def __post_init__(self):
        if self.cpu < 1 or self.dev < 1:
            raise ValueError("ratio sides must be positive")
        if math.gcd(self.cpu, self.dev) != 1:
            raise ValueError("ratio must be coprime")


class CpuOnly:
    """Marker for the degenerate nothing-offloaded case."""

    __slots__ = ()

    def __repr__(self):
        return "CPU_ONLY"


CPU_ONLY = CpuOnly()


@dataclass(frozen=True)
class PriceBook:
    cpu_unit_price: float
    dev_unit_price: float

    def __post_init__(self):
        if self.cpu_unit_price <= 0 or self.dev_unit_price <= 0:
            raise ValueError("unit prices must be positive")


@dataclass(frozen=True)
class Allocation:
    cpu_units: int
    dev_units: int
    monthly_cost: float
    ratio_kept: bool

    def to_json(self) -> dict:
        return {
            "cpu_units": self.cpu_units,
            "dev_units": self.dev_units,
            "monthly_cost": self.monthly_cost,
            "ratio_kept": self.ratio_kept,
        }


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def compute_ratio(t_cpu: float, t_dev: float) -> ResourceRatio | CpuOnly:
    """Coprime integer ratio from the measured time split; one side is
    always 1 by construction. t_dev = 0 means nothing was offloaded."""
    if t_cpu <= 0:
        raise NonPositiveTime(f"t_cpu must be positive, got {t_cpu}")
    if t_dev < 0:
        raise NonPositiveTime(f"t_dev must be non-negative, got {t_dev}")
    if t_dev == 0:
        return CPU_ONLY
    if t_cpu >= t_dev:
        return ResourceRatio(max(round_half_up(t_cpu / t_dev), 1), 1)
    return ResourceRatio(1, max(round_half_up(t_dev / t_cpu), 1))


def ratio_distance(cpu_units: int, dev_units: int, ratio: ResourceRatio) -> float:
    """Log-space distance of a unit pair from the ideal ratio; 0 on it."""
    return abs(math.log((cpu_units * ratio.dev) / (dev_units * ratio.cpu)))


def plan_amount(ratio: ResourceRatio | CpuOnly, prices: PriceBook,
                budget: float) -> Allocation:
    """Largest whole multiple of the ratio within budget; else the feasible
    (cpu>=1, dev>=1) pair minimizing ratio_distance with ties broken by more
    total units, then more CPU units."""
    if budget <= 0:
        raise Infeasible(f"budget must be positive, got {budget}")
    p_c, p_g = prices.cpu_unit_price, prices.dev_unit_price
    if isinstance(ratio, CpuOnly):
        cpu_units = math.floor(budget / p_c)
        if cpu_units < 1:
            raise Infeasible(
                f"budget {budget} cannot buy one CPU unit at {p_c}/month")
        return Allocation(cpu_units, 0, cpu_units * p_c, ratio_kept=True)

    bundle = ratio.cpu * p_c + ratio.dev * p_g
    k = math.floor(budget / bundle)
    if k >= 1:
        cpu_units, dev_units = k * ratio.cpu, k * ratio.dev
        return Allocation(cpu_units, dev_units,
                          cpu_units * p_c + dev_units * p_g, ratio_kept=True)

    if p_c + p_g > budget:
        raise Infeasible(
            f"budget {budget} cannot cover one CPU ({p_c}) plus one device "
            f"({p_g}) unit per month")

    max_cpu = math.floor((budget - p_g) / p_c)
    max_dev = math.floor((budget - p_c) / p_g)
    if max_cpu * max_dev > ENUMERATION_CAP:
        raise CapExceeded(
            f"{max_cpu} x {max_dev} candidate allocations exceed the "
            f"{ENUMERATION_CAP} enumeration cap")
    best = None
    best_key = None
    for cpu_units in range(1, max_cpu + 1):
        for dev_units in range(1, max_dev + 1):
            cost = cpu_units * p_c + dev_units * p_g
            if cost > budget:
                break
            key = (ratio_distance(cpu_units, dev_units, ratio),
                   -(cpu_units + dev_units), -cpu_units)
            if best_key is None or key < best_key:
                best_key = key
                best = Allocation(cpu_units, dev_units, cost, ratio_kept=False)
    return best
