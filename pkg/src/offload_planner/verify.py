"""Post-deployment automatic verification.

Runs performance test cases against the planned allocation (sim cases
re-execute the offloaded program in the two-memory-space model and diff it
against the unoffloaded baseline; external cases run a measurement
command), runs registered regression suites for the declared software
components, and renders the user-facing report with the allocation and its
monthly price.

Scaled processing time assumes part-times shrink linearly with unit
counts: t_cpu/cpu_units + t_dev/dev_units.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .evaluation import (
    DEFAULT_TIMEOUT,
    Measurement,
    ShapeMismatch,
    ToleranceSpec,
    compare_results,
)
from .minic.interp import EvalError, interpret
from .minic.loops import extract_loops
from .minic.parser import ParseError, parse_program
from .offload import (
    InvalidPattern,
    LengthMismatch,
    OffloadPattern,
    TwoSpaceError,
    plan_transfers,
    simulate_with_plan,
)
from .planner import Allocation

SCALING_ASSUMPTION = ("part-times scale linearly with unit counts: "
                      "scaled = t_cpu/cpu_units + t_dev/dev_units")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class TestCase:
    __test__ = False               # domain type, not a pytest class

    name: str
    kind: str                      # "performance" | "regression"
    source: str | None = None      # sim target program
    pattern: tuple | None = None   # sim target offload pattern bits
    baseline: str | None = None    # unoffloaded reference program
    tolerance: ToleranceSpec | None = None
    command: str | None = None     # external target / regression command

    def __post_init__(self):
        if self.kind not in ("performance", "regression"):
            raise ConfigError(f"test '{self.name}': unknown kind {self.kind!r}")
        if self.kind == "regression" and not self.command:
            raise ConfigError(f"regression test '{self.name}' needs a command")
        if self.kind == "performance" and self.source is None and self.command is None:
            raise ConfigError(
                f"performance test '{self.name}' needs a source or a command")


def load_tests(path) -> list[TestCase]:
    base = Path(path).parent
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    cases = []
    for entry in raw:
        source = entry.get("source")
        baseline = entry.get("baseline")
        cases.append(TestCase(
            name=entry["name"],
            kind=entry["kind"],
            source=str(base / source) if source else None,
            pattern=tuple(entry["pattern"]) if "pattern" in entry else None,
            baseline=str(base / baseline) if baseline else None,
            tolerance=(ToleranceSpec.from_json(entry["tolerance"])
                       if "tolerance" in entry else None),
            command=entry.get("command"),
        ))
    return cases


def load_registry(path) -> dict:
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    return {name: list(cmds) for name, cmds in raw.items()}


@dataclass(frozen=True)
class PerformanceRow:
    name: str
    scaled_time: float | None      # None when the measurement was invalid
    throughput: float | None       # 1 / scaled_time
    diff_passed: bool
    worst_variable: str | None = None
    worst_deviation: float | None = None
    note: str | None = None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "scaled_time": self.scaled_time,
            "throughput": self.throughput,
            "diff_passed": self.diff_passed,
            "worst_variable": self.worst_variable,
            "worst_deviation": self.worst_deviation,
            "note": self.note,
        }


@dataclass(frozen=True)
class RegressionRow:
    name: str
    passed: bool
    exit_code: int | None
    note: str | None = None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "exit_code": self.exit_code,
            "note": self.note,
        }


@dataclass
class VerificationReport:
    performance: list = field(default_factory=list)
    regression: list = field(default_factory=list)
    uncovered_components: list = field(default_factory=list)
    allocation: Allocation | None = None
    monthly_cost: float = 0.0
    recommendation: str = "attention"
    assumptions: str = SCALING_ASSUMPTION

    def to_json(self) -> dict:
        return {
            "assumptions": self.assumptions,
            "performance": [row.to_json() for row in self.performance],
            "regression": [row.to_json() for row in self.regression],
            "uncovered_components": self.uncovered_components,
            "allocation": self.allocation.to_json() if self.allocation else None,
            "monthly_cost": self.monthly_cost,
            "recommendation": self.recommendation,
        }

    def to_text(self) -> str:
        lines = ["deployment verification report",
                 f"  model assumption: {self.assumptions}", ""]
        lines.append("performance cases:")
        if not self.performance:
            lines.append("  (none)")
        for row in self.performance:
            time_txt = ("INFINITE_TIME" if row.scaled_time is None
                        else f"{row.scaled_time:.6g} s")
            tput_txt = ("-" if row.throughput is None
                        else f"{row.throughput:.6g}/s")
            diff_txt = "diff ok" if row.diff_passed else "diff FAILED"
            extra = f" ({row.note})" if row.note else ""
            lines.append(f"  {row.name}: scaled time {time_txt}, "
                         f"throughput {tput_txt}, {diff_txt}{extra}")
        lines.append("")
        lines.append("regression cases:")
        if not self.regression:
            lines.append("  (none)")
        for row in self.regression:
            status = "pass" if row.passed else "FAIL"
            code = "-" if row.exit_code is None else str(row.exit_code)
            extra = f" ({row.note})" if row.note else ""
            lines.append(f"  {row.name}: {status} (exit {code}){extra}")
        lines.append("")
        if self.uncovered_components:
            lines.append("uncovered components (no registered regression suite):")
            for name in self.uncovered_components:
                lines.append(f"  {name}")
            lines.append("")
        if self.allocation is not None:
            kept = "kept" if self.allocation.ratio_kept else "not kept"
            lines.append(
                f"allocation: {self.allocation.cpu_units} CPU unit(s), "
                f"{self.allocation.dev_units} device unit(s), ratio {kept}")
        lines.append(f"monthly price: {self.monthly_cost}")
        lines.append(f"recommendation: {self.recommendation}")
        return "\n".join(lines) + "\n"


def _scaled_time(measurement: Measurement, allocation: Allocation) -> float | None:
    if not measurement.valid:
        return None
    cpu_term = measurement.t_cpu_part / allocation.cpu_units
    if allocation.dev_units > 0:
        dev_term = measurement.t_dev_part / allocation.dev_units
    elif measurement.t_dev_part == 0:
        dev_term = 0.0
    else:
        raise ConfigError("device time measured but the allocation has no device units")
    return cpu_term + dev_term


def _run_command(command: str, timeout: float) -> tuple[int | None, str | None]:
    """(exit_code, note); exit_code None when the command could not run."""
    try:
        argv = shlex.split(command)
        if not argv:
            return None, "empty command"
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        return proc.returncode, None
    except subprocess.TimeoutExpired:
        return None, f"timeout after {timeout}s"
    except OSError as exc:
        return None, str(exc)


def _sim_diff(case: TestCase, tol: ToleranceSpec) -> PerformanceRow:
    """Interpret offloaded vs baseline and compare numerically."""
    if case.baseline is None:
        raise ConfigError(f"performance case '{case.name}' lacks a baseline source")
    try:
        with open(case.source, encoding="utf-8") as f:
            ast = parse_program(f.read())
        with open(case.baseline, encoding="utf-8") as f:
            baseline_ast = parse_program(f.read())
        loops = extract_loops(ast)
        pattern = OffloadPattern(tuple(case.pattern or ()))
        plan = plan_transfers(ast, loops, pattern)
        offloaded = simulate_with_plan(ast, loops, pattern, plan).outputs
        baseline = interpret(baseline_ast)
        verdict = compare_results(offloaded, baseline, tol)
        return PerformanceRow(case.name, None, None, verdict.passed,
                              verdict.worst_variable, verdict.worst_deviation)
    except (ParseError, EvalError, TwoSpaceError, InvalidPattern, LengthMismatch,
            ShapeMismatch, OSError, ValueError) as exc:
        return PerformanceRow(case.name, None, None, False, note=str(exc))


def run_verification(allocation: Allocation, measurement: Measurement,
                     tests: list[TestCase], registry: dict,
                     declared_components: list[str],
                     default_tolerance: ToleranceSpec | None = None,
                     timeout: float = DEFAULT_TIMEOUT) -> VerificationReport:
    """Execute every test case and assemble the report; per-case failures are
    captured, never fatal. Only a structurally broken case (a performance
    case with no baseline) raises ConfigError."""
    tol_default = default_tolerance or ToleranceSpec()
    report = VerificationReport(allocation=allocation,
                                monthly_cost=allocation.monthly_cost)
    scaled = _scaled_time(measurement, allocation)
    throughput = (1.0 / scaled) if scaled else None

    for case in tests:
        if case.kind == "performance":
            if case.command is not None:
                from .evaluation import evaluate_external

                m = evaluate_external(case.command, "", "", timeout=timeout)
                case_scaled = _scaled_time(m, allocation)
                case_tput = (1.0 / case_scaled) if case_scaled else None
                report.performance.append(PerformanceRow(
                    case.name, case_scaled, case_tput,
                    diff_passed=m.valid, note=m.note))
            else:
                row = _sim_diff(case, case.tolerance or tol_default)
                report.performance.append(PerformanceRow(
                    case.name, scaled, throughput, row.diff_passed,
                    row.worst_variable, row.worst_deviation, row.note))
        else:
            code, note = _run_command(case.command, timeout)
            report.regression.append(
                RegressionRow(case.name, passed=code == 0, exit_code=code, note=note))

    for component in declared_components:
        if component not in registry:
            report.uncovered_components.append(component)
            continue
        for idx, command in enumerate(registry[component]):
            code, note = _run_command(command, timeout)
            report.regression.append(RegressionRow(
                f"{component}[{idx}]", passed=code == 0, exit_code=code, note=note))

    diffs_ok = all(row.diff_passed for row in report.performance)
    regressions_ok = all(row.passed for row in report.regression)
    report.recommendation = "ready" if diffs_ok and regressions_ok else "attention"
    return report
