"""Accelerator offload planning toolkit.

Pipeline: parse a MiniC program, search offload patterns with a genetic
algorithm over measured or simulated processing times, plan host/device
data transfers with batching, derive a CPU:device resource ratio, size the
allocation under a cost budget, and auto-verify the deployment.
"""

from .evaluation import (
    INFINITE_TIME,
    CostAnnotations,
    Measurement,
    ToleranceSpec,
    compare_results,
    evaluate_external,
    evaluate_sim,
    ulp_distance,
)
from .ga import GaConfig, Individual, SearchResult, run_ga
from .minic import extract_loops, interpret, parse_program
from .offload import (
    OffloadPattern,
    TransferPlan,
    emit_annotated,
    plan_transfers,
    simulate_with_plan,
    strip_pragmas,
    validate_pattern,
)
from .planner import (
    CPU_ONLY,
    Allocation,
    PriceBook,
    ResourceRatio,
    compute_ratio,
    plan_amount,
)
from .verify import TestCase, VerificationReport, run_verification

__version__ = "0.1.0"

__all__ = [
    "Allocation", "CPU_ONLY", "CostAnnotations", "GaConfig", "INFINITE_TIME",
    "Individual", "Measurement", "OffloadPattern", "PriceBook",
    "ResourceRatio", "SearchResult", "TestCase", "ToleranceSpec",
    "TransferPlan", "VerificationReport", "compare_results", "compute_ratio",
    "emit_annotated", "evaluate_external", "evaluate_sim", "extract_loops",
    "interpret", "parse_program", "plan_amount", "plan_transfers", "run_ga",
    "run_verification", "simulate_with_plan", "strip_pragmas", "ulp_distance",
    "validate_pattern",
]
