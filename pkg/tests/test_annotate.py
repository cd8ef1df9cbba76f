"""Directive emission tests: identity, the hand-prepared golden file, and
the strip-pragmas inverse on every corpus program and valid pattern."""

import itertools
from pathlib import Path

from offload_planner.minic import extract_loops, parse_program
from offload_planner.offload import (
    OffloadPattern,
    emit_annotated,
    plan_transfers,
    strip_pragmas,
    validate_pattern,
)

from conftest import corpus_programs

DATA = Path(__file__).parent / "data"


def test_all_zero_pattern_is_identity():
    for path in corpus_programs():
        text = path.read_text(encoding="utf-8")
        ast = parse_program(text)
        loops = extract_loops(ast)
        pattern = OffloadPattern((0,) * loops.gene_length())
        plan = plan_transfers(ast, loops, pattern)
        assert emit_annotated(ast, pattern, plan, loops) == text


def test_single_region_matches_golden_file():
    text = (DATA / "single_region.mc").read_text(encoding="utf-8")
    golden = (DATA / "single_region_golden.acc.mc").read_text(encoding="utf-8")
    ast = parse_program(text)
    loops = extract_loops(ast)
    pattern = OffloadPattern((1,))
    plan = plan_transfers(ast, loops, pattern)
    annotated = emit_annotated(ast, pattern, plan, loops)
    assert annotated == golden
    inserted = [line for line in annotated.split("\n")
                if line.startswith("#pragma")]
    assert inserted == ["#pragma acc data copyin(a)",
                        "#pragma acc kernels",
                        "#pragma acc data copyout(a)"]


def test_strip_pragmas_recovers_source_for_all_valid_patterns():
    for path in corpus_programs():
        text = path.read_text(encoding="utf-8")
        ast = parse_program(text)
        loops = extract_loops(ast)
        for bits in itertools.product((0, 1), repeat=loops.gene_length()):
            pattern = OffloadPattern(bits)
            if validate_pattern(pattern, loops) is not None:
                continue
            plan = plan_transfers(ast, loops, pattern)
            annotated = emit_annotated(ast, pattern, plan, loops)
            assert strip_pragmas(annotated) == text, (path.name, bits)


def test_emission_is_deterministic():
    text = (DATA / "single_region.mc").read_text(encoding="utf-8")
    ast = parse_program(text)
    loops = extract_loops(ast)
    pattern = OffloadPattern((1,))
    plan = plan_transfers(ast, loops, pattern)
    assert emit_annotated(ast, pattern, plan, loops) == \
        emit_annotated(ast, pattern, plan, loops)


def test_kernels_pragma_per_offloaded_loop():
    text = (DATA / "single_region.mc").read_text(encoding="utf-8")
    ast = parse_program(text)
    loops = extract_loops(ast)
    pattern = OffloadPattern((1,))
    plan = plan_transfers(ast, loops, pattern)
    annotated = emit_annotated(ast, pattern, plan, loops)
    lines = annotated.split("\n")
    kernels_at = [i for i, line in enumerate(lines)
                  if line == "#pragma acc kernels"]
    assert len(kernels_at) == 1
    assert lines[kernels_at[0] + 1].startswith("for(")
