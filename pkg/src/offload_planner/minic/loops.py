"""Loop extraction: nesting, trip counts, offload eligibility, def/use sets.

Eligibility is decided by static rules: (a) canonical header, (b) bounds
statically evaluable over single-assignment constants with a positive trip
count, (c) no unknown calls anywhere in the subtree, (d) the index variable
is never assigned in the body.

defs/uses cover the full loop subtree. Loop-header index updates do not
count as defs (the header is loop control, not a data write), but every
header read (init/bound operands, condition and step variables) counts as
a use, so a loop's own index is always in its uses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .astnodes import (
    Assign,
    BinOp,
    Block,
    Call,
    CallStmt,
    ForLoop,
    Index,
    Num,
    Program,
    Var,
    VarDecl,
    walk,
)


@dataclass(frozen=True)
class LoopInfo:
    loop_id: int
    parent_loop: int | None
    depth: int
    trip_count: int | None
    eligible: bool
    ineligibility_reason: str | None
    defs: frozenset
    uses: frozenset


class LoopTable:
    """All for-loops of a program in source order, with ancestry helpers."""

    def __init__(self, infos: list[LoopInfo], nodes: dict[int, ForLoop]):
        self.infos = tuple(infos)
        self.nodes = nodes
        self.by_id = {info.loop_id: info for info in infos}

    def __iter__(self):
        return iter(self.infos)

    def __len__(self):
        return len(self.infos)

    def eligible(self) -> list[LoopInfo]:
        return [info for info in self.infos if info.eligible]

    def eligible_ids(self) -> list[int]:
        return [info.loop_id for info in self.infos if info.eligible]

    def gene_length(self) -> int:
        return len(self.eligible_ids())

    def ancestors(self, loop_id: int) -> list[int]:
        """Proper ancestors, innermost first."""
        out = []
        cur = self.by_id[loop_id].parent_loop
        while cur is not None:
            out.append(cur)
            cur = self.by_id[cur].parent_loop
        return out

    def is_ancestor(self, a: int, b: int) -> bool:
        return a in self.ancestors(b)

    def subtree_ids(self, root_id: int) -> list[int]:
        return [info.loop_id for info in self.infos
                if info.loop_id == root_id or self.is_ancestor(root_id, info.loop_id)]

    def to_json(self) -> list[dict]:
        return [
            {
                "loop_id": info.loop_id,
                "parent": info.parent_loop,
                "depth": info.depth,
                "trip_count": info.trip_count,
                "eligible": info.eligible,
                "reason": info.ineligibility_reason,
                "defs": sorted(info.defs),
                "uses": sorted(info.uses),
            }
            for info in self.infos
        ]

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def extract_loops(ast: Program) -> LoopTable:
    consts = _single_assignment_constants(ast)
    infos = []
    nodes = {}

    def visit(node, parent_id, depth):
        for loop in _direct_loops(node):
            nodes[loop.node_id] = loop
            infos.append(_analyze(loop, parent_id, depth, consts))
            visit(loop.body, loop.node_id, depth + 1)

    visit(ast, None, 0)
    infos.sort(key=lambda info: info.loop_id)  # node ids are in source order
    return LoopTable(infos, nodes)


def _direct_loops(node):
    """For-loops directly under node, not nested inside another loop."""
    if isinstance(node, ForLoop):
        yield node
        return
    if isinstance(node, Program):
        children = node.items
    elif isinstance(node, Block):
        children = node.body
    else:
        return
    for child in children:
        yield from _direct_loops(child)


def _analyze(loop: ForLoop, parent_id, depth, consts) -> LoopInfo:
    defs, uses = def_use(loop)
    trip = static_trip_count(loop, consts)
    reason = None
    if not loop.canonical:
        reason = (f"non-canonical header: controls ({loop.var}, "
                  f"{loop.cond_var}, {loop.step_var}) differ")
    elif trip is None:
        reason = "bounds not statically evaluable or trip count not positive"
    else:
        unknown = _first_unknown_call(loop)
        if unknown is not None:
            reason = f"unknown call '{unknown}' in loop body"
        elif _index_written(loop):
            reason = f"index variable '{loop.var}' assigned in loop body"
    return LoopInfo(
        loop_id=loop.node_id,
        parent_loop=parent_id,
        depth=depth,
        trip_count=trip,
        eligible=reason is None,
        ineligibility_reason=reason,
        defs=frozenset(defs),
        uses=frozenset(uses),
    )


def def_use(node) -> tuple[set, set]:
    """Exact def/use sets over a statement subtree."""
    defs: set = set()
    uses: set = set()
    _collect(node, defs, uses)
    return defs, uses


def _collect(node, defs, uses):
    if isinstance(node, Assign):
        defs.add(node.name)
        if node.index is not None:
            _expr_uses(node.index, uses)
        _expr_uses(node.value, uses)
    elif isinstance(node, ForLoop):
        _expr_uses(node.init, uses)
        uses.add(node.cond_var)
        _expr_uses(node.bound, uses)
        uses.add(node.step_var)
        _collect(node.body, defs, uses)
    elif isinstance(node, Block):
        for stmt in node.body:
            _collect(stmt, defs, uses)
    elif isinstance(node, CallStmt):
        for arg in node.args:
            _expr_uses(arg, uses)
    elif isinstance(node, (Program,)):
        for item in node.items:
            if not isinstance(item, VarDecl):
                _collect(item, defs, uses)


def _expr_uses(expr, uses):
    if isinstance(expr, Var):
        uses.add(expr.name)
    elif isinstance(expr, Index):
        uses.add(expr.name)
        _expr_uses(expr.index, uses)
    elif isinstance(expr, BinOp):
        _expr_uses(expr.left, uses)
        _expr_uses(expr.right, uses)
    elif isinstance(expr, Call):
        for arg in expr.args:
            _expr_uses(arg, uses)


def _first_unknown_call(loop: ForLoop) -> str | None:
    for node in walk(loop):
        if isinstance(node, (Call, CallStmt)) and not node.intrinsic:
            return node.name
    return None


def _index_written(loop: ForLoop) -> bool:
    for node in walk(loop.body):
        if isinstance(node, Assign) and node.name == loop.var:
            return True
        # a nested header re-driving the same variable also rewrites it
        if isinstance(node, ForLoop) and loop.var in (node.var, node.step_var):
            return True
    return False


def header_written(loop: ForLoop) -> set:
    """Variables written by loop headers in the subtree (loop control writes)."""
    out = set()
    for node in walk(loop):
        if isinstance(node, ForLoop):
            out.add(node.var)
            out.add(node.step_var)
    return out


def _single_assignment_constants(ast: Program) -> dict[str, float]:
    """name -> value for variables never assigned anywhere, folded from their
    declaration initializer (default 0 for scalars without one)."""
    assigned = set()
    for node in walk(ast):
        if isinstance(node, Assign):
            assigned.add(node.name)
        elif isinstance(node, ForLoop):
            assigned.add(node.var)
            assigned.add(node.step_var)
    consts: dict[str, float] = {}
    for item in ast.items:
        if isinstance(item, VarDecl) and not item.is_array and item.name not in assigned:
            value = 0.0 if item.init is None else _fold(item.init, consts)
            if value is not None:
                consts[item.name] = value
    return consts


def _fold(expr, consts) -> float | None:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return consts.get(expr.name)
    if isinstance(expr, BinOp):
        left = _fold(expr.left, consts)
        right = _fold(expr.right, consts)
        if left is None or right is None:
            return None
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if right == 0.0:
            return None
        return left / right
    if isinstance(expr, Call) and expr.intrinsic:
        arg = _fold(expr.args[0], consts)
        if arg is None:
            return None
        fn = {"sin": math.sin, "cos": math.cos, "sqrt": math.sqrt}[expr.name]
        try:
            return fn(arg)
        except ValueError:
            return None
    return None


def static_trip_count(loop: ForLoop, consts) -> int | None:
    """Positive iteration count when the header folds to constants, else None."""
    if not loop.canonical or loop.step <= 0:
        return None
    start = _fold(loop.init, consts)
    bound = _fold(loop.bound, consts)
    if start is None or bound is None:
        return None
    if loop.op == "<":
        trips = math.ceil((bound - start) / loop.step) if bound > start else 0
    else:
        trips = math.floor((bound - start) / loop.step) + 1 if bound >= start else 0
    return int(trips) if trips >= 1 else None
