"""Offload patterns, transfer planning, directive emission, and the
two-memory-space execution model.

A pattern assigns one bit per eligible loop (loop-table order). A set bit
offloads that loop; the loop plus its subtree is an offload region executed
as one device kernel. Patterns where an offloaded loop has an offloaded
ancestor are invalid.

Transfer planning, per region:
  * host-to-device (copyin) for every variable whose value flows into the
    region from outside: read in the region before the region writes it;
  * device-to-host (copyout) for every variable the region writes that CPU
    code can later read or rewrite;
  * each op anchors at the region root, then hoists outward past enclosing
    CPU loops while the enclosing loop has no blocking access, batching the
    transfer to run once instead of once per enclosing iteration.

Blocking accesses include loop-header index updates: LoopInfo.defs excludes
loop control writes, but hoisting a copyin past a header that rewrites the
transferred variable every iteration would ship a stale value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .minic.astnodes import (
    Assign,
    Block,
    CallStmt,
    ForLoop,
    Index,
    Program,
    Var,
    VarDecl,
)
from .minic.interp import Env, EvalError, Executor
from .minic.loops import LoopTable, extract_loops

HOST_TO_DEVICE = "host_to_device"
DEVICE_TO_HOST = "device_to_host"


class LengthMismatch(Exception):
    pass


class InvalidPattern(Exception):
    pass


@dataclass(frozen=True)
class OffloadPattern:
    bits: tuple

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("pattern bits must be 0 or 1")

    def __len__(self):
        return len(self.bits)

    def as_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def to_json(self, loops: LoopTable) -> dict:
        return {"bits": list(self.bits), "loop_ids": loops.eligible_ids()}

    @staticmethod
    def from_json(data: dict) -> "OffloadPattern":
        return OffloadPattern(tuple(int(b) for b in data["bits"]))


def validate_pattern(pattern: OffloadPattern, loops: LoopTable) -> str | None:
    """None when valid; otherwise a reason naming the offending loop pair."""
    eligible = loops.eligible_ids()
    if len(pattern.bits) != len(eligible):
        raise LengthMismatch(
            f"pattern length {len(pattern.bits)} != eligible loop count {len(eligible)}")
    offloaded = {lid for lid, bit in zip(eligible, pattern.bits) if bit}
    for lid in sorted(offloaded):
        for anc in loops.ancestors(lid):
            if anc in offloaded:
                return (f"loop {lid} and its ancestor {anc} are both offloaded; "
                        f"regions cannot nest")
    return None


def offloaded_ids(pattern: OffloadPattern, loops: LoopTable) -> list[int]:
    return [lid for lid, bit in zip(loops.eligible_ids(), pattern.bits) if bit]


@dataclass(frozen=True)
class TransferOp:
    var: str
    direction: str            # HOST_TO_DEVICE | DEVICE_TO_HOST
    anchor_loop: int          # fires on every entry/exit of this loop
    position: str             # "before" | "after"
    hoisted: bool
    bytes: int
    region: int               # region root the op serves


@dataclass(frozen=True)
class TransferPlan:
    ops: tuple

    def before(self, loop_id: int) -> list[TransferOp]:
        return [op for op in self.ops
                if op.anchor_loop == loop_id and op.position == "before"]

    def after(self, loop_id: int) -> list[TransferOp]:
        return [op for op in self.ops
                if op.anchor_loop == loop_id and op.position == "after"]

    def for_var(self, var: str) -> list[TransferOp]:
        return [op for op in self.ops if op.var == var]


def plan_transfers(ast: Program, loops: LoopTable, pattern: OffloadPattern,
                   hoist: bool = True) -> TransferPlan:
    reason = validate_pattern(pattern, loops)
    if reason is not None:
        raise InvalidPattern(reason)
    decls = {item.name: item for item in ast.items if isinstance(item, VarDecl)}
    ops = []
    for root in offloaded_ids(pattern, loops):
        node = loops.nodes[root]
        copyin = sorted(_upward_exposed(node, loops))
        later = _cpu_later_accesses(ast, loops, root)
        copyout = sorted(loops.by_id[root].defs & later)
        for var in copyin:
            anchor, hoisted = _hoist_anchor(loops, root, var, writes_block=True,
                                            reads_block=False, hoist=hoist)
            ops.append(TransferOp(var, HOST_TO_DEVICE, anchor, "before",
                                  hoisted, decls[var].byte_size, root))
        for var in copyout:
            anchor, hoisted = _hoist_anchor(loops, root, var, writes_block=True,
                                            reads_block=True, hoist=hoist)
            ops.append(TransferOp(var, DEVICE_TO_HOST, anchor, "after",
                                  hoisted, decls[var].byte_size, root))
    return TransferPlan(tuple(ops))


def _upward_exposed(region: ForLoop, loops: LoopTable) -> set:
    """Variables read inside the region before the region writes them: the
    values a kernel consumes from host memory.

    MiniC has no branches, so a single ordered walk is exact; a nested loop
    whose static trip count is unknown may run zero times, so its writes
    only count when the trip is statically positive.
    """
    exposed: set = set()

    def read(name, written):
        if name not in written:
            exposed.add(name)

    def walk_expr(expr, written):
        if isinstance(expr, Var):
            read(expr.name, written)
        elif isinstance(expr, Index):
            read(expr.name, written)
            walk_expr(expr.index, written)
        elif hasattr(expr, "left"):
            walk_expr(expr.left, written)
            walk_expr(expr.right, written)
        elif hasattr(expr, "args"):
            for arg in expr.args:
                walk_expr(arg, written)

    def walk_stmt(stmt, written):
        if isinstance(stmt, Assign):
            if stmt.index is not None:
                walk_expr(stmt.index, written)
            walk_expr(stmt.value, written)
            written.add(stmt.name)
        elif isinstance(stmt, Block):
            for inner in stmt.body:
                walk_stmt(inner, written)
        elif isinstance(stmt, ForLoop):
            walk_expr(stmt.init, written)
            written.add(stmt.var)
            read(stmt.cond_var, written)
            walk_expr(stmt.bound, written)
            read(stmt.step_var, written)
            written.add(stmt.step_var)
            info = loops.by_id.get(stmt.node_id)
            body_written = set(written)
            walk_stmt(stmt.body, body_written)
            if info is not None and info.trip_count is not None and info.trip_count >= 1:
                written |= body_written
        elif isinstance(stmt, CallStmt):
            for arg in stmt.args:
                walk_expr(arg, written)

    walk_stmt(region, set())
    return exposed


def _access_sets(node, skip_id: int | None) -> tuple[set, set]:
    """(reads, writes) over a subtree, counting loop-header control accesses,
    skipping the subtree rooted at skip_id."""
    reads: set = set()
    writes: set = set()

    def walk_stmt(stmt):
        if getattr(stmt, "node_id", None) == skip_id:
            return
        if isinstance(stmt, Assign):
            writes.add(stmt.name)
            if stmt.index is not None:
                _expr_reads(stmt.index, reads)
            _expr_reads(stmt.value, reads)
        elif isinstance(stmt, Block):
            for inner in stmt.body:
                walk_stmt(inner)
        elif isinstance(stmt, ForLoop):
            writes.add(stmt.var)
            writes.add(stmt.step_var)
            _expr_reads(stmt.init, reads)
            reads.add(stmt.cond_var)
            _expr_reads(stmt.bound, reads)
            reads.add(stmt.step_var)
            walk_stmt(stmt.body)
        elif isinstance(stmt, CallStmt):
            for arg in stmt.args:
                _expr_reads(arg, reads)

    walk_stmt(node)
    return reads, writes


def _expr_reads(expr, reads):
    if isinstance(expr, Var):
        reads.add(expr.name)
    elif isinstance(expr, Index):
        reads.add(expr.name)
        _expr_reads(expr.index, reads)
    elif hasattr(expr, "left"):
        _expr_reads(expr.left, reads)
        _expr_reads(expr.right, reads)
    elif hasattr(expr, "args"):
        for arg in expr.args:
            _expr_reads(arg, reads)


def _hoist_anchor(loops: LoopTable, root: int, var: str,
                  writes_block: bool, reads_block: bool,
                  hoist: bool) -> tuple[int, bool]:
    """Hoist outward one enclosing loop at a time until a blocking CPU-side
    access of var appears inside that loop outside the region."""
    anchor = root
    if not hoist:
        return anchor, False
    inner = root
    for enclosing in loops.ancestors(root):
        reads, writes = _access_sets(loops.nodes[enclosing], skip_id=inner)
        if writes_block and var in writes:
            break
        if reads_block and var in reads:
            break
        anchor = enclosing
        inner = enclosing
    return anchor, anchor != root


def _cpu_later_accesses(ast: Program, loops: LoopTable, root: int) -> set:
    """Variables CPU code can touch after some execution of the region: any
    access inside an enclosing loop outside the region (later iterations),
    plus accesses in statements after the region at each nesting level."""
    later: set = set()
    path = _path_to(ast, root)
    skip = root
    for container in reversed(path):
        if isinstance(container, ForLoop) and container.node_id != root:
            reads, writes = _access_sets(container, skip_id=skip)
            later |= reads | writes
            skip = container.node_id
        elif isinstance(container, (Program, Block)):
            children = container.items if isinstance(container, Program) else container.body
            seen = False
            for child in children:
                if seen and not isinstance(child, VarDecl):
                    reads, writes = _access_sets(child, skip_id=None)
                    later |= reads | writes
                if _contains(child, skip):
                    seen = True
    return later


def _path_to(ast: Program, target_id: int) -> list:
    """Containers from the program root down to (excluding) the target loop."""

    def search(node, path):
        if getattr(node, "node_id", None) == target_id:
            return list(path)
        children = ()
        if isinstance(node, Program):
            children = node.items
        elif isinstance(node, Block):
            children = node.body
        elif isinstance(node, ForLoop):
            children = (node.body,)
        for child in children:
            found = search(child, path + [node])
            if found is not None:
                return found
        return None

    result = search(ast, [])
    if result is None:
        raise KeyError(f"loop {target_id} not found")
    return result


def _contains(node, target_id: int) -> bool:
    if getattr(node, "node_id", None) == target_id:
        return True
    children = ()
    if isinstance(node, Block):
        children = node.body
    elif isinstance(node, ForLoop):
        children = (node.body,)
    return any(_contains(child, target_id) for child in children)


# -- directive emission --------------------------------------------------

PRAGMA_PREFIX = "#pragma"


def emit_annotated(ast: Program, pattern: OffloadPattern, plan: TransferPlan,
                   loops: LoopTable | None = None) -> str:
    """Insert copyin/kernels/copyout directive lines into the original
    source. Stripping lines that begin with #pragma recovers the input
    byte-for-byte."""
    if loops is None:
        loops = extract_loops(ast)
    roots = set(offloaded_ids(pattern, loops))
    before: dict[int, list[str]] = {}
    after: dict[int, list[str]] = {}
    anchored = sorted({op.anchor_loop for op in plan.ops} | roots)
    for lid in anchored:  # ascending id: outer loops first on shared lines
        node = loops.nodes[lid]
        lines = before.setdefault(node.line, [])
        lines.extend(f"{PRAGMA_PREFIX} acc data copyin({op.var})"
                     for op in plan.before(lid))
        if lid in roots:
            lines.append(f"{PRAGMA_PREFIX} acc kernels")
    for lid in reversed(anchored):  # inner loops exit first
        node = loops.nodes[lid]
        lines = after.setdefault(node.end_line, [])
        lines.extend(f"{PRAGMA_PREFIX} acc data copyout({op.var})"
                     for op in plan.after(lid))
    out = []
    for lineno, text in enumerate(ast.source.split("\n"), start=1):
        out.extend(before.get(lineno, ()))
        out.append(text)
        out.extend(after.get(lineno, ()))
    return "\n".join(out)


def strip_pragmas(text: str) -> str:
    return "\n".join(line for line in text.split("\n")
                     if not line.startswith(PRAGMA_PREFIX))


# -- two-memory-space execution -------------------------------------------

class TwoSpaceError(EvalError):
    """A device-side read hit a value that was never transferred or computed."""


_POISON = object()


class _DualEnv(Env):
    """Host and device stores with explicit synchronization.

    Reads and writes route to the store named by ``context``. Device storage
    materializes on first transfer or kernel write; reading a cell the device
    never received is an error. Freshness ticks record which space holds each
    variable's newest value.
    """

    def __init__(self):
        super().__init__()
        self.device: dict[str, float | list] = {}
        self.context = "host"
        self.tick = 0
        self.host_w: dict[str, int] = {}
        self.dev_w: dict[str, int] = {}

    def declare(self, decl: VarDecl, init_value):
        super().declare(decl, init_value)
        self.host_w[decl.name] = self._next_tick()
        self.dev_w[decl.name] = -1

    def _next_tick(self) -> int:
        self.tick += 1
        return self.tick

    def read(self, name):
        if self.context == "host":
            return self.values[name]
        value = self._device_cell(name)
        if value is _POISON:
            raise TwoSpaceError(f"device read of '{name}' before any transfer")
        return value

    def write(self, name, value):
        if self.context == "host":
            self.values[name] = value
            self.host_w[name] = self._next_tick()
        else:
            self.device[name] = value
            self.dev_w[name] = self._next_tick()

    def read_elem(self, name, idx):
        if self.context == "host":
            return self.values[name][idx]
        cell = self._device_cell(name)
        if cell is _POISON or cell[idx] is _POISON:
            raise TwoSpaceError(
                f"device read of '{name}[{idx}]' before any transfer")
        return cell[idx]

    def write_elem(self, name, idx, value):
        if self.context == "host":
            self.values[name][idx] = value
            self.host_w[name] = self._next_tick()
        else:
            if name not in self.device:
                self.device[name] = [_POISON] * len(self.values[name])
            self.device[name][idx] = value
            self.dev_w[name] = self._next_tick()

    def array_len(self, name):
        return len(self.values[name])

    def _device_cell(self, name):
        if name not in self.device:
            raise TwoSpaceError(f"device read of '{name}' before any transfer")
        return self.device[name]

    def copy_in(self, name):
        value = self.values[name]
        self.device[name] = list(value) if isinstance(value, list) else value
        self.dev_w[name] = self.host_w[name]

    def copy_out(self, name):
        value = self.device[name]
        self.values[name] = list(value) if isinstance(value, list) else value
        self.host_w[name] = self.dev_w[name]

    def flush_device(self):
        """Program teardown: device-fresh values become visible to the host."""
        for name, dev_tick in self.dev_w.items():
            if name in self.device and dev_tick > self.host_w.get(name, -1):
                self.copy_out(name)


@dataclass
class SimResult:
    outputs: dict
    op_counts: dict
    total_transfers: int


class _OffloadExecutor(Executor):
    def __init__(self, env: _DualEnv, plan: TransferPlan, regions: set):
        super().__init__(env)
        self.plan = plan
        self.regions = regions
        self.op_counts: dict[TransferOp, int] = {op: 0 for op in plan.ops}

    def _fire(self, op: TransferOp):
        if op.direction == HOST_TO_DEVICE:
            self.env.copy_in(op.var)
        else:
            self.env.copy_out(op.var)
        self.op_counts[op] += 1

    def enter_loop(self, loop: ForLoop):
        for op in self.plan.before(loop.node_id):
            self._fire(op)
        if loop.node_id in self.regions:
            assert self.env.context == "host", "regions cannot nest"
            self.env.context = "device"

    def exit_loop(self, loop: ForLoop):
        if loop.node_id in self.regions:
            self.env.context = "host"
        for op in self.plan.after(loop.node_id):
            self._fire(op)


def simulate_with_plan(ast: Program, loops: LoopTable, pattern: OffloadPattern,
                       plan: TransferPlan) -> SimResult:
    """Execute with separate host/device memories, synchronizing only at the
    plan's anchors (plus the teardown flush). The result is comparable
    bit-for-bit with plain interpretation when the plan is sound."""
    reason = validate_pattern(pattern, loops)
    if reason is not None:
        raise InvalidPattern(reason)
    env = _DualEnv()
    executor = _OffloadExecutor(env, plan, set(offloaded_ids(pattern, loops)))
    executor.run_program(ast)
    env.flush_device()
    outputs: dict[str, float | tuple] = {}
    for item in ast.items:
        if isinstance(item, VarDecl):
            value = env.values[item.name]
            if isinstance(value, list):
                if any(cell is _POISON for cell in value):
                    raise TwoSpaceError(
                        f"'{item.name}' holds untransferred device garbage at exit")
                value = tuple(value)
            elif value is _POISON:
                raise TwoSpaceError(
                    f"'{item.name}' holds untransferred device garbage at exit")
            outputs[item.name] = value
    return SimResult(outputs, executor.op_counts, sum(executor.op_counts.values()))


# -- pattern file io --------------------------------------------------------

def save_pattern(path, pattern: OffloadPattern, loops: LoopTable):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(pattern.to_json(loops), f, indent=2, sort_keys=True)
        f.write("\n")


def load_pattern(path) -> OffloadPattern:
    with open(path, encoding="utf-8") as f:
        return OffloadPattern.from_json(json.load(f))
