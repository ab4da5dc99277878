"""Control-flow graph model.

Parses and validates JSON program documents, computes dominators, detects
irreducible control flow, builds the natural-loop forest, and provides the
loop lattice (loops ordered by nesting, completed with TOP and BOT) that the
rest of the analysis is parameterized over.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import DocumentError, IrreducibleLoop

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

Edge = tuple[str, str]


def is_identifier(s: object) -> bool:
    return isinstance(s, str) and bool(_IDENT_RE.match(s))


# ---------------------------------------------------------------------------
# Loop references (the lattice elements)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class LoopRef:
    """A point in the loop lattice: a concrete loop, TOP, or BOT."""

    kind: str  # "loop" | "top" | "bot"
    header: str = ""

    def __str__(self) -> str:
        if self.kind == "top":
            return "TOP"
        if self.kind == "bot":
            return "BOT"
        return self.header


TOP = LoopRef("top")
BOT = LoopRef("bot")


def loop_ref(header: str) -> LoopRef:
    return LoopRef("loop", header)


def parse_loop_ref(text: str) -> LoopRef:
    if text == "TOP":
        return TOP
    if text == "BOT":
        return BOT
    return loop_ref(text)


# ---------------------------------------------------------------------------
# CFG data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    id: str
    wcet: int | str  # concrete cost or symbolic identifier


@dataclass
class Cfg:
    name: str
    blocks: dict[str, Block]  # insertion-ordered
    edges: tuple[Edge, ...]
    entry: str
    exit: str
    succs: dict[str, tuple[str, ...]] = field(init=False)
    preds: dict[str, tuple[str, ...]] = field(init=False)
    block_index: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        succs: dict[str, list[str]] = {b: [] for b in self.blocks}
        preds: dict[str, list[str]] = {b: [] for b in self.blocks}
        for s, t in self.edges:
            succs[s].append(t)
            preds[t].append(s)
        self.succs = {b: tuple(v) for b, v in succs.items()}
        self.preds = {b: tuple(v) for b, v in preds.items()}
        self.block_index = {b: i for i, b in enumerate(self.blocks)}


@dataclass(frozen=True)
class AnnotationSpec:
    """Document-level iteration constraint: target executes at most `max`
    times per entry of `loop` ("TOP" for once-per-run constraints)."""

    target: str
    loop: str
    max: int | str


@dataclass(frozen=True)
class VariantSpec:
    id: str
    wcet: int | str
    annotation: tuple[str, int | str] | None  # (loop, max)


@dataclass(frozen=True)
class SplitSpec:
    block: str
    variants: tuple[VariantSpec, ...]


@dataclass
class Program:
    cfg: Cfg
    loop_bounds: dict[str, int | str]
    annotations: tuple[AnnotationSpec, ...]
    splits: tuple[SplitSpec, ...]


# ---------------------------------------------------------------------------
# Document parsing / validation
# ---------------------------------------------------------------------------


def _require_keys(obj: dict, allowed: set[str], required: set[str], what: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise DocumentError(f"{what}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise DocumentError(f"{what}: missing keys {sorted(missing)}")


def _check_value(v: object, what: str, minimum: int = 0) -> int | str:
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise DocumentError(f"{what}: expected integer or identifier, got {v!r}")
    if isinstance(v, int):
        if v < minimum:
            raise DocumentError(f"{what}: must be >= {minimum}, got {v}")
        return v
    if not is_identifier(v):
        raise DocumentError(f"{what}: {v!r} is not a valid identifier")
    return v


def parse_program(text: str) -> Program:
    """Parse and validate a JSON program document."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise DocumentError("document root must be a JSON object")
    _require_keys(
        obj,
        allowed={"name", "blocks", "edges", "entry", "exit", "loop_bounds",
                 "annotations", "splits"},
        required={"name", "blocks", "edges", "entry", "exit"},
        what="document",
    )
    name = obj["name"]
    if not isinstance(name, str):
        raise DocumentError("name must be a string")

    raw_blocks = obj["blocks"]
    if not isinstance(raw_blocks, list) or not raw_blocks:
        raise DocumentError("blocks must be a non-empty list")
    blocks: dict[str, Block] = {}
    for item in raw_blocks:
        if not isinstance(item, dict):
            raise DocumentError(f"block entry must be an object, got {item!r}")
        _require_keys(item, {"id", "wcet"}, {"id", "wcet"}, "block")
        bid = item["id"]
        if not is_identifier(bid):
            raise DocumentError(f"block id {bid!r} is not a valid identifier")
        if bid in blocks:
            raise DocumentError(f"duplicate block id {bid!r}")
        wcet = _check_value(item["wcet"], f"block {bid} wcet")
        blocks[bid] = Block(bid, wcet)

    raw_edges = obj["edges"]
    if not isinstance(raw_edges, list):
        raise DocumentError("edges must be a list")
    edges: list[Edge] = []
    seen_edges: set[Edge] = set()
    for item in raw_edges:
        if (not isinstance(item, list) or len(item) != 2
                or not all(isinstance(x, str) for x in item)):
            raise DocumentError(f"edge must be a [source, target] pair, got {item!r}")
        s, t = item
        for end in (s, t):
            if end not in blocks:
                raise DocumentError(f"edge {item!r} references unknown block {end!r}")
        if (s, t) in seen_edges:
            raise DocumentError(f"duplicate edge {item!r}")
        seen_edges.add((s, t))
        edges.append((s, t))

    entry = obj["entry"]
    exit_ = obj["exit"]
    for role, bid in (("entry", entry), ("exit", exit_)):
        if bid not in blocks:
            raise DocumentError(f"{role} block {bid!r} does not exist")
    if any(s == exit_ for s, _ in edges):
        raise DocumentError(f"exit block {exit_!r} must not have outgoing edges")

    g = Cfg(name, blocks, tuple(edges), entry, exit_)
    _check_connectivity(g)

    loop_bounds: dict[str, int | str] = {}
    raw_bounds = obj.get("loop_bounds", {})
    if not isinstance(raw_bounds, dict):
        raise DocumentError("loop_bounds must be an object")
    for header, bound in raw_bounds.items():
        if header not in blocks:
            raise DocumentError(f"loop bound for unknown block {header!r}")
        loop_bounds[header] = _check_value(bound, f"loop bound for {header}", minimum=1)

    annotations: list[AnnotationSpec] = []
    raw_ann = obj.get("annotations", [])
    if not isinstance(raw_ann, list):
        raise DocumentError("annotations must be a list")
    for item in raw_ann:
        if not isinstance(item, dict):
            raise DocumentError(f"annotation must be an object, got {item!r}")
        _require_keys(item, {"target", "loop", "max"}, {"target", "loop", "max"},
                      "annotation")
        target = item["target"]
        if not isinstance(target, str):
            raise DocumentError(f"annotation target must be a string, got {target!r}")
        loop = item["loop"]
        if loop != "TOP" and loop not in blocks:
            raise DocumentError(f"annotation loop {loop!r} is neither TOP nor a block")
        mx = _check_value(item["max"], f"annotation max for {target}")
        annotations.append(AnnotationSpec(target, loop, mx))

    splits: list[SplitSpec] = []
    raw_splits = obj.get("splits", [])
    if not isinstance(raw_splits, list):
        raise DocumentError("splits must be a list")
    for item in raw_splits:
        if not isinstance(item, dict):
            raise DocumentError(f"split must be an object, got {item!r}")
        _require_keys(item, {"block", "variants"}, {"block", "variants"}, "split")
        sblock = item["block"]
        if sblock not in blocks:
            raise DocumentError(f"split references unknown block {sblock!r}")
        raw_vars = item["variants"]
        if not isinstance(raw_vars, list) or not raw_vars:
            raise DocumentError(f"split of {sblock!r}: variants must be non-empty")
        variants: list[VariantSpec] = []
        for v in raw_vars:
            if not isinstance(v, dict):
                raise DocumentError(f"variant must be an object, got {v!r}")
            _require_keys(v, {"id", "wcet", "annotation"}, {"id", "wcet"}, "variant")
            vid = v["id"]
            if not is_identifier(vid):
                raise DocumentError(f"variant id {vid!r} is not a valid identifier")
            vw = _check_value(v["wcet"], f"variant {vid} wcet")
            vann = None
            raw_va = v.get("annotation")
            if raw_va is not None:
                if not isinstance(raw_va, dict):
                    raise DocumentError(f"variant {vid}: annotation must be an object")
                _require_keys(raw_va, {"loop", "max"}, {"loop", "max"},
                              f"variant {vid} annotation")
                vloop = raw_va["loop"]
                if vloop != "TOP" and vloop not in blocks:
                    raise DocumentError(
                        f"variant {vid}: loop {vloop!r} is neither TOP nor a block")
                vmax = _check_value(raw_va["max"], f"variant {vid} annotation max")
                vann = (vloop, vmax)
            variants.append(VariantSpec(vid, vw, vann))
        splits.append(SplitSpec(sblock, tuple(variants)))

    return Program(g, loop_bounds, tuple(annotations), tuple(splits))


def _check_connectivity(g: Cfg) -> None:
    seen = {g.entry}
    stack = [g.entry]
    while stack:
        for t in g.succs[stack.pop()]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    unreachable = set(g.blocks) - seen
    if unreachable:
        raise DocumentError(f"blocks unreachable from entry: {sorted(unreachable)}")
    # Every block must be able to reach the exit.
    seen = {g.exit}
    stack = [g.exit]
    while stack:
        for t in g.preds[stack.pop()]:
            if t not in seen:
                seen.add(t)
                stack.append(t)
    stuck = set(g.blocks) - seen
    if stuck:
        raise DocumentError(f"blocks that cannot reach exit: {sorted(stuck)}")


# ---------------------------------------------------------------------------
# Dominators
# ---------------------------------------------------------------------------


def _reverse_postorder(g: Cfg) -> list[str]:
    order: list[str] = []
    seen: set[str] = set()
    stack: list[tuple[str, int]] = [(g.entry, 0)]
    seen.add(g.entry)
    while stack:
        node, i = stack.pop()
        succs = g.succs[node]
        if i < len(succs):
            stack.append((node, i + 1))
            t = succs[i]
            if t not in seen:
                seen.add(t)
                stack.append((t, 0))
        else:
            order.append(node)
    order.reverse()
    return order


def dominators(g: Cfg) -> dict[str, str | None]:
    """Immediate dominators for every block (the entry maps to None).

    Iterative two-finger intersection over reverse postorder.
    """
    order = _reverse_postorder(g)
    rpo = {b: i for i, b in enumerate(order)}
    idom: dict[str, str] = {g.entry: g.entry}

    def intersect(a: str, b: str) -> str:
        while a != b:
            while rpo[a] > rpo[b]:
                a = idom[a]
            while rpo[b] > rpo[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for b in order[1:]:
            new = None
            for p in g.preds[b]:
                if p in idom:
                    new = p if new is None else intersect(new, p)
            if new is not None and idom.get(b) != new:
                idom[b] = new
                changed = True
    result: dict[str, str | None] = {b: idom[b] for b in order}
    result[g.entry] = None
    return result


def dominates(idom: dict[str, str | None], a: str, b: str) -> bool:
    """True when every path from the entry to b passes through a."""
    node: str | None = b
    while node is not None:
        if node == a:
            return True
        node = idom[node]
    return False


# ---------------------------------------------------------------------------
# Natural loops, reducibility, the loop forest
# ---------------------------------------------------------------------------


def back_edges(g: Cfg, idom: dict[str, str | None]) -> list[Edge]:
    return [(s, t) for s, t in g.edges if dominates(idom, t, s)]


def check_reducible(g: Cfg, idom: dict[str, str | None]) -> None:
    """Raise IrreducibleLoop when the graph minus back-edges has a cycle."""
    backs = set(back_edges(g, idom))
    succs: dict[str, list[str]] = {b: [] for b in g.blocks}
    for e in g.edges:
        if e not in backs:
            succs[e[0]].append(e[1])
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {b: WHITE for b in g.blocks}
    parent: dict[str, str] = {}
    for root in g.blocks:
        if color[root] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(root, 0)]
        color[root] = GRAY
        while stack:
            node, i = stack.pop()
            if i < len(succs[node]):
                stack.append((node, i + 1))
                t = succs[node][i]
                if color[t] == WHITE:
                    color[t] = GRAY
                    parent[t] = node
                    stack.append((t, 0))
                elif color[t] == GRAY:
                    cycle = [node]
                    cur = node
                    while cur != t:
                        cur = parent[cur]
                        cycle.append(cur)
                    cycle.reverse()
                    raise IrreducibleLoop(cycle)
            else:
                color[node] = BLACK


@dataclass(frozen=True)
class LoopInfo:
    header: str
    body: frozenset[str]
    back_edges: tuple[Edge, ...]
    entry_edges: tuple[Edge, ...]  # edges into the header from outside the body
    exit_edges: tuple[Edge, ...]  # edges leaving the body
    bound: int | str  # max iterations per entry; identifier when unknown


@dataclass
class LoopForest:
    loops: dict[str, LoopInfo]  # header -> LoopInfo, document order
    parent: dict[str, str | None]  # header -> enclosing header (None = top level)
    _innermost: dict[str, str | None] = field(init=False)

    def __post_init__(self) -> None:
        inner: dict[str, str | None] = {}
        for header, loop in self.loops.items():
            for b in loop.body:
                cur = inner.get(b)
                if cur is None or len(loop.body) < len(self.loops[cur].body):
                    inner[b] = header
        self._innermost = inner

    def innermost(self, block: str) -> str | None:
        """Header of the smallest loop containing block, None when loop-free."""
        return self._innermost.get(block)

    def children(self, level: str | None) -> list[str]:
        return [h for h, p in self.parent.items() if p == level]

    def ancestors(self, header: str) -> list[str]:
        """Enclosing headers from the loop itself outward."""
        chain = []
        cur: str | None = header
        while cur is not None:
            chain.append(cur)
            cur = self.parent[cur]
        return chain


def build_loop_forest(g: Cfg, bounds: dict[str, int | str] | None = None) -> LoopForest:
    """Compute the natural-loop forest; refuses irreducible control flow.

    `bounds` maps headers to iteration bounds; a loop without one gets the
    symbolic bound "x_<header>".
    """
    idom = dominators(g)
    check_reducible(g, idom)
    backs = back_edges(g, idom)
    by_header: dict[str, list[Edge]] = {}
    for s, t in backs:
        by_header.setdefault(t, []).append((s, t))

    bounds = bounds or {}
    for header in bounds:
        if header not in by_header:
            raise DocumentError(f"loop bound for {header!r}, which is not a loop header")

    loops: dict[str, LoopInfo] = {}
    headers = sorted(by_header, key=g.block_index.__getitem__)
    for h in headers:
        body = {h}
        stack = [s for s, _ in by_header[h]]
        while stack:
            n = stack.pop()
            if n in body:
                continue
            body.add(n)
            stack.extend(g.preds[n])
        entry = tuple((u, v) for u, v in g.edges if v == h and u not in body)
        exits = tuple((u, v) for u, v in g.edges if u in body and v not in body)
        bound = bounds.get(h, f"x_{h}")
        loops[h] = LoopInfo(h, frozenset(body), tuple(by_header[h]), entry, exits,
                            bound)

    # Reducible loops nest cleanly; anything else is a construction bug.
    hs = list(loops)
    for i, a in enumerate(hs):
        for b in hs[i + 1:]:
            ba, bb = loops[a].body, loops[b].body
            assert ba <= bb or bb <= ba or not (ba & bb), (
                f"overlapping loops {a} and {b}")

    parent: dict[str, str | None] = {}
    for h in hs:
        enclosing = [o for o in hs if o != h and loops[h].body < loops[o].body]
        if enclosing:
            parent[h] = min(enclosing, key=lambda o: len(loops[o].body))
        else:
            parent[h] = None
    return LoopForest(loops, parent)


# ---------------------------------------------------------------------------
# The loop lattice: nesting order completed with TOP and BOT
# ---------------------------------------------------------------------------


def loop_leq(a: LoopRef, b: LoopRef, f: LoopForest) -> bool:
    """a is nested inside (or equal to) b."""
    if a == b or a == BOT or b == TOP:
        return True
    if a == TOP or b == BOT:
        return False
    # A header outside this forest is comparable only to itself and the
    # lattice extremes.
    info = f.loops.get(b.header)
    return info is not None and a.header in info.body


def loop_meet(a: LoopRef, b: LoopRef, f: LoopForest) -> LoopRef:
    """Greatest lower bound: the inner loop when nested, BOT when unrelated."""
    if loop_leq(a, b, f):
        return a
    if loop_leq(b, a, f):
        return b
    return BOT


def loop_join(a: LoopRef, b: LoopRef, f: LoopForest) -> LoopRef:
    """Least upper bound: the innermost common enclosing loop, else TOP."""
    if loop_leq(a, b, f):
        return b
    if loop_leq(b, a, f):
        return a
    # Both are concrete loops here (TOP/BOT cases are always comparable).
    if a.header not in f.loops or b.header not in f.loops:
        return TOP
    common = [h for h in f.ancestors(a.header) if b.header in f.loops[h].body]
    return loop_ref(common[0]) if common else TOP
