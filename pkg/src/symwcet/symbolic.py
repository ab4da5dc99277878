"""Symbolic WCET formulas.

A formula is an abstract WCET expression over unknowns: leaf costs left as
identifiers, loop iteration counts, and annotation caps.  Formulas are kept
in a canonical shape (flattened, sorted n-ary sums/maxima, no trivial
scalars or zeros) and simplified by a terminating rewrite system whose
normal form is schedule-independent.  Substitution and full evaluation fold
through the same operators the concrete tree evaluation uses, so a complete
instantiation of the formula equals evaluating the instantiated tree.

Identifier values are per-execution constants: an unknown cost stands for
"this always takes k cycles", i.e. a rank-uniform ranking (l, [|k]).
Rankings with finite prefixes arise only from annotation caps, which the
formula layer tracks explicitly through `ann` nodes.  The constant-factoring
rule on maxima relies on this.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

from . import cft
from .awcet import (
    ZERO,
    ZERO_SEQ,
    AbstractWcet,
    abstract,
    const_seq,
    loop_abstract,
    make_seq,
    ms_merge,
    ms_ranksum,
    ms_restrict,
    ms_scalar,
    parse_seq,
    restrict_abstract,
    scalar_abstract,
)
from .cfg import BOT, TOP, LoopForest, LoopRef, loop_meet, loop_ref, parse_loop_ref
from .errors import FuelExhausted, SymbolicValuePresent, TypeMismatch, UnboundIdentifier

Value = int | str  # concrete integer or identifier


@dataclass(frozen=True)
class Const:
    value: AbstractWcet


@dataclass(frozen=True)
class WcetId:
    name: str


@dataclass(frozen=True)
class Plus:
    operands: tuple["Formula", ...]


@dataclass(frozen=True)
class Max:
    operands: tuple["Formula", ...]


@dataclass(frozen=True)
class Scalar:
    coeff: Value
    operand: "Formula"


@dataclass(frozen=True)
class Power:
    """Loop repetition: body ranking iterated `count` times for loop
    `header`, then the exit ranking once."""

    body: "Formula"
    exit: "Formula"
    header: Value  # block id, or identifier bound to one
    count: Value


@dataclass(frozen=True)
class Restrict:
    """Annotation application: keep the `count` greatest costs per entry of
    `loop` ("TOP" = per run)."""

    operand: "Formula"
    loop: str  # block id, "TOP", or identifier
    count: Value


Formula = Const | WcetId | Plus | Max | Scalar | Power | Restrict

CONST_ZERO = Const(ZERO)

_RANK = {Const: 0, WcetId: 1, Restrict: 2, Scalar: 3, Plus: 4, Max: 5, Power: 6}


def _vkey(v: Value) -> tuple:
    return (0, v, "") if isinstance(v, int) else (1, 0, v)


@lru_cache(maxsize=None)
def sort_key(w: Formula) -> tuple:
    if isinstance(w, Const):
        v = w.value
        return (0, v.loop.kind, v.loop.header, v.seq.prefix, v.seq.tail)
    if isinstance(w, WcetId):
        return (1, w.name)
    if isinstance(w, Restrict):
        return (2, sort_key(w.operand), _vkey(w.loop), _vkey(w.count))
    if isinstance(w, Scalar):
        return (3, sort_key(w.operand), _vkey(w.coeff))
    if isinstance(w, Plus):
        return (4, tuple(sort_key(op) for op in w.operands))
    if isinstance(w, Max):
        return (5, tuple(sort_key(op) for op in w.operands))
    return (6, sort_key(w.body), sort_key(w.exit), _vkey(w.header),
            _vkey(w.count))


def formula_order(a: Formula, b: Formula) -> int:
    """Total syntactic order: -1, 0, or 1."""
    ka, kb = sort_key(a), sort_key(b)
    return -1 if ka < kb else (0 if ka == kb else 1)


# ---------------------------------------------------------------------------
# Canonical constructors
# ---------------------------------------------------------------------------


def plus(operands: Iterable[Formula]) -> Formula:
    flat: list[Formula] = []
    for op in operands:
        if isinstance(op, Plus):
            flat.extend(op.operands)
        elif op != CONST_ZERO:
            flat.append(op)
    if not flat:
        return CONST_ZERO
    if len(flat) == 1:
        return flat[0]
    return Plus(tuple(sorted(flat, key=sort_key)))


def max_(operands: Iterable[Formula]) -> Formula:
    flat: list[Formula] = []
    for op in operands:
        if isinstance(op, Max):
            flat.extend(op.operands)
        elif op != CONST_ZERO:
            flat.append(op)
    if not flat:
        return CONST_ZERO
    if len(flat) == 1:
        return flat[0]
    return Max(tuple(sorted(flat, key=sort_key)))


def scalar(coeff: Value, operand: Formula) -> Formula:
    if coeff == 0:
        return CONST_ZERO
    if coeff == 1:
        return operand
    return Scalar(coeff, operand)


def restrict(operand: Formula, loop: str, count: Value) -> Formula:
    return Restrict(operand, loop, count)


def power(body: Formula, exit_: Formula, header: Value, count: Value) -> Formula:
    return Power(body, exit_, header, count)


def formula_size(w: Formula) -> int:
    """Total node count, operators included."""
    if isinstance(w, (Const, WcetId)):
        return 1
    if isinstance(w, (Plus, Max)):
        return 1 + sum(formula_size(op) for op in w.operands)
    if isinstance(w, (Scalar, Restrict)):
        return 1 + formula_size(w.operand)
    return 1 + formula_size(w.body) + formula_size(w.exit)


def operand_count(w: Formula) -> int:
    """Number of atomic operands (constants and cost identifiers)."""
    if isinstance(w, (Const, WcetId)):
        return 1
    if isinstance(w, (Plus, Max)):
        return sum(operand_count(op) for op in w.operands)
    if isinstance(w, (Scalar, Restrict)):
        return operand_count(w.operand)
    return operand_count(w.body) + operand_count(w.exit)


def _children(w: Formula) -> tuple[Formula, ...]:
    if isinstance(w, (Plus, Max)):
        return w.operands
    if isinstance(w, (Scalar, Restrict)):
        return (w.operand,)
    if isinstance(w, Power):
        return (w.body, w.exit)
    return ()


def _rebuild(w: Formula, path: tuple[int, ...], new: Formula) -> Formula:
    if not path:
        return new
    i, rest = path[0], path[1:]
    kids = _children(w)
    repl = _rebuild(kids[i], rest, new)
    if isinstance(w, Plus):
        return plus([*w.operands[:i], repl, *w.operands[i + 1:]])
    if isinstance(w, Max):
        return max_([*w.operands[:i], repl, *w.operands[i + 1:]])
    if isinstance(w, Scalar):
        return scalar(w.coeff, repl)
    if isinstance(w, Restrict):
        return restrict(repl, w.loop, w.count)
    body = repl if i == 0 else w.body
    exit_ = repl if i == 1 else w.exit
    return power(body, exit_, w.header, w.count)


# ---------------------------------------------------------------------------
# Rewriting
# ---------------------------------------------------------------------------


def _try_meet(a: LoopRef, b: LoopRef, f: LoopForest | None) -> LoopRef | None:
    if f is not None:
        return loop_meet(a, b, f)
    if a == b or b == TOP:
        return a
    if a == TOP:
        return b
    if a == BOT or b == BOT:
        return BOT
    return None  # nesting unknown without a forest


def _merge_values(values: list[AbstractWcet], f: LoopForest | None,
                  op: Callable) -> list[AbstractWcet] | None:
    """Combine pairwise until no pair's loop meet is computable."""
    vals = list(values)
    changed = False
    while True:
        hit = None
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                m = _try_meet(vals[i].loop, vals[j].loop, f)
                if m is not None:
                    hit = (i, j, m)
                    break
            if hit:
                break
        if not hit:
            break
        i, j, m = hit
        merged = abstract(m, op(vals[i].seq, vals[j].seq))
        vals = [v for k, v in enumerate(vals) if k not in (i, j)]
        vals.append(merged)
        changed = True
    return vals if changed else None


def _const_valued(w: Formula) -> bool:
    """True when every instantiation of w is a rank-uniform constant.

    Restrict introduces finite prefixes; everything else preserves
    rank-uniformity given the constant-identifier convention above.
    """
    if isinstance(w, Const):
        return not w.value.seq.prefix
    if isinstance(w, WcetId):
        return True
    if isinstance(w, Scalar):
        return _const_valued(w.operand)
    if isinstance(w, (Plus, Max)):
        return all(_const_valued(op) for op in w.operands)
    if isinstance(w, Power):
        return _const_valued(w.body) and _const_valued(w.exit)
    return False


def _rule_plus_const(w: Formula, f: LoopForest | None) -> Formula | None:
    if not isinstance(w, Plus):
        return None
    consts = [op.value for op in w.operands if isinstance(op, Const)]
    if len(consts) < 2:
        return None
    merged = _merge_values(consts, f, ms_ranksum)
    if merged is None:
        return None
    rest = [op for op in w.operands if not isinstance(op, Const)]
    return plus(rest + [Const(v) for v in merged])


def _rule_max_const(w: Formula, f: LoopForest | None) -> Formula | None:
    if not isinstance(w, Max):
        return None
    consts = [op.value for op in w.operands if isinstance(op, Const)]
    if len(consts) < 2:
        return None
    merged = _merge_values(consts, f, ms_merge)
    if merged is None:
        return None
    rest = [op for op in w.operands if not isinstance(op, Const)]
    return max_(rest + [Const(v) for v in merged])


def _rule_distributivity(w: Formula, f: LoopForest | None) -> Formula | None:
    # (cst1 + r) max (cst2 + r) -> (cst1 max cst2) + r, restricted to
    # factoring constants over a shared rank-uniform residue.
    if not isinstance(w, Max):
        return None
    groups: dict[tuple, list[tuple[AbstractWcet, int]]] = {}
    for i, op in enumerate(w.operands):
        if not isinstance(op, Plus):
            continue
        consts = [x for x in op.operands if isinstance(x, Const)]
        rest = tuple(x for x in op.operands if not isinstance(x, Const))
        if len(consts) != 1 or not rest:
            continue
        if not all(_const_valued(x) for x in rest):
            continue
        key = tuple(sort_key(x) for x in rest)
        groups.setdefault(key, []).append((consts[0].value, i))
    changed = False
    replacement: dict[int, list[Formula]] = {}
    for members in groups.values():
        if len(members) < 2:
            continue
        merged = _merge_values([v for v, _ in members], f, ms_merge)
        if merged is None:
            continue
        changed = True
        first = w.operands[members[0][1]]
        rest = tuple(x for x in _as_plus(first) if not isinstance(x, Const))
        replacement[members[0][1]] = [plus([Const(v), *rest]) for v in merged]
        for _, i in members[1:]:
            replacement[i] = []
    if not changed:
        return None
    out: list[Formula] = []
    for i, op in enumerate(w.operands):
        out.extend(replacement[i] if i in replacement else [op])
    return max_(out)


def _as_plus(w: Formula) -> tuple[Formula, ...]:
    return w.operands if isinstance(w, Plus) else (w,)


def _rule_mult_merge(w: Formula, f: LoopForest | None) -> Formula | None:
    # x + 2*x + y -> 3*x + y for integer coefficients.
    if not isinstance(w, Plus):
        return None
    groups: dict[tuple, list[tuple[int, Formula]]] = {}
    order: list[Formula] = []
    for op in w.operands:
        if isinstance(op, Const):
            continue
        if isinstance(op, Scalar) and isinstance(op.coeff, int):
            weight, residue = op.coeff, op.operand
        else:
            weight, residue = 1, op
        key = sort_key(residue)
        if key not in groups:
            order.append(residue)
        groups.setdefault(key, []).append((weight, op))
    if all(len(members) < 2 for members in groups.values()):
        return None
    out: list[Formula] = [op for op in w.operands if isinstance(op, Const)]
    for residue in order:
        members = groups[sort_key(residue)]
        if len(members) == 1:
            out.append(members[0][1])
        else:
            out.append(scalar(sum(k for k, _ in members), residue))
    return plus(out)


def _rule_restrict_merge(w: Formula, f: LoopForest | None) -> Formula | None:
    # ann(w1,(h,it)) + ann(w2,(h,it)) -> ann(w1+w2,(h,it)), but only for
    # restricts that can never fold (symbolic count or unresolvable loop).
    # Fold-enabled restricts go the other way (restrict-distribute), and the
    # complementary guards keep the pair from looping.
    if not isinstance(w, Plus):
        return None
    groups: dict[tuple, list[Restrict]] = {}
    for op in w.operands:
        if (isinstance(op, Restrict)
                and not (isinstance(op.count, int)
                         and _loop_of(op.loop, f) is not None)):
            groups.setdefault((_vkey(op.loop), _vkey(op.count)), []).append(op)
    if all(len(g) < 2 for g in groups.values()):
        return None
    merged = {id(op) for g in groups.values() if len(g) > 1 for op in g}
    out = [op for op in w.operands if id(op) not in merged]
    for g in groups.values():
        if len(g) > 1:
            out.append(restrict(plus([r.operand for r in g]),
                                g[0].loop, g[0].count))
    return plus(out)


def _rule_restrict_distribute(w: Formula, f: LoopForest | None) -> Formula | None:
    # ann(w1+c,(h,it)) -> ann(w1,(h,it)) + ann(c,(h,it)) for constants c that
    # restrict-fold can consume: keeping the `it` greatest is rank-wise, so
    # it distributes exactly over rank-wise addition.
    if not (isinstance(w, Restrict) and isinstance(w.operand, Plus)
            and isinstance(w.count, int)):
        return None
    ref = _loop_of(w.loop, f)
    if ref is None:
        return None
    foldable, rest = [], []
    for op in w.operand.operands:
        if isinstance(op, Const) and _try_meet(op.value.loop, ref, f) is not None:
            foldable.append(op)
        else:
            rest.append(op)
    if not foldable:
        return None
    out = [restrict(op, w.loop, w.count) for op in foldable]
    if rest:
        out.append(restrict(plus(rest), w.loop, w.count))
    return plus(out)


def _rule_restrict_zero(w: Formula, f: LoopForest | None) -> Formula | None:
    if isinstance(w, Restrict) and w.operand == CONST_ZERO:
        return CONST_ZERO
    return None


def _loop_of(name: str, f: LoopForest | None) -> LoopRef | None:
    """Concrete loop reference for a Restrict/Power loop position, if any."""
    if name == "TOP":
        return TOP
    if f is not None and name in f.loops:
        return loop_ref(name)
    return None  # presumably an identifier; cannot fold


def _rule_restrict_fold(w: Formula, f: LoopForest | None) -> Formula | None:
    if not (isinstance(w, Restrict) and isinstance(w.operand, Const)
            and isinstance(w.count, int)):
        return None
    ref = _loop_of(w.loop, f)
    if ref is None:
        return None
    m = _try_meet(w.operand.value.loop, ref, f)
    if m is None:
        return None
    return Const(abstract(m, ms_restrict(w.operand.value.seq, w.count)))


def _rule_scalar_fold(w: Formula, f: LoopForest | None) -> Formula | None:
    if not isinstance(w, Scalar):
        return None
    if isinstance(w.operand, Const):
        if w.operand.value.seq == ZERO_SEQ:
            return CONST_ZERO
        if isinstance(w.coeff, int):
            return Const(scalar_abstract(w.coeff, w.operand.value))
        return None
    # Scaling commutes with restriction, so an integer coefficient also
    # folds straight through a chain of restricts onto a constant.
    if isinstance(w.coeff, int):
        chain: list[Restrict] = []
        node = w.operand
        while isinstance(node, Restrict):
            chain.append(node)
            node = node.operand
        if chain and isinstance(node, Const):
            out: Formula = Const(scalar_abstract(w.coeff, node.value))
            for r in reversed(chain):
                out = restrict(out, r.loop, r.count)
            return out
    return None


def _rule_scalar_restrict(w: Formula, f: LoopForest | None) -> Formula | None:
    # ann(k*w,(h,it)) -> k * ann(w,(h,it)): scaling by k >= 0 keeps the rank
    # order, so it commutes with keeping the `it` greatest.  Scalars float
    # out of restricts; restrict-fold then still sees Const operands.
    if isinstance(w, Restrict) and isinstance(w.operand, Scalar):
        inner = w.operand
        return scalar(inner.coeff, restrict(inner.operand, w.loop, w.count))
    return None


def _rule_power_zero(w: Formula, f: LoopForest | None) -> Formula | None:
    if isinstance(w, Power) and w.body == CONST_ZERO and w.exit == CONST_ZERO:
        return CONST_ZERO
    return None


def _rule_power_extract(w: Formula, f: LoopForest | None) -> Formula | None:
    # (w1,w2,b)^it -> (w1,0,b)^it + w2: pull the exit out of the loop.
    if isinstance(w, Power) and w.exit != CONST_ZERO:
        return plus([power(w.body, CONST_ZERO, w.header, w.count), w.exit])
    return None


def _rule_power_fold(w: Formula, f: LoopForest | None) -> Formula | None:
    if not (isinstance(w, Power) and isinstance(w.body, Const)
            and isinstance(w.exit, Const) and isinstance(w.count, int)
            and isinstance(w.header, str) and f is not None
            and w.header in f.loops):
        return None
    return Const(loop_abstract(w.header, w.count, w.body.value,
                               w.exit.value, f))


_RULES: tuple[tuple[str, Callable], ...] = (
    ("plus-const", _rule_plus_const),
    ("max-const", _rule_max_const),
    ("mult-merge", _rule_mult_merge),
    ("restrict-merge", _rule_restrict_merge),
    ("restrict-distribute", _rule_restrict_distribute),
    ("distributivity", _rule_distributivity),
    ("restrict-zero", _rule_restrict_zero),
    ("restrict-fold", _rule_restrict_fold),
    ("scalar-fold", _rule_scalar_fold),
    ("scalar-restrict", _rule_scalar_restrict),
    ("power-zero", _rule_power_zero),
    ("power-extract", _rule_power_extract),
    ("power-fold", _rule_power_fold),
)

DEFAULT_FUEL = 10_000


def _sites(w: Formula, f: LoopForest | None):
    found: list[tuple[tuple[int, ...], str, Formula]] = []

    def walk(node: Formula, path: tuple[int, ...]) -> None:
        for name, rule in _RULES:
            new = rule(node, f)
            if new is not None and new != node:
                found.append((path, name, new))
        for i, c in enumerate(_children(node)):
            walk(c, path + (i,))

    walk(w, ())
    return found


def simplify(w: Formula, f: LoopForest | None = None,
             fuel: int = DEFAULT_FUEL, rng=None) -> Formula:
    """Normal form of w under the rewrite system.

    The result is independent of application order; `rng` picks a random
    applicable rewrite each step (used to test exactly that).
    """
    steps = 0
    while True:
        sites = _sites(w, f)
        if not sites:
            return w
        path, _, new = sites[rng.randrange(len(sites))] if rng else sites[0]
        w = _rebuild(w, path, new)
        steps += 1
        if steps > fuel:
            raise FuelExhausted(f"no normal form within {fuel} rewrite steps")


# ---------------------------------------------------------------------------
# Symbolic tree evaluation
# ---------------------------------------------------------------------------


def gamma_symbolic(t: cft.Cft, f: LoopForest,
                   fold_concrete: bool = True) -> Formula:
    """Formula for a tree that may contain symbolic costs, bounds and caps.

    Concrete subexpressions fold to constants eagerly (disable to measure
    the structural formula size).  A complete instantiation of the result
    equals gamma of the instantiated tree.
    """

    def const_parts(parts: list[Formula]) -> list[AbstractWcet] | None:
        if fold_concrete and all(isinstance(p, Const) for p in parts):
            return [p.value for p in parts]  # type: ignore[union-attr]
        return None

    def build(node: cft.Cft) -> Formula:
        if isinstance(node, cft.Leaf):
            if isinstance(node.wcet, str):
                base: Formula = WcetId(node.wcet)
            else:
                base = Const(abstract(TOP, const_seq(node.wcet)))
        elif isinstance(node, cft.Alt):
            parts = [build(c) for c in node.children]
            vals = const_parts(parts)
            if vals is not None:
                acc = vals[0]
                for v in vals[1:]:
                    acc = abstract(loop_meet(acc.loop, v.loop, f),
                                   ms_merge(acc.seq, v.seq))
                base = Const(acc)
            else:
                base = max_(parts)
        elif isinstance(node, cft.Seq):
            parts = [build(c) for c in node.children]
            vals = const_parts(parts)
            if vals is not None:
                acc = ZERO
                for v in vals:
                    acc = abstract(loop_meet(acc.loop, v.loop, f),
                                   ms_ranksum(acc.seq, v.seq))
                base = Const(acc)
            else:
                base = plus(parts)
        else:
            body = build(node.body)
            exit_ = build(node.exit)
            if (fold_concrete and isinstance(body, Const)
                    and isinstance(exit_, Const)
                    and isinstance(node.bound, int)):
                base = Const(loop_abstract(node.header, node.bound,
                                           body.value, exit_.value, f))
            else:
                base = power(body, exit_, node.header, node.bound)
        ann = node.annotation
        if ann is not None and ann.max is not None:
            if fold_concrete and isinstance(base, Const) \
                    and isinstance(ann.max, int):
                base = Const(restrict_abstract(base.value, ann.loop,
                                               ann.max, f))
            else:
                base = restrict(base, str(ann.loop), ann.max)
        return base

    return build(t)


# ---------------------------------------------------------------------------
# Substitution and evaluation
# ---------------------------------------------------------------------------


def _bind_int(v: Value, bindings: dict, *, require: bool) -> Value:
    if isinstance(v, int):
        return v
    if v in bindings:
        val = bindings[v]
        if isinstance(val, bool) or not isinstance(val, int) or val < 0:
            raise TypeMismatch(f"{v!r} must bind a non-negative integer, "
                               f"got {val!r}")
        return val
    if require:
        raise UnboundIdentifier(f"no binding for integer identifier {v!r}")
    return v


def _bind_loop(v: Value, bindings: dict, *, require: bool) -> Value:
    if isinstance(v, str) and v in bindings:
        val = bindings[v]
        if not isinstance(val, str):
            raise TypeMismatch(f"loop identifier {v!r} must bind a block id, "
                               f"got {val!r}")
        return val
    return v


def substitute(w: Formula, bindings: dict) -> Formula:
    """Replace bound identifiers by their values; unbound ones remain."""
    if isinstance(w, Const):
        return w
    if isinstance(w, WcetId):
        if w.name in bindings:
            val = bindings[w.name]
            if isinstance(val, AbstractWcet):
                return Const(val)
            raise TypeMismatch(f"WCET identifier {w.name!r} must bind an "
                               f"abstract WCET, got {val!r}")
        return w
    if isinstance(w, Plus):
        return plus([substitute(op, bindings) for op in w.operands])
    if isinstance(w, Max):
        return max_([substitute(op, bindings) for op in w.operands])
    if isinstance(w, Scalar):
        return scalar(_bind_int(w.coeff, bindings, require=False),
                      substitute(w.operand, bindings))
    if isinstance(w, Restrict):
        loop = w.loop if w.loop == "TOP" else _bind_loop(w.loop, bindings,
                                                         require=False)
        return restrict(substitute(w.operand, bindings), loop,
                        _bind_int(w.count, bindings, require=False))
    return power(substitute(w.body, bindings), substitute(w.exit, bindings),
                 _bind_loop(w.header, bindings, require=False),
                 _bind_int(w.count, bindings, require=False))


def evaluate(w: Formula, bindings: dict, f: LoopForest) -> AbstractWcet:
    """Fold a completely bound formula to its abstract WCET."""
    if isinstance(w, Const):
        return w.value
    if isinstance(w, WcetId):
        if w.name not in bindings:
            raise UnboundIdentifier(f"no binding for WCET identifier {w.name!r}")
        val = bindings[w.name]
        if not isinstance(val, AbstractWcet):
            raise TypeMismatch(f"WCET identifier {w.name!r} must bind an "
                               f"abstract WCET, got {val!r}")
        return val
    if isinstance(w, Plus):
        vals = [evaluate(op, bindings, f) for op in w.operands]
        acc = vals[0]
        for v in vals[1:]:
            acc = abstract(loop_meet(acc.loop, v.loop, f),
                           ms_ranksum(acc.seq, v.seq))
        return acc
    if isinstance(w, Max):
        vals = [evaluate(op, bindings, f) for op in w.operands]
        acc = vals[0]
        for v in vals[1:]:
            acc = abstract(loop_meet(acc.loop, v.loop, f),
                           ms_merge(acc.seq, v.seq))
        return acc
    if isinstance(w, Scalar):
        k = _bind_int(w.coeff, bindings, require=True)
        return scalar_abstract(k, evaluate(w.operand, bindings, f))
    if isinstance(w, Restrict):
        name = _bind_loop(w.loop, bindings, require=True)
        ref = parse_loop_ref(name)
        return restrict_abstract(evaluate(w.operand, bindings, f), ref,
                                 _bind_int(w.count, bindings, require=True), f)
    header = _bind_loop(w.header, bindings, require=True)
    if not isinstance(header, str):
        raise TypeMismatch(f"loop header {header!r} is not a block id")
    count = _bind_int(w.count, bindings, require=True)
    return loop_abstract(header, count, evaluate(w.body, bindings, f),
                         evaluate(w.exit, bindings, f), f)


def free_identifiers(w: Formula, f: LoopForest | None = None) -> set[str]:
    """Identifiers a complete instantiation must bind."""
    out: set[str] = set()

    def loop_id(name: str) -> None:
        if name != "TOP" and (f is None or name not in f.loops):
            out.add(name)

    def walk(node: Formula) -> None:
        if isinstance(node, WcetId):
            out.add(node.name)
        elif isinstance(node, Scalar):
            if isinstance(node.coeff, str):
                out.add(node.coeff)
            walk(node.operand)
        elif isinstance(node, Restrict):
            loop_id(node.loop)
            if isinstance(node.count, str):
                out.add(node.count)
            walk(node.operand)
        elif isinstance(node, Power):
            if isinstance(node.header, str):
                loop_id(node.header)
            if isinstance(node.count, str):
                out.add(node.count)
            walk(node.body)
            walk(node.exit)
        elif isinstance(node, (Plus, Max)):
            for op in node.operands:
                walk(op)

    walk(w)
    return out


# ---------------------------------------------------------------------------
# Text form
# ---------------------------------------------------------------------------


def render(w: Formula) -> str:
    if isinstance(w, Const):
        return f"(l={w.value.loop},{w.value.seq})"
    if isinstance(w, WcetId):
        return w.name
    if isinstance(w, Plus):
        return "(+ " + " ".join(render(op) for op in w.operands) + ")"
    if isinstance(w, Max):
        return "(max " + " ".join(render(op) for op in w.operands) + ")"
    if isinstance(w, Scalar):
        return f"(* {w.coeff} {render(w.operand)})"
    if isinstance(w, Power):
        return (f"(pow {render(w.body)} {render(w.exit)} "
                f"{w.header} {w.count})")
    return f"(ann {render(w.operand)} {w.loop} {w.count})"


_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")
_INT_RE = re.compile(r"\d+\Z")


def parse(text: str) -> Formula:
    """Parse the textual formula form (inverse of render)."""
    tokens = _TOKEN_RE.findall(text)
    pos = 0

    def peek() -> str | None:
        return tokens[pos] if pos < len(tokens) else None

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of formula text")
        pos += 1
        return tokens[pos - 1]

    def value(tok: str) -> Value:
        return int(tok) if _INT_RE.match(tok) else tok

    def expr() -> Formula:
        tok = take()
        if tok != "(":
            return WcetId(tok)
        head = take()
        if head.startswith("l="):
            parts = [head]
            while peek() != ")":
                parts.append(take())
            take()
            body = "".join(parts)[2:]
            loop_txt, _, seq_txt = body.partition(",")
            return Const(abstract(parse_loop_ref(loop_txt),
                                  parse_seq(seq_txt.strip())))
        if head == "+":
            ops = []
            while peek() != ")":
                ops.append(expr())
            take()
            return plus(ops)
        if head == "max":
            ops = []
            while peek() != ")":
                ops.append(expr())
            take()
            return max_(ops)
        if head == "*":
            k = value(take())
            op = expr()
            if take() != ")":
                raise ValueError("malformed scalar")
            return scalar(k, op)
        if head == "pow":
            body_f = expr()
            exit_f = expr()
            header = value(take())
            count = value(take())
            if take() != ")":
                raise ValueError("malformed pow")
            return power(body_f, exit_f, header, count)
        if head == "ann":
            op = expr()
            loop = take()
            count = value(take())
            if take() != ")":
                raise ValueError("malformed ann")
            return restrict(op, loop, count)
        raise ValueError(f"unknown operator {head!r}")

    result = expr()
    if pos != len(tokens):
        raise ValueError("trailing tokens in formula text")
    return result
