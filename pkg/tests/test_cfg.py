"""Document parsing, dominators, reducibility, loop forest, loop lattice."""

from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import generators as gen
from symwcet.cfg import (
    BOT,
    TOP,
    back_edges,
    build_loop_forest,
    dominates,
    dominators,
    loop_join,
    loop_leq,
    loop_meet,
    loop_ref,
    parse_program,
)
from symwcet.errors import DocumentError, IrreducibleLoop


def fig2_program():
    return parse_program(json.dumps(gen.running_example_doc()))


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------


def _doc(**overrides):
    base = {
        "name": "t",
        "blocks": [{"id": "a", "wcet": 1}, {"id": "b", "wcet": 2}],
        "edges": [["a", "b"]],
        "entry": "a",
        "exit": "b",
    }
    base.update(overrides)
    return json.dumps(base)


def test_parse_minimal_document():
    p = parse_program(_doc())
    assert p.cfg.entry == "a" and p.cfg.exit == "b"
    assert p.cfg.blocks["b"].wcet == 2
    assert p.loop_bounds == {} and p.annotations == () and p.splits == ()


@pytest.mark.parametrize("mutate, fragment", [
    ({"edges": [["a", "zz"]]}, "unknown block"),
    ({"edges": [["a", "b"], ["a", "b"]]}, "duplicate edge"),
    ({"entry": "zz"}, "entry"),
    ({"blocks": [{"id": "a", "wcet": 1}, {"id": "a", "wcet": 2}]}, "duplicate"),
    ({"blocks": [{"id": "a", "wcet": -1}, {"id": "b", "wcet": 2}]}, "must be >="),
    ({"loop_bounds": {"zz": 3}}, "unknown block"),
    ({"loop_bounds": {"a": 0}}, "must be >="),
    ({"annotations": [{"target": "b", "loop": "zz", "max": 1}]}, "neither TOP nor a block"),
    ({"annotations": [{"target": "b", "max": 1}]}, "missing"),
    ({"splits": [{"block": "zz", "variants": [{"id": "v", "wcet": 1}]}]}, "unknown block"),
    ({"splits": [{"block": "b", "variants": []}]}, "non-empty"),
    ({"splits": [{"block": "b", "variants": [{"id": "9x", "wcet": 1}]}]}, "identifier"),
    ({"extra_key": 1}, "unknown keys"),
])
def test_parse_rejects(mutate, fragment):
    with pytest.raises(DocumentError, match=fragment):
        parse_program(_doc(**mutate))


def test_parse_rejects_non_json():
    with pytest.raises(DocumentError):
        parse_program("not json at all {")


def test_parse_rejects_unreachable_block():
    doc = _doc(blocks=[{"id": "a", "wcet": 1}, {"id": "b", "wcet": 2},
                       {"id": "c", "wcet": 3}])
    with pytest.raises(DocumentError):
        parse_program(doc)


def test_symbolic_wcet_and_bound_are_identifiers():
    p = parse_program(_doc(
        blocks=[{"id": "a", "wcet": "w_a"}, {"id": "b", "wcet": 2}],
        edges=[["a", "a"], ["a", "b"]],
        loop_bounds={"a": "n"},
    ))
    assert p.cfg.blocks["a"].wcet == "w_a"
    assert p.loop_bounds["a"] == "n"


# ---------------------------------------------------------------------------
# Dominators
# ---------------------------------------------------------------------------


def test_fig2_idoms():
    g = fig2_program().cfg
    assert dominators(g) == {
        "b1": None, "b2": "b1", "b3": "b1", "b4": "b2", "b5": "b1", "b6": "b1",
    }


def test_fig2_back_edges():
    g = fig2_program().cfg
    idom = dominators(g)
    assert set(back_edges(g, idom)) == {("b3", "b1"), ("b4", "b2")}


def _reachable_without(g, banned):
    seen = set()
    stack = [] if g.entry == banned else [g.entry]
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        for s in g.succs[n]:
            if s != banned:
                stack.append(s)
    return seen


def test_dominates_matches_removal_oracle():
    rng = random.Random(5)
    for _ in range(40):
        doc = gen.random_doc(rng, depth=2, noise=2)
        g = parse_program(json.dumps(doc)).cfg
        idom = dominators(g)
        for d in g.blocks:
            cut = _reachable_without(g, d)
            for n in g.blocks:
                expected = n == d or n not in cut
                assert dominates(idom, d, n) == expected, (doc, d, n)


# ---------------------------------------------------------------------------
# Reducibility
# ---------------------------------------------------------------------------


def test_irreducible_triangle_rejected():
    p = parse_program(json.dumps(gen.irreducible_doc()))
    with pytest.raises(IrreducibleLoop) as err:
        build_loop_forest(p.cfg, p.loop_bounds)
    assert "b" in str(err.value) and "c" in str(err.value)


def test_random_structured_graphs_are_reducible():
    rng = random.Random(17)
    for _ in range(60):
        doc = gen.random_doc(rng, depth=3, noise=4)
        p = parse_program(json.dumps(doc))
        build_loop_forest(p.cfg, p.loop_bounds)  # must not raise


# ---------------------------------------------------------------------------
# Loop forest
# ---------------------------------------------------------------------------


def test_fig2_loop_forest():
    p = fig2_program()
    f = build_loop_forest(p.cfg, p.loop_bounds)
    assert set(f.loops) == {"b1", "b2"}
    outer, inner = f.loops["b1"], f.loops["b2"]
    assert outer.body == frozenset({"b1", "b2", "b3", "b4", "b6"})
    assert inner.body == frozenset({"b2", "b4"})
    assert outer.bound == 3 and inner.bound == 2
    assert outer.back_edges == (("b3", "b1"),)
    assert inner.entry_edges == (("b1", "b2"),)
    assert outer.exit_edges == (("b1", "b5"),)
    assert f.parent == {"b1": None, "b2": "b1"}
    assert f.innermost("b4") == "b2"
    assert f.innermost("b3") == "b1"
    assert f.innermost("b5") is None


def test_missing_bound_defaults_to_symbolic():
    p = parse_program(json.dumps(gen.running_example_doc(inner_bound=None)))
    f = build_loop_forest(p.cfg, p.loop_bounds)
    assert f.loops["b2"].bound == "x_b2"
    assert f.loops["b1"].bound == 3


def test_bound_for_non_header_rejected():
    p = fig2_program()
    with pytest.raises(DocumentError, match="not a loop header"):
        build_loop_forest(p.cfg, {"b3": 2})


# ---------------------------------------------------------------------------
# Loop reference lattice
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fig2_forest():
    p = fig2_program()
    return build_loop_forest(p.cfg, p.loop_bounds)


L1 = loop_ref("b1")
L2 = loop_ref("b2")
ALIEN = loop_ref("zz")  # header the forest has never heard of
ELEMS = [TOP, BOT, L1, L2, ALIEN]


def test_lattice_pinned_order(fig2_forest):
    f = fig2_forest
    assert loop_leq(BOT, L2, f) and loop_leq(L2, L1, f) and loop_leq(L1, TOP, f)
    assert not loop_leq(L1, L2, f)
    assert not loop_leq(TOP, L1, f)
    assert loop_leq(ALIEN, ALIEN, f) and loop_leq(ALIEN, TOP, f)
    assert not loop_leq(ALIEN, L1, f) and not loop_leq(L1, ALIEN, f)


def test_lattice_pinned_join_meet(fig2_forest):
    f = fig2_forest
    assert loop_join(L1, L2, f) == L1
    assert loop_meet(L1, L2, f) == L2
    assert loop_join(L2, ALIEN, f) == TOP
    assert loop_meet(L1, TOP, f) == L1
    assert loop_join(BOT, L2, f) == L2


@settings(max_examples=200, deadline=None)
@given(a=st.sampled_from(ELEMS), b=st.sampled_from(ELEMS), c=st.sampled_from(ELEMS))
def test_lattice_properties(fig2_forest, a, b, c):
    f = fig2_forest
    assert loop_leq(a, a, f)
    if loop_leq(a, b, f) and loop_leq(b, a, f):
        assert a == b
    if loop_leq(a, b, f) and loop_leq(b, c, f):
        assert loop_leq(a, c, f)
    j = loop_join(a, b, f)
    assert loop_leq(a, j, f) and loop_leq(b, j, f)
    m = loop_meet(a, b, f)
    assert loop_leq(m, a, f) and loop_leq(m, b, f)
    assert loop_join(a, b, f) == loop_join(b, a, f)
    assert loop_meet(a, b, f) == loop_meet(b, a, f)
