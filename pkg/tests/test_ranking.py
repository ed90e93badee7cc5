from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from meshcast.errors import CycleError, SgstConstructionError
from meshcast.graph import (ceil_log, complete_binary_tree, from_edges, generate_graph, path_graph,
                            star_graph)
from meshcast.ranking import (NodeClass, SegmentKind, Sgst, build_sgst, check_rank_bound, classify,
                              decompose_path, make_sgst, rank_bound, rank_tree, verify_sgst)

from conftest import CORPUS, naive_rank, random_tree


def test_rank_examples():
    rt = rank_tree([-1, 0, 1, 2, 3], 2)
    assert rt.rank2 == (1,) * 5
    cbt = [-1] + [(i - 1) // 2 for i in range(1, 15)]
    rt = rank_tree(cbt, 2)
    assert rt.rank2[0] == 4 and all(rt.rank2[v] == 1 for v in range(7, 15))
    star = [-1, 0, 0, 0, 0, 0]
    assert rank_tree(star, 3).rankx[0] == 2
    assert rank_tree(star, 6).rankx[0] == 1
    assert rank_tree(star, 6).rank2[0] == 2


def test_rank_cycle_detected():
    with pytest.raises(CycleError):
        rank_tree([1, 2, 0], 2)
    with pytest.raises(CycleError):
        rank_tree([-1, 2, 1], 2)


@given(st.integers(1, 60), st.integers(2, 9), st.integers(0, 2**32))
def test_rank_matches_definition(n, x, seed):
    parent = random_tree(np.random.default_rng(seed), n)
    rt = rank_tree(parent, x)
    assert list(rt.rank2) == naive_rank(parent, 2)
    assert list(rt.rankx) == naive_rank(parent, x)
    for v, p in enumerate(parent):
        if p >= 0:
            assert rt.rank2[p] >= rt.rank2[v] and rt.rankx[p] >= rt.rankx[v]


@given(st.integers(2, 4096), st.sampled_from(["2", "3", "8", "log"]), st.integers(0, 2**32))
def test_rank_bound_property(n, xs, seed):
    x = ceil_log(n, 2) if xs == "log" else int(xs)
    x = max(x, 2)
    rt = rank_tree(random_tree(np.random.default_rng(seed), n), x)
    assert check_rank_bound(rt, n)
    assert rt.rmaxx <= rank_bound(n, x)


def test_rank_bound_examples(rng):
    for _ in range(20):
        rt2 = rank_tree(random_tree(rng, 37), 2)
        rt3 = rank_tree(random_tree(rng, 37), 3)
        assert rt2.rmax2 <= 6 and rt3.rmaxx <= 4
    assert rank_tree(list(range(-1, 1023)), 2).rmax2 == 1


def test_rank_bound_is_tight_for_complete_trees():
    # a complete x-ary tree with x^h nodes in its last level attains rank h + 1
    cbt = [-1] + [(i - 1) // 2 for i in range(1, 31)]
    rt = rank_tree(cbt, 2)
    assert rt.rmax2 == 5 == rank_bound(32, 2)


def test_classification_partition(rng):
    for _ in range(30):
        parent = random_tree(rng, 50)
        rt = rank_tree(parent, 3)
        cls = classify(rt)
        assert cls[0] is NodeClass.ROOT
        for v in range(1, 50):
            p = parent[v]
            fast = rt.rank2[v] == rt.rank2[p]
            slow = rt.rank2[v] < rt.rank2[p] and rt.rankx[v] == rt.rankx[p]
            ss = rt.rankx[v] < rt.rankx[p]
            expect = NodeClass.FAST if fast else NodeClass.SLOW if slow else NodeClass.SUPERSLOW
            assert cls[v] is expect
            assert fast or slow or ss


def test_verify_catches_fast_collision():
    # 1 and 2 are fast parents; parent 1 is also adjacent to 2's fast child 4
    g = from_edges(5, [(0, 1), (0, 2), (1, 3), (2, 4), (1, 4)])
    s = make_sgst(g, 0, [-1, 0, 0, 1, 2], 2)
    rep = verify_sgst(g, s)
    chk = rep["fast-collision-free"]
    assert not chk.passed and chk.witness["parent"] == 1 and chk.witness["nodes"] == [3, 4]
    assert chk.witness["layer"] == 2 and chk.witness["rank"] == 1
    assert rep["slow-competition-bounded"].passed and not rep.ok


def test_verify_catches_slow_competition():
    g = from_edges(7, [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6), (1, 5)])
    s = make_sgst(g, 0, [-1, 0, 0, 1, 1, 2, 2], 3)
    rep = verify_sgst(g, s)
    chk = rep["slow-competition-bounded"]
    assert not chk.passed
    assert chk.witness["parent"] == 1 and chk.witness["nodes"] == [3, 4, 5]
    assert rep["fast-collision-free"].passed


def test_verify_catches_non_bfs_and_tampering():
    g = from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    s = make_sgst(g, 0, [-1, 0, 3, 0], 2)
    assert verify_sgst(g, s).ok
    bad = Sgst(s.source, s.layering, s.ranked,
               tuple(NodeClass.SLOW if c is NodeClass.FAST else c for c in s.class_of))
    assert not verify_sgst(g, bad)["ranking"].passed
    # 2 sits on layer 1 but hangs below the other layer-1 node
    g2 = from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 2)])
    chk = verify_sgst(g2, make_sgst(g2, 0, [-1, 0, 1, 2], 2))["bfs-spanning-tree"]
    assert not chk.passed and chk.witness["node"] == 2


@pytest.mark.parametrize("spec", CORPUS + ["rand(128,0.05)"])
def test_build_sgst_corpus(spec):
    g = generate_graph(spec, 3)
    s = build_sgst(g, 0)
    rep = verify_sgst(g, s)
    assert rep.ok, str(rep)
    assert s.x == max(2, ceil_log(g.n, 2))
    assert check_rank_bound(s.ranked, g.n)


def test_build_examples():
    s = build_sgst(path_graph(8), 0)
    assert s.parent_of == (-1, 0, 1, 2, 3, 4, 5, 6)
    assert all(c is NodeClass.FAST for c in s.class_of[1:])
    s = build_sgst(star_graph(6), 0, 2)
    assert s.ranked.rank2[0] == 2 and all(s.ranked.rank2[v] == 1 for v in range(1, 6))
    assert verify_sgst(star_graph(6), s).ok
    s = build_sgst(generate_graph("rand(128,0.05)", 3), 0, 7)
    assert s.x == 7


def test_single_node():
    g = from_edges(1, [])
    s = build_sgst(g, 0)
    assert s.n == 1 and s.class_of == (NodeClass.ROOT,)
    assert verify_sgst(g, s).ok


@given(st.integers(2, 45), st.floats(0.1, 0.5), st.integers(0, 2**20), st.integers(2, 6))
def test_build_sgst_property(n, q, seed, x):
    try:
        g = generate_graph(f"rand({n},{q})", seed)
    except Exception:
        return
    src = seed % n
    s = build_sgst(g, src, x)
    assert verify_sgst(g, s).ok
    assert s.source == src and s.layer_of[src] == 0


def test_repair_strategy_is_certified_or_reports():
    ok = 0
    for seed in range(8):
        g = generate_graph("grid(5,5)", seed)
        try:
            s = build_sgst(g, 0, strategy="repair")
        except SgstConstructionError as exc:
            assert exc.report is not None and not exc.report.ok
            continue
        assert verify_sgst(g, s).ok
        ok += 1
    assert ok >= 1


def test_unknown_strategy():
    with pytest.raises(ValueError):
        build_sgst(path_graph(3), 0, strategy="magic")


def test_json_roundtrip():
    g = generate_graph("grid(5,6)", 1)
    s = build_sgst(g, 0)
    d = json.loads(s.to_json())
    assert set(d) == {"source", "x", "parent", "layer", "rank2", "rankx", "class"}
    assert Sgst.from_dict(d) == s
    d["rank2"][3] += 1
    with pytest.raises(ValueError):
        Sgst.from_dict(d)


def test_sets_index():
    g = generate_graph("cbt(31)", 0)
    s = build_sgst(g, 0, 3)
    total = sum(len(m) for m in s.fast_sets.values()) + sum(len(m) for m in s.slow_sets.values()) \
        + sum(len(m) for m in s.superslow_sets.values())
    assert total == g.n - 1
    for (k, j), members in s.fast_sets.items():
        assert all(s.layer_of[v] == k and s.ranked.rank2[v] == j for v in members)


def test_decompose_examples():
    s = build_sgst(path_graph(8), 0)
    d = decompose_path(s, 7)
    assert d.segments == ((SegmentKind.FAST_STRETCH, 7),) and d.q == 1
    t = complete_binary_tree(15)
    s = build_sgst(t, 0, 3)
    d = decompose_path(s, 14)
    assert d.count(SegmentKind.FAST_STRETCH) == 0
    assert d.segments == ((SegmentKind.SLOW_EDGE, 1),) * 3


@pytest.mark.parametrize("spec", CORPUS)
def test_decompose_invariants(spec):
    g = generate_graph(spec, 5)
    s = build_sgst(g, 0)
    for v in range(g.n):
        d = decompose_path(s, v)
        assert d.length == s.layer_of[v]
        assert d.q <= s.rmax2
        assert d.count(SegmentKind.SUPERSLOW_EDGE) <= s.rmaxx
        assert d.count(SegmentKind.SLOW_EDGE) <= s.rmax2
        # fast stretches never touch each other
        kinds = [k for k, _ in d.segments]
        assert all(not (a is b is SegmentKind.FAST_STRETCH) for a, b in zip(kinds, kinds[1:]))
