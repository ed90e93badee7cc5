"""Recursive tree ranking and super gathering spanning trees (SGST).

A node's rank with threshold ``x`` is 1 for a leaf; otherwise it is the
maximum child rank, bumped by one when at least ``x`` children attain that
maximum.  An SGST is a BFS tree rooted at the broadcast source whose fast
sets can move a message parent-to-child without collisions and whose slow
competition per parent is bounded by ``x - 1``.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

from .errors import CycleError, SgstConstructionError
from .graph import BfsLayering, MeshGraph, bfs_layering, ceil_log, default_x


class NodeClass(str, Enum):
    ROOT = "root"
    FAST = "fast"
    SLOW = "slow"
    SUPERSLOW = "superslow"


# --- ranking -----------------------------------------------------------------

def _bottom_up_order(parent: Sequence[int]) -> list[int]:
    """Nodes ordered so every child precedes its parent."""
    n = len(parent)
    roots = [v for v in range(n) if parent[v] < 0]
    if len(roots) != 1:
        if not roots:
            raise CycleError("parent map has no root (cycle)")
        raise CycleError(f"parent map has {len(roots)} roots, expected 1")
    children = [[] for _ in range(n)]
    for v, p in enumerate(parent):
        if p >= 0:
            if p >= n:
                raise CycleError(f"parent {p} of node {v} out of range")
            children[p].append(v)
    order = [roots[0]]
    for v in order:
        order.extend(children[v])
    if len(order) != n:
        raise CycleError("parent map contains a cycle")
    order.reverse()
    return order


def _ranks(parent: Sequence[int], order: Sequence[int], x: int) -> list[int]:
    n = len(parent)
    best = [0] * n
    count = [0] * n
    rank = [0] * n
    for v in order:
        b = best[v]
        r = 1 if b == 0 else (b + 1 if count[v] >= x else b)
        rank[v] = r
        p = parent[v]
        if p >= 0:
            if r > best[p]:
                best[p], count[p] = r, 1
            elif r == best[p]:
                count[p] += 1
    return rank


def _normalize_parents(parent_map) -> list[int]:
    return [-1 if p is None else int(p) for p in parent_map]


@dataclass(frozen=True)
class RankedTree:
    parent_of: tuple[int, ...]
    rank2: tuple[int, ...]
    rankx: tuple[int, ...]
    x: int

    @property
    def n(self) -> int:
        return len(self.parent_of)

    @property
    def root(self) -> int:
        return self.parent_of.index(-1)

    @property
    def rmax2(self) -> int:
        return max(self.rank2)

    @property
    def rmaxx(self) -> int:
        return max(self.rankx)


def rank_tree(parent_map, x: int) -> RankedTree:
    """Rank a rooted tree given as ``parent_map[v]`` (``None``/-1 at the root)."""
    if x < 2:
        raise ValueError(f"ranking threshold must be >= 2, got {x}")
    parent = _normalize_parents(parent_map)
    order = _bottom_up_order(parent)
    r2 = _ranks(parent, order, 2)
    rx = r2 if x == 2 else _ranks(parent, order, x)
    return RankedTree(tuple(parent), tuple(r2), tuple(rx), x)


def rank_bound(n: int, x: int) -> int:
    # a lone node has rank 1 although ceil(log_x 1) = 0
    return max(1, ceil_log(n, x))


def check_rank_bound(rt: RankedTree, n: int | None = None) -> bool:
    """True iff both maximum ranks respect ``ceil(log_x n)``."""
    n = rt.n if n is None else n
    return rt.rmax2 <= rank_bound(n, 2) and rt.rmaxx <= rank_bound(n, rt.x)


def classify(ranked: RankedTree) -> tuple[NodeClass, ...]:
    """Fast beats slow beats super-slow, which makes the classes a partition."""
    out = []
    for v, p in enumerate(ranked.parent_of):
        if p < 0:
            out.append(NodeClass.ROOT)
        elif ranked.rank2[v] == ranked.rank2[p]:
            out.append(NodeClass.FAST)
        elif ranked.rankx[v] == ranked.rankx[p]:
            out.append(NodeClass.SLOW)
        else:
            out.append(NodeClass.SUPERSLOW)
    return tuple(out)


# --- SGST --------------------------------------------------------------------

@dataclass(frozen=True)
class Sgst:
    source: int
    layering: BfsLayering
    ranked: RankedTree
    class_of: tuple[NodeClass, ...]

    @property
    def n(self) -> int:
        return self.ranked.n

    @property
    def x(self) -> int:
        return self.ranked.x

    @property
    def parent_of(self) -> tuple[int, ...]:
        return self.ranked.parent_of

    @property
    def layer_of(self) -> tuple[int, ...]:
        return self.layering.layer_of

    @property
    def rmax2(self) -> int:
        return self.ranked.rmax2

    @property
    def rmaxx(self) -> int:
        return self.ranked.rmaxx

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        kids = [[] for _ in range(self.n)]
        for v, p in enumerate(self.parent_of):
            if p >= 0:
                kids[p].append(v)
        return tuple(tuple(k) for k in kids)

    def children_of_class(self, v: int, cls: NodeClass) -> tuple[int, ...]:
        return tuple(w for w in self.children[v] if self.class_of[w] is cls)

    @cached_property
    def fast_child(self) -> tuple[int, ...]:
        """The unique same-rank child of each node, or -1."""
        out = [-1] * self.n
        for v, c in enumerate(self.class_of):
            if c is NodeClass.FAST:
                out[self.parent_of[v]] = v
        return tuple(out)

    def _index(self, cls):
        sets = defaultdict(set)
        r = self.ranked.rankx if cls is NodeClass.SUPERSLOW else self.ranked.rank2
        for v, c in enumerate(self.class_of):
            if c is cls:
                sets[(self.layer_of[v], r[v])].add(v)
        return {key: frozenset(s) for key, s in sets.items()}

    @cached_property
    def fast_sets(self) -> dict[tuple[int, int], frozenset[int]]:
        """``(layer k, rank2 j) -> FAST^k_j``."""
        return self._index(NodeClass.FAST)

    @cached_property
    def slow_sets(self) -> dict[tuple[int, int], frozenset[int]]:
        """``(layer k, rank2 j) -> SLOW^k_j``."""
        return self._index(NodeClass.SLOW)

    @cached_property
    def superslow_sets(self) -> dict[tuple[int, int], frozenset[int]]:
        """``(layer k, rankx j) -> SS^k_j``."""
        return self._index(NodeClass.SUPERSLOW)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "x": self.x,
            "parent": list(self.parent_of),
            "layer": list(self.layer_of),
            "rank2": list(self.ranked.rank2),
            "rankx": list(self.ranked.rankx),
            "class": [c.value for c in self.class_of],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Sgst":
        """Rebuild from an export; ranks and classes are recomputed and checked."""
        ranked = rank_tree(d["parent"], int(d["x"]))
        if list(ranked.rank2) != list(d["rank2"]) or list(ranked.rankx) != list(d["rankx"]):
            raise ValueError("exported ranks disagree with the parent map")
        classes = classify(ranked)
        if [c.value for c in classes] != list(d["class"]):
            raise ValueError("exported classes disagree with the ranks")
        layer = tuple(int(v) for v in d["layer"])
        depth = max(layer)
        layers = [[] for _ in range(depth + 1)]
        for v, l in enumerate(layer):
            layers[l].append(v)
        layering = BfsLayering(int(d["source"]), layer, tuple(tuple(l) for l in layers))
        return cls(int(d["source"]), layering, ranked, classes)


def make_sgst(g: MeshGraph, source: int, parent_map, x: int) -> Sgst:
    """Wrap a caller-chosen BFS parent map (no validation; see verify_sgst)."""
    ranked = rank_tree(parent_map, x)
    if ranked.root != source:
        raise ValueError(f"tree is rooted at {ranked.root}, not at source {source}")
    return Sgst(source, bfs_layering(g, source), ranked, classify(ranked))


# --- validation ----------------------------------------------------------------

@dataclass
class PropertyCheck:
    name: str
    passed: bool
    witness: dict | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list[PropertyCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[PropertyCheck]:
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            extra = f" {c.detail}" if c.detail else ""
            wit = f" witness={c.witness}" if c.witness else ""
            lines.append(f"[{status}] {c.name}{extra}{wit}")
        return "\n".join(lines)


def verify_sgst(g: MeshGraph, s: Sgst) -> ValidationReport:
    """Check the four SGST properties, with a witness for each failure.

    (1) BFS spanning tree rooted at the source (the tree root is the
        broadcast source rather than the graph center).
    (2) Ranks and classes are exactly those of the recursive procedure.
    (3) Each FAST^k_j reaches its parents collision-free: every parent of a
        node in FAST^k_j has exactly one graph neighbour in FAST^k_j.
    (4) Every parent of a node in SLOW^k_j with rank_x = i has at most x-1
        graph neighbours in SLOW^k_j restricted to rank_x = i.
    """
    report = ValidationReport()
    adj = g.adjacency
    par = s.parent_of
    n = g.n

    # (1)
    true_layers = bfs_layering(g, s.source).layer_of
    p1 = PropertyCheck("bfs-spanning-tree", True)
    if s.n != n:
        p1 = PropertyCheck("bfs-spanning-tree", False, {"n_tree": s.n, "n_graph": n}, "size mismatch")
    else:
        for v in range(n):
            p = par[v]
            if v == s.source:
                if p != -1:
                    p1 = PropertyCheck("bfs-spanning-tree", False, {"node": v}, "source has a parent")
                    break
                continue
            if p < 0 or p not in adj[v] or true_layers[p] != true_layers[v] - 1 \
                    or s.layer_of[v] != true_layers[v]:
                p1 = PropertyCheck("bfs-spanning-tree", False,
                                   {"node": v, "parent": p, "layer": true_layers[v]},
                                   "parent is not a previous-layer neighbour")
                break
    report.checks.append(p1)

    # (2)
    p2 = PropertyCheck("ranking", True)
    try:
        fresh = rank_tree(par, s.x)
    except CycleError as exc:
        p2 = PropertyCheck("ranking", False, None, str(exc))
    else:
        bad = [v for v in range(n) if fresh.rank2[v] != s.ranked.rank2[v]
               or fresh.rankx[v] != s.ranked.rankx[v]]
        if bad:
            p2 = PropertyCheck("ranking", False, {"nodes": bad[:10]}, "stored ranks differ")
        else:
            cls = classify(fresh)
            badc = [v for v in range(n) if cls[v] is not s.class_of[v]]
            if badc:
                p2 = PropertyCheck("ranking", False, {"nodes": badc[:10]}, "stored classes differ")
    report.checks.append(p2)

    layer = true_layers
    r2, rx = s.ranked.rank2, s.ranked.rankx

    # (3)
    fast = defaultdict(set)
    for v in range(n):
        if par[v] >= 0 and r2[v] == r2[par[v]]:
            fast[(layer[v], r2[v])].add(v)
    p3 = PropertyCheck("fast-collision-free", True)
    for (k, j), members in sorted(fast.items()):
        for v in sorted(members):
            u = par[v]
            hits = members & adj[u]
            if len(hits) != 1:
                p3 = PropertyCheck("fast-collision-free", False,
                                   {"layer": k, "rank": j, "parent": u, "nodes": sorted(hits)})
                break
        if not p3.passed:
            break
    report.checks.append(p3)

    # (4)
    slow = defaultdict(set)
    for v in range(n):
        p = par[v]
        if p >= 0 and r2[v] < r2[p] and rx[v] == rx[p]:
            slow[(layer[v], r2[v], rx[v])].add(v)
    p4 = PropertyCheck("slow-competition-bounded", True)
    for (k, j, i), members in sorted(slow.items()):
        for v in sorted(members):
            u = par[v]
            hits = members & adj[u]
            if len(hits) > s.x - 1:
                p4 = PropertyCheck("slow-competition-bounded", False,
                                   {"layer": k, "rank": j, "rankx": i, "parent": u,
                                    "nodes": sorted(hits)})
                break
        if not p4.passed:
            break
    report.checks.append(p4)
    return report


# --- construction ----------------------------------------------------------------

def _node_rank(child_ranks, x):
    if not child_ranks:
        return 1
    top = max(child_ranks)
    return top + 1 if child_ranks.count(top) >= x else top


class _LayerProblem:
    """Parent choice for one BFS layer.

    The ranks of layer-k nodes depend only on deeper layers, and properties
    (3) and (4) at layer k depend only on how layer k attaches to layer k-1,
    so each layer can be solved on its own, bottom-up.
    """

    def __init__(self, nodes, prev, adj, r2, rx, x):
        self.nodes = list(nodes)
        self.prev = set(prev)
        self.adj = adj
        self.r2, self.rx, self.x = r2, rx, x
        self.cand = {v: sorted(u for u in adj[v] if u in self.prev) for v in self.nodes}

    def greedy(self) -> dict[int, int]:
        parent = {}
        r2, rx, cand = self.r2, self.rx, self.cand

        def sweep(group, thr):
            while True:
                hits = defaultdict(list)
                for v in sorted(group):
                    for u in cand[v]:
                        hits[u].append(v)
                ready = [u for u, vs in hits.items() if len(vs) >= thr]
                if not ready:
                    return
                u = min(ready)
                for v in hits[u]:
                    parent[v] = u
                    group.discard(v)

        for j in sorted({r2[v] for v in self.nodes}, reverse=True):
            rj = {v for v in self.nodes if r2[v] == j}
            for i in sorted({rx[v] for v in rj}, reverse=True):
                grp = {v for v in rj if rx[v] == i}
                sweep(grp, self.x)
                rj = {v for v in rj if v not in parent}
            sweep(rj, 2)
            for v in sorted(rj):
                parent[v] = cand[v][0]
        return parent

    def parent_ranks(self, parent):
        kids2, kidsx = defaultdict(list), defaultdict(list)
        for v, u in parent.items():
            kids2[u].append(self.r2[v])
            kidsx[u].append(self.rx[v])
        p2 = {u: _node_rank(kids2[u], 2) for u in self.prev}
        px = {u: _node_rank(kidsx[u], self.x) for u in self.prev}
        return p2, px

    def violations(self, parent) -> list[tuple[str, int, list[int]]]:
        """``(property, parent, offending nodes)`` for this layer."""
        p2, px = self.parent_ranks(parent)
        fast, slow = defaultdict(set), defaultdict(set)
        for v, u in parent.items():
            if self.r2[v] == p2[u]:
                fast[self.r2[v]].add(v)
            elif self.rx[v] == px[u]:
                slow[(self.r2[v], self.rx[v])].add(v)
        out = []
        for j, members in fast.items():
            for v in members:
                u = parent[v]
                hits = members & self.adj[u]
                if len(hits) != 1:
                    out.append(("fast-collision-free", u, sorted(hits)))
        for key, members in slow.items():
            for v in members:
                u = parent[v]
                hits = members & self.adj[u]
                if len(hits) > self.x - 1:
                    out.append(("slow-competition-bounded", u, sorted(hits)))
        return out

    def repair(self, parent, budget: int) -> tuple[dict[int, int], int]:
        """Greedy local search: move one child at a time to a parent that
        lowers this layer's violation count."""
        parent = dict(parent)
        viol = self.violations(parent)
        used = 0
        while viol and used < budget:
            used += 1
            best = None
            suspects = sorted({v for _, _, vs in viol for v in vs})
            for v in suspects:
                old = parent[v]
                for u in self.cand[v]:
                    if u == old:
                        continue
                    parent[v] = u
                    score = len(self.violations(parent))
                    if best is None or score < best[0]:
                        best = (score, v, u)
                parent[v] = old
            if best is None or best[0] >= len(viol):
                break
            parent[best[1]] = best[2]
            viol = self.violations(parent)
        return parent, used


def build_sgst(g: MeshGraph, source: int = 0, x: int | None = None, *,
               strategy: str = "greedy", max_iter: int | None = None) -> Sgst:
    """Construct an SGST rooted at ``source`` and certify it with verify_sgst.

    ``strategy="greedy"`` attaches each layer bottom-up: first every parent
    with at least ``x`` unattached same-(rank2, rank_x) neighbours adopts
    them all, then every parent with at least two unattached same-rank2
    neighbours adopts them, and leftovers take their lowest-id candidate.
    ``strategy="repair"`` starts from the lowest-id BFS tree and performs
    validator-guided local moves.  Either way, any violation left after at
    most ``max_iter`` (default ``50 * n``) repair moves raises
    :class:`SgstConstructionError`.
    """
    if not (0 <= source < g.n):
        raise IndexError(f"source {source} out of range for n={g.n}")
    x = default_x(g.n) if x is None else int(x)
    if x < 2:
        raise ValueError(f"x must be >= 2, got {x}")
    if strategy not in ("greedy", "repair"):
        raise ValueError(f"unknown strategy {strategy!r}")
    budget = 50 * g.n if max_iter is None else max_iter

    lay = bfs_layering(g, source)
    adj = g.adjacency
    r2 = [1] * g.n
    rx = [1] * g.n
    parent = [-1] * g.n
    for k in range(lay.depth, 0, -1):
        prob = _LayerProblem(lay.layers[k], lay.layers[k - 1], adj, r2, rx, x)
        if strategy == "greedy":
            assign = prob.greedy()
        else:
            assign = {v: prob.cand[v][0] for v in prob.nodes}
        if prob.violations(assign):
            assign, used = prob.repair(assign, budget)
            budget -= used
        parent_ranks = prob.parent_ranks(assign)
        for v, u in assign.items():
            parent[v] = u
        for u in lay.layers[k - 1]:
            r2[u], rx[u] = parent_ranks[0][u], parent_ranks[1][u]

    ranked = rank_tree(parent, x)
    s = Sgst(source, lay, ranked, classify(ranked))
    report = verify_sgst(g, s)
    if not report.ok:
        first = report.failures()[0]
        raise SgstConstructionError(
            f"SGST construction failed: {first.name} witness={first.witness}", report)
    return s


# --- path decomposition ------------------------------------------------------------

class SegmentKind(str, Enum):
    FAST_STRETCH = "fast"
    SLOW_EDGE = "slow"
    SUPERSLOW_EDGE = "superslow"


@dataclass(frozen=True)
class PathDecomposition:
    target: int
    segments: tuple[tuple[SegmentKind, int], ...]

    @property
    def q(self) -> int:
        """Number of fast stretches."""
        return sum(1 for k, _ in self.segments if k is SegmentKind.FAST_STRETCH)

    @property
    def length(self) -> int:
        return sum(d for _, d in self.segments)

    def count(self, kind: SegmentKind) -> int:
        return sum(1 for k, _ in self.segments if k is kind)


_EDGE_KIND = {
    NodeClass.FAST: SegmentKind.FAST_STRETCH,
    NodeClass.SLOW: SegmentKind.SLOW_EDGE,
    NodeClass.SUPERSLOW: SegmentKind.SUPERSLOW_EDGE,
}


def decompose_path(s: Sgst, target: int) -> PathDecomposition:
    path = []
    v = target
    while s.parent_of[v] >= 0:
        path.append(v)
        v = s.parent_of[v]
    path.reverse()
    segs: list[list] = []
    for w in path:
        kind = _EDGE_KIND[s.class_of[w]]
        if kind is SegmentKind.FAST_STRETCH and segs and segs[-1][0] is kind:
            segs[-1][1] += 1
        else:
            segs.append([kind, 1])
    return PathDecomposition(target, tuple((k, d) for k, d in segs))
