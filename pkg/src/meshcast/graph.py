"""Mesh graphs: edge-list I/O, generators and BFS structure."""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import (
    DisconnectedGraphError,
    DuplicateEdgeError,
    GeneratorError,
    GraphFormatError,
    SelfLoopError,
)

MAX_CONNECT_RETRIES = 64


@dataclass(frozen=True)
class MeshGraph:
    """Undirected simple connected graph on nodes ``0..n-1``.

    Construct through :func:`from_edges`, :func:`parse_graph` or
    :func:`generate_graph`; those enforce the invariants.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    indptr: np.ndarray = field(repr=False, compare=False)
    indices: np.ndarray = field(repr=False, compare=False)

    @cached_property
    def adjacency(self) -> tuple[frozenset[int], ...]:
        return tuple(
            frozenset(self.indices[self.indptr[v]:self.indptr[v + 1]].tolist())
            for v in range(self.n)
        )

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def max_degree(self) -> int:
        return int(self.degree.max()) if self.n else 0

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def csr(self) -> csr_matrix:
        data = np.ones(len(self.indices), dtype=np.int8)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def __hash__(self):
        return hash((self.n, self.edges))

    def __eq__(self, other):
        if not isinstance(other, MeshGraph):
            return NotImplemented
        return self.n == other.n and self.edges == other.edges


def from_edges(n: int, edges, *, require_connected: bool = True) -> MeshGraph:
    """Build a graph from an iterable of node pairs (any orientation)."""
    if n < 1:
        raise GraphFormatError(f"node count must be positive, got {n}")
    canon = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise SelfLoopError(f"self-loop on node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"edge ({u}, {v}) out of range for n={n}")
        e = (u, v) if u < v else (v, u)
        if e in canon:
            raise DuplicateEdgeError(f"duplicate edge {e}")
        canon.add(e)
    ordered = tuple(sorted(canon))
    indptr, indices = _csr_arrays(n, ordered)
    g = MeshGraph(n, ordered, indptr, indices)
    if require_connected and not is_connected(g):
        raise DisconnectedGraphError(f"graph with n={n} is not connected")
    return g


def _csr_arrays(n, edges):
    if edges:
        e = np.asarray(edges, dtype=np.int64)
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
    else:
        src = dst = np.zeros(0, dtype=np.int64)
    order = np.lexsort((dst, src))
    indices = dst[order].astype(np.int32)
    counts = np.bincount(src, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices


def is_connected(g: MeshGraph) -> bool:
    if g.n == 1:
        return True
    ncomp, _ = connected_components(g.csr, directed=False)
    return ncomp == 1


# --- file format -----------------------------------------------------------

_HEADER = re.compile(r"^(0|[1-9][0-9]*) (0|[1-9][0-9]*)$")
_EDGE = _HEADER


def parse_graph(text: str) -> MeshGraph:
    """Parse the ``n m`` / ``u v`` edge-list format.

    Lines are LF-terminated; a single trailing newline is allowed. Each edge
    must satisfy ``0 <= u < v < n``.
    """
    if "\r" in text:
        raise GraphFormatError("CR characters are not allowed (LF line endings only)")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GraphFormatError("empty graph file")
    mh = _HEADER.match(lines[0])
    if mh is None:
        raise GraphFormatError(f"line 1: malformed header {lines[0]!r}")
    n, m = int(mh.group(1)), int(mh.group(2))
    if n < 1:
        raise GraphFormatError("line 1: node count must be positive")
    if len(lines) - 1 != m:
        raise GraphFormatError(f"header declares {m} edges, found {len(lines) - 1} lines")
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        me = _EDGE.match(line)
        if me is None:
            raise GraphFormatError(f"line {lineno}: malformed edge {line!r}")
        u, v = int(me.group(1)), int(me.group(2))
        if u == v:
            raise SelfLoopError(f"line {lineno}: self-loop on node {u}")
        if u > v:
            raise GraphFormatError(f"line {lineno}: edge must be written as u < v, got {u} {v}")
        if v >= n:
            raise GraphFormatError(f"line {lineno}: node {v} out of range for n={n}")
        if (u, v) in seen:
            raise DuplicateEdgeError(f"line {lineno}: duplicate edge {u} {v}")
        seen.add((u, v))
    g = from_edges(n, seen, require_connected=False)
    if not is_connected(g):
        raise DisconnectedGraphError(f"graph with n={n} is not connected")
    return g


def format_graph(g: MeshGraph) -> str:
    out = [f"{g.n} {g.m}"]
    out.extend(f"{u} {v}" for u, v in g.edges)
    return "\n".join(out) + "\n"


def load_graph(path) -> MeshGraph:
    with open(path, "r", encoding="ascii", newline="") as fh:
        return parse_graph(fh.read())


def save_graph(g: MeshGraph, path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(format_graph(g))


# --- generators --------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    args: tuple

    def __str__(self):
        return f"{self.kind}({','.join(str(a) for a in self.args)})"


_KIND_ALIASES = {
    "path": "path",
    "star": "star",
    "cbt": "complete-binary-tree",
    "tree": "complete-binary-tree",
    "complete-binary-tree": "complete-binary-tree",
    "grid": "grid",
    "rand": "random-connected",
    "random": "random-connected",
    "random-connected": "random-connected",
    "expander": "layered-expander",
    "layered-expander": "layered-expander",
}

_SPEC_RE = re.compile(r"^\s*([A-Za-z][A-Za-z-]*)\s*\(([^()]*)\)\s*$")


def parse_gen_spec(text: str) -> GeneratorSpec:
    """Parse ``kind(arg,...)`` e.g. ``"rand(256,0.05)"``."""
    m = _SPEC_RE.match(text)
    if m is None:
        raise GeneratorError(f"malformed generator spec {text!r}")
    kind = _KIND_ALIASES.get(m.group(1).lower())
    if kind is None:
        raise GeneratorError(f"unknown generator kind {m.group(1)!r}")
    raw = [a.strip() for a in m.group(2).split(",")] if m.group(2).strip() else []
    args = []
    for a in raw:
        try:
            args.append(int(a))
        except ValueError:
            try:
                args.append(float(a))
            except ValueError:
                raise GeneratorError(f"bad generator argument {a!r}") from None
    return GeneratorSpec(kind, tuple(args))


def _derived_rng(seed: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), attempt]))


def generate_graph(spec, seed: int = 0) -> MeshGraph:
    """Deterministically generate a connected graph from a spec.

    ``spec`` is a :class:`GeneratorSpec` or its string form. Randomized kinds
    retry with a fresh derived seed up to ``MAX_CONNECT_RETRIES`` times when
    a sample comes out disconnected.
    """
    if isinstance(spec, str):
        spec = parse_gen_spec(spec)
    kind, args = spec.kind, spec.args
    try:
        if kind == "path":
            (n,) = args
            return path_graph(int(n))
        if kind == "star":
            (n,) = args
            return star_graph(int(n))
        if kind == "complete-binary-tree":
            (n,) = args
            return complete_binary_tree(int(n))
        if kind == "grid":
            rows, cols = (args[0], args[0]) if len(args) == 1 else args
            return grid_graph(int(rows), int(cols))
        if kind == "random-connected":
            n, q = args
            return random_connected(int(n), float(q), seed)
        if kind == "layered-expander":
            depth, width = args[0], args[1]
            extra = float(args[2]) if len(args) > 2 else 1.5
            return layered_expander(int(depth), int(width), seed, extra)
    except ValueError as exc:
        if isinstance(exc, GeneratorError):
            raise
        raise GeneratorError(f"bad arguments for {kind}: {args}") from exc
    raise GeneratorError(f"unknown generator kind {kind!r}")


def _need(cond, msg):
    if not cond:
        raise GeneratorError(msg)


def path_graph(n: int) -> MeshGraph:
    _need(n >= 1, "path needs n >= 1")
    return from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(n: int) -> MeshGraph:
    _need(n >= 1, "star needs n >= 1")
    return from_edges(n, [(0, i) for i in range(1, n)])


def complete_binary_tree(n: int) -> MeshGraph:
    """Heap-ordered binary tree: node i has children 2i+1 and 2i+2."""
    _need(n >= 1, "complete-binary-tree needs n >= 1")
    return from_edges(n, [((i - 1) // 2, i) for i in range(1, n)])


def grid_graph(rows: int, cols: int) -> MeshGraph:
    _need(rows >= 1 and cols >= 1, "grid needs positive dimensions")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return from_edges(rows * cols, edges)


def random_connected(n: int, q: float, seed: int = 0) -> MeshGraph:
    """G(n, q) conditioned on connectivity by bounded resampling."""
    _need(n >= 1, "random-connected needs n >= 1")
    _need(0.0 <= q <= 1.0, "edge probability must lie in [0, 1]")
    iu, ju = np.triu_indices(n, k=1)
    for attempt in range(MAX_CONNECT_RETRIES):
        rng = _derived_rng(seed, attempt)
        keep = rng.random(len(iu)) < q
        g = from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()), require_connected=False)
        if is_connected(g):
            return g
    raise GeneratorError(
        f"random-connected({n}, {q}) stayed disconnected after {MAX_CONNECT_RETRIES} samples"
    )


def layered_expander(depth: int, width: int, seed: int = 0, extra_degree: float = 1.5) -> MeshGraph:
    """``depth`` layers of ``width`` nodes; node id = layer * width + slot.

    Each slot forms a vertical chain through all layers; consecutive layers
    also get random cross links with probability ``extra_degree / width``,
    which glue the chains together and create collisions.
    """
    _need(depth >= 1 and width >= 1, "layered-expander needs positive depth and width")
    n = depth * width
    q = min(1.0, extra_degree / width)
    chain = [(l * width + i, (l + 1) * width + i) for l in range(depth - 1) for i in range(width)]
    pairs = [(a, b) for a in range(width) for b in range(width) if a != b]
    for attempt in range(MAX_CONNECT_RETRIES):
        rng = _derived_rng(seed, attempt)
        edges = list(chain)
        if pairs and depth > 1:
            hits = rng.random((depth - 1, len(pairs))) < q
            for l, k in zip(*np.nonzero(hits)):
                a, b = pairs[k]
                edges.append((l * width + a, (l + 1) * width + b))
        g = from_edges(n, edges, require_connected=False)
        if is_connected(g):
            return g
    raise GeneratorError(
        f"layered-expander({depth}, {width}) stayed disconnected after {MAX_CONNECT_RETRIES} samples"
    )


# --- BFS structure -------------------------------------------------------------

@dataclass(frozen=True)
class BfsLayering:
    root: int
    layer_of: tuple[int, ...]
    layers: tuple[tuple[int, ...], ...]

    @property
    def depth(self) -> int:
        return len(self.layers) - 1


def bfs_layering(g: MeshGraph, root: int) -> BfsLayering:
    if not (0 <= root < g.n):
        raise IndexError(f"root {root} out of range for n={g.n}")
    dist = [-1] * g.n
    dist[root] = 0
    queue = deque([root])
    adj = g.adjacency
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    if min(dist) < 0:
        raise DisconnectedGraphError("graph is not connected")
    layers = [[] for _ in range(max(dist) + 1)]
    for v, d in enumerate(dist):
        layers[d].append(v)
    return BfsLayering(root, tuple(dist), tuple(tuple(l) for l in layers))


def distance_matrix(g: MeshGraph) -> np.ndarray:
    return shortest_path(g.csr, method="D", directed=False, unweighted=True)


def eccentricities(g: MeshGraph) -> np.ndarray:
    if g.n == 1:
        return np.zeros(1, dtype=np.int64)
    dm = distance_matrix(g)
    if np.isinf(dm).any():
        raise DisconnectedGraphError("graph is not connected")
    return dm.max(axis=1).astype(np.int64)


def diameter(g: MeshGraph) -> int:
    """Exact diameter from all-sources BFS."""
    return int(eccentricities(g).max())


def ceil_log(n: int, base: int = 2) -> int:
    """Smallest e >= 0 with base**e >= n."""
    if n <= 1:
        return 0
    e, p = 0, 1
    while p < n:
        p *= base
        e += 1
    return e


def default_x(n: int) -> int:
    return max(2, ceil_log(n, 2))


def log2n(n: int) -> int:
    """``ceil(log2 n)`` clamped to at least 1, the schedules' unit of log n."""
    return max(1, ceil_log(n, 2))


__all__ = [
    "MeshGraph", "BfsLayering", "GeneratorSpec", "from_edges", "parse_graph",
    "format_graph", "load_graph", "save_graph", "parse_gen_spec", "generate_graph",
    "path_graph", "star_graph", "complete_binary_tree", "grid_graph",
    "random_connected", "layered_expander", "bfs_layering", "diameter",
    "eccentricities", "is_connected", "ceil_log", "default_x", "log2n",
]
