from __future__ import annotations

import itertools
import sys
from collections import deque

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("meshcast", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("meshcast")


def brute_distances(n, edges):
    """All-pairs hop distances by repeated BFS over a plain adjacency dict."""
    adj = {v: [] for v in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = np.full((n, n), -1, dtype=int)
    for s in range(n):
        dist[s, s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for w in adj[u]:
                if dist[s, w] < 0:
                    dist[s, w] = dist[s, u] + 1
                    q.append(w)
    return dist


def naive_rank(parent, x):
    """Recursive rank straight from the definition (no memo, no ordering tricks)."""
    n = len(parent)
    kids = [[w for w in range(n) if parent[w] == v] for v in range(n)]

    def r(v):
        if not kids[v]:
            return 1
        rs = [r(w) for w in kids[v]]
        top = max(rs)
        return top + 1 if rs.count(top) >= x else top

    return [r(v) for v in range(n)]


def random_tree(rng, n):
    """Random recursive tree: node i > 0 attaches to a uniform earlier node."""
    return [-1] + [int(rng.integers(0, i)) for i in range(1, n)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CORPUS = ["path(8)", "path(33)", "star(9)", "cbt(31)", "cbt(63)", "grid(6,6)", "grid(5,9)",
          "rand(40,0.12)", "rand(64,0.1)", "expander(16,4)", "expander(12,8)"]


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is not None and acc.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acc.REPORT):
            terminalreporter.write_line(line)
