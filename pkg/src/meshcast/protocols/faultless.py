"""Deterministic SGST broadcast for the faultless model.

Rounds are split by ``t mod 9``: a node on layer ``l`` uses residue ``l`` for
fast transmissions, ``l + 3`` for slow ones and ``l + 6`` for super-slow
Decay, so layers active in the same round are a multiple of 3 apart.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..engine import Reception, SingleMessageProtocol
from ..errors import CollisionError, ConfigError
from ..graph import MeshGraph
from ..ranking import NodeClass, Sgst
from ..rng import Purpose
from .decay import decay_phase_len

FAST, SLOW, SUPERSLOW = "fast", "slow", "superslow"


def slow_coloring(g: MeshGraph, sgst: Sgst) -> tuple[np.ndarray, dict[int, int]]:
    """Greedy colouring of slow parents, layer by layer.

    Two parents on one layer conflict when either is adjacent to a slow child
    of the other; parents sharing a colour can then transmit together without
    any slow child hearing two of them.  Returns per-node colour (-1 for
    non-parents) and the number of colours used per layer.
    """
    color = np.full(sgst.n, -1, dtype=np.int64)
    ncolors: dict[int, int] = {}
    adj = g.adjacency
    kids = {v: sgst.children_of_class(v, NodeClass.SLOW) for v in range(sgst.n)}
    for layer, nodes in enumerate(sgst.layering.layers):
        parents = [v for v in sorted(nodes) if kids[v]]
        if not parents:
            continue
        # u conflicts with w iff some slow child of one neighbours the other
        heard_by = {}
        for u in parents:
            for c in kids[u]:
                for w in adj[c]:
                    heard_by.setdefault(w, set()).add(u)
        used = 0
        for u in parents:
            taken = {int(color[w]) for w in heard_by.get(u, ()) if w != u and color[w] >= 0}
            taken |= {int(color[w]) for c in kids[u] for w in adj[c] if w != u and color[w] >= 0}
            col = 0
            while col in taken:
                col += 1
            color[u] = col
            used = max(used, col + 1)
        ncolors[layer] = used
    return color, ncolors


@dataclass
class FaultlessSchedule:
    """Slot table: per node ``(modulus, residue, kind)`` entries plus super-slow Decay levels."""

    layer: np.ndarray
    fast_mod: int
    fast_res: np.ndarray        # -1 when the node has no fast child
    slow_mod: np.ndarray        # 9 * colours on the node's layer; 0 when not a slow parent
    slow_res: np.ndarray
    ss_phase_len: int
    x: int
    rmax2: int

    @classmethod
    def build(cls, g: MeshGraph, sgst: Sgst) -> "FaultlessSchedule":
        n = sgst.n
        layer = np.asarray(sgst.layer_of, dtype=np.int64)
        rank2 = np.asarray(sgst.ranked.rank2, dtype=np.int64)
        fast_mod = 9 * sgst.rmax2
        has_fast = np.asarray(sgst.fast_child) >= 0
        fast_res = np.where(has_fast, (layer + 9 * rank2) % fast_mod, -1)
        color, ncolors = slow_coloring(g, sgst)
        slow_mod = np.zeros(n, dtype=np.int64)
        slow_res = np.full(n, -1, dtype=np.int64)
        for v in np.flatnonzero(color >= 0):
            m = ncolors[int(layer[v])]
            slow_mod[v] = 9 * m
            slow_res[v] = (layer[v] + 3) % 9 + 9 * color[v]
        return cls(layer, fast_mod, fast_res, slow_mod, slow_res, decay_phase_len(n), sgst.x, sgst.rmax2)

    @property
    def n(self) -> int:
        return len(self.layer)

    def entries(self, v: int) -> list[tuple[int, int, str]]:
        out = []
        if self.fast_res[v] >= 0:
            out.append((self.fast_mod, int(self.fast_res[v]), FAST))
        if self.slow_res[v] >= 0:
            out.append((int(self.slow_mod[v]), int(self.slow_res[v]), SLOW))
        return out

    def to_dict(self) -> dict:
        return {
            "scheme": "faultless",
            "x": self.x,
            "rmax2": self.rmax2,
            "layer": [int(v) for v in self.layer],
            "slots": {str(v): [list(e) for e in self.entries(v)] for v in range(self.n)},
            "superslow": {"decay_phase_len": self.ss_phase_len, "modulus": 9, "layer_offset": 6},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "FaultlessSchedule":
        if d.get("scheme") != "faultless":
            raise ConfigError("not a faultless schedule export")
        layer = np.asarray(d["layer"], dtype=np.int64)
        n = len(layer)
        fast_mod = 9 * int(d["rmax2"])
        fast_res = np.full(n, -1, dtype=np.int64)
        slow_mod = np.zeros(n, dtype=np.int64)
        slow_res = np.full(n, -1, dtype=np.int64)
        for key, entries in d["slots"].items():
            v = int(key)
            for mod, res, kind in entries:
                if kind == FAST:
                    if mod != fast_mod:
                        raise ConfigError(f"node {v}: fast modulus {mod} != {fast_mod}")
                    fast_res[v] = res
                elif kind == SLOW:
                    slow_mod[v], slow_res[v] = mod, res
                else:
                    raise ConfigError(f"node {v}: unknown slot kind {kind!r}")
        return cls(layer, fast_mod, fast_res, slow_mod, slow_res,
                   int(d["superslow"]["decay_phase_len"]), int(d["x"]), int(d["rmax2"]))


class FaultlessBroadcast(SingleMessageProtocol):
    """Fast congruence slots, coloured slow slots, and layer-clocked Decay on super-slow slots.

    With ``strict=True`` a Noise reception at an intended fast or slow
    receiver in a ``p = 0`` round raises :class:`CollisionError`; otherwise
    such events are only counted in ``stats()["attributable_noise"]``.
    """

    name = "faultless"

    def __init__(self, sgst: Sgst, schedule: FaultlessSchedule | None = None, strict: bool = False):
        super().__init__(sgst.source)
        self.sgst = sgst
        self.schedule = schedule
        self.strict = strict

    def reset(self, g, cfg, streams):
        super().reset(g, cfg, streams)
        if self.schedule is None or self.schedule.n != g.n:
            self.schedule = FaultlessSchedule.build(g, self.sgst)
        sc = self.schedule
        self._layer = sc.layer
        self._fast_res = sc.fast_res
        self._slow_mod = np.maximum(sc.slow_mod, 1)
        self._slow_res = sc.slow_res
        self._slow_base = (sc.layer + 3) % 9
        self._ss_base = (sc.layer + 6) % 9
        self._fast_child = np.asarray(self.sgst.fast_child, dtype=np.int64)
        self._slow_kids = [np.asarray(self.sgst.children_of_class(v, NodeClass.SLOW), dtype=np.int64)
                           for v in range(g.n)]
        self._intended: np.ndarray | None = None
        self.attributable_noise = 0
        self.fast_tx = self.slow_tx = self.ss_tx = 0

    def decide(self, t):
        sc = self.schedule
        inf = self.informed
        fast = inf & (self._fast_res == t % sc.fast_mod)
        slow = inf & (self._slow_res >= 0) & (t % self._slow_mod == self._slow_res)
        ss_layer = (self._ss_base == t % 9)
        if ss_layer.any():
            occ = (t - self._ss_base) // 9
            level = occ % sc.ss_phase_len + 1
            u = self.streams.uniforms(Purpose.DECAY, t)
            ss = inf & ss_layer & (u < np.exp2(-level.astype(float)))
        else:
            ss = np.zeros_like(inf)
        intended = [self._fast_child[fast]]
        intended.extend(self._slow_kids[v] for v in np.flatnonzero(slow))
        self._intended = np.concatenate(intended) if intended else None
        self.fast_tx += int(fast.sum())
        self.slow_tx += int(slow.sum())
        self.ss_tx += int(ss.sum())
        return fast | slow | ss

    def consume(self, t, outcome):
        if self._intended is not None and self._intended.size and self.cfg.p == 0.0:
            bad = self._intended[outcome.status[self._intended] == Reception.NOISE]
            if bad.size:
                self.attributable_noise += int(bad.size)
                if self.strict:
                    raise CollisionError(
                        f"round {t}: deterministic-slot receivers {bad[:5].tolist()} heard noise")
        return super().consume(t, outcome)

    def stats(self):
        return {"attributable_noise": self.attributable_noise, "fast_tx": self.fast_tx,
                "slow_tx": self.slow_tx, "superslow_tx": self.ss_tx}
