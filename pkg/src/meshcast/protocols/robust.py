"""SGST broadcast for the noisy model.

Rounds come in blocks of 9.  Rounds 0-2 of a block are fast ticks, 3-5 run
Decay among slow parents (levels truncated to ``ceil(log2 x) + 1``) and 6-8
run full Decay among all informed nodes.  Each sub-block round serves the
layers of one residue mod 3.

Fast stretches are cut into blocks at barrier layers (multiples of ``S``), so
every block covers at most ``S`` consecutive layers.  Fast ticks are grouped
into superrounds of ``c_mult * S`` ticks; a block at contracted level ``I``
(= first layer div ``S``) with rank ``J`` is active in superround ``tau`` iff
``tau = I + spacing * J (mod spacing * rmax2)``.  Inside an active superround
a member on layer ``l`` transmits to its fast child on ticks ``= l (mod 3)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..engine import SingleMessageProtocol
from ..errors import ConfigError
from ..graph import ceil_log, log2n
from ..ranking import NodeClass, Sgst
from ..rng import Purpose
from .decay import decay_phase_len

DEFAULT_C_MULT = 6
DEFAULT_RANK_SPACING = 9
PHASE_LAYOUT = {"fast": [0, 1, 2], "slow": [3, 4, 5], "superslow": [6, 7, 8]}


def default_block_size(n: int) -> int:
    return max(1, ceil_log(log2n(n), 2))


@dataclass
class Supernodes:
    S: int
    blocks: tuple[tuple[int, ...], ...]
    block_of: np.ndarray
    level: np.ndarray
    rank: np.ndarray
    stretches: tuple[tuple[int, ...], ...]
    barrier: np.ndarray
    connectors: tuple[tuple[int, int], ...] = field(default=())

    @property
    def sizes(self) -> list[int]:
        return [len(b) for b in self.blocks]


def fast_stretches(sgst: Sgst) -> list[tuple[int, ...]]:
    """Maximal parent-to-child chains of fast edges, each listed from its head."""
    fc = sgst.fast_child
    out = []
    for v in range(sgst.n):
        if fc[v] >= 0 and sgst.class_of[v] is not NodeClass.FAST:
            chain = [v]
            while fc[chain[-1]] >= 0:
                chain.append(fc[chain[-1]])
            out.append(tuple(chain))
    return out


def split_stretch(layers: list[int], S: int) -> list[int]:
    """Block sizes for a chain occupying consecutive ``layers``: cut before every barrier."""
    sizes = []
    for i, l in enumerate(layers):
        if i == 0 or l % S == 0:
            sizes.append(0)
        sizes[-1] += 1
    return sizes


def contract_supernodes(sgst: Sgst, S: int) -> Supernodes:
    if S < 1:
        raise ConfigError(f"block size must be >= 1, got {S}")
    layer = sgst.layer_of
    stretches = fast_stretches(sgst)
    block_of = np.full(sgst.n, -1, dtype=np.int64)
    blocks, levels, ranks = [], [], []
    for chain in stretches:
        i = 0
        for size in split_stretch([layer[v] for v in chain], S):
            blk = chain[i:i + size]
            i += size
            block_of[list(blk)] = len(blocks)
            blocks.append(blk)
            levels.append(layer[blk[0]] // S)
            ranks.append(sgst.ranked.rank2[blk[0]])
    in_stretch = block_of >= 0
    barrier = in_stretch & (np.asarray(layer) % S == 0)
    connectors = tuple(
        (p, v) for v, p in enumerate(sgst.parent_of)
        if sgst.class_of[v] is NodeClass.SLOW and in_stretch[p] and in_stretch[v])
    return Supernodes(S, tuple(blocks), block_of, np.asarray(levels, dtype=np.int64),
                      np.asarray(ranks, dtype=np.int64), tuple(stretches), barrier, connectors)


def phase_kind(t: int) -> str:
    """Which sub-block round ``t`` falls in: "fast", "slow" or "superslow"."""
    return ("fast", "slow", "superslow")[(t % 9) // 3]


def _fast_tick_round(fc: int) -> int:
    return 9 * (fc // 3) + fc % 3


class RobustBroadcast(SingleMessageProtocol):
    name = "robust"

    def __init__(self, sgst: Sgst, c_mult: int | None = None, S: int | None = None,
                 rank_spacing: int = DEFAULT_RANK_SPACING, track_blocks: bool = False):
        super().__init__(sgst.source)
        self.sgst = sgst
        self.c_mult = c_mult
        self.S = S
        if rank_spacing < 1:
            raise ConfigError("rank_spacing must be >= 1")
        self.rank_spacing = rank_spacing
        self.track_blocks = track_blocks
        self.supernodes: Supernodes | None = None

    # parameters resolved against the graph size and config
    def _resolve(self, n, cfg):
        c = self.c_mult or cfg.c_mult or DEFAULT_C_MULT
        S = self.S or cfg.block_size or default_block_size(n)
        return int(c), int(S)

    def reset(self, g, cfg, streams):
        super().reset(g, cfg, streams)
        c, S = self._resolve(g.n, cfg)
        if self.supernodes is None or self.supernodes.S != S:
            self.supernodes = contract_supernodes(self.sgst, S)
        self.c_eff, self.S_eff = c, S
        self.superround = c * S
        sn = self.supernodes
        self._layer = np.asarray(self.sgst.layer_of, dtype=np.int64)
        self._res3 = self._layer % 3
        fchild = np.asarray(self.sgst.fast_child, dtype=np.int64)
        self._has_fast = fchild >= 0
        blk = sn.block_of
        member = blk >= 0
        self._act_off = np.full(g.n, -1, dtype=np.int64)
        s, R = self.rank_spacing, self.sgst.rmax2
        self._period = s * R
        self._act_off[member] = (sn.level[blk[member]] + s * sn.rank[blk[member]]) % self._period
        self._slow_parent = np.array(
            [bool(self.sgst.children_of_class(v, NodeClass.SLOW)) for v in range(g.n)])
        self.L_slow = max(1, ceil_log(self.sgst.x, 2)) + 1
        self.L_ss = decay_phase_len(g.n)
        self.inf_round = np.full(g.n, -1, dtype=np.int64)
        self.inf_round[self.source] = 0
        self.fast_tx = self.slow_tx = self.ss_tx = 0

    def decide(self, t):
        phase, b = t % 9, t // 9
        inf = self.informed
        kind = phase_kind(t)
        if kind == "fast":
            fc = 3 * b + phase
            tau = fc // self.superround
            active = self._act_off == tau % self._period
            tx = inf & self._has_fast & active & (self._res3 == fc % 3)
            self.fast_tx += int(tx.sum())
        elif kind == "slow":
            level = b % self.L_slow + 1
            u = self.streams.uniforms(Purpose.SLOW_DECAY, t)
            tx = inf & self._slow_parent & (self._res3 == phase - 3) & (u < 2.0 ** -level)
            self.slow_tx += int(tx.sum())
        else:
            level = b % self.L_ss + 1
            u = self.streams.uniforms(Purpose.DECAY, t)
            tx = inf & (self._res3 == phase - 6) & (u < 2.0 ** -level)
            self.ss_tx += int(tx.sum())
        return tx

    def consume(self, t, outcome):
        newly = super().consume(t, outcome)
        self.inf_round[newly] = t
        return newly

    # --- statistics --------------------------------------------------------------

    def _deadline(self, entry_round: int, blk: int) -> int:
        """Last round of the first active superround that starts after ``entry_round``."""
        t = entry_round + 1
        while t % 9 >= 3:
            t += 1
        fc = 3 * (t // 9) + t % 9
        tau0 = -(-fc // self.superround)
        sn = self.supernodes
        off = (sn.level[blk] + self.rank_spacing * sn.rank[blk]) % self._period
        tau = tau0 + (off - tau0) % self._period
        return _fast_tick_round((tau + 1) * self.superround - 1)

    def block_transits(self) -> list[tuple[int, int, bool]]:
        """``(block, rounds from entry to exit or -1, exited within its first active superround)``."""
        sn = self.supernodes
        fchild = self.sgst.fast_child
        out = []
        for i, blk in enumerate(sn.blocks):
            last = blk[-1]
            exit_node = fchild[last] if fchild[last] >= 0 else last
            entry = self.inf_round[blk[0]]
            if exit_node == blk[0] or entry < 0:
                continue
            ex = self.inf_round[exit_node]
            ok = bool(0 <= ex <= self._deadline(int(entry), i))
            out.append((i, int(ex - entry) if ex >= 0 else -1, ok))
        return out

    def stats(self):
        st = {"fast_tx": self.fast_tx, "slow_tx": self.slow_tx, "superslow_tx": self.ss_tx,
              "block_size": self.S_eff, "c_mult": self.c_eff}
        conn = [self.inf_round[v] - self.inf_round[u] for u, v in self.supernodes.connectors
                if self.inf_round[v] >= 0 and self.inf_round[u] >= 0]
        st["connectors"] = len(self.supernodes.connectors)
        st["connector_delay_mean"] = float(np.mean(conn)) if conn else math.nan
        if self.track_blocks:
            tr = self.block_transits()
            st["block_transits"] = len(tr)
            st["block_exit_fail_rate"] = (sum(not ok for _, _, ok in tr) / len(tr)) if tr else math.nan
        return st

    # --- export ------------------------------------------------------------------

    def schedule_dict(self, n: int, cfg=None) -> dict:
        from ..engine import SimConfig
        c, S = self._resolve(n, cfg or SimConfig())
        return {
            "scheme": "robust",
            "x": self.sgst.x,
            "S": S,
            "c_mult": c,
            "rank_spacing": self.rank_spacing,
            "rmax2": self.sgst.rmax2,
            "phase_layout": PHASE_LAYOUT,
            "slow_decay_levels": max(1, ceil_log(self.sgst.x, 2)) + 1,
            "superslow_decay_levels": decay_phase_len(n),
            "superround_ticks": c * S,
        }

    def schedule_json(self, n: int, cfg=None) -> str:
        return json.dumps(self.schedule_dict(n, cfg), sort_keys=True, indent=1)
