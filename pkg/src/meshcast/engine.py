"""Round-synchronous radio simulator.

Collision rule: a listening node receives a message only when exactly one
neighbour transmits.  Noise model: every transmitter flips one sender-fault
coin per round (a faulted transmission still occupies the channel), and a
listener that would otherwise receive a message flips a receiver-fault coin.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import ConfigError, ProtocolStateError
from .graph import MeshGraph, diameter, log2n
from .rng import Purpose, StreamSet

FAULT_MODES = ("both", "sender", "receiver")


class Reception(IntEnum):
    SILENCE = 0
    NOISE = 1
    MESSAGE = 2
    TRANSMITTING = 3


@dataclass
class SimConfig:
    p: float = 0.0
    delta: float = 0.1
    x: int | None = None
    c_mult: int = 6
    block_size: int | None = None
    seed: int = 0
    max_rounds: int | None = None
    trial_id: int = 0
    fault_mode: str = "both"

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ConfigError(f"p must lie in [0, 1], got {self.p}")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ConfigError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.x is not None and self.x < 2:
            raise ConfigError(f"x must be >= 2, got {self.x}")
        if self.c_mult < 1:
            raise ConfigError(f"c_mult must be a positive integer, got {self.c_mult}")
        if self.block_size is not None and self.block_size < 1:
            raise ConfigError(f"block size must be >= 1, got {self.block_size}")
        if self.trial_id < 0:
            raise ConfigError("trial_id must be non-negative")
        if self.fault_mode not in FAULT_MODES:
            raise ConfigError(f"fault_mode must be one of {FAULT_MODES}")


@dataclass
class RoundOutcome:
    round: int
    transmitters: np.ndarray
    status: np.ndarray
    sender: np.ndarray
    payloads: Mapping | None = None
    sender_faulted: np.ndarray | None = None

    def reception(self, v: int):
        s = Reception(int(self.status[v]))
        if s is Reception.MESSAGE:
            src = int(self.sender[v])
            return s, (self.payloads or {}).get(src, src)
        return s, None

    @property
    def receptions(self) -> dict:
        return {v: self.reception(v) for v in range(len(self.status))}


def _as_ids(transmitters, n):
    if isinstance(transmitters, np.ndarray) and transmitters.dtype == bool:
        return np.flatnonzero(transmitters), None
    if isinstance(transmitters, Mapping):
        ids = np.array(sorted(int(v) for v in transmitters), dtype=np.int64)
        return ids, dict(transmitters)
    return np.unique(np.asarray(list(transmitters), dtype=np.int64)), None


def _gather(g: MeshGraph, ids: np.ndarray):
    starts = g.indptr[ids]
    lens = g.indptr[ids + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    offs = np.repeat(starts - (np.cumsum(lens) - lens), lens)
    pos = np.arange(total) + offs
    return g.indices[pos], np.repeat(ids, lens)


def resolve_round(g: MeshGraph, transmitters, p: float = 0.0, streams: StreamSet | None = None,
                  rnd: int = 0, mode: str = "both", payloads: Mapping | None = None,
                  draw_coins: bool | None = None) -> RoundOutcome:
    """Receptions for one round.

    ``transmitters`` is a boolean mask, an iterable of ids, or an
    ``id -> payload`` mapping.  Fault coins come from ``streams`` at round
    ``rnd``; they are drawn whenever ``p > 0`` (or ``draw_coins`` is true).
    """
    n = g.n
    ids, mapped = _as_ids(transmitters, n)
    if payloads is None:
        payloads = mapped
    if ids.size and (ids[0] < 0 or ids[-1] >= n):
        raise ValueError("transmitter id out of range")
    txmask = np.zeros(n, dtype=bool)
    txmask[ids] = True
    recv, owner = _gather(g, ids)
    cnt = np.bincount(recv, minlength=n)

    if draw_coins is None:
        draw_coins = p > 0.0
    if draw_coins and streams is None:
        raise ValueError("fault coins requested without a stream set")
    sfault = np.zeros(n, dtype=bool)
    rfault = np.zeros(n, dtype=bool)
    if draw_coins:
        if mode in ("both", "sender"):
            sfault = txmask & (streams.uniforms(Purpose.SENDER_FAULT, rnd) < p)
        if mode in ("both", "receiver"):
            rfault = streams.uniforms(Purpose.RECEIVER_FAULT, rnd) < p

    listening = ~txmask
    single = listening & (cnt == 1)
    if sfault.any():
        ok = ~sfault[owner]
        cnt_clean = np.bincount(recv[ok], minlength=n)
        single_clean = single & (cnt_clean == 1)
    else:
        single_clean = single
    msg = single_clean & ~rfault
    status = np.zeros(n, dtype=np.int8)
    status[listening & (cnt >= 2)] = Reception.NOISE
    status[single & ~msg] = Reception.NOISE
    status[msg] = Reception.MESSAGE
    status[txmask] = Reception.TRANSMITTING
    sender = np.full(n, -1, dtype=np.int64)
    if msg.any():
        owner_sum = np.bincount(recv, weights=owner, minlength=n)
        sender[msg] = owner_sum[msg].astype(np.int64)
    return RoundOutcome(rnd, ids, status, sender, payloads, sfault[ids] if draw_coins else None)


def classic_receptions(g: MeshGraph, transmitters) -> dict[int, tuple[Reception, int | None]]:
    """Reference faultless rule, written directly from the model definition."""
    tx = set(int(v) for v in transmitters)
    out = {}
    for v in range(g.n):
        if v in tx:
            out[v] = (Reception.TRANSMITTING, None)
            continue
        heard = [u for u in g.adjacency[v] if u in tx]
        if not heard:
            out[v] = (Reception.SILENCE, None)
        elif len(heard) == 1:
            out[v] = (Reception.MESSAGE, heard[0])
        else:
            out[v] = (Reception.NOISE, None)
    return out


# --- protocol driver -------------------------------------------------------------

class Protocol:
    """Transmit-decision state machine driven by :func:`run_protocol`.

    Subclasses keep ``informed`` (nodes allowed to transmit) and ``complete``
    (nodes done) boolean arrays and implement ``reset``, ``decide`` and
    ``consume``.
    """

    name = "protocol"
    payload_tag = "m"

    def reset(self, g: MeshGraph, cfg: SimConfig, streams: StreamSet) -> None:
        raise NotImplementedError

    def decide(self, t: int) -> np.ndarray:
        raise NotImplementedError

    def payloads(self, t: int, tx_ids: np.ndarray):
        return None

    def consume(self, t: int, outcome: RoundOutcome) -> np.ndarray:
        raise NotImplementedError

    def done(self) -> bool:
        return bool(self.complete.all())

    def stats(self) -> dict:
        return {}


class SingleMessageProtocol(Protocol):
    """Common state for single-message broadcast: informed == complete."""

    def __init__(self, source: int = 0):
        self.source = int(source)

    def reset(self, g, cfg, streams):
        self.g, self.cfg, self.streams = g, cfg, streams
        if not (0 <= self.source < g.n):
            raise ConfigError(f"source {self.source} out of range for n={g.n}")
        self.informed = np.zeros(g.n, dtype=bool)
        self.informed[self.source] = True
        self.complete = self.informed

    def consume(self, t, outcome):
        got = (outcome.status == Reception.MESSAGE) & ~self.informed
        newly = np.flatnonzero(got)
        self.informed[newly] = True
        return newly


@dataclass
class Trace:
    n: int
    informed_round: np.ndarray
    completion_round: int | None
    success: bool
    rounds_run: int
    outcomes: list[RoundOutcome] | None = None
    events: list[tuple[int, int, str, str]] | None = None
    stats: dict = field(default_factory=dict)

    def events_csv(self, trial: int, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["trial", "round", "node", "event", "detail"])
        for rnd, node, ev, detail in self.events or ():
            w.writerow([trial, rnd, node, ev, detail])
        return buf.getvalue()


@lru_cache(maxsize=64)
def _cached_diameter(g: MeshGraph) -> int:
    return diameter(g)


def default_max_rounds(g: MeshGraph, k: int | None = None) -> int:
    lg = log2n(g.n)
    budget = 16 * (_cached_diameter(g) + lg * lg)
    if k is not None:
        budget += 16 * k * lg
    return budget


def _tag(payloads, v, default):
    if payloads is None:
        return default
    p = payloads.get(int(v), default)
    return p.tag() if hasattr(p, "tag") else str(p)


def run_protocol(g: MeshGraph, protocol: Protocol, cfg: SimConfig, *,
                 record: str = "summary", max_rounds: int | None = None) -> Trace:
    """Drive ``protocol`` until every node completes or the budget runs out.

    ``record`` is ``"summary"`` (no per-round data), ``"events"`` (TX/RX
    event list for CSV export) or ``"rounds"`` (keep every RoundOutcome).
    """
    if record not in ("summary", "events", "rounds"):
        raise ConfigError(f"unknown record mode {record!r}")
    streams = StreamSet(cfg.seed, cfg.trial_id, g.n)
    protocol.reset(g, cfg, streams)
    budget = max_rounds or cfg.max_rounds or default_max_rounds(g, getattr(protocol, "k", None))
    informed_round = np.full(g.n, -1, dtype=np.int64)
    informed_round[protocol.complete] = 0
    outcomes = [] if record == "rounds" else None
    events = [] if record == "events" else None
    if events is not None:
        for v in np.flatnonzero(protocol.complete):
            events.append((0, int(v), "INFORMED", ""))
    tx_total = noise_total = msg_total = 0
    completion = 0 if protocol.done() else None
    t = 0
    while completion is None and t < budget:
        t += 1
        tx = protocol.decide(t)
        if (tx & ~protocol.informed).any():
            bad = np.flatnonzero(tx & ~protocol.informed)[:5].tolist()
            raise ProtocolStateError(
                f"{protocol.name}: uninformed nodes {bad} scheduled to transmit in round {t}")
        ids = np.flatnonzero(tx)
        payloads = protocol.payloads(t, ids) if ids.size else None
        out = resolve_round(g, ids, cfg.p, streams, t, cfg.fault_mode, payloads)
        newly = protocol.consume(t, out)
        informed_round[newly] = t
        tx_total += ids.size
        noise_total += int((out.status == Reception.NOISE).sum())
        msg_total += int((out.status == Reception.MESSAGE).sum())
        if outcomes is not None:
            outcomes.append(out)
        if events is not None:
            for v in ids:
                events.append((t, int(v), "TX", _tag(payloads, v, protocol.payload_tag)))
            for v in np.flatnonzero(out.status == Reception.MESSAGE):
                events.append((t, int(v), "RX_MSG",
                               _tag(payloads, out.sender[v], protocol.payload_tag)))
            for v in np.flatnonzero(out.status == Reception.NOISE):
                events.append((t, int(v), "RX_NOISE", ""))
            for v in newly:
                events.append((t, int(v), "INFORMED", ""))
        if protocol.done():
            completion = t
    stats = {"transmissions": tx_total, "rx_noise": noise_total, "rx_msg": msg_total}
    stats.update(protocol.stats())
    return Trace(g.n, informed_round, completion, completion is not None, t,
                 outcomes, events, stats)
