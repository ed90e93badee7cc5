"""k-message broadcast by random linear network coding over a single-message schedule.

The wrapped protocol decides who transmits; every transmitter sends a fresh
random combination of its own span.  A node may transmit once it holds any
packet (rank >= 1) and is complete at rank ``k``.
"""
from __future__ import annotations

import numpy as np

from ..engine import Protocol, Reception
from ..errors import ConfigError
from ..rlnc import PAYLOAD_LEN, DecoderState, encode
from ..rng import Purpose


class MultiMessageBroadcast(Protocol):
    name = "multi"
    payload_tag = "c"

    def __init__(self, base: Protocol, k: int, payload_len: int = PAYLOAD_LEN):
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        self.base = base
        self.k = int(k)
        self.payload_len = int(payload_len)
        self.name = f"{base.name}+rlnc"

    @property
    def source(self) -> int:
        return self.base.source

    @property
    def informed(self) -> np.ndarray:
        return self.base.informed

    def reset(self, g, cfg, streams):
        self.base.reset(g, cfg, streams)
        self.streams = streams
        rng = streams.generator(Purpose.CODING, 0, self.source)
        self.messages = rng.integers(0, 256, size=(self.k, self.payload_len), dtype=np.uint8)
        self.decoders = [DecoderState(self.k, self.payload_len) for _ in range(g.n)]
        self.decoders[self.source] = DecoderState.from_messages(self.messages)
        self.rank = np.zeros(g.n, dtype=np.int64)
        self.rank[self.source] = self.k
        self.complete = self.rank == self.k
        self.innovative = 0
        self.redundant = 0

    def decide(self, t):
        return self.base.decide(t)

    def payloads(self, t, tx_ids):
        return {int(v): encode(self.decoders[v], self.streams.generator(Purpose.CODING, t, int(v)))
                for v in tx_ids}

    def consume(self, t, outcome):
        self.base.consume(t, outcome)
        got = np.flatnonzero(outcome.status == Reception.MESSAGE)
        before = self.complete.copy()
        for v in got:
            pkt = outcome.payloads[int(outcome.sender[v])]
            if self.decoders[v].absorb(pkt):
                self.innovative += 1
                self.rank[v] += 1
            else:
                self.redundant += 1
        self.complete = self.rank == self.k
        return np.flatnonzero(self.complete & ~before)

    def done(self):
        return bool(self.complete.all())

    def decoded(self, v: int) -> np.ndarray:
        return self.decoders[v].decoded()

    def stats(self):
        st = dict(self.base.stats())
        st.update({"k": self.k, "innovative": self.innovative, "redundant": self.redundant})
        return st
