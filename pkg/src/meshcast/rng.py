"""Counter-based random streams.

Every uniform the simulator consumes is a pure function of
``(seed, trial_id, purpose, round, node)``: a Philox4x64 generator keyed by
``(seed, trial_id)`` is positioned at counter ``round * ceil(n / 4)`` in the
lane reserved for ``purpose``.  Trials therefore never share state, and the
order in which rounds or purposes are drawn cannot change any value.
"""
from __future__ import annotations

from enum import IntEnum

import numpy as np

MASK64 = (1 << 64) - 1


class Purpose(IntEnum):
    DECAY = 1
    SENDER_FAULT = 2
    RECEIVER_FAULT = 3
    SLOW_DECAY = 4
    CODING = 5
    PROTOCOL = 6


def _key(seed: int, trial_id: int) -> int:
    return (int(seed) & MASK64) | ((int(trial_id) & MASK64) << 64)


class CounterStream:
    """Per-round arrays of ``n`` uniforms for one (seed, trial, purpose)."""

    def __init__(self, seed: int, trial_id: int, purpose: int, n: int, chunk: int = 64):
        self.key = _key(seed, trial_id)
        self.purpose = int(purpose)
        self.n = int(n)
        self.words = max(1, -(-self.n // 4))
        self.chunk = int(chunk)
        self._start = None
        self._buf = None

    def _draw(self, first_round: int, rounds: int) -> np.ndarray:
        bg = np.random.Philox(key=self.key, counter=[first_round * self.words, self.purpose, 0, 0])
        vals = np.random.Generator(bg).random(rounds * self.words * 4)
        return vals.reshape(rounds, self.words * 4)[:, :self.n]

    def uniforms(self, rnd: int) -> np.ndarray:
        if self._buf is None or not (self._start <= rnd < self._start + self.chunk):
            self._start = rnd
            self._buf = self._draw(rnd, self.chunk)
        return self._buf[rnd - self._start]

    def at(self, rnd: int, node: int) -> float:
        """Random access to a single value (no buffering)."""
        return float(self._draw(rnd, 1)[0, node])


class StreamSet:
    """Lazily created :class:`CounterStream` per purpose for one trial."""

    def __init__(self, seed: int, trial_id: int, n: int):
        self.seed = int(seed)
        self.trial_id = int(trial_id)
        self.n = int(n)
        self._streams: dict[int, CounterStream] = {}

    def uniforms(self, purpose: int, rnd: int) -> np.ndarray:
        s = self._streams.get(purpose)
        if s is None:
            s = self._streams[purpose] = CounterStream(self.seed, self.trial_id, purpose, self.n)
        return s.uniforms(rnd)

    def generator(self, purpose: int, rnd: int, node: int) -> np.random.Generator:
        """An independent generator for variable-length draws at (round, node)."""
        bg = np.random.Philox(key=_key(self.seed, self.trial_id),
                              counter=[0, int(purpose) | (int(node) << 8), int(rnd), 1])
        return np.random.Generator(bg)
