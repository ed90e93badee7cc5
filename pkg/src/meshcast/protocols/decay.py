"""Decay: in round i of each phase every informed node transmits w.p. 2^-i."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import SingleMessageProtocol
from ..graph import log2n
from ..rng import Purpose


def decay_phase_len(n: int) -> int:
    return log2n(n) + 1


@dataclass
class DecayState:
    phase_len: int
    informed: np.ndarray
    round_in_phase: int = 1

    def advance(self) -> None:
        self.round_in_phase = self.round_in_phase % self.phase_len + 1


def decay_decide(st: DecayState, uniforms: np.ndarray) -> np.ndarray:
    """Transmitter mask for the current phase round; does not advance ``st``."""
    return st.informed & (uniforms < 2.0 ** -st.round_in_phase)


def phase_success_probability(levels: int) -> float:
    """P(a lone informed neighbour gets through within one phase), p = 0."""
    miss = 1.0
    for i in range(1, levels + 1):
        miss *= 1.0 - 2.0 ** -i
    return 1.0 - miss


class DecayBroadcast(SingleMessageProtocol):
    name = "decay"

    def __init__(self, source: int = 0, phase_len: int | None = None):
        super().__init__(source)
        self.phase_len = phase_len

    def reset(self, g, cfg, streams):
        super().reset(g, cfg, streams)
        L = self.phase_len or decay_phase_len(g.n)
        self.state = DecayState(L, self.informed)

    def decide(self, t):
        self.state.round_in_phase = (t - 1) % self.state.phase_len + 1
        return decay_decide(self.state, self.streams.uniforms(Purpose.DECAY, t))
