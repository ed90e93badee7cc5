"""Broadcast protocols as transmit-decision state machines."""
from .decay import DecayBroadcast, DecayState, decay_decide, decay_phase_len
from .faultless import FaultlessBroadcast, FaultlessSchedule, slow_coloring
from .multi import MultiMessageBroadcast
from .robust import (RobustBroadcast, Supernodes, contract_supernodes, default_block_size,
                     phase_kind, split_stretch)

__all__ = [
    "DecayBroadcast", "DecayState", "decay_decide", "decay_phase_len",
    "FaultlessBroadcast", "FaultlessSchedule", "slow_coloring",
    "RobustBroadcast", "Supernodes", "contract_supernodes", "default_block_size", "phase_kind",
    "split_stretch",
    "MultiMessageBroadcast",
]
