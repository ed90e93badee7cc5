"""Estimator-style facade: ``fit`` builds the tree, ``predict`` runs trials."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .engine import SimConfig, run_protocol
from .errors import ConfigError
from .graph import default_x, diameter
from .harness import PROTOCOLS, make_protocol
from .ranking import build_sgst, verify_sgst
from .validation import check_graph, check_int, check_is_fitted, check_probability


class BroadcastScheduler(BaseEstimator):
    """Broadcast from one source over a fixed topology.

    ``fit(graph, source)`` builds and certifies the spanning tree;
    ``predict(trials)`` returns the completion round of each trial
    (-1 on budget exhaustion); ``transform`` returns per-node informed rounds.
    """

    def __init__(self, protocol="robust", p=0.0, delta=0.1, x=None, k=None, c_mult=6,
                 block_size=None, seed=0, max_rounds=None, strategy="greedy"):
        self.protocol = protocol
        self.p = p
        self.delta = delta
        self.x = x
        self.k = k
        self.c_mult = c_mult
        self.block_size = block_size
        self.seed = seed
        self.max_rounds = max_rounds
        self.strategy = strategy

    def _validate_params(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        check_probability(self.p, "p")
        check_probability(self.delta, "delta", open_interval=True)
        check_int(self.x, "x", minimum=2, allow_none=True)
        check_int(self.c_mult, "c_mult", minimum=1)
        check_int(self.block_size, "block_size", minimum=1, allow_none=True)
        check_int(self.max_rounds, "max_rounds", minimum=1, allow_none=True)
        if self.protocol == "multi":
            check_int(self.k, "k", minimum=1)

    def fit(self, graph, source: int = 0):
        self._validate_params()
        g = check_graph(graph)
        self.graph_ = g
        self.source_ = check_int(source, "source", minimum=0)
        self.x_ = self.x or default_x(g.n)
        self.sgst_ = build_sgst(g, self.source_, self.x_, strategy=self.strategy)
        self.report_ = verify_sgst(g, self.sgst_)
        self.diameter_ = diameter(g)
        return self

    def _config(self, trial: int) -> SimConfig:
        return SimConfig(p=self.p, delta=self.delta, x=self.x_, c_mult=self.c_mult,
                         block_size=self.block_size, seed=self.seed, max_rounds=self.max_rounds,
                         trial_id=trial)

    def simulate(self, trials: int = 1, record: str = "summary"):
        check_is_fitted(self)
        check_int(trials, "trials", minimum=1)
        out = []
        for i in range(trials):
            proto = make_protocol(self.protocol, self.sgst_, source=self.source_, k=self.k)
            out.append(run_protocol(self.graph_, proto, self._config(i), record=record))
        return out

    def predict(self, trials: int = 1) -> np.ndarray:
        return np.array([tr.completion_round if tr.success else -1 for tr in self.simulate(trials)],
                        dtype=np.int64)

    def transform(self, trials: int = 1) -> np.ndarray:
        """``(trials, n)`` informed rounds, -1 for nodes never informed."""
        return np.vstack([tr.informed_round for tr in self.simulate(trials)])

    def score(self, trials: int = 10) -> float:
        """Empirical success rate."""
        return float((self.predict(trials) >= 0).mean())
