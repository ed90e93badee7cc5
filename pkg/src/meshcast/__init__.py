"""Broadcast schedules and a noisy radio simulator for known-topology mesh networks."""
from .engine import Reception, RoundOutcome, SimConfig, Trace, resolve_round, run_protocol
from .errors import (CollisionError, ConfigError, DimensionError, FieldError, GraphFormatError,
                     MeshcastError, SgstConstructionError)
from .estimator import BroadcastScheduler
from .graph import MeshGraph, bfs_layering, diameter, from_edges, generate_graph, parse_gen_spec
from .harness import ExperimentConfig, SummaryRow, export_schedule, import_schedule, run_experiment, sweep
from .protocols import DecayBroadcast, FaultlessBroadcast, MultiMessageBroadcast, RobustBroadcast
from .ranking import NodeClass, Sgst, build_sgst, decompose_path, rank_tree, verify_sgst

__version__ = "0.1.0"

__all__ = [
    "BroadcastScheduler", "CollisionError", "ConfigError", "DecayBroadcast", "DimensionError",
    "ExperimentConfig", "FaultlessBroadcast", "FieldError", "GraphFormatError", "MeshGraph",
    "MeshcastError", "MultiMessageBroadcast", "NodeClass", "Reception", "RobustBroadcast",
    "RoundOutcome", "SgstConstructionError", "Sgst", "SimConfig", "SummaryRow", "Trace",
    "bfs_layering", "build_sgst", "decompose_path", "diameter", "export_schedule", "from_edges",
    "generate_graph", "import_schedule", "parse_gen_spec", "rank_tree", "resolve_round",
    "run_experiment", "run_protocol", "sweep", "verify_sgst",
]
