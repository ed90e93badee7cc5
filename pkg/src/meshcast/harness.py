"""Monte Carlo experiment runner, schedule export, and parameter sweeps."""
from __future__ import annotations

import csv
import io
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .engine import SimConfig, Trace, run_protocol
from .errors import ConfigError
from .graph import MeshGraph, default_x, diameter, generate_graph, load_graph, parse_gen_spec
from .protocols import DecayBroadcast, FaultlessBroadcast, MultiMessageBroadcast, RobustBroadcast
from .protocols.faultless import FaultlessSchedule
from .protocols.robust import DEFAULT_RANK_SPACING
from .ranking import Sgst, build_sgst

PROTOCOLS = ("decay", "faultless", "robust", "multi")
SUMMARY_COLUMNS = ["trial", "protocol", "n", "D", "p", "x", "k", "completion_round", "success"]


@dataclass
class ExperimentConfig:
    graph: str | None = None
    gen: str | None = None
    protocol: str = "robust"
    p: float = 0.0
    delta: float = 0.1
    x: int | None = None
    k: int | None = None
    trials: int = 1
    seed: int = 0
    max_rounds: int | None = None
    out: str | None = None
    trace: str = "summary"
    export_schedule: str | None = None
    c_mult: int = 6
    block_size: int | None = None
    source: int = 0
    jobs: int = 1
    timing: bool = False

    def validate(self) -> None:
        if (self.graph is None) == (self.gen is None):
            raise ConfigError("exactly one of graph and gen must be given")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if self.k is not None and self.protocol != "multi":
            raise ConfigError("k is only meaningful with protocol=multi")
        if self.protocol == "multi" and (self.k is None or self.k < 1):
            raise ConfigError(f"protocol=multi needs k >= 1, got {self.k}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.trace not in ("summary", "events"):
            raise ConfigError(f"trace must be summary or events, got {self.trace!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.export_schedule and self.protocol == "decay":
            raise ConfigError("decay has no deterministic schedule to export")
        # range checks shared with the simulator
        self.sim_config(0)

    def sim_config(self, trial: int) -> SimConfig:
        return SimConfig(p=self.p, delta=self.delta, x=self.x, c_mult=self.c_mult,
                         block_size=self.block_size, seed=self.seed, max_rounds=self.max_rounds,
                         trial_id=trial)


@dataclass
class SummaryRow:
    trial: int
    protocol: str
    n: int
    D: int
    p: float
    x: int
    k: int
    completion_round: int
    success: bool
    wall_time_ms: float | None = None

    def as_list(self, timing: bool = False) -> list:
        out = [self.trial, self.protocol, self.n, self.D, repr(float(self.p)), self.x, self.k,
               self.completion_round, int(self.success)]
        if timing:
            out.append(f"{self.wall_time_ms:.3f}")
        return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    graph: MeshGraph
    sgst: Sgst | None
    rows: list[SummaryRow]
    traces: list[Trace] = field(default_factory=list)

    def summary_csv(self) -> str:
        return summary_csv(self.rows, self.config.timing)

    def events_csv(self) -> str:
        return "".join(tr.events_csv(i, header=(i == 0)) for i, tr in enumerate(self.traces))


def summary_csv(rows, timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS + (["wall_time_ms"] if timing else []))
    for r in rows:
        w.writerow(r.as_list(timing))
    return buf.getvalue()


def acquire_graph(cfg: ExperimentConfig) -> MeshGraph:
    if cfg.graph is not None:
        return load_graph(cfg.graph)
    return generate_graph(parse_gen_spec(cfg.gen), cfg.seed)


@lru_cache(maxsize=16)
def cached_sgst(g: MeshGraph, source: int, x: int) -> Sgst:
    return build_sgst(g, source, x)


def make_protocol(name: str, sgst: Sgst | None, *, source: int = 0, k: int | None = None,
                  strict: bool = False):
    if name == "decay":
        return DecayBroadcast(source)
    if name == "faultless":
        return FaultlessBroadcast(sgst, strict=strict)
    if name == "robust":
        return RobustBroadcast(sgst)
    if name == "multi":
        return MultiMessageBroadcast(RobustBroadcast(sgst), k)
    raise ConfigError(f"unknown protocol {name!r}")


def _run_trial(args):
    cfg, g, sgst, trial = args
    proto = make_protocol(cfg.protocol, sgst, source=cfg.source, k=cfg.k)
    record = "events" if cfg.trace == "events" else "summary"
    t0 = time.perf_counter()
    tr = run_protocol(g, proto, cfg.sim_config(trial), record=record)
    return tr, (time.perf_counter() - t0) * 1000.0


def run_experiment(cfg: ExperimentConfig, *, write: bool = True) -> ExperimentResult:
    """Run ``cfg.trials`` independent trials; the SGST is built once and shared."""
    cfg.validate()
    g = acquire_graph(cfg)
    if not (0 <= cfg.source < g.n):
        raise ConfigError(f"source {cfg.source} out of range for n={g.n}")
    x = cfg.x or default_x(g.n)
    sgst = cached_sgst(g, cfg.source, x) if cfg.protocol != "decay" else None
    D = diameter(g)
    jobs = [(cfg, g, sgst, i) for i in range(cfg.trials)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]
    rows, traces = [], []
    for i, (tr, ms) in enumerate(results):
        comp = tr.completion_round if tr.success else -1
        rows.append(SummaryRow(i, cfg.protocol, g.n, D, cfg.p, x, cfg.k or 1, comp, tr.success, ms))
        traces.append(tr)
    res = ExperimentResult(cfg, g, sgst, rows, traces)
    if write:
        write_outputs(res)
    return res


def write_outputs(res: ExperimentResult) -> None:
    cfg = res.config
    if cfg.out:
        Path(cfg.out).write_text(res.summary_csv(), newline="\n")
        if cfg.trace == "events":
            Path(events_path(cfg.out)).write_text(res.events_csv(), newline="\n")
    if cfg.export_schedule:
        Path(cfg.export_schedule).write_text(
            export_schedule(cfg.protocol, res.graph, res.sgst, cfg.sim_config(0)), newline="\n")


def events_path(out: str) -> str:
    p = Path(out)
    return str(p.with_name(p.stem + ".events.csv"))


# --- schedule export ------------------------------------------------------------------

def export_schedule(protocol: str, g: MeshGraph, sgst: Sgst, sim: SimConfig | None = None) -> str:
    if protocol == "faultless":
        return FaultlessSchedule.build(g, sgst).to_json()
    if protocol in ("robust", "multi"):
        return RobustBroadcast(sgst).schedule_json(g.n, sim)
    raise ConfigError(f"schedule export is defined for faultless and robust, not {protocol!r}")


def import_schedule(text: str):
    """Parse an export: a :class:`FaultlessSchedule` or the robust parameter dict."""
    d = json.loads(text)
    scheme = d.get("scheme")
    if scheme == "faultless":
        return FaultlessSchedule.from_dict(d)
    if scheme == "robust":
        missing = {"S", "c_mult", "x", "phase_layout"} - set(d)
        if missing:
            raise ConfigError(f"robust schedule lacks {sorted(missing)}")
        return d
    raise ConfigError(f"unknown schedule scheme {scheme!r}")


def reexport_schedule(obj) -> str:
    if isinstance(obj, FaultlessSchedule):
        return obj.to_json()
    return json.dumps(obj, sort_keys=True, indent=1)


def robust_from_schedule(sgst: Sgst, d: dict) -> RobustBroadcast:
    if int(d["x"]) != sgst.x:
        raise ConfigError(f"schedule was exported for x={d['x']}, tree has x={sgst.x}")
    return RobustBroadcast(sgst, c_mult=int(d["c_mult"]), S=int(d["S"]),
                           rank_spacing=int(d.get("rank_spacing", DEFAULT_RANK_SPACING)))


# --- sweeps ---------------------------------------------------------------------------

AGG_COLUMNS = ["graph", "protocol", "n", "D", "p", "k", "trials", "successes", "failure_rate",
               "mean", "median", "q10", "q90", "error"]


@dataclass
class SweepConfig:
    family: str = "path({n})"
    n: list = field(default_factory=lambda: [16])
    protocol: list = field(default_factory=lambda: ["robust"])
    p: list = field(default_factory=lambda: [0.0])
    k: list = field(default_factory=lambda: [1])
    trials: int = 10
    seed: int = 0
    delta: float = 0.1
    max_rounds: int | None = None
    jobs: int = 1

    def cells(self):
        if not (self.n and self.protocol and self.p and self.k):
            raise ConfigError("sweep grid is empty")
        for n, proto, p, k in itertools.product(self.n, self.protocol, self.p, self.k):
            if proto != "multi" and k != 1:
                continue
            yield self.family.format(n=n), proto, p, k


@dataclass
class CellSummary:
    graph: str
    protocol: str
    n: int = -1
    D: int = -1
    p: float = 0.0
    k: int = 1
    trials: int = 0
    successes: int = 0
    failure_rate: float = float("nan")
    mean: float = float("nan")
    median: float = float("nan")
    q10: float = float("nan")
    q90: float = float("nan")
    error: str = ""

    def as_list(self) -> list:
        def f(v):
            return "" if isinstance(v, float) and np.isnan(v) else repr(float(v))
        return [self.graph, self.protocol, self.n, self.D, repr(float(self.p)), self.k, self.trials,
                self.successes, f(self.failure_rate), f(self.mean), f(self.median), f(self.q10),
                f(self.q90), self.error]


def summarize_cell(graph: str, protocol: str, p: float, k: int, rows: list[SummaryRow]) -> CellSummary:
    comp = np.array([r.completion_round for r in rows if r.success], dtype=float)
    cs = CellSummary(graph, protocol, rows[0].n, rows[0].D, p, k, len(rows), int(comp.size))
    cs.failure_rate = 1.0 - comp.size / len(rows)
    if comp.size:
        cs.mean = float(comp.mean())
        cs.median = float(np.median(comp))
        cs.q10, cs.q90 = (float(v) for v in np.quantile(comp, [0.1, 0.9]))
    return cs


def sweep(sc: SweepConfig) -> list[CellSummary]:
    """Run every grid cell; a failing cell is recorded with its error and the sweep goes on."""
    cells = list(sc.cells())
    if not cells:
        raise ConfigError("sweep grid is empty")
    out = []
    for graph, proto, p, k in cells:
        cfg = ExperimentConfig(gen=graph, protocol=proto, p=p, k=k if proto == "multi" else None,
                               trials=sc.trials, seed=sc.seed, delta=sc.delta,
                               max_rounds=sc.max_rounds, jobs=sc.jobs)
        try:
            res = run_experiment(cfg, write=False)
            out.append(summarize_cell(graph, proto, p, k, res.rows))
        except Exception as exc:  # recorded per cell by design
            out.append(CellSummary(graph, proto, p=p, k=k, error=f"{type(exc).__name__}: {exc}"))
    return out


def aggregate_csv(cells: list[CellSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_COLUMNS)
    for c in cells:
        w.writerow(c.as_list())
    return buf.getvalue()


def config_from_dict(d: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    return ExperimentConfig(**d)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
