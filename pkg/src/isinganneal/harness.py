"""Batch experiments: repeated annealing runs per instance, ground-state
success probabilities, and histogram data.

Run ``r`` of instance ``i`` is seeded with ``derive_seed(master_seed, i, r)``.
Runs are grouped into fixed blocks and dispatched to a thread pool; results
are written back by index, so the report does not depend on the number of
workers or on completion order.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .chimera import ChimeraSpec, instance_batch
from .errors import CapabilityError, ConfigurationError
from .ising import IsingInstance, brute_force_ground, configs_at, energy, ground_tolerance
from .sa import CoolingSchedule, sa_ground_truth, sa_run
from .seeding import derive_seed, make_rng
from .sqa import default_dw_schedule, sqa_run

METHODS = ("SA", "SQA", "EXACT_QA")
GROUND_MODES = ("auto", "brute_force", "sa_protocol", "provided")
BRUTE_CAP = 20
CSV_COLUMNS = ("instance_id", "method", "b", "tau", "sweeps", "runs", "hits", "success_prob",
               "ground_energy")
BLOCK = 32


@dataclass
class ExperimentConfig:
    method: str = "SA"
    instances: list[IsingInstance] = field(default_factory=list)
    chimera: ChimeraSpec | None = None
    n_instances: int = 0
    instance_seed: int = 0
    runs_per_instance: int = 100
    sweeps: int = 1000
    tau: int = 30
    temperature: float = 0.1
    sa_schedule: CoolingSchedule = field(default_factory=CoolingSchedule)
    local_first: bool = True
    t_f: float = 100.0
    qa_steps: int = 4000
    master_seed: int = 0
    ground_truth: str = "auto"
    provided_ground: dict[str, float] = field(default_factory=dict)
    sa_protocol_grid: tuple[int, ...] = (1_000_000, 5_000_000, 10_000_000)
    sa_protocol_repeats: int = 3000
    workers: int = 1

    def validate(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}")
        if self.runs_per_instance < 1:
            raise ConfigurationError("runs_per_instance must be >= 1")
        if self.method != "EXACT_QA" and self.sweeps < 1:
            raise ConfigurationError("sweeps must be >= 1")
        if self.method == "SQA":
            if self.tau < 2:
                raise ConfigurationError("SQA needs tau >= 2")
            if not self.temperature > 0:
                raise ConfigurationError("temperature must be positive")
        if self.method == "EXACT_QA" and (not self.t_f > 0 or self.qa_steps < 1):
            raise ConfigurationError("EXACT_QA needs t_f > 0 and qa_steps >= 1")
        if self.ground_truth not in GROUND_MODES:
            raise ConfigurationError(f"ground_truth must be one of {GROUND_MODES}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if not self.instances and (self.chimera is None or self.n_instances < 1):
            raise ConfigurationError("give instances or a Chimera spec with n_instances >= 1")

    def resolve_instances(self) -> list[IsingInstance]:
        if self.instances:
            return list(self.instances)
        return instance_batch(self.chimera, self.n_instances, self.instance_seed)

    def echo(self) -> dict:
        d = {
            "method": self.method, "runs_per_instance": self.runs_per_instance,
            "sweeps": self.sweeps, "tau": self.tau, "temperature": self.temperature,
            "sa_schedule": {"kind": self.sa_schedule.kind, "c": self.sa_schedule.c,
                            "floor": self.sa_schedule.floor},
            "local_first": self.local_first, "t_f": self.t_f, "qa_steps": self.qa_steps,
            "master_seed": self.master_seed, "ground_truth": self.ground_truth,
        }
        if self.chimera is not None and not self.instances:
            d["chimera"] = {"m": self.chimera.m, "n": self.chimera.n, "k": self.chimera.k,
                            "masked": len(self.chimera.mask), "count": self.n_instances,
                            "instance_seed": self.instance_seed}
        return d


@dataclass
class InstanceRecord:
    instance_id: str
    method: str
    b: int
    tau: int | None
    sweeps: int | None
    runs: int
    hits: int
    success_prob: float
    ground_energy: float
    ground_source: str = "brute_force"
    exact_success: float | None = None

    def row(self) -> list:
        return [self.instance_id, self.method, self.b, "" if self.tau is None else self.tau,
                "" if self.sweeps is None else self.sweeps, self.runs, self.hits,
                repr(float(self.success_prob)), _num(self.ground_energy)]


def _num(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


@dataclass
class Histogram:
    edges: list[float]
    counts: list[int]


@dataclass
class ExperimentReport:
    records: list[InstanceRecord]
    histogram: Histogram
    config: dict
    wall_time: float = 0.0
    version: str = __version__

    @property
    def success_probs(self) -> np.ndarray:
        return np.array([r.success_prob for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow(r.row())
        return buf.getvalue()

    def to_dict(self, include_wall_time: bool = True) -> dict:
        d = {"version": self.version, "config": self.config,
             "records": [asdict(r) for r in self.records],
             "histogram": asdict(self.histogram)}
        if include_wall_time:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, include_wall_time: bool = True) -> str:
        return json.dumps(self.to_dict(include_wall_time), indent=2, sort_keys=True)


def histogram(probs, bins: int = 10) -> Histogram:
    """Equal-width bins on ``[0, max(probs)]``; right-open except the last."""
    p = np.asarray(list(probs), dtype=np.float64)
    if p.size == 0:
        raise ConfigurationError("histogram needs at least one value")
    if bins < 1:
        raise ConfigurationError("bins must be >= 1")
    hi = float(p.max())
    edges = np.linspace(0.0, hi, bins + 1)
    if hi > 0:
        idx = np.clip(np.floor(p / hi * bins).astype(np.int64), 0, bins - 1)
    else:
        idx = np.full(p.size, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return Histogram([float(e) for e in edges], [int(c) for c in counts])


def resolve_ground(inst: IsingInstance, cfg: ExperimentConfig, index: int) -> tuple[float, str]:
    mode = cfg.ground_truth
    if mode == "provided" or (mode == "auto" and inst.id in cfg.provided_ground):
        if inst.id not in cfg.provided_ground:
            raise ConfigurationError(f"no provided ground energy for instance {inst.id!r}")
        return float(cfg.provided_ground[inst.id]), "provided"
    if mode in ("auto", "brute_force") and inst.b <= BRUTE_CAP:
        return brute_force_ground(inst)[0], "brute_force"
    if mode == "brute_force":
        raise ConfigurationError(f"b={inst.b} exceeds the brute-force cap {BRUTE_CAP}")
    seed = derive_seed(cfg.master_seed, index, 0xA5A5)
    e = sa_ground_truth(inst, cfg.sa_protocol_grid, cfg.sa_protocol_repeats, seed, cfg.sa_schedule)
    return e, "sa_protocol"


def _is_hit(inst: IsingInstance, e: float, e0: float) -> bool:
    return abs(e - e0) <= ground_tolerance(inst, e0)


def _run_block(cfg: ExperimentConfig, inst: IsingInstance, i: int, runs: range) -> list[float]:
    out = []
    for r in runs:
        seed = derive_seed(cfg.master_seed, i, r)
        if cfg.method == "SA":
            out.append(sa_run(inst, cfg.sa_schedule, cfg.sweeps, seed).final_energy)
        else:
            sched = default_dw_schedule(cfg.temperature)
            out.append(sqa_run(inst, sched, cfg.tau, cfg.sweeps, seed, cfg.local_first).final_energy)
    return out


def _exact_qa(cfg: ExperimentConfig, inst: IsingInstance, i: int) -> tuple[list[float], float]:
    from .quantum import EVOLVE_CAP, evolve, success_probability

    if inst.b > EVOLVE_CAP:
        raise CapabilityError(f"EXACT_QA is limited to b <= {EVOLVE_CAP}")
    psi = evolve(inst, default_dw_schedule(cfg.temperature), cfg.t_f, cfg.qa_steps)
    p = np.abs(psi) ** 2
    p /= p.sum()
    cdf = np.cumsum(p)
    energies = []
    for r in range(cfg.runs_per_instance):
        u = make_rng(derive_seed(cfg.master_seed, i, r)).random()
        x = min(int(np.searchsorted(cdf, u, side="right")), p.size - 1)
        energies.append(energy(inst, configs_at(inst.b, [x])[0]))
    return energies, success_probability(inst, psi)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    cfg.validate()
    t0 = time.perf_counter()
    insts = cfg.resolve_instances()
    if len({inst.b for inst in insts}) > 1:
        raise ConfigurationError("all instances in a batch must have the same b")
    if cfg.method == "SQA":
        for inst in insts:
            if inst.has_field:
                raise ConfigurationError(f"instance {inst.id!r} has h != 0; SQA ignores fields")
    grounds = [resolve_ground(inst, cfg, i) for i, inst in enumerate(insts)]

    finals: list[list[float]] = [[0.0] * cfg.runs_per_instance for _ in insts]
    exact: list[float | None] = [None] * len(insts)
    if cfg.method == "EXACT_QA":
        for i, inst in enumerate(insts):
            finals[i], exact[i] = _exact_qa(cfg, inst, i)
    else:
        jobs = [(i, range(s, min(s + BLOCK, cfg.runs_per_instance)))
                for i in range(len(insts)) for s in range(0, cfg.runs_per_instance, BLOCK)]
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_block, cfg, insts[i], i, rr) for i, rr in jobs]
            for (i, rr), fut in zip(jobs, futures):
                finals[i][rr.start:rr.stop] = fut.result()

    records = []
    for i, inst in enumerate(insts):
        e0, source = grounds[i]
        hits = sum(_is_hit(inst, e, e0) for e in finals[i])
        records.append(InstanceRecord(
            inst.id or f"instance-{i:04d}", cfg.method, inst.b,
            cfg.tau if cfg.method == "SQA" else None,
            None if cfg.method == "EXACT_QA" else cfg.sweeps,
            cfg.runs_per_instance, int(hits), hits / cfg.runs_per_instance, e0, source, exact[i]))
    hist = histogram([r.success_prob for r in records])
    return ExperimentReport(records, hist, cfg.echo(), time.perf_counter() - t0)


def paired_sign_test(a, b) -> tuple[int, int, float]:
    """One-sided sign test that ``a`` tends to exceed ``b``; ties are dropped.

    Returns ``(wins, losses, p_value)``.
    """
    d = np.asarray(a, float) - np.asarray(b, float)
    wins, losses = int(np.sum(d > 0)), int(np.sum(d < 0))
    if wins + losses == 0:
        return 0, 0, 1.0
    return wins, losses, float(stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)
