"""Acceptance gate: one test per criterion, each at its stated size and
tolerance.  A PASS/FAIL line per criterion is printed in the terminal
summary.  Criteria that are out of reach on desk hardware are run as
specified and allowed to fail; see the README."""

import time

import numpy as np
import pytest

from isinganneal import verify as v
from isinganneal.chimera import ChimeraSpec
from isinganneal.harness import ExperimentConfig, run_experiment
from isinganneal.ising import IsingInstance

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow


def _gate(num, title, checks, seconds, limit):
    checks = checks if isinstance(checks, list) else [checks]
    in_time = limit is None or seconds <= limit
    ok = all(c.passed for c in checks) and in_time
    budget = "" if limit is None else f" [{seconds:.1f}s / {limit:.0f}s]"
    parts = "; ".join(f"{c.name}: {'ok' if c.passed else 'FAILED'} ({c.detail})" for c in checks)
    ACCEPTANCE_LINES[num] = f"{'PASS' if ok else 'FAIL'}  criterion {num}: {title}{budget}  {parts}"
    assert in_time, f"runtime {seconds:.1f}s exceeds {limit}s"
    for c in checks:
        assert c.passed, f"{c.name}: statistic={c.statistic} threshold={c.threshold} {c.detail}"


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def test_criterion_1_spectrum_identity():
    c, dt = _timed(lambda: v.check_spectrum_equivalence(range(2, 9), 100))
    _gate(1, "quantum Ising spectrum equals classical energies", c, dt, 60)


def test_criterion_2_success_bound():
    c, dt = _timed(lambda: v.check_success_bound((1, 2, 3), 3, (1.0, 10.0, 100.0), 256))
    _gate(2, "success probability lower bound and adiabatic trend", c, dt, 300)


def test_criterion_3_delta_oracle():
    c, dt = _timed(lambda: v.check_delta_oracle(1000))
    _gate(3, "incremental energy deltas equal direct differences", c, dt, 10)


def test_criterion_4_stationarity():
    t = time.perf_counter()
    cs = [v.check_sa_stationary(1_000_000), v.check_sqa_stationary(1_000_000, tau=3),
          v.check_theory_chain_stationary(1_000_000, M=3)]
    _gate(4, "fixed-temperature chains sample their exact targets", cs, time.perf_counter() - t, 120)


def test_criterion_5_trotter_rate():
    c, dt = _timed(lambda: v.check_trotter_rate((4, 8, 16, 32)))
    _gate(5, "sliced partition function error slope", c, dt, 30)


def test_criterion_6_clt():
    cs, dt = _timed(lambda: v.check_clt((8, 16, 32, 64, 128, 256), 100_000))
    _gate(6, "slice-sum statistic approaches a normal law", cs, dt, 120)


def test_criterion_7_sa_quality():
    c, dt = _timed(lambda: v.check_sa_quality(20, 1000, 10_000))
    _gate(7, "SA finds the ground energy of 16-spin cells", c, dt, 300)


def test_criterion_8_sqa_trends():
    c, dt = _timed(lambda: v.sqa_trend_experiment(v.TrendPlan()))
    _gate(8, "SQA success vs sweeps and slices on b=72", c, dt, 1800)


def test_criterion_9_determinism():
    t = time.perf_counter()
    c = v.check_determinism((1, 4, 16))
    outs = set()
    inst = IsingInstance.from_edges(3, [(0, 1, 1.0), (1, 2, -1.0)], h=[0.2, 0.0, 0.0], id="q")
    for w in (1, 4, 16):
        rep = run_experiment(ExperimentConfig(method="EXACT_QA", instances=[inst], runs_per_instance=50,
                                              t_f=5.0, qa_steps=200, master_seed=9, workers=w))
        outs.add(rep.to_csv())
    exact = v.Check("exact-qa-across-workers", len(outs) == 1, float(len(outs)), 1.0, "workers=[1, 4, 16]")
    _gate(9, "identical CSV at 1, 4 and 16 workers", [c, exact], time.perf_counter() - t, None)
