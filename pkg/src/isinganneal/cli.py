"""Command-line interface.

Subcommands: ``gen``, ``sa``, ``sqa``, ``exact-qa``, ``verify``, ``hist``.
Exit codes: 0 success, 1 a verification check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .chimera import ChimeraSpec, instance_batch, load_mask, shipped_spec
from .errors import IsingError
from .harness import CSV_COLUMNS, ExperimentConfig, histogram, run_experiment
from .ising import load_instance, save_instance
from .sa import SCHEDULE_KINDS, CoolingSchedule

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_topology(p):
    g = p.add_argument_group("generated instances")
    g.add_argument("--chimera", nargs="+", type=int, metavar="M N [K]",
                   help="Chimera grid rows, cols and optional half-cell size (default 4)")
    g.add_argument("--mask", type=Path, help="file of disabled vertex indices")
    g.add_argument("--shipped-mask", type=int, choices=(485, 945, 1094),
                   help="use a bundled mask giving this many active vertices")
    g.add_argument("--count", type=int, default=10, help="number of instances to generate")
    g.add_argument("--instance-seed", type=int, default=0)


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed for run seeds")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_run(p, method):
    p.add_argument("--instances", nargs="+", type=Path, default=[],
                   help="instance files or directories of them")
    _add_topology(p)
    _add_common(p)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--bins", type=int, default=10, help="histogram bins (JSON output)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ground", choices=("auto", "brute_force", "sa_protocol", "provided"),
                   default="auto")
    p.add_argument("--ground-file", type=Path,
                   help="JSON object or CSV (instance_id, ground_energy) of known minima")
    p.add_argument("--temperature", type=float, default=0.1,
                   help="SQA temperature T (also recorded for other methods)")
    if method in ("SA", "SQA"):
        p.add_argument("--sweeps", type=int, default=1000)
    if method == "SA":
        p.add_argument("--schedule", choices=[k for k in SCHEDULE_KINDS if k != "custom"],
                       default="inverse-log-k")
        p.add_argument("--c", type=float, default=2.0, help="schedule temperature constant")
        p.add_argument("--floor", type=float, default=1e-3)
    if method == "SQA":
        p.add_argument("--tau", type=int, default=30)
        p.add_argument("--global-first", action="store_true",
                       help="global moves before local moves in each sweep")
    if method == "EXACT_QA":
        p.add_argument("--t-f", type=float, default=100.0)
        p.add_argument("--steps", type=int, default=4000)
    p.set_defaults(method=method)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="isinganneal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate random +/-1 Chimera instances")
    _add_topology(g)
    g.add_argument("--out", type=Path, required=True, help="output directory")
    g.add_argument("--format", choices=("text", "json"), default="text")

    _add_run(sub.add_parser("sa", help="simulated annealing success probabilities"), "SA")
    _add_run(sub.add_parser("sqa", help="simulated quantum annealing success probabilities"), "SQA")
    _add_run(sub.add_parser("exact-qa", help="exact state-vector annealing (small b)"), "EXACT_QA")

    v = sub.add_parser("verify", help="run the numerical verification suite")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--only", nargs="+", default=None, help="run checks whose name contains any of these")
    v.add_argument("--skip", nargs="+", default=[], help="skip checks whose name contains any of these")
    _add_common(v)

    h = sub.add_parser("hist", help="histogram of success probabilities from a report")
    h.add_argument("input", type=Path, help="CSV or JSON experiment report")
    h.add_argument("--bins", type=int, default=10)
    h.add_argument("--out", type=Path)
    h.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap


def _spec_from_args(a) -> ChimeraSpec:
    if a.shipped_mask is not None:
        return shipped_spec(a.shipped_mask)
    if not a.chimera or len(a.chimera) not in (2, 3):
        raise IsingError("give --chimera M N [K] or --shipped-mask B")
    m, n, *k = a.chimera
    mask = load_mask(a.mask) if a.mask else frozenset()
    return ChimeraSpec(m, n, k[0] if k else 4, mask)


def _expand_paths(paths) -> list[Path]:
    out = []
    for p in paths:
        if p.is_dir():
            out += sorted(q for q in p.iterdir() if q.suffix in (".txt", ".json") and q.is_file())
        else:
            out.append(p)
    return out


def _read_ground_file(path: Path) -> dict[str, float]:
    text = path.read_text()
    if path.suffix == ".json":
        return {str(k): float(v) for k, v in json.loads(text).items()}
    rows = csv.DictReader(text.splitlines())
    return {r["instance_id"]: float(r["ground_energy"]) for r in rows}


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _cmd_gen(a) -> int:
    spec = _spec_from_args(a)
    a.out.mkdir(parents=True, exist_ok=True)
    ext = ".json" if a.format == "json" else ".txt"
    for inst in instance_batch(spec, a.count, a.instance_seed):
        save_instance(inst, a.out / f"{inst.id}{ext}")
    print(f"wrote {a.count} instances (b={spec.num_vertices}) to {a.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_run(a) -> int:
    cfg = ExperimentConfig(method=a.method, runs_per_instance=a.runs, master_seed=a.seed,
                           ground_truth=a.ground, temperature=a.temperature, workers=a.workers)
    if a.instances:
        cfg.instances = [load_instance(p) for p in _expand_paths(a.instances)]
    else:
        cfg.chimera = _spec_from_args(a)
        cfg.n_instances = a.count
        cfg.instance_seed = a.instance_seed
    if a.ground_file:
        cfg.provided_ground = _read_ground_file(a.ground_file)
    if a.method in ("SA", "SQA"):
        cfg.sweeps = a.sweeps
    if a.method == "SA":
        cfg.sa_schedule = CoolingSchedule(a.schedule, a.c, a.floor)
    if a.method == "SQA":
        cfg.tau = a.tau
        cfg.local_first = not a.global_first
    if a.method == "EXACT_QA":
        cfg.t_f = a.t_f
        cfg.qa_steps = a.steps
    rep = run_experiment(cfg)
    if a.format == "json":
        rep.histogram = histogram(rep.success_probs, a.bins)
        _emit(rep.to_json() + "\n", a.out)
    else:
        _emit(rep.to_csv(), a.out)
    return EXIT_OK


def _cmd_verify(a) -> int:
    from .verify import verify_all

    rep = verify_all(a.level, a.only, a.skip)
    if a.format == "json":
        _emit(json.dumps(rep.to_dict(), indent=2) + "\n", a.out)
    else:
        _emit("\n".join(rep.lines()) + "\n", a.out)
    return EXIT_OK if rep.passed else EXIT_CHECK


def _cmd_hist(a) -> int:
    text = a.input.read_text()
    if a.input.suffix == ".json":
        probs = [r["success_prob"] for r in json.loads(text)["records"]]
    else:
        rows = list(csv.DictReader(text.splitlines()))
        if not rows or "success_prob" not in rows[0]:
            raise IsingError(f"{a.input} is not an experiment report (need columns {CSV_COLUMNS})")
        probs = [float(r["success_prob"]) for r in rows]
    h = histogram(probs, a.bins)
    if a.format == "json":
        _emit(json.dumps({"edges": h.edges, "counts": h.counts}, indent=2) + "\n", a.out)
    else:
        lines = ["bin_lo,bin_hi,count"] + [f"{lo!r},{hi!r},{c}" for lo, hi, c in
                                           zip(h.edges[:-1], h.edges[1:], h.counts)]
        _emit("\n".join(lines) + "\n", a.out)
    return EXIT_OK


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        if a.command == "gen":
            return _cmd_gen(a)
        if a.command == "verify":
            return _cmd_verify(a)
        if a.command == "hist":
            return _cmd_hist(a)
        return _cmd_run(a)
    except (IsingError, ValueError, OSError) as exc:
        print(f"isinganneal: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
