"""Command-line front end: ``analyze``, ``simulate`` and ``sweep``.

Exit codes: 0 success, 2 usage or configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from regenplan import cost_model, reference
from regenplan.churn_sim.config import (
    ConfigError,
    SimConfig,
    apply_overrides,
    config_from_dict,
    load_config,
    parse_value,
)
from regenplan.churn_sim.engine import run
from regenplan.churn_sim.io import write_outputs
from regenplan.cost_model import SystemModel
from regenplan.errors import InfeasibleDegree, InvalidArgument, NoSolution, ZeroObjects
from regenplan.reliability import blocks_required, replicas_required

logger = logging.getLogger("regenplan")

EXIT_OK, EXIT_USAGE, EXIT_INTERNAL = 0, 2, 3

METRICS = ("redundancy", "bandwidth", "savings", "min-d", "replicas", "hybrid-frontier")
SWEEP_KEYS = {
    "k": "code.k",
    "d": "code.d",
    "a": "availability",
    "p": "retrieve_target",
    "rho": "target_utilization",
    "B": "base_time_hours",
    "M": "object_size",
}
SWEEP_COLUMNS = ("variable", "value", "seed", "rho_target", "rho_hat", "mean_repair_s",
                 "p95_repair_s", "objects", "wasted_frac", "error")
DEFAULT_FRONTIER_P = tuple(1 - 10.0 ** -e for e in range(1, 10))


class UsageError(Exception):
    pass


# --------------------------------------------------------------------- output


def _fmt(value: Any) -> str:
    if value is None:
        return "--"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def percent(value: float) -> str:
    """Whole-percent rendering with halves rounded up."""
    return f"{math.floor(value * 100 + 0.5 + 1e-9):d}%"


class Table:
    """Rows destined for stdout as CSV (full precision) or an aligned text table."""

    def __init__(self, header: Sequence[str], rows: list[Sequence[Any]] | None = None,
                 display: dict[str, Any] | None = None):
        self.header = list(header)
        self.rows = rows or []
        self.display = display or {}

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(self.header)
            for row in self.rows:
                writer.writerow(["" if v is None else _fmt(v) for v in row])
            return buf.getvalue()
        text_rows = [[self._show(h, v) for h, v in zip(self.header, row)] for row in self.rows]
        widths = [max([len(h)] + [len(r[i]) for r in text_rows]) for i, h in enumerate(self.header)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(self.header, widths))]
        lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in text_rows]
        return "\n".join(line.rstrip() for line in lines) + "\n"

    def _show(self, column: str, value: Any) -> str:
        fn = self.display.get(column)
        if value is None:
            return "--"
        if fn is not None:
            return fn(value)
        if isinstance(value, float):
            return f"{value:.6g}"
        return str(value)


@dataclass
class Single:
    """A single analytic answer: a bare string in table mode, one CSV row otherwise."""

    header: Sequence[str]
    row: Sequence[Any]
    text: str

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return Table(self.header, [self.row]).render("csv")
        return self.text + "\n"


# -------------------------------------------------------------------- analyze


def _resolve_d(d_arg: str | None, k: int, a: float, p: float) -> int:
    if d_arg is None:
        return k
    if d_arg.replace(" ", "") == "n-1":
        return max(k, blocks_required(k, a, p) - 1)
    try:
        return int(d_arg)
    except ValueError:
        raise UsageError(f"--d must be an integer or n-1, got {d_arg!r}") from None


def _system(args) -> SystemModel | None:
    given = [args.nodes, args.lifetime_days, args.objects, args.object_size]
    if all(v is None for v in given):
        return None
    if any(v is None for v in given):
        raise UsageError("--nodes, --lifetime-days, --objects and --object-size must be given together")
    return SystemModel(args.nodes, args.lifetime_days * 86_400.0, args.a, args.objects,
                       args.object_size, args.upload_rate)


def _code_kind(args) -> tuple[str, int | None]:
    """Map --code to a Regenerating Code kind; replication is MSR with k=d=1."""
    if args.code == "replication":
        if args.k not in (None, 1) or args.d not in (None, "1"):
            raise UsageError("--code replication implies k=d=1")
        return "msr", 1
    return args.code, args.k


def _k_range(args) -> range:
    return range(1, args.k_max + 1)


def _availabilities(args, default: Sequence[float]) -> list[float]:
    return [args.a] if args.a is not None else list(default)


def analyze_redundancy(args) -> Table | Single:
    kind, k = _code_kind(args)
    if k is not None and args.a is not None:
        d = _resolve_d(args.d, k, args.a, args.p)
        r = cost_model.redundancy(kind, k, d, args.a, args.p)
        return Single(("a", "k", "d", "n", "redundancy"),
                      (args.a, k, d, blocks_required(k, args.a, args.p), r), f"{r:.4g}")
    rows = []
    for a in _availabilities(args, reference.RECOMMENDED_K):
        for kk in ([k] if k else _k_range(args)):
            n = blocks_required(kk, a, args.p)
            d_hi = max(kk, n - 1)
            rows.append((a, kk, n, cost_model.redundancy("msr", kk, kk, a, args.p),
                         cost_model.redundancy("mbr", kk, kk, a, args.p),
                         cost_model.redundancy("mbr", kk, d_hi, a, args.p)))
    return Table(("a", "k", "n", "msr", "mbr_d_k", "mbr_d_n1"), rows)


def analyze_bandwidth(args) -> Table | Single:
    kind, k = _code_kind(args)
    sys_model = _system(args)
    if k is not None and args.a is not None:
        sm = sys_model or SystemModel.unit_scale(args.a)
        d = _resolve_d(args.d, k, args.a, args.p)
        w = cost_model.per_node_bandwidth(kind, k, d, args.a, args.p, sm)
        return Single(("a", "k", "d", "n", "per_node_bandwidth"),
                      (args.a, k, d, blocks_required(k, args.a, args.p), w), f"{w:.6g}")
    rows = []
    for a in _availabilities(args, reference.RECOMMENDED_K):
        sm = SystemModel.unit_scale(a) if sys_model is None else sys_model
        for kk in ([k] if k else _k_range(args)):
            n = blocks_required(kk, a, args.p)
            d_hi = max(kk, n - 1)
            rows.append((a, kk, n,
                         cost_model.per_node_bandwidth("msr", kk, kk, a, args.p, sm),
                         cost_model.per_node_bandwidth("msr", kk, d_hi, a, args.p, sm),
                         cost_model.per_node_bandwidth("mbr", kk, kk, a, args.p, sm),
                         cost_model.per_node_bandwidth("mbr", kk, d_hi, a, args.p, sm)))
    return Table(("a", "k", "n", "msr_d_k", "msr_d_n1", "mbr_d_k", "mbr_d_n1"), rows)


def savings_grid(p: float) -> list[tuple[str, float, int, int, int, float]]:
    """(row, a, k, d, n, savings) for the recommended (a, k) pairs."""
    out = []
    for a, k in reference.RECOMMENDED_K.items():
        n = blocks_required(k, a, p)
        for row, kind, d in (("msr", "msr", k), ("mbr_d_k", "mbr", k), ("mbr_d_n1", "mbr", max(k, n - 1))):
            out.append((row, a, k, d, n, cost_model.storage_savings(kind, k, d, a, p)))
    return out


def _percent_value(value: float) -> int:
    return int(percent(value)[:-1])


def analyze_savings(args, notes) -> Table | Single:
    kind, k = _code_kind(args)
    if k is not None and args.a is not None:
        d = _resolve_d(args.d, k, args.a, args.p)
        s = cost_model.storage_savings(kind, k, d, args.a, args.p)
        return Single(("a", "k", "d", "n", "savings"),
                      (args.a, k, d, blocks_required(k, args.a, args.p), s), percent(s))
    if args.a is not None:
        rows = []
        for kk in _k_range(args):
            n = blocks_required(kk, args.a, args.p)
            d = kk if args.d is None else _resolve_d(args.d, kk, args.a, args.p)
            rows.append((args.a, kk, d, n, cost_model.storage_savings(kind, kk, d, args.a, args.p)))
        return Table(("a", "k", "d", "n", "savings"), rows, {"savings": percent})
    rows = savings_grid(args.p)
    if math.isclose(args.p, 0.999999):
        for row, a, _, _, _, s in rows:
            ref = reference.SAVINGS_PERCENT.get((row, a))
            if ref is not None and ref != _percent_value(s):
                notes.append(f"erratum: {row} a={a}: computed {percent(s)}, reference {ref}%")
    return Table(("scheme", "a", "k", "d", "n", "savings"), rows, {"savings": percent})


def _min_d_cell(k: int, a: float, p: float) -> tuple[int, int | None]:
    return blocks_required(k, a, p), cost_model.min_repair_degree_msr(k, a, p)


def _min_d_text(n: int, d: int | None) -> str:
    return f"n={n},d={'--' if d is None else d}"


def analyze_min_d(args, notes) -> Table | Single:
    if args.k is not None and args.a is not None:
        n, d = _min_d_cell(args.k, args.a, args.p)
        return Single(("a", "k", "n", "d"), (args.a, args.k, n, d), _min_d_text(n, d))
    avail = [args.a] if args.a is not None else reference.MIN_DEGREE_AVAILABILITIES
    ks = [args.k] if args.k is not None else reference.MIN_DEGREE_KS
    rows = []
    for a in avail:
        for k in ks:
            n, d = _min_d_cell(k, a, args.p)
            rows.append((a, k, n, d))
            ref = reference.MIN_DEGREE.get((a, k))
            if ref is not None and math.isclose(args.p, 0.999999) and ref != (n, d):
                notes.append(f"erratum: a={a} k={k}: computed {_min_d_text(n, d)}, "
                             f"reference {_min_d_text(*ref)}")
    return Table(("a", "k", "n", "d"), rows)


def analyze_replicas(args) -> Table | Single:
    target = args.p_low if args.p_low is not None else args.p
    if args.a is not None and (args.p_low is not None or args.p_given):
        r = replicas_required(args.a, target)
        return Single(("a", "p_low", "replicas"), (args.a, target, r), str(r))
    avail = [args.a] if args.a is not None else reference.REPLICA_AVAILABILITIES
    rows = [(a, *[replicas_required(a, t) for t in reference.REPLICA_TARGETS]) for a in avail]
    return Table(("a", *[f"p_low={t}" for t in reference.REPLICA_TARGETS]), rows)


def analyze_hybrid_frontier(args) -> Table:
    if args.code != "msr":
        raise UsageError("hybrid-frontier is defined for --code msr only")
    if args.a is not None:
        k = args.k if args.k is not None else reference.RECOMMENDED_K.get(args.a)
        if k is None:
            raise UsageError("--k is required for this availability")
        pairs = [(args.a, k)]
    else:
        pairs = list(reference.RECOMMENDED_K.items())
    ps = [args.p] if args.p_given else DEFAULT_FRONTIER_P
    rows = []
    for a, k in pairs:
        for p in ps:
            r = cost_model.max_replicas_hybrid(k, a, p)
            rows.append((a, k, p, cost_model.max_p_low(k, a, p), r if r >= 1 else None))
    precise = lambda v: f"{v:.10g}"  # noqa: E731
    return Table(("a", "k", "p", "max_p_low", "replicas"), rows, {"p": precise, "max_p_low": precise})


def cmd_analyze(args) -> int:
    notes: list[str] = []
    if args.k is not None and args.k < 1:
        raise UsageError("--k must be >= 1")
    if args.a is not None and not 0 < args.a <= 1:
        raise UsageError("--a must be in (0, 1]")
    if not 0 < args.p < 1:
        raise UsageError("--p must be in (0, 1)")
    handlers = {
        "redundancy": analyze_redundancy,
        "bandwidth": analyze_bandwidth,
        "replicas": analyze_replicas,
        "hybrid-frontier": analyze_hybrid_frontier,
    }
    try:
        if args.metric == "min-d":
            if args.k is not None and args.k < 2:
                raise UsageError("min-d needs k > 1")
            result = analyze_min_d(args, notes)
        elif args.metric == "savings":
            result = analyze_savings(args, notes)
        else:
            result = handlers[args.metric](args)
    except (InvalidArgument, InfeasibleDegree, NoSolution) as exc:
        raise UsageError(str(exc)) from exc
    _emit(result.render(args.format), args.out)
    for note in notes:
        print(note, file=sys.stderr)
    return EXIT_OK


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------- simulate


def _parse_sets(items: Sequence[str] | None) -> dict[str, Any]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = parse_value(value.strip())
    return out


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    overrides = _parse_sets(args.set)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = cfg.with_overrides(overrides)
    result = run(cfg)
    write_outputs(result, args.out or ".")
    m = result.metrics
    print(f"rho_hat={m['measured_utilization']:.6g} "
          f"mean_repair_s={_fmt_opt(m['repair_time_stats']['mean'])} objects={m['object_count']}")
    return EXIT_OK


def _fmt_opt(v: float | None) -> str:
    return "nan" if v is None else f"{v:.6g}"


# ---------------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    fixed: dict
    repetitions: int = 1
    seed_base: int = 1
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.variable not in SWEEP_KEYS:
            raise ConfigError(f"sweep variable must be one of {sorted(SWEEP_KEYS)}")
        if not self.values:
            raise ConfigError("sweep values must be non-empty")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")

    def points(self) -> list[tuple[int, Any, int]]:
        """(index, value, seed) per simulation, seeds ``seed_base + index``."""
        out = []
        for vi, value in enumerate(self.values):
            for r in range(self.repetitions):
                idx = vi * self.repetitions + r
                out.append((idx, value, self.seed_base + idx))
        return out

    def config_doc(self, value: Any, seed: int) -> dict:
        return apply_overrides(self.fixed, {SWEEP_KEYS[self.variable]: value, "seed": seed})


def load_sweep(path: str | Path) -> SweepSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from exc
    try:
        return SweepSpec(
            variable=doc["variable"], values=tuple(doc["values"]), fixed=dict(doc.get("fixed", {})),
            repetitions=int(doc.get("repetitions", 1)), seed_base=int(doc.get("seed_base", 1)),
            workers=doc.get("workers"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sweep spec: {exc}") from exc


def run_point(spec: SweepSpec, value: Any, seed: int) -> dict:
    """Simulate one sweep point; failures become a row with an ``error`` column."""
    row: dict[str, Any] = {"variable": spec.variable, "value": value, "seed": seed}
    try:
        cfg = config_from_dict(spec.config_doc(value, seed))
        m = run(cfg).metrics
    except Exception as exc:  # recorded per row; the sweep carries on
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(
        rho_target=m["target_utilization"],
        rho_hat=m["measured_utilization"],
        mean_repair_s=m["repair_time_stats"]["mean"],
        p95_repair_s=m["repair_time_stats"]["p95"],
        objects=m["object_count"],
        wasted_frac=m["wasted_frac"],
    )
    return row


def _run_point_args(packed) -> dict:
    return run_point(*packed)


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[dict]:
    """Run all points; rows come back in point-index order regardless of completion order."""
    points = spec.points()
    jobs = [(spec, value, seed) for _, value, seed in points]
    workers = workers or spec.workers or os.cpu_count() or 1
    if workers <= 1 or len(jobs) == 1:
        return [run_point(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point_args, jobs))


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else _fmt(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    spec = load_sweep(args.spec)
    if args.seed is not None:
        spec = SweepSpec(spec.variable, spec.values, spec.fixed, spec.repetitions, args.seed, spec.workers)
    rows = run_sweep(spec, args.workers)
    _emit(sweep_csv(rows), args.out)
    return EXIT_OK


# ----------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "table"), default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="regenplan", parents=[common],
                                     description="Redundancy planning for distributed storage.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    an = sub.add_parser("analyze", parents=[common], help="analytic cost tables")
    an.add_argument("--metric", choices=METRICS, required=True)
    an.add_argument("--code", choices=("msr", "mbr", "replication"), default="msr")
    an.add_argument("--k", type=int)
    an.add_argument("--d", help="repair degree: integer or n-1")
    an.add_argument("--a", type=float)
    an.add_argument("--p", type=float)
    an.add_argument("--p-low", type=float)
    an.add_argument("--k-max", type=int, default=60)
    an.add_argument("--nodes", type=float)
    an.add_argument("--lifetime-days", type=float)
    an.add_argument("--objects", type=float)
    an.add_argument("--object-size", type=float, help="bytes")
    an.add_argument("--upload-rate", type=float, default=20 * 1024.0, help="bytes/second")

    si = sub.add_parser("simulate", parents=[common], help="run the churn simulator")
    si.add_argument("config")
    si.add_argument("--set", action="append", metavar="KEY=VALUE")

    sw = sub.add_parser("sweep", parents=[common], help="batch simulations over one variable")
    sw.add_argument("spec")
    sw.add_argument("--workers", type=int)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("format", "table"), ("out", None), ("seed", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "analyze":
        args.p_given = args.p is not None
        if args.p is None:
            args.p = 0.999999
    try:
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_sweep(args)
    except (UsageError, ConfigError, ZeroObjects) as exc:
        print(f"regenplan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
