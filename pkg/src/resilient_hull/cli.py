"""Command-line front end: ``combine``, ``tverberg`` and ``simulate``.

Exit codes: 0 success, 1 bad input, 2 empty hull intersection (``combine``)
or no partition found (``tverberg``), 3 numerical failure.
Set ``RESILIENT_LOG`` to a logging level name (e.g. ``DEBUG``) for more output.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, build_sim_config, config_hash, load_config, seed_of
from .resilient import (
    EmptyIntersectionError,
    ResilienceProblem,
    SolverError,
    resilient_combination,
    verify_resilience,
)
from .sim import SimulationError, run
from .trace_io import svg_plot, trace_csv
from .tverberg import find_tverberg

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_EMPTY = 2
EXIT_NUMERIC = 3


class InputError(ValueError):
    pass


def read_points(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Read a ``label,x1,...,xn`` CSV into labels and an ``m x n`` array."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    n = len(header) - 1
    if n < 1 or header[0] != "label" or header[1:] != [f"x{k + 1}" for k in range(n)]:
        raise InputError(f"{path}: header must be label,x1,...,xn; got {','.join(header)}")
    labels, coords = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != n + 1:
            raise InputError(f"{path}:{lineno}: expected {n + 1} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row[1:]]
        except ValueError:
            raise InputError(f"{path}:{lineno}: non-numeric coordinate") from None
        if not all(np.isfinite(vals)):
            raise InputError(f"{path}:{lineno}: coordinates must be finite")
        labels.append(row[0].strip())
        coords.append(vals)
    if not coords:
        raise InputError(f"{path}: no points")
    if len(set(labels)) != len(labels):
        raise InputError(f"{path}: duplicate labels")
    return labels, np.array(coords)


def _label_indices(labels: list[str], wanted: str | None) -> tuple[int, ...]:
    if not wanted:
        return ()
    index = {lab: k for k, lab in enumerate(labels)}
    out = []
    for lab in (w.strip() for w in wanted.split(",")):
        if lab not in index:
            raise InputError(f"unknown label {lab!r}")
        out.append(index[lab])
    return tuple(out)


def _fmt_vec(v) -> str:
    return "[" + ", ".join(repr(float(x)) for x in np.atleast_1d(v)) + "]"


def cmd_combine(args) -> int:
    labels, pts = read_points(args.points)
    trusted = _label_indices(labels, args.trusted)
    try:
        problem = ResilienceProblem(pts, trusted, args.kappa)
        result = resilient_combination(problem, tol=args.tol)
    except EmptyIntersectionError as exc:
        print(f"EmptyIntersection: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    report = verify_resilience(problem, result)
    subsets = [[labels[k] for k in s] for s in result.family]
    print(f"status: {result.status.value}")
    print(f"u: {_fmt_vec(result.u)}")
    print(f"objective: {result.objective!r}")
    offset = 0
    for s, verdict in zip(subsets, report.memberships):
        beta = result.beta[offset:offset + len(s)]
        offset += len(s)
        state = "member" if verdict.is_member else "NOT member"
        print(f"subset {{{','.join(s)}}}: beta={_fmt_vec(beta)} {state} (distance {verdict.distance:.3e})")
    if args.out:
        payload = {
            "status": result.status.value,
            "u": result.u.tolist(),
            "objective": result.objective,
            "subsets": [
                {"labels": s, "beta": result.beta[a:a + len(s)].tolist(), "member": v.is_member, "distance": v.distance}
                for s, v, a in zip(subsets, report.memberships, np.cumsum([0] + [len(s) for s in subsets]))
            ],
        }
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def cmd_tverberg(args) -> int:
    labels, pts = read_points(args.points)
    cert = find_tverberg(pts, args.kappa, tol=args.tol)
    if cert is None:
        print("NotFound: no partition has intersecting hulls", file=sys.stderr)
        return EXIT_EMPTY
    parts = [[labels[k] for k in part] for part in cert.parts]
    print("partition: " + " | ".join("{" + ",".join(p) + "}" for p in parts))
    print(f"witness: {_fmt_vec(cert.witness)}")
    if args.out:
        payload = {
            "parts": parts,
            "witness": cert.witness.tolist(),
            "coefficients": [c.tolist() for c in cert.coefficients],
        }
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def _seeded_path(path: str, seed: int, many: bool) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}-seed{seed}{p.suffix}") if many else p


def simulate_one(doc: dict, seed: int, trace_path: str | None, svg_path: str | None, many: bool) -> str:
    """Run one seed and write its outputs.  Returns a one-line summary."""
    config = build_sim_config(doc, seed)
    trace = run(config)
    digest = config_hash({**doc, "simulation": {**doc["simulation"], "seed": seed}})
    text = trace_csv(trace, seed, digest)
    if trace_path:
        _seeded_path(trace_path, seed, many).write_text(text)
    else:
        sys.stdout.write(text)
    if svg_path:
        _seeded_path(svg_path, seed, many).write_text(svg_plot({f"seed {seed}": trace.V}))
    counts = {}
    for row in trace.statuses[1:]:
        for s in row:
            counts[s] = counts.get(s, 0) + 1
    return f"seed {seed}: V({trace.rounds}) = {trace.V[-1]:.3e}, statuses {counts}"


def cmd_simulate(args) -> int:
    try:
        doc = load_config(args.config)
    except OSError as exc:
        raise InputError(f"cannot read {args.config}: {exc.strerror}") from None
    base = seed_of(doc) if args.seed is None else args.seed
    # build once up front so configuration errors surface before any run
    build_sim_config(doc, base)
    out = doc.get("output", {})
    trace_path = args.out or out.get("trace")
    svg_path = args.svg or out.get("svg")
    seeds = [base + k for k in range(args.repeat)]
    many = len(seeds) > 1
    if many and not trace_path:
        raise InputError("--repeat needs a trace path (--out or output.trace)")
    jobs = [(doc, s, trace_path, svg_path, many) for s in seeds]
    if args.parallel and many:
        with ProcessPoolExecutor() as pool:
            summaries = list(pool.map(simulate_one, *zip(*jobs)))
    else:
        summaries = [simulate_one(*job) for job in jobs]
    for line in summaries:
        print(line, file=sys.stderr if not trace_path else sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resilient-hull", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("combine", help="resilient convex combination of a point set")
    p.add_argument("points", help="CSV with header label,x1,...,xn")
    p.add_argument("--trusted", help="comma-separated labels known to be normal")
    p.add_argument("--kappa", type=int, default=0, help="maximum number of corrupted points")
    p.add_argument("--tol", type=float, default=1e-9, help="QP tolerance")
    p.add_argument("--out", help="write the result as JSON")
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("tverberg", help="search for a Tverberg partition")
    p.add_argument("points", help="CSV with header label,x1,...,xn")
    p.add_argument("--kappa", type=int, required=True, help="number of parts minus one")
    p.add_argument("--tol", type=float, default=1e-9, help="QP tolerance")
    p.add_argument("--out", help="write the certificate as JSON")
    p.set_defaults(func=cmd_tverberg)

    p = sub.add_parser("simulate", help="run a multi-agent simulation from a JSON config")
    p.add_argument("config", help="JSON run configuration")
    p.add_argument("--out", help="trace CSV path (overrides output.trace)")
    p.add_argument("--svg", help="SVG plot path (overrides output.svg)")
    p.add_argument("--seed", type=int, help="override simulation.seed")
    p.add_argument("--repeat", type=int, default=1, help="run this many consecutive seeds")
    p.add_argument("--parallel", action="store_true", help="run repeated seeds in separate processes")
    p.set_defaults(func=cmd_simulate)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("RESILIENT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if getattr(args, "repeat", 1) < 1:
        print("error: --repeat must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, SimulationError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
