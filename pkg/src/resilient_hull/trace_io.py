"""Trace CSV files and a minimal SVG plot of V(t).

The CSV starts with a metadata row ``#meta,seed=<int>,config_sha256=<hex>``
followed by the header ``round,agent_id,x1..xn,V`` and one row per agent
per round.  Floats are written with ``repr`` so that reading them back
gives the identical doubles.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sim import SimTrace


@dataclass
class TraceTable:
    seed: int
    config_sha256: str
    states: np.ndarray  # (rounds + 1, agents, n)
    V: np.ndarray  # (rounds + 1,)


def trace_csv(trace: SimTrace, seed: int, config_sha256: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["#meta", f"seed={int(seed)}", f"config_sha256={config_sha256}"])
    rounds, agents, n = trace.states.shape
    w.writerow(["round", "agent_id", *(f"x{k + 1}" for k in range(n)), "V"])
    for t in range(rounds):
        v = repr(float(trace.V[t]))
        for i in range(agents):
            w.writerow([t, i, *(repr(float(c)) for c in trace.states[t, i]), v])
    return buf.getvalue()


def write_trace(path: str | Path, trace: SimTrace, seed: int, config_sha256: str) -> None:
    Path(path).write_text(trace_csv(trace, seed, config_sha256))


def parse_trace(text: str) -> TraceTable:
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2 or not rows[0] or rows[0][0] != "#meta":
        raise ValueError("trace is missing its #meta row")
    meta = dict(field.split("=", 1) for field in rows[0][1:])
    header = rows[1]
    if header[:2] != ["round", "agent_id"] or header[-1] != "V":
        raise ValueError(f"unexpected trace header {header}")
    n = len(header) - 3
    body = rows[2:]
    if not body:
        raise ValueError("trace has no data rows")
    rounds = int(body[-1][0]) + 1
    agents = len(body) // rounds
    if agents * rounds != len(body):
        raise ValueError("trace rows do not form a complete rounds x agents grid")
    states = np.empty((rounds, agents, n))
    V = np.empty(rounds)
    for row in body:
        t, i = int(row[0]), int(row[1])
        states[t, i] = [float(c) for c in row[2:2 + n]]
        V[t] = float(row[-1])
    return TraceTable(int(meta["seed"]), meta["config_sha256"], states, V)


def read_trace(path: str | Path) -> TraceTable:
    return parse_trace(Path(path).read_text())


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def svg_plot(series: dict[str, np.ndarray], title: str = "V(t)", width: int = 640, height: int = 400) -> str:
    """Line chart of each series against round index with a log10 y axis.

    Nonpositive values are clamped to the smallest positive value present.
    """
    left, right, top, bottom = 70, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom
    positive = [v for s in series.values() for v in np.asarray(s, float) if v > 0 and math.isfinite(v)]
    floor = min(positive) if positive else 1.0
    ceil = max(positive) if positive else 10.0
    lo, hi = math.floor(math.log10(floor)), math.ceil(math.log10(ceil))
    if hi == lo:
        hi = lo + 1
    tmax = max((len(s) - 1 for s in series.values()), default=1) or 1

    def xy(t: int, v: float) -> tuple[float, float]:
        y = math.log10(max(v, floor))
        return left + pw * t / tmax, top + ph * (hi - y) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<path d="M{left},{top} V{top + ph} H{left + pw}" fill="none" stroke="black"/>',
    ]
    step = max(1, (hi - lo) // 10)
    for e in range(lo, hi + 1, step):
        _, y = xy(0, 10.0**e)
        out.append(f'<line x1="{left - 4}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end">1e{e}</text>')
    for k in range(5):
        t = round(tmax * k / 4)
        x, _ = xy(t, floor)
        out.append(f'<text x="{_fmt(x)}" y="{top + ph + 16}" text-anchor="middle">{t}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 6}" text-anchor="middle">round</text>')
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    for k, (name, values) in enumerate(series.items()):
        pts = " ".join("{},{}".format(*map(_fmt, xy(t, float(v)))) for t, v in enumerate(values))
        color = colors[k % len(colors)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{left + pw - 4}" y="{top + 14 * (k + 1)}" text-anchor="end" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
