"""Multi-panel trajectory figures from solver CSV artifacts.

Consumes the run/turnpike CSV files written by the dhnopt pipeline (comma
separated, one header row, column names like ``t_s``, ``x1_K``, ``u1_W``)
plus a small JSON figure spec, and renders stacked time panels: one line
per run, the turnpike dashed, input bounds dash-dotted. Purely offline:
nothing is recomputed here.

Figure spec format::

    {
      "runs": ["out/run_T24h_0.80xn.csv", ...],
      "turnpike": "out/turnpike.csv",          // optional
      "panels": [
        {"column": "x1_K", "ylabel": "producer temperature (K)"},
        {"column": "u1_W", "ylabel": "injected heat (W)",
         "bounds": [0.0, 0.04]},
        {"column": "x3_K", "ylabel": "consumer temperature (K)"}
      ],
      "output": "figure.png",
      "time_unit": "h"                          // "s", "min" or "h"
    }
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "Panel", "RenderError", "load_spec", "read_table",
           "render", "main"]

TIME_DIVISORS = {"s": 1.0, "min": 60.0, "h": 3600.0}
RUN_STYLES = [
    {"color": "tab:blue", "linestyle": "-"},
    {"color": "tab:orange", "linestyle": "-"},
    {"color": "tab:green", "linestyle": "-."},
    {"color": "tab:red", "linestyle": ":"},
    {"color": "tab:purple", "linestyle": "-"},
    {"color": "tab:brown", "linestyle": "--"},
]


class RenderError(RuntimeError):
    """Missing file, missing column, or an unusable figure spec."""


@dataclass(frozen=True)
class Panel:
    column: str
    ylabel: str = ""
    bounds: tuple | None = None


@dataclass(frozen=True)
class FigureSpec:
    runs: tuple
    panels: tuple
    output: str
    turnpike: str | None = None
    time_unit: str = "h"
    title: str = ""


def load_spec(path) -> FigureSpec:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise RenderError(f"figure spec not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise RenderError(f"figure spec is not valid JSON: {exc}") from None
    try:
        panels = tuple(
            Panel(column=p["column"], ylabel=p.get("ylabel", p["column"]),
                  bounds=tuple(p["bounds"]) if p.get("bounds") else None)
            for p in raw["panels"])
        spec = FigureSpec(runs=tuple(raw["runs"]), panels=panels,
                          output=raw["output"],
                          turnpike=raw.get("turnpike"),
                          time_unit=raw.get("time_unit", "h"),
                          title=raw.get("title", ""))
    except KeyError as exc:
        raise RenderError(f"figure spec misses required key {exc}") from None
    if spec.time_unit not in TIME_DIVISORS:
        raise RenderError(f"unknown time_unit {spec.time_unit!r}; "
                          f"use one of {sorted(TIME_DIVISORS)}")
    return spec


def read_table(path) -> dict:
    """Read one artifact CSV into {column: 1-d array}."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise RenderError(f"input CSV not found: {path}") from None
    if len(rows) < 2:
        raise RenderError(f"{path}: no data rows")
    header = rows[0]
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    return {name: data[:, i] for i, name in enumerate(header)}


def _column(table: dict, name: str, path) -> np.ndarray:
    if name not in table:
        available = ", ".join(sorted(table))
        raise RenderError(
            f"{path}: column {name!r} not present (available: {available})")
    return table[name]


def render(spec: FigureSpec) -> Path:
    """Render the figure described by the spec; returns the output path.

    All inputs are validated before anything is written, so a failing render
    never leaves a partial image behind.
    """
    if not spec.runs:
        raise RenderError("figure spec lists no run CSVs")
    if not spec.panels:
        raise RenderError("figure spec lists no panels")
    runs = [(Path(p).name, read_table(p)) for p in spec.runs]
    turnpike = read_table(spec.turnpike) if spec.turnpike else None
    div = TIME_DIVISORS[spec.time_unit]
    # validate every referenced column up front
    for panel in spec.panels:
        for path, table in [(p, t) for p, t in
                            [(spec.runs[i], runs[i][1])
                             for i in range(len(runs))]]:
            _column(table, "t_s", path)
            _column(table, panel.column, path)
        if turnpike is not None:
            _column(turnpike, panel.column, spec.turnpike)

    fig, axes = plt.subplots(len(spec.panels), 1, sharex=True,
                             figsize=(7.0, 2.2 * len(spec.panels)),
                             squeeze=False)
    for k, panel in enumerate(spec.panels):
        ax = axes[k, 0]
        for i, (name, table) in enumerate(runs):
            style = RUN_STYLES[i % len(RUN_STYLES)]
            ax.plot(table["t_s"] / div, table[panel.column],
                    label=name.removesuffix(".csv"), linewidth=1.2, **style)
        if turnpike is not None:
            ax.plot(turnpike["t_s"] / div, turnpike[panel.column],
                    color="black", linestyle="--", linewidth=1.4,
                    label="turnpike")
        if panel.bounds is not None:
            for b in panel.bounds:
                ax.axhline(b, color="gray", linestyle="-.", linewidth=1.0)
        ax.set_ylabel(panel.ylabel)
        ax.grid(True, alpha=0.3)
    axes[-1, 0].set_xlabel(f"time ({spec.time_unit})")
    axes[0, 0].legend(loc="best", fontsize=8)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figkit",
        description="render dhnopt CSV artifacts into a multi-panel figure")
    parser.add_argument("--spec", required=True, help="figure spec JSON")
    args = parser.parse_args(argv)
    try:
        out = render(load_spec(args.spec))
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
