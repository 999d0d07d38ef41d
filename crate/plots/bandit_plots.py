"""Render harness CSVs as SVG regret plots.

A spec is a TOML file with one or more ``[[panel]]`` tables (a file with no
panels is read as a single panel)::

    [[panel]]
    output = "fig1d.svg"
    title = "(d)"
    xlabel = "t"
    ylabel = "per-agent regret"

    [[panel.series]]
    csv = "samples/fig1d_rclb.csv"
    label = "RCLB"
    style = "-"

    [[panel.bounds]]
    csv = "samples/fig1d_rclb.csv"
    column = "bound_primary"
    label = "f2"

Series read ``regret_mean`` (summary CSVs) or ``regret_per_agent_mean``
(per-run CSVs) against ``t``; a ``regret_se`` column adds a shaded band.
Relative paths resolve against the spec file's directory.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

Y_COLUMNS = ("regret_mean", "regret_per_agent_mean")
SE_COLUMN = "regret_se"

plt.rcParams.update(
    {
        "svg.hashsalt": "bandit-plots",
        "svg.fonttype": "path",
        "font.family": "DejaVu Sans",
        "path.simplify": False,
    }
)


class MissingColumn(KeyError):
    def __init__(self, column: str, path: Path):
        super().__init__(column)
        self.column = column
        self.path = path

    def __str__(self) -> str:
        return f"{self.path}: missing column {self.column!r}"


class EmptySpec(ValueError):
    pass


@dataclass
class Series:
    csv: Path
    label: str
    style: str = "-"


@dataclass
class Bound:
    csv: Path
    column: str
    label: str
    style: str = "--"


@dataclass
class PlotSpec:
    output: Path
    series: list[Series]
    bounds: list[Bound] = field(default_factory=list)
    title: str = ""
    xlabel: str = "t"
    ylabel: str = "per-agent regret"


def read_columns(path: Path) -> dict[str, list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MissingColumn("t", path)
    header, body = rows[0], rows[1:]
    return {name: [float(r[j]) for r in body] for j, name in enumerate(header)}


def _column(cols: dict[str, list[float]], name: str, path: Path) -> list[float]:
    if name not in cols:
        raise MissingColumn(name, path)
    return cols[name]


def _y_column(cols: dict[str, list[float]], path: Path) -> list[float]:
    for name in Y_COLUMNS:
        if name in cols:
            return cols[name]
    raise MissingColumn(Y_COLUMNS[0], path)


def draw(spec: PlotSpec):
    """Builds the matplotlib figure for one panel."""
    if not spec.series and not spec.bounds:
        raise EmptySpec("a panel needs at least one series or bound")
    # Parse everything before touching the output so errors leave no file.
    loaded = []
    for s in spec.series:
        cols = read_columns(s.csv)
        t = _column(cols, "t", s.csv)
        y = _y_column(cols, s.csv)
        loaded.append((s, t, y, cols.get(SE_COLUMN)))
    bounds = []
    for b in spec.bounds:
        cols = read_columns(b.csv)
        bounds.append((b, _column(cols, "t", b.csv), _column(cols, b.column, b.csv)))

    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    for s, t, y, se in loaded:
        (line,) = ax.plot(t, y, s.style, label=s.label, linewidth=1.4)
        if se is not None:
            lo = [a - e for a, e in zip(y, se)]
            hi = [a + e for a, e in zip(y, se)]
            ax.fill_between(t, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
    for b, t, y in bounds:
        ax.plot(t, y, b.style, label=b.label, linewidth=1.2, color="black")
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(loc="upper left", fontsize="small")
    ax.grid(True, linewidth=0.3)
    fig.tight_layout()
    return fig


def render(spec: PlotSpec) -> Path:
    """Writes one SVG panel and returns its path."""
    fig = draw(spec)
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return spec.output


def _panel_from_table(table: dict, base: Path) -> PlotSpec:
    def resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    return PlotSpec(
        output=resolve(table["output"]),
        series=[Series(resolve(s["csv"]), s["label"], s.get("style", "-")) for s in table.get("series", [])],
        bounds=[
            Bound(resolve(b["csv"]), b["column"], b["label"], b.get("style", "--")) for b in table.get("bounds", [])
        ],
        title=table.get("title", ""),
        xlabel=table.get("xlabel", "t"),
        ylabel=table.get("ylabel", "per-agent regret"),
    )


def load_spec(path: Path) -> list[PlotSpec]:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    tables = data.get("panel", [data] if "output" in data else [])
    if not tables:
        raise EmptySpec(f"{path}: no panels")
    return [_panel_from_table(t, path.parent) for t in tables]


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="plot", description=__doc__.splitlines()[0])
    ap.add_argument("csvs", nargs="*", type=Path, help="CSV files, one curve each")
    ap.add_argument("--spec", type=Path, help="TOML spec with [[panel]] tables")
    ap.add_argument("--labels", help="comma-separated curve labels")
    ap.add_argument("--bounds", help="comma-separated bound columns read from the first CSV")
    ap.add_argument("--output", type=Path, default=Path("plot.svg"))
    ap.add_argument("--title", default="")
    args = ap.parse_args(argv)
    try:
        if args.spec is not None:
            specs = load_spec(args.spec)
        else:
            if not args.csvs:
                raise EmptySpec("no CSVs given")
            labels = args.labels.split(",") if args.labels else [p.stem for p in args.csvs]
            if len(labels) != len(args.csvs):
                ap.error("--labels must name every CSV")
            bounds = [Bound(args.csvs[0], c, c) for c in args.bounds.split(",")] if args.bounds else []
            specs = [
                PlotSpec(args.output, [Series(p, l) for p, l in zip(args.csvs, labels)], bounds, title=args.title)
            ]
        for s in specs:
            print(render(s))
    except (MissingColumn, EmptySpec) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
