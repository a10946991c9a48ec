"""MAE and rank tables from coverage records."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np
from scipy.stats import rankdata

from npsci.core import InvalidInputError, Tpmd
from npsci.coverage import CoverageRecord
from npsci.tables import fmt_real
from npsci.weights import mae

MAE_COLUMNS = ("method", "n", "level", "weighting", "mae", "rank")
SUMMARY_COLUMNS = ("level", "weighting", "method", "total_mae", "mean_rank", "n_count")

# n-bands of the markdown table, as inclusive (low, high) pairs.
BANDS = ((1, 25), (26, 50), (51, 75), (76, 100))


@dataclass(frozen=True)
class MaeRow:
    method: str
    n: int
    level: float
    weighting: str
    mae: float
    rank: int


@dataclass(frozen=True)
class SummaryRow:
    level: float
    weighting: str
    method: str
    total_mae: float
    mean_rank: float
    n_count: int


def mae_rows(
    records: Sequence[CoverageRecord],
    weights: dict[tuple, float] | None = None,
) -> list[MaeRow]:
    """MAE for each (method, n, level), uniform and, given weights, observed.

    ``weights`` maps ``Tpmd.as_tuple()`` to the distribution's weight; every
    record's distribution must be present. Ranks compare methods at the same
    (level, weighting, n); ties share the lowest rank.
    """
    groups: dict[tuple, list[CoverageRecord]] = defaultdict(list)
    order: list[tuple] = []
    for r in records:
        key = (r.level.level, str(r.method), r.n)
        if key not in groups:
            order.append(key)
        groups[key].append(r)

    weightings = ["uniform"] + (["observed"] if weights is not None else [])
    values: dict[tuple, float] = {}
    for key in order:
        group = groups[key]
        values[key + ("uniform",)] = mae(group).mae
        if weights is not None:
            w = [_lookup(weights, r.tpmd) for r in group]
            values[key + ("observed",)] = mae(group, w).mae

    ranks: dict[tuple, int] = {}
    cells: dict[tuple, list[tuple]] = defaultdict(list)
    for key in values:
        level, method, n, weighting = key
        cells[(level, weighting, n)].append(key)
    for keys in cells.values():
        for key, rank in zip(keys, rankdata([values[k] for k in keys], method="min")):
            ranks[key] = int(rank)

    methods = list(dict.fromkeys(k[1] for k in order))
    rows = [
        MaeRow(method, n, level, weighting, values[(level, method, n, weighting)],
               ranks[(level, method, n, weighting)])
        for weighting in weightings
        for level, method, n in sorted(order, key=lambda k: (k[0], methods.index(k[1]), k[2]))
    ]
    return rows


def _lookup(weights: dict[tuple, float], p: Tpmd) -> float:
    try:
        return weights[p.as_tuple()]
    except KeyError:
        raise InvalidInputError(
            f"no weight for distribution {p.as_tuple()}; were coverage and weights "
            "generated from the same lattice sample?"
        ) from None


def summarize(rows: Sequence[MaeRow], max_n: int = 100) -> list[SummaryRow]:
    """Total MAE and mean rank over ``n <= max_n`` per method.

    Sorted by level, then weighting (observed first), then ascending total MAE.
    """
    acc: dict[tuple, list[MaeRow]] = defaultdict(list)
    for r in rows:
        if r.n <= max_n:
            acc[(r.level, r.weighting, r.method)].append(r)
    out = [
        SummaryRow(level, weighting, method,
                   float(sum(r.mae for r in rs)), float(np.mean([r.rank for r in rs])), len(rs))
        for (level, weighting, method), rs in acc.items()
    ]
    return sorted(out, key=lambda s: (s.level, s.weighting != "observed", s.total_mae, s.method))


def write_mae_csv(rows: Sequence[MaeRow], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(MAE_COLUMNS)
    for r in rows:
        w.writerow([r.method, r.n, fmt_real(r.level), r.weighting, fmt_real(r.mae), r.rank])


def write_summary_csv(summary: Sequence[SummaryRow], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in summary:
        w.writerow([fmt_real(s.level), s.weighting, s.method, fmt_real(s.total_mae),
                    fmt_real(s.mean_rank), s.n_count])


def render_markdown(rows: Sequence[MaeRow], max_n: int = 100, scale: float = 100.0) -> str:
    """Methods by n-band tables of summed MAE (times ``scale``) with totals and mean ranks."""
    summary = summarize(rows, max_n)
    by_key = defaultdict(list)
    for r in rows:
        by_key[(r.level, r.weighting, r.method)].append(r)
    n_values = sorted({r.n for r in rows})
    bands = [(lo, hi) for lo, hi in BANDS if hi <= max_n and any(lo <= n <= hi for n in n_values)]
    if any(n > max_n for n in n_values):
        bands.append((max_n + 1, max(n_values)))

    lines = [f"MAE x {fmt_real(scale)} summed over each band of n; totals and mean ranks "
             f"cover n <= {max_n}.", ""]
    groups = list(dict.fromkeys((s.level, s.weighting) for s in summary))
    for level, weighting in groups:
        lines.append(f"### {weighting} weighting, level {fmt_real(level)}")
        lines.append("")
        band_names = []
        for lo, hi in bands:
            present = [n for n in n_values if lo <= n <= hi]
            label = f"n {present[0]}-{present[-1]}" if len(present) > 1 else f"n {present[0]}"
            band_names.append(label)
        header = ["method", *band_names, f"total (n<={max_n})", "mean rank"]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "|".join(["---"] + ["---:"] * (len(header) - 1)) + "|")
        for s in (s for s in summary if (s.level, s.weighting) == (level, weighting)):
            mrows = by_key[(level, weighting, s.method)]
            cells = [
                f"{scale * sum(r.mae for r in mrows if lo <= r.n <= hi):.2f}" for lo, hi in bands
            ]
            lines.append("| " + " | ".join(
                [f"`{s.method}`", *cells, f"{scale * s.total_mae:.2f}", f"{s.mean_rank:.2f}"]
            ) + " |")
        lines.append("")
    return "\n".join(lines)
