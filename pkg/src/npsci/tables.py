"""CSV readers and writers for coverage, weights and observation files."""

from __future__ import annotations

import csv
from typing import IO, Iterable, Sequence

import numpy as np

from npsci.core import ConfidenceLevel, InvalidInputError, Tpmd
from npsci.coverage import MODES, CoverageRecord
from npsci.methods import MethodSpec

COVERAGE_COLUMNS = (
    "method", "n", "level", "p_det", "p_pas", "p_pro", "true_nps", "true_var",
    "mode", "sims", "seed", "coverage", "mean_width",
)
WEIGHTS_COLUMNS = ("index", "p_det", "p_pas", "p_pro", "weight")
OBSERVATION_COLUMNS = ("nps", "variance")


class SchemaError(InvalidInputError):
    """A CSV file does not match the expected columns or value types."""


def fmt_real(x: float) -> str:
    return format(float(x), ".10g")


def _writer(stream: IO[str]):
    return csv.writer(stream, lineterminator="\n")


def _reader(stream: IO[str], expected: Sequence[str], name: str) -> csv.DictReader:
    reader = csv.DictReader(stream)
    header = tuple(reader.fieldnames or ())
    if header != tuple(expected):
        raise SchemaError(
            f"{name} header must be {','.join(expected)}; got {','.join(header) or '(empty)'}"
        )
    return reader


def _parse(row: dict, key: str, cast, line: int, name: str):
    try:
        return cast(row[key])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{name} line {line}: bad {key} value {row[key]!r} ({exc})") from exc


def write_coverage_csv(records: Iterable[CoverageRecord], stream: IO[str]) -> int:
    w = _writer(stream)
    w.writerow(COVERAGE_COLUMNS)
    rows = 0
    for r in records:
        w.writerow([
            str(r.method), r.n, fmt_real(r.level.level),
            *(fmt_real(v) for v in r.tpmd.as_tuple()),
            fmt_real(r.true_nps), fmt_real(r.true_var), r.mode,
            "" if r.sims is None else r.sims,
            "" if r.seed is None else r.seed,
            fmt_real(r.coverage), fmt_real(r.mean_width),
        ])
        rows += 1
    return rows


def _optional_int(text: str) -> int | None:
    return None if text == "" else int(text)


def read_coverage_csv(stream: IO[str], name: str = "coverage CSV") -> list[CoverageRecord]:
    records = []
    levels: dict[float, ConfidenceLevel] = {}
    methods: dict[str, MethodSpec] = {}
    for line, row in enumerate(_reader(stream, COVERAGE_COLUMNS, name), start=2):
        text = row["method"]
        if text not in methods:
            try:
                methods[text] = MethodSpec.parse(text)
            except InvalidInputError as exc:
                raise SchemaError(f"{name} line {line}: {exc}") from exc
        level = _parse(row, "level", float, line, name)
        if level not in levels:
            try:
                levels[level] = ConfidenceLevel(level)
            except InvalidInputError as exc:
                raise SchemaError(f"{name} line {line}: {exc}") from exc
        mode = row["mode"]
        if mode not in MODES:
            raise SchemaError(f"{name} line {line}: unknown mode {mode!r}")
        try:
            tpmd = Tpmd(*(float(row[k]) for k in ("p_det", "p_pas", "p_pro")))
        except (ValueError, InvalidInputError) as exc:
            raise SchemaError(f"{name} line {line}: bad distribution ({exc})") from exc
        records.append(CoverageRecord(
            method=methods[text],
            n=_parse(row, "n", int, line, name),
            level=levels[level],
            tpmd=tpmd,
            true_nps=_parse(row, "true_nps", float, line, name),
            true_var=_parse(row, "true_var", float, line, name),
            coverage=_parse(row, "coverage", float, line, name),
            mean_width=_parse(row, "mean_width", float, line, name),
            mode=mode,
            sims=_parse(row, "sims", _optional_int, line, name),
            seed=_parse(row, "seed", _optional_int, line, name),
        ))
    return records


def write_weights_csv(tpmds: Sequence[Tpmd], weights: Sequence[float], stream: IO[str]) -> None:
    if len(tpmds) != len(weights):
        raise InvalidInputError(f"{len(tpmds)} distributions but {len(weights)} weights")
    w = _writer(stream)
    w.writerow(WEIGHTS_COLUMNS)
    for i, (p, weight) in enumerate(zip(tpmds, weights)):
        w.writerow([i, *(fmt_real(v) for v in p.as_tuple()), fmt_real(weight)])


def read_weights_csv(stream: IO[str], name: str = "weights CSV") -> tuple[list[Tpmd], np.ndarray]:
    tpmds, weights = [], []
    for line, row in enumerate(_reader(stream, WEIGHTS_COLUMNS, name), start=2):
        try:
            tpmds.append(Tpmd(*(float(row[k]) for k in ("p_det", "p_pas", "p_pro"))))
        except (ValueError, InvalidInputError) as exc:
            raise SchemaError(f"{name} line {line}: bad distribution ({exc})") from exc
        weight = _parse(row, "weight", float, line, name)
        if not weight >= 0:
            raise SchemaError(f"{name} line {line}: weight must be nonnegative")
        weights.append(weight)
    return tpmds, np.array(weights)


def read_tpmds_csv(stream: IO[str], name: str = "distributions CSV") -> list[Tpmd]:
    """Distributions from any CSV with ``p_det,p_pas,p_pro`` columns."""
    reader = csv.DictReader(stream)
    missing = {"p_det", "p_pas", "p_pro"} - set(reader.fieldnames or ())
    if missing:
        raise SchemaError(f"{name} lacks columns {', '.join(sorted(missing))}")
    out = []
    for line, row in enumerate(reader, start=2):
        try:
            out.append(Tpmd(*(float(row[k]) for k in ("p_det", "p_pas", "p_pro"))))
        except (ValueError, InvalidInputError) as exc:
            raise SchemaError(f"{name} line {line}: bad distribution ({exc})") from exc
    return out


def write_observations_csv(tpmds: Iterable[Tpmd], stream: IO[str]) -> None:
    w = _writer(stream)
    w.writerow(OBSERVATION_COLUMNS)
    for p in tpmds:
        w.writerow([fmt_real(p.nps), fmt_real(p.variance)])


def read_observations_csv(stream: IO[str], name: str = "observations CSV") -> np.ndarray:
    reader = csv.DictReader(stream)
    header = set(reader.fieldnames or ())
    if not set(OBSERVATION_COLUMNS) <= header:
        raise SchemaError(f"{name} header must include nps,variance")
    pairs = [
        (_parse(row, "nps", float, line, name), _parse(row, "variance", float, line, name))
        for line, row in enumerate(reader, start=2)
    ]
    return np.array(pairs, dtype=float).reshape(-1, 2)
