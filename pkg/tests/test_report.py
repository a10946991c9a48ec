import io

import numpy as np
import pytest

from npsci.core import ConfidenceLevel, Tpmd
from npsci.coverage import CoverageRecord, LatticeSpec, run_grid, sample_simplex_lattice
from npsci.methods import MethodSpec
from npsci.report import mae_rows, render_markdown, summarize
from npsci.tables import (
    COVERAGE_COLUMNS,
    SchemaError,
    read_coverage_csv,
    read_observations_csv,
    read_weights_csv,
    write_coverage_csv,
    write_weights_csv,
)

L95 = ConfidenceLevel(0.95)
P1, P2 = Tpmd(0.2, 0.5, 0.3), Tpmd(0.1, 0.1, 0.8)


def record(method, n, p, c):
    return CoverageRecord(MethodSpec.parse(method), n, L95, p, p.nps, p.variance, c, 0.2, "exact")


def test_coverage_csv_round_trip():
    tpmds = sample_simplex_lattice(LatticeSpec(400, 5, 2))
    records = run_grid([MethodSpec("wald"), MethodSpec.parse("aw:z2:u")], [5, 130], L95, tpmds,
                       mode="auto", seed=4, sims=100)
    buf = io.StringIO()
    write_coverage_csv(records, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == ",".join(COVERAGE_COLUMNS)
    exact_row = text.splitlines()[1].split(",")
    assert exact_row[8] == "exact" and exact_row[9] == "" and exact_row[10] == ""
    back = read_coverage_csv(io.StringIO(text))
    assert [str(r.method) for r in back] == [str(r.method) for r in records]
    assert [r.coverage for r in back] == pytest.approx([r.coverage for r in records], rel=1e-9)
    assert [r.seed for r in back] == [r.seed for r in records]
    buf2 = io.StringIO()
    write_coverage_csv(back, buf2)
    assert buf2.getvalue() == text


def test_coverage_csv_schema_errors():
    with pytest.raises(SchemaError, match="header"):
        read_coverage_csv(io.StringIO("method,n\nwald,5\n"))
    header = ",".join(COVERAGE_COLUMNS)
    bad_method = header + "\nnope,5,0.95,0.2,0.5,0.3,0.1,0.49,exact,,,0.9,0.1\n"
    with pytest.raises(SchemaError, match="line 2"):
        read_coverage_csv(io.StringIO(bad_method))
    bad_n = header + "\nwald,five,0.95,0.2,0.5,0.3,0.1,0.49,exact,,,0.9,0.1\n"
    with pytest.raises(SchemaError, match="bad n"):
        read_coverage_csv(io.StringIO(bad_n))


def test_weights_csv_round_trip():
    buf = io.StringIO()
    write_weights_csv([P1, P2], [0.25, 0.75], buf)
    assert buf.getvalue().splitlines()[0] == "index,p_det,p_pas,p_pro,weight"
    tpmds, w = read_weights_csv(io.StringIO(buf.getvalue()))
    assert tpmds == [P1, P2] and list(w) == [0.25, 0.75]


def test_observations_header_required():
    with pytest.raises(SchemaError):
        read_observations_csv(io.StringIO("a,b\n0.1,0.5\n"))
    obs = read_observations_csv(io.StringIO("nps,variance\n0.1,0.5\n0.2,0.6\n"))
    assert obs.shape == (2, 2)


def test_all_nominal_gives_zero_mae_and_tied_ranks():
    recs = [record(m, n, p, 0.95) for m in ("wald", "aw:3:t", "iterscore")
            for n in (5, 10) for p in (P1, P2)]
    rows = mae_rows(recs)
    assert all(r.mae == 0 and r.rank == 1 for r in rows)
    assert all(s.mean_rank == 1 for s in summarize(rows))


def test_dominating_method_ranks_first():
    recs = []
    for n in (5, 10, 15):
        recs += [record("aw:3:t", n, P1, 0.94), record("aw:3:t", n, P2, 0.955)]
        recs += [record("wald", n, P1, 0.85), record("wald", n, P2, 0.90)]
    summary = summarize(mae_rows(recs))
    assert summary[0].method == "aw:3:t" and summary[0].mean_rank == 1
    assert summary[1].mean_rank == 2


def test_weighted_and_uniform_differ():
    recs = [record("wald", 10, P1, 0.90), record("wald", 10, P2, 0.96)]
    rows = mae_rows(recs, {P1.as_tuple(): 0.9, P2.as_tuple(): 0.1})
    by = {r.weighting: r.mae for r in rows}
    assert by["uniform"] == pytest.approx(0.03)
    assert by["observed"] == pytest.approx(0.046)


def test_missing_weight_is_an_error():
    from npsci.core import InvalidInputError
    with pytest.raises(InvalidInputError, match="no weight"):
        mae_rows([record("wald", 10, P1, 0.9)], {P2.as_tuple(): 1.0})


def test_ranks_per_n_and_summary_limits():
    recs = [record("wald", 5, P1, 0.90), record("iterscore", 5, P1, 0.97),
            record("wald", 120, P1, 0.951), record("iterscore", 120, P1, 0.9)]
    rows = mae_rows(recs)
    ranks = {(r.method, r.n): r.rank for r in rows}
    assert ranks == {("wald", 5): 2, ("iterscore", 5): 1, ("wald", 120): 1,
                     ("iterscore", 120): 2}
    summary = summarize(rows, max_n=100)
    assert [s.method for s in summary] == ["iterscore", "wald"]
    assert all(s.n_count == 1 for s in summary)


def test_markdown_layout():
    recs = [record(m, n, p, c) for m, c in (("wald", 0.9), ("aw:3:t", 0.951))
            for n in (5, 10, 30, 60, 100, 140) for p in (P1, P2)]
    md = render_markdown(mae_rows(recs, {P1.as_tuple(): 1, P2.as_tuple(): 3}))
    assert "### observed weighting, level 0.95" in md
    assert "### uniform weighting, level 0.95" in md
    header = next(line for line in md.splitlines() if line.startswith("| method"))
    assert header == ("| method | n 5-10 | n 30 | n 60 | n 100 | n 140 | total (n<=100) "
                      "| mean rank |")
    first = next(line for line in md.splitlines() if line.startswith("| `"))
    # sorted ascending by total MAE; 5 bands of n <= 100 -> 5 * 0.1 MAE * 100
    assert first.startswith("| `aw:3:t`")
    wald = next(line for line in md.splitlines() if line.startswith("| `wald`"))
    assert "| 25.00 | 2.00 |" in wald
    assert np.isclose(5 * 0.05 * 100, 25.0)
