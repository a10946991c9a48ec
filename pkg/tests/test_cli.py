import pytest

from npsci.cli import build_parser, canonical_argv, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_interval_adjusted_wald(capsys):
    code, out, err = run(capsys, "interval", "--det", "20", "--pas", "50", "--pro", "30",
                         "--method", "aw:3:T", "--level", "0.95")
    assert code == 0
    header, row = out.strip().splitlines()
    assert header.split("\t") == ["method", "center", "lower", "upper", "width"]
    method, center, lower, upper, _ = row.split("\t")
    assert method == "aw:3:t"
    assert float(center) == pytest.approx(0.097087, abs=1e-6)
    assert float(lower) == pytest.approx(-0.038176, abs=1e-6)
    assert float(upper) == pytest.approx(0.232351, abs=1e-6)
    assert err.startswith("# npsci interval")


def test_interval_goodman1_equals_wald(capsys):
    _, out_g, _ = run(capsys, "interval", "--det", "7", "--pas", "2", "--pro", "11",
                      "--method", "goodman:1")
    _, out_w, _ = run(capsys, "interval", "--det", "7", "--pas", "2", "--pro", "11",
                      "--method", "wald")
    assert out_g.splitlines()[1].split("\t")[1:] == out_w.splitlines()[1].split("\t")[1:]


def test_interval_scale(capsys):
    args = ["interval", "--det", "20", "--pas", "50", "--pro", "30", "--method", "wald"]
    _, plain, _ = run(capsys, *args)
    _, scaled, _ = run(capsys, *args, "--scale", "100")
    a = [float(v) for v in plain.splitlines()[1].split("\t")[1:]]
    b = [float(v) for v in scaled.splitlines()[1].split("\t")[1:]]
    assert b == pytest.approx([100 * v for v in a], abs=1e-4)


def test_interval_clamps_unless_raw(capsys):
    args = ["interval", "--det", "0", "--pas", "1", "--pro", "3", "--method", "wald"]
    _, out, _ = run(capsys, *args)
    assert float(out.splitlines()[1].split("\t")[3]) == 1.0
    _, out, _ = run(capsys, *args, "--raw")
    assert float(out.splitlines()[1].split("\t")[3]) > 1.0


def test_interval_defaults_to_every_method(capsys):
    _, out, _ = run(capsys, "interval", "--det", "3", "--pas", "4", "--pro", "5")
    assert len(out.strip().splitlines()) == 1 + 16


def test_exit_codes(capsys):
    assert run(capsys, "interval", "--det", "0", "--pas", "0", "--pro", "0")[0] == 1
    code, _, err = run(capsys, "interval", "--det", "1", "--pas", "1", "--pro", "1",
                       "--method", "aw:3:q")
    assert code == 2 and "position 5" in err
    assert run(capsys, "interval", "--det", "-1", "--pas", "1", "--pro", "1")[0] == 2
    assert run(capsys, "coverage", "--n", "10:5:1")[0] == 2
    assert run(capsys, "mae", "--coverage", "/nonexistent/file.csv")[0] == 1


def test_coverage_rows_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["coverage", "--method", "wald", "--method", "aw:3:t", "--n", "5:15:5",
            "--samples", "10", "--seed", "123"]
    assert run(capsys, *args, "-o", str(a))[0] == 0
    assert run(capsys, *args, "-o", str(b))[0] == 0
    lines = a.read_text().splitlines()
    assert len(lines) == 61
    assert a.read_bytes() == b.read_bytes()
    assert all(line.split(",")[8] == "exact" and line.split(",")[9] == "" for line in lines[1:])


def test_coverage_without_seed_prints_one(capsys, caplog, tmp_path):
    out = tmp_path / "c.csv"
    code, _, err = run(capsys, "coverage", "--method", "wald", "--n", "5", "--samples", "3",
                       "-o", str(out))
    assert code == 0
    assert "no --seed given" in caplog.text
    config = next(line for line in err.splitlines() if line.startswith("# npsci"))
    replay = tmp_path / "replay.csv"
    argv = config[len("# npsci "):].split()
    argv[argv.index("-o") + 1] = str(replay)
    assert main(argv) == 0
    assert replay.read_bytes() == out.read_bytes()


def test_full_pipeline(capsys, tmp_path):
    cov, obs, w = tmp_path / "cov.csv", tmp_path / "obs.csv", tmp_path / "w.csv"
    common = ["--samples", "20", "--seed", "9"]
    assert main(["coverage", "--method", "wald", "--method", "aw:3:t", "--method", "iterscore",
                 "--n", "5,10,20", *common, "-o", str(cov)]) == 0
    assert main(["surrogate", "--count", "300", "--seed", "1", "-o", str(obs)]) == 0
    assert main(["weights", "--observations", str(obs), *common, "-o", str(w)]) == 0
    capsys.readouterr()

    assert main(["mae", "--coverage", str(cov), "--weights", str(w)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "method,n,level,weighting,mae,rank"
    assert len(out) == 1 + 3 * 3 * 2

    assert main(["report", "--coverage", str(cov), "--weights", str(w)]) == 0
    md = capsys.readouterr().out
    assert "### observed weighting" in md and "`aw:3:t`" in md

    assert main(["report", "--coverage", str(cov), "--format", "csv"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "level,weighting,method,total_mae,mean_rank,n_count"
    assert len(rows) == 4


def test_weights_must_match_lattice(capsys, tmp_path):
    cov, obs, w = tmp_path / "cov.csv", tmp_path / "obs.csv", tmp_path / "w.csv"
    main(["coverage", "--method", "wald", "--n", "5", "--samples", "5", "--seed", "1",
          "-o", str(cov)])
    main(["surrogate", "--count", "50", "--seed", "1", "-o", str(obs)])
    main(["weights", "--observations", str(obs), "--samples", "5", "--seed", "2", "-o", str(w)])
    code, _, err = run(capsys, "mae", "--coverage", str(cov), "--weights", str(w))
    assert code == 1 and "no weight" in err


@pytest.mark.parametrize("argv", [
    ["interval", "--det", "1", "--pas", "2", "--pro", "3", "--method", "AW:Z2:T", "--scale", "100"],
    ["coverage", "--method", "Score:0.5", "--n", "5:20:5", "--level", "0.9", "--seed", "4"],
    ["weights", "--observations", "o.csv", "--seed", "8"],
    ["report", "--coverage", "c.csv", "--weights", "w.csv", "--max-n", "50"],
])
def test_config_round_trips(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    from npsci.cli import _fill_defaults
    _fill_defaults(args)
    canonical = canonical_argv(args)
    again = parser.parse_args(canonical)
    _fill_defaults(again)
    assert canonical_argv(again) == canonical
