import csv
import subprocess
import sys

import numpy as np
import pytest

from coinwalk.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main, read_config_file
from coinwalk.experiments import (
    MISSING,
    SERIES_HEADER,
    SUMMARY_HEADER,
    ConfigError,
    ExperimentConfig,
    NumericalInvariantError,
    emit_csv,
    format_float,
    log_grid,
    run_cycle_experiment,
    run_experiment,
    run_line_experiment,
    run_point,
)
from coinwalk.observables import NOT_MIXED
from oracles import classical_cycle_series, last_index_at_or_above


def read_rows(path):
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.reader(lines))


def read_meta(path):
    with open(path) as fh:
        return [line.rstrip("\n") for line in fh if line.startswith("#")]


def small_cycle(**kw):
    kw.setdefault("p_grid", (0.0, 0.2, 1.0))
    return ExperimentConfig("cycle", 5, horizon=12, **kw)


# -- configuration ----------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(p_grid=(0.2, 0.1)), "p_grid"),
        (dict(p_grid=(0.1, 0.1)), "p_grid"),
        (dict(p_grid=(0.5, 1.5)), "p_grid"),
        (dict(p_grid=()), "p_grid"),
        (dict(p_grid=(0.1,), epsilon=0.0), "epsilon"),
        (dict(p_grid=(0.1,), horizon=0), "horizon"),
        (dict(p_grid=(0.1,), observables={"sigma"}), "observables"),
        (dict(p_grid=(0.1,), observables={"bogus"}), "observables"),
        (dict(p_grid=(0.1,), target="sideways"), "decohere"),
        (dict(p_grid=(0.1,), coin_init="up"), "coin_init"),
        (dict(p_grid=(0.1,), neg_every=-1), "neg_every"),
    ],
)
def test_config_validation(kwargs, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig("cycle", 5, **kwargs)
    assert info.value.field == field


def test_line_config_rules():
    with pytest.raises(ConfigError):
        ExperimentConfig("line", 10, (0.1,), horizon=20)
    with pytest.raises(ConfigError):
        ExperimentConfig("line", 10, (0.1,), observables={"mixing_time"})
    cfg = ExperimentConfig("line", 10, (0.1,))
    assert cfg.effective_horizon == 10


def test_default_cycle_horizon():
    assert ExperimentConfig("cycle", 29, (0.1,)).effective_horizon == 20 * 29


def test_log_grid_matches_rates_quoted_for_n29():
    grid = log_grid(-0.65, -0.55, 3)
    assert [round(p, 4) for p in grid] == [0.2239, 0.2512, 0.2818]


# -- runs -------------------------------------------------------------------


def test_series_rows_cover_every_step(tmp_path):
    cfg = small_cycle()
    result = run_cycle_experiment(cfg)
    series, summary = emit_csv(result, tmp_path / "run")
    rows = read_rows(series)
    assert tuple(rows[0]) == SERIES_HEADER
    body = rows[1:]
    assert len(body) == 3 * 13
    for p in cfg.p_grid:
        ts = [int(r[1]) for r in body if float(r[0]) == p]
        assert ts == list(range(13))
    srows = read_rows(summary)
    assert tuple(srows[0]) == SUMMARY_HEADER
    assert [float(r[0]) for r in srows[1:]] == list(cfg.p_grid)


def test_rows_sorted_by_p_then_t(tmp_path):
    cfg = small_cycle(p_grid=(0.05, 0.3, 0.9))
    series, _ = emit_csv(run_experiment(cfg), tmp_path / "s")
    keys = [(float(r[0]), int(r[1])) for r in read_rows(series)[1:]]
    assert keys == sorted(keys)


def test_pure_cycle_walk_reports_inf(tmp_path):
    cfg = small_cycle(p_grid=(0.0,), observables={"mixing_time"})
    result = run_experiment(cfg)
    assert result.points[0].mixing_time is NOT_MIXED
    _, summary = emit_csv(result, tmp_path / "inf")
    row = read_rows(summary)[1]
    assert row[3] == "INF"


def test_empty_observable_set(tmp_path):
    cfg = small_cycle(observables=set())
    series, summary = emit_csv(run_experiment(cfg), tmp_path / "empty")
    assert read_rows(series) == [list(SERIES_HEADER)]
    rows = read_rows(summary)
    assert rows[0] == list(SUMMARY_HEADER)
    assert [r[0] for r in rows[1:]] == ["0", "0.2", "1"]
    assert all(cell == "" for r in rows[1:] for cell in r[1:])


def test_unrequested_columns_are_empty(tmp_path):
    cfg = small_cycle(observables={"tvd"})
    series, _ = emit_csv(run_experiment(cfg), tmp_path / "tv")
    for r in read_rows(series)[1:]:
        assert r[2] != ""
        assert r[3:] == ["", "", ""]


def test_missing_negativity_is_na(tmp_path, monkeypatch):
    import coinwalk.experiments as ex
    from coinwalk.entanglement import MissingDataPoint

    def broken(rho):
        raise MissingDataPoint("no convergence")

    monkeypatch.setattr(ex, "negativity", broken)
    cfg = small_cycle(p_grid=(0.1,), observables={"negativity"})
    result = run_experiment(cfg)
    assert result.points[0].final_negativity is MISSING
    series, summary = emit_csv(result, tmp_path / "na")
    assert {r[4] for r in read_rows(series)[1:]} == {"NA"}
    assert read_rows(summary)[1][2] == "NA"


def test_line_negativity_stride(tmp_path):
    cfg = ExperimentConfig("line", 10, (0.05,), observables={"negativity"}, neg_every=4)
    pt = run_line_experiment(cfg).points[0]
    computed = [t for t, v in enumerate(pt.negativity) if v is not None]
    assert computed == [0, 4, 8, 10]
    final_only = ExperimentConfig("line", 10, (0.05,), observables={"negativity"}, neg_every=0)
    pt = run_point(final_only, 0.05)
    assert [t for t, v in enumerate(pt.negativity) if v is not None] == [10]


def test_line_sigma_and_distribution(tmp_path):
    cfg = ExperimentConfig("line", 20, (0.0, 1.0), observables={"sigma", "distribution", "tvd"})
    result = run_experiment(cfg)
    classical = result.point(1.0)
    assert classical.sigma[20] == pytest.approx(np.sqrt(20), abs=1e-12)
    assert classical.final_distribution.sum() == pytest.approx(1.0, abs=1e-12)
    paths = emit_csv(result, tmp_path / "line.csv")
    assert [p.name for p in paths] == ["line_series.csv", "line_summary.csv", "line_distribution.csv"]
    dist = read_rows(paths[2])
    assert dist[0] == ["p", "x", "probability"]
    assert len(dist) == 1 + 2 * 41


def test_metadata_header(tmp_path):
    series, summary = emit_csv(run_experiment(small_cycle()), tmp_path / "m")
    meta = read_meta(summary)
    assert "# horizon=12" in meta
    assert "# uniform_site_probability=0.2" in meta
    assert read_meta(series) == meta


def test_float_rendering_round_trips(tmp_path):
    result = run_experiment(small_cycle(p_grid=(0.0123456789012345, 0.5)))
    series, _ = emit_csv(result, tmp_path / "rt")
    rows = read_rows(series)[1:]
    for r in rows:
        for cell in r[2:5]:
            if cell not in ("", "NA"):
                assert format_float(float(cell)) == cell
    pt = result.points[0]
    parsed = [float(r[2]) for r in rows if r[0] == format_float(pt.p)]
    assert parsed == [float(format_float(v)) for v in pt.tvd]


def test_csv_is_byte_identical_across_runs(tmp_path):
    cfg = small_cycle()
    a = emit_csv(run_experiment(cfg), tmp_path / "a")
    b = emit_csv(run_experiment(cfg), tmp_path / "b")
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()
        assert b"\r" not in x.read_bytes()


def test_parallel_workers_give_identical_output(tmp_path):
    cfg = small_cycle()
    serial = emit_csv(run_experiment(cfg), tmp_path / "s")
    par_cfg = small_cycle(workers=2)
    parallel = emit_csv(run_experiment(par_cfg), tmp_path / "p")
    for x, y in zip(serial, parallel):
        assert x.read_bytes() == y.read_bytes()


def test_write_failure_leaves_no_partial_files(tmp_path):
    target = tmp_path / "missing_dir" / "x"
    with pytest.raises(OSError, match="missing_dir"):
        emit_csv(run_experiment(small_cycle(observables=set())), target)
    assert not any(tmp_path.rglob("*.part"))


def test_three_cycle_classical_mixing_matches_markov_chain():
    eps = 0.01
    horizon = 60
    series = classical_cycle_series(3, horizon)
    oracle_tvd = np.abs(series - 1 / 3).sum(axis=1)
    expected = last_index_at_or_above(oracle_tvd, eps)
    assert expected == 7
    cfg = ExperimentConfig("cycle", 3, (1.0,), horizon=horizon, epsilon=eps,
                           observables={"tvd", "mixing_time"})
    pt = run_point(cfg, 1.0)
    np.testing.assert_allclose(pt.tvd[1:], oracle_tvd[1:], atol=1e-12)
    assert pt.mixing_time == expected


def test_invariant_violation_raises(monkeypatch):
    import coinwalk.experiments as ex

    monkeypatch.setattr(ex, "INVARIANT_TOL", -1.0)
    with pytest.raises(NumericalInvariantError):
        run_point(small_cycle(), 0.1)


# -- CLI --------------------------------------------------------------------


def test_cli_runs_from_flags(tmp_path):
    stem = tmp_path / "cli"
    code = main(["--size", "5", "--decohere", "position", "--p-list", "0.1,0.3",
                 "--horizon", "8", "--out", str(stem)])
    assert code == EXIT_OK
    assert len(read_rows(tmp_path / "cli_series.csv")) == 1 + 2 * 9


def test_cli_config_file_with_overrides(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text(
        "# cycle sweep\n"
        "size = 7\n"
        "decohere = both\n"
        "p-log = -1 -0.5 3\n"
        "horizon = 10   # short\n"
        "observables = tvd,mixing_time\n"
        f"out = {tmp_path / 'fromfile'}\n"
    )
    assert read_config_file(conf)["p_log"] == "-1 -0.5 3"
    assert main(["--config", str(conf), "--horizon", "6"]) == EXIT_OK
    rows = read_rows(tmp_path / "fromfile_summary.csv")
    assert len(rows) == 4
    assert "# horizon=6" in read_meta(tmp_path / "fromfile_summary.csv")


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    assert main(["--size", "5", "--p-list", "0.3,0.1", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "p_grid" in capsys.readouterr().err
    assert main(["--size", "5", "--p-list", "0.1"]) == EXIT_CONFIG
    assert main(["--size", "5", "--steps", "3", "--p-list", "0.1", "--out", "x"]) == EXIT_CONFIG
    assert main(["--bogus"]) == EXIT_CONFIG
    bad = tmp_path / "bad.conf"
    bad.write_text("colour = blue\n")
    assert main(["--config", str(bad)]) == EXIT_CONFIG
    assert main(["--config", str(tmp_path / "nope.conf")]) == EXIT_IO
    assert main(["--size", "5", "--p-list", "0.1", "--horizon", "3",
                 "--out", str(tmp_path / "no" / "such" / "dir")]) == EXIT_IO

    import coinwalk.experiments as ex

    monkeypatch.setattr(ex, "INVARIANT_TOL", -1.0)
    assert main(["--size", "5", "--p-list", "0.1", "--horizon", "3",
                 "--out", str(tmp_path / "y")]) == EXIT_NUMERICAL


def test_cli_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "coinwalk", "--steps", "6", "--p-list", "0,0.5",
         "--out", str(tmp_path / "mod")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "mod_summary.csv").exists()
