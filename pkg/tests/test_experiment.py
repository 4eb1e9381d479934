"""Config parsing, sweep execution, report emission, analytic comparison."""

import os

import pytest

import ringsim.experiment as experiment
from ringsim import (
    ConfigError,
    Protocol,
    ResultRow,
    ScenarioConfig,
    Variant,
    analytic_compare,
    parse_config_text,
    read_results_csv,
    rows_to_csv_text,
    run_sweep,
    summarize,
)
from ringsim.cli import main as cli_main
from ringsim.experiment import emit_report, sweep_cells


# -------------------------------------------------------------------- config

def test_empty_config_takes_defaults():
    cfg = parse_config_text("")
    assert cfg.nodes == 50
    assert (cfg.arena_width, cfg.arena_height) == (1000.0, 1000.0)
    assert cfg.radio_range == 250.0
    assert cfg.v_max == 30.0
    assert cfg.pause_times == (0.0, 100.0, 200.0)
    assert cfg.duration == 900.0
    assert cfg.warmup == 50.0
    assert cfg.packet_size == 512
    assert cfg.protocols == (Protocol.AODV, Protocol.DSR, Protocol.DYMO)
    assert cfg.variants == (Variant.ERS1, Variant.ERS2)
    assert cfg.seeds == (1, 2, 3, 4, 5)


def test_config_parses_values_and_comments():
    text = """
# scenario knobs
nodes = 20
pause_times = [0, 50]   # seconds
protocols = [AODV, dymo]
seeds = [7]
out_dir = out
"""
    cfg = parse_config_text(text)
    assert cfg.nodes == 20
    assert cfg.pause_times == (0.0, 50.0)
    assert cfg.protocols == (Protocol.AODV, Protocol.DYMO)
    assert cfg.seeds == (7,)
    assert cfg.out_dir == "out"


def test_config_single_pause_cell():
    cfg = parse_config_text("pause_times = [0]\n")
    assert cfg.pause_times == (0.0,)


@pytest.mark.parametrize("text,fragment", [
    ("nodes: 20\n", "key = value"),
    ("speed = 3\n", "unknown key"),
    ("nodes = twenty\n", "cannot parse"),
    ("nodes = 5\nnodes = 6\n", "duplicate"),
    ("pause_times = 0, 50\n", "list"),
    ("protocols = [olsr]\n", "one of"),
    ("duration = 40\nwarmup = 50\n", "duration must exceed warmup"),
])
def test_config_rejects_bad_input(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config_text(text)


def test_config_error_carries_line_number():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config_text("nodes = 5\n\nbogus = 1\n")


# --------------------------------------------------------------------- sweep

def tiny_scenario(**overrides):
    values = dict(nodes=8, arena_width=400.0, arena_height=400.0,
                  radio_range=150.0, v_max=5.0, pause_times=(0.0,),
                  duration=8.0, warmup=1.0, traffic_pairs=2, traffic_rate=2.0,
                  protocols=(Protocol.DYMO,), variants=(Variant.ERS1, Variant.ERS2),
                  seeds=(1, 2))
    values.update(overrides)
    return ScenarioConfig(**values)


def test_sweep_counts_cells():
    scenario = ScenarioConfig()
    assert len(sweep_cells(scenario)) == 3 * 2 * 3 * 5
    rows = run_sweep(tiny_scenario())
    assert len(rows) == 4
    assert [r.key for r in rows] == sorted(r.key for r in rows)
    assert all(r.error == "" for r in rows)
    assert all(r.analytic_b_m > 0 for r in rows)


def test_sweep_deterministic_bytes():
    a = rows_to_csv_text(run_sweep(tiny_scenario()))
    b = rows_to_csv_text(run_sweep(tiny_scenario()))
    assert a == b


def test_sweep_parallel_matches_serial():
    serial = run_sweep(tiny_scenario())
    parallel = run_sweep(tiny_scenario(), parallel=2)
    assert rows_to_csv_text(serial) == rows_to_csv_text(parallel)


def test_sweep_isolates_cell_failure(monkeypatch):
    real = experiment.run_cell

    def sabotaged(scenario, protocol, variant, pause_time, seed, trace_dir=None):
        if seed == 2 and variant is Variant.ERS1:
            raise RuntimeError("boom")
        return real(scenario, protocol, variant, pause_time, seed, trace_dir)

    monkeypatch.setattr(experiment, "run_cell", sabotaged)
    rows = run_sweep(tiny_scenario())
    failed = [r for r in rows if r.error]
    assert len(failed) == 1
    assert "boom" in failed[0].error
    assert failed[0].throughput_bps is None
    assert len([r for r in rows if not r.error]) == 3


# ------------------------------------------------------------------- reports

def synthetic_rows():
    rows = []
    for protocol in ("aodv", "dsr", "dymo"):
        for variant in ("ers1", "ers2"):
            for pause in (0.0, 100.0, 200.0):
                for seed in range(1, 6):
                    # fixed pattern: enhanced variant slightly better
                    bump = 1.0 if variant == "ers2" else 0.0
                    rows.append(ResultRow(
                        protocol=protocol, variant=variant, pause_time=pause,
                        seed=seed, throughput_bps=1000.0 + 10 * bump + seed,
                        e2ed_s=None if seed == 5 else 0.5 - 0.1 * bump,
                        nrl=2.0 - 0.5 * bump, discovery_successes=3,
                        analytic_b_m=12.5, sim_rreq_tx=40))
    return rows


def test_summary_groups_and_deltas():
    text = summarize(synthetic_rows())
    assert text.count("pause=") >= 18
    assert "excluded 1" in text
    assert "nrl=-0.5" in text
    assert "throughput_bps=+10" in text


def test_csv_round_trip(tmp_path):
    rows = synthetic_rows()
    path = tmp_path / "results.csv"
    path.write_text(rows_to_csv_text(rows), encoding="utf-8")
    assert read_results_csv(str(path)) == rows


def test_csv_round_trips_real_rows(tmp_path):
    rows = run_sweep(tiny_scenario(seeds=(3,)))
    csv_path, summary_path = emit_report(rows, str(tmp_path / "out"))
    assert read_results_csv(csv_path) == rows
    assert os.path.exists(summary_path)


def test_empty_report_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], str(tmp_path))
    with pytest.raises(ValueError):
        summarize([])


# ---------------------------------------------------------- analytic compare

def test_analytic_compare_exact_in_static_mode():
    scenario = ScenarioConfig(nodes=30, v_max=0.0, pause_times=(0.0,),
                              radio_range=250.0, seeds=(1, 2),
                              protocols=(Protocol.AODV, Protocol.DSR),
                              variants=(Variant.ERS1,), duration=60.0,
                              warmup=0.0)
    rows, table = analytic_compare(scenario)
    assert rows
    assert all(r["tx_rel_err"] == 0.0 for r in rows)
    assert all(r["sim_tx"] == r["census_tx"] for r in rows)
    assert "census" in table


def test_analytic_compare_requires_static():
    with pytest.raises(ConfigError, match="static"):
        analytic_compare(ScenarioConfig(v_max=10.0))


# ----------------------------------------------------------------------- CLI

def test_cli_schedule(capsys):
    assert cli_main(["schedule", "--protocol", "aodv", "--variant", "ers1"]) == 0
    out = capsys.readouterr().out
    assert "2 4 6 35 35 35" in out
    assert "0.320" in out


def test_cli_run_and_compare(tmp_path, capsys):
    config = tmp_path / "tiny.cfg"
    config.write_text(
        "nodes = 8\narena_width = 400\narena_height = 400\n"
        "radio_range = 150\nv_max = 5\npause_times = [0]\nduration = 8\n"
        "warmup = 1\ntraffic_pairs = 2\ntraffic_rate = 2\n"
        "protocols = [dymo]\nseeds = [1]\n", encoding="utf-8")
    out_dir = tmp_path / "results"
    assert cli_main(["run", "--config", str(config), "--out", str(out_dir)]) == 0
    assert (out_dir / "results.csv").exists()
    assert (out_dir / "summary.txt").exists()
    capsys.readouterr()

    static = tmp_path / "static.cfg"
    static.write_text(
        "nodes = 12\nradio_range = 250\nv_max = 0\npause_times = [0]\n"
        "duration = 30\nwarmup = 0\nprotocols = [dsr]\nvariants = [ers1]\n"
        "seeds = [1]\n", encoding="utf-8")
    assert cli_main(["compare", "--config", str(static)]) == 0
    assert "err%" in capsys.readouterr().out


def test_cli_reports_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("bogus = 1\n", encoding="utf-8")
    assert cli_main(["run", "--config", str(bad)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_cli_missing_file(capsys):
    assert cli_main(["run", "--config", "/nonexistent/x.cfg"]) == 2
    assert "error" in capsys.readouterr().err
