import csv
import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sleepwake import io
from sleepwake.errors import IncompatibleKind, ParseError, ValidationError
from sleepwake.experiments import DriftReport, phase_drift
from sleepwake.integrator import EventKind, PerturbationEvent, SimulationConfig, simulate


# ---------------------------------------------------------------- schedules


def test_single_force_wake_row():
    ev = io.parse_schedule_text("t_hours,event,factor\n60,force_wake,\n")
    assert ev == [PerturbationEvent(60.0, EventKind.FORCE_WAKE)]


def test_knockout_row_carries_factor():
    ev = io.parse_schedule_text("t_hours,event,factor\n100,knockout_on,0.2\n")
    assert ev[0].kind is EventKind.KNOCKOUT_ON and ev[0].factor == 0.2


def test_comments_and_blank_lines_ignored():
    text = "# format_version: 1\n\nt_hours,event,factor\n# note\n60,force_wake,\n70,force_sleep,\n"
    assert len(io.parse_schedule_text(text)) == 2


def test_out_of_order_names_line():
    text = "t_hours,event,factor\n60,force_wake,\n50,force_sleep,\n"
    with pytest.raises(ValidationError) as exc:
        io.parse_schedule_text(text, "s.csv")
    assert exc.value.line == 3 and "s.csv:3" in str(exc.value)


@pytest.mark.parametrize("row, cls, col", [
    ("60,knockout_on,", ValidationError, 3),
    ("60,force_wake,0.2", ValidationError, 3),
    ("sixty,force_wake,", ParseError, 1),
    ("60,nap,", ParseError, 2),
    ("60,knockout_on,lots", ParseError, 3),
    ("60,knockout_on,1.5", ValidationError, None),
])
def test_row_errors(row, cls, col):
    with pytest.raises(cls) as exc:
        io.parse_schedule_text("t_hours,event,factor\n" + row + "\n")
    assert exc.value.line == 2 and exc.value.column == col


def test_bad_header():
    with pytest.raises(ParseError) as exc:
        io.parse_schedule_text("time,event\n1,force_wake\n")
    assert exc.value.line == 1


def test_duplicate_row_rejected():
    with pytest.raises(ValidationError):
        io.parse_schedule_text("t_hours,event,factor\n60,force_wake,\n60,force_wake,\n")


def test_missing_schedule_file(tmp_path):
    with pytest.raises(OSError):
        io.parse_schedule(tmp_path / "nope.csv")


_event = st.one_of(
    st.builds(PerturbationEvent, st.just(0.0), st.sampled_from([EventKind.FORCE_WAKE,
                                                                 EventKind.FORCE_SLEEP])),
    st.builds(PerturbationEvent, st.just(0.0), st.just(EventKind.KNOCKOUT_ON),
              st.floats(0.0, 1.0)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0.001, 50.0), _event), max_size=8))
def test_schedule_round_trip(items):
    t, events = 0.0, []
    for dt, e in items:
        t += dt
        events.append(PerturbationEvent(t, e.kind, e.factor))
    assert io.parse_schedule_text(io.format_schedule(events)) == events


# ---------------------------------------------------------------- trajectories


def test_header_is_exact():
    assert io.TRAJECTORY_HEADER == ("t_hours,GABA_BFw,GABA_BFs,OX,H,ACh_BF,ACh_LDTPPT,NA,S,DA,"
                                    "AD,GABA_VLPO,R,V,state,marker")


def test_single_sample_gives_two_lines(params, tmp_path):
    run = simulate(params, SimulationConfig(t_end=0.0, transient_discard=0.0))
    path = tmp_path / "one.csv"
    io.write_trajectory_csv(run, path)
    assert len(path.read_text().splitlines()) == 2


def test_round_trip_bit_exact(default_run, tmp_path):
    path = tmp_path / "run.csv"
    io.write_trajectory_csv(default_run, path)
    back = io.read_trajectory_csv(path)
    assert back.times.tobytes() == default_run.times.tobytes()
    assert back.states.tobytes() == default_run.states.tobytes()
    assert back.markers == default_run.markers and back.behaviour == default_run.behaviour
    assert np.array_equal(back.transient, default_run.transient)
    assert back.config == default_run.config
    assert back.params_fingerprint == default_run.params_fingerprint


def test_column_order_and_vocabulary(default_run, tmp_path):
    path = tmp_path / "run.csv"
    io.write_trajectory_csv(default_run.window(50.0, 80.0), path)
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    names = list(rows[0])
    assert names[1:12] == ["GABA_BFw", "GABA_BFs", "OX", "H", "ACh_BF", "ACh_LDTPPT", "NA", "S",
                           "DA", "AD", "GABA_VLPO"]
    assert {r["state"] for r in rows} <= {"wake", "nrem", "rem"}
    assert {r["marker"] for r in rows} == {"-", "wake_init", "sleep_init"}
    first = rows[0]
    assert float(first["AD"]) == default_run.window(50.0, 80.0).column("ad")[0]


def test_descriptor_versioned(default_run, tmp_path):
    path = tmp_path / "run.csv"
    io.write_trajectory_csv(default_run.window(50.0, 51.0), path)
    desc = json.loads(io.descriptor_path(path).read_text())
    assert desc["format_version"] == io.FORMAT_VERSION
    assert desc["columns"] == list(io.TRAJECTORY_COLUMNS)


def test_reader_reports_bad_cell(default_run, tmp_path):
    text = io.format_trajectory_csv(default_run.window(50.0, 50.1)).splitlines()
    text[3] = text[3].replace(",", ",x", 1)
    with pytest.raises(ParseError) as exc:
        io.parse_trajectory_text("\n".join(text), "t.csv")
    assert exc.value.line == 4 and exc.value.column == 2


def test_reader_rejects_future_version(default_run):
    text = io.format_trajectory_csv(default_run.window(50.0, 50.1))
    with pytest.raises(ParseError):
        io.parse_trajectory_text(text, descriptor={"format_version": 99})


# ---------------------------------------------------------------- JSON


def test_json_is_deterministic(default_report, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    io.write_json(default_report, a)
    io.write_json(default_report, b)
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["wake_fraction"] == pytest.approx(default_report.wake_fraction)


def test_jsonable_complex_and_arrays():
    assert io.to_jsonable(np.array([1 + 2j, 3.0])) == [{"re": 1.0, "im": 2.0},
                                                        {"re": 3.0, "im": 0.0}]


# ---------------------------------------------------------------- plot data


def _read_plot(path):
    return np.genfromtxt(path, delimiter=",", names=True, skip_header=2)


def test_phase_plane_one_cycle_closes(default_run, default_report, tmp_path):
    wakes = [e.time for e in default_report.transitions if e.kind.value == "wake_init"]
    t0 = default_run.window(wakes[1], wakes[2]).times[0]
    one = default_run.window(t0, t0 + default_report.periods.mean)
    io.emit_plot_data(one, "phase_plane", tmp_path / "pp.csv")
    d = _read_plot(tmp_path / "pp.csv")
    gap = max(abs(d["GABA_VLPO"][0] - d["GABA_VLPO"][-1]), abs(d["AD"][0] - d["AD"][-1]))
    assert gap < 1e-2


def test_drift_identity_column_is_zero(default_report, tmp_path):
    ev = default_report.transitions
    io.emit_plot_data(phase_drift(ev, ev), "drift", tmp_path / "d.csv")
    d = _read_plot(tmp_path / "d.csv")
    assert d.size >= 3 and np.all(d["offset_hours"] == 0)


def test_rem_flat_during_wake(default_run, default_report, tmp_path):
    b = default_report.wake_bouts[1]
    io.emit_plot_data(default_run.window(b.start + 0.5, b.end - 0.5), "rem", tmp_path / "r.csv")
    assert np.abs(_read_plot(tmp_path / "r.csv")["R"]).max() < 0.5


def test_timeseries_columns(default_run, tmp_path):
    io.emit_plot_data(default_run.window(50, 60), "timeseries", tmp_path / "ts.csv")
    assert _read_plot(tmp_path / "ts.csv").dtype.names == ("t_hours", "AD", "GABA_VLPO")


def test_incompatible_kinds(default_run):
    with pytest.raises(IncompatibleKind):
        io.emit_plot_data(default_run, "drift", "x.csv")
    with pytest.raises(IncompatibleKind):
        io.emit_plot_data(DriftReport([], [], 16.0, False), "rem", "x.csv")
    with pytest.raises(IncompatibleKind):
        io.emit_plot_data(default_run, "histogram", "x.csv")


def test_plot_script_renders(default_run, tmp_path):
    pytest.importorskip("matplotlib")
    script = io.emit_plot_data(default_run.window(50, 70), "timeseries", tmp_path / "ts.csv")
    png = tmp_path / "ts.png"
    subprocess.run([sys.executable, str(script), str(png)], check=True, capture_output=True)
    assert png.stat().st_size > 0
