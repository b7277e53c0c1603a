"""Nine simulated days with the default parameters.

Prints the cycle statistics and writes the trajectory plus plot data
(AD/GABA_VLPO time series, one-cycle phase plane, REM trace) to ``out/``.

    python3 demos/default_cycle.py [outdir]
"""
import sys
import warnings
from pathlib import Path

from sleepwake import analyze_trajectory, default_parameters, io, simulate
from sleepwake.errors import NegativeConcentration

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out")
out.mkdir(exist_ok=True)

params = default_parameters()
with warnings.catch_warnings():
    # the linear fast block dips below zero; levels are read relative to thresholds
    warnings.simplefilter("ignore", NegativeConcentration)
    run = simulate(params)
report = analyze_trajectory(run)

print(f"period       {report.periods.mean:.4f} h  (cv {report.periods.cv:.1e})")
print(f"wake share   {report.wake_fraction:.3f}")
print(f"REM maxima   {report.rem_counts}")

wakes = [e.time for e in report.transitions if e.kind.value == "wake_init"]
cycle = run.window(wakes[1], wakes[1] + report.periods.mean)
first_sleep = report.sleep_bouts[0]

io.write_trajectory_csv(run, out / "default.csv")
io.emit_plot_data(run.post_transient(), "timeseries", out / "timeseries.csv")
io.emit_plot_data(cycle, "phase_plane", out / "phase_plane.csv")
io.emit_plot_data(run.window(first_sleep.start, first_sleep.end), "rem", out / "rem.csv")
print(f"wrote {out}/ (run the *_plot.py scripts to render figures)")
