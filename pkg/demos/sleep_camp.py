"""Ten days of irregular forced wake/sleep, then free running.

Replays the seeded synthetic schedule and prints the phase offset of each
post-schedule wake onset against an unperturbed run.

    python3 demos/sleep_camp.py [seed]
"""
import sys
import warnings

from sleepwake import default_parameters
from sleepwake.errors import NegativeConcentration
from sleepwake.experiments import replay_schedule, sleep_camp_schedule

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
schedule = sleep_camp_schedule(seed)
print(f"{len(schedule)} events between {schedule[0].time:.2f} h and {schedule[-1].time:.2f} h")

with warnings.catch_warnings():
    warnings.simplefilter("ignore")   # forced jumps trip the transition and sign checks
    res = replay_schedule(schedule, None, default_parameters())

print(f"reference period {res.reference_period:.4f} h")
print("periods after the schedule: " + ", ".join(f"{p:.3f}" for p in res.post_periods))
print(f"back to the reference period from cycle {res.recovery_cycle}")
for t, o in zip(res.drift.times, res.drift.offsets):
    print(f"  wake onset {t:8.3f} h   offset {o:+.3f} h")
print(f"recovered: {res.drift.recovered}, settled offset {res.drift.stabilized_offset:+.3f} h")
