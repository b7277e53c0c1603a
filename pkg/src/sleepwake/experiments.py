"""Transition detection, bout statistics, phase drift and the two perturbation protocols."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import find_peaks

from .errors import InsufficientEvents
from .integrator import (EventKind, PerturbationEvent, SimulationConfig, Trajectory,
                         default_initial_state, resume, simulate)
from .model import Marker, ModelParameters, apply_orexin_knockout
from .params import default_parameters

log = logging.getLogger(__name__)

REM_DEBOUNCE = 0.5
RECOVERY_TOLERANCE = 0.5


@dataclass(frozen=True)
class TransitionEvent:
    time: float
    kind: Marker
    value: float


class TransitionList(list):
    """List of transitions with an optional diagnostic (set when nothing crossed)."""

    diagnostic: Optional[str] = None


def find_crossings(times, diff, values=None) -> TransitionList:
    """Zero crossings of ``diff`` sampled at ``times``, linearly interpolated.

    Upward crossings are wake initialisations, downward ones sleep
    initialisations.  ``values`` (the AD column) supplies the crossing level.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(diff, dtype=float)
    v = d * 0.0 if values is None else np.asarray(values, dtype=float)
    out = TransitionList()
    if len(t) < 2:
        out.diagnostic = "fewer than two samples"
        return out
    up = (d[:-1] <= 0) & (d[1:] > 0)
    down = (d[:-1] > 0) & (d[1:] <= 0)
    for i in np.flatnonzero(up | down):
        w = -d[i] / (d[i + 1] - d[i])
        kind = Marker.WAKE_INIT if up[i] else Marker.SLEEP_INIT
        ev = TransitionEvent(float(t[i] + w * (t[i + 1] - t[i])), kind,
                             float(v[i] + w * (v[i + 1] - v[i])))
        if out and out[-1].kind == kind:
            log.info("dropping repeated %s at t=%.6g", kind.value, ev.time)
            continue
        out.append(ev)
    if not out:
        out.diagnostic = "NoTransitions: ad - gaba_vlpo never changes sign"
    return out


def detect_transitions(trajectory: Trajectory, include_transient: bool = False) -> TransitionList:
    traj = trajectory if include_transient else trajectory.post_transient()
    if len(traj) == 0:
        raise InsufficientEvents("no samples beyond the transient")
    ad = traj.column("ad")
    return find_crossings(traj.times, ad - traj.column("gaba_vlpo"), ad)


@dataclass(frozen=True)
class PeriodStats:
    periods: Tuple[float, ...]
    mean: float
    std: float
    cv: float


def _wake_times(events: Sequence[TransitionEvent]) -> np.ndarray:
    return np.array([e.time for e in events if e.kind is Marker.WAKE_INIT])


def estimate_periods(events: Sequence[TransitionEvent]) -> PeriodStats:
    """Wake-initialisation to wake-initialisation periods."""
    w = _wake_times(events)
    if len(w) < 2:
        raise InsufficientEvents(f"need at least 2 wake initialisations, got {len(w)}")
    p = np.diff(w)
    mean = float(p.mean())
    std = float(p.std())
    return PeriodStats(tuple(map(float, p)), mean, std, std / mean)


@dataclass(frozen=True)
class Bout:
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class BoutReport:
    wake_bouts: List[Bout] = field(default_factory=list)
    sleep_bouts: List[Bout] = field(default_factory=list)
    cycle_wake_fractions: List[float] = field(default_factory=list)
    periods: Optional[PeriodStats] = None
    rem_counts: List[int] = field(default_factory=list)
    wake_rem_counts: List[int] = field(default_factory=list)
    transitions: List[TransitionEvent] = field(default_factory=list)

    @property
    def wake_fraction(self) -> float:
        wake = sum(b.duration for b in self.wake_bouts)
        sleep = sum(b.duration for b in self.sleep_bouts)
        return wake / (wake + sleep) if wake + sleep > 0 else math.nan

    def summary(self) -> dict:
        def stats(xs):
            xs = np.asarray(xs, dtype=float)
            return {"n": int(len(xs)), "mean": float(xs.mean()) if len(xs) else math.nan,
                    "std": float(xs.std()) if len(xs) else math.nan}
        return {
            "wake_bout_hours": stats([b.duration for b in self.wake_bouts]),
            "sleep_bout_hours": stats([b.duration for b in self.sleep_bouts]),
            "wake_fraction": self.wake_fraction,
            "cycle_wake_fractions": list(self.cycle_wake_fractions),
            "period_hours": None if self.periods is None else {
                "mean": self.periods.mean, "std": self.periods.std, "cv": self.periods.cv,
                "n": len(self.periods.periods)},
            "rem_counts": list(self.rem_counts),
            "wake_rem_counts": list(self.wake_rem_counts),
        }

    def __eq__(self, other):
        if not isinstance(other, BoutReport):
            return NotImplemented
        return self.summary() == other.summary() and self.transitions == other.transitions


def bout_durations(events: Sequence[TransitionEvent], trajectory_end: Optional[float] = None
                   ) -> BoutReport:
    """Wake and sleep bouts between consecutive transitions; incomplete bouts are dropped.

    A cycle runs from one wake initialisation to the next, and its wake
    fraction is the share spent before the intervening sleep initialisation.
    """
    rep = BoutReport(transitions=list(events))
    for a, b in zip(events, events[1:]):
        if a.kind == b.kind:
            raise ValueError(f"events do not alternate at t={b.time}")
        if trajectory_end is not None and b.time > trajectory_end:
            break
        bout = Bout(a.time, b.time)
        (rep.wake_bouts if a.kind is Marker.WAKE_INIT else rep.sleep_bouts).append(bout)
    for wake in rep.wake_bouts:
        nxt = [s for s in rep.sleep_bouts if s.start == wake.end]
        if nxt:
            rep.cycle_wake_fractions.append(wake.duration / (wake.duration + nxt[0].duration))
    try:
        rep.periods = estimate_periods(events)
    except InsufficientEvents:
        rep.periods = None
    return rep


def count_rem_maxima(times, r, threshold: float = 0.5, debounce: float = REM_DEBOUNCE) -> int:
    """Local maxima of ``r`` above ``threshold`` separated by at least ``debounce`` hours."""
    t = np.asarray(times, dtype=float)
    r = np.asarray(r, dtype=float)
    if len(r) < 3:
        return 0
    dt = float(np.median(np.diff(t)))
    peaks, _ = find_peaks(r, height=threshold, distance=max(1, int(math.ceil(debounce / dt))))
    return int(len(peaks))


def count_rem_bouts(trajectory: Trajectory, sleep_bout, threshold: float = 0.5,
                    debounce: float = REM_DEBOUNCE) -> int:
    start, end = (sleep_bout.start, sleep_bout.end) if isinstance(sleep_bout, Bout) else sleep_bout
    if start < trajectory.times[0] - 1e-9 or end > trajectory.times[-1] + 1e-9:
        raise ValueError(f"bout [{start}, {end}] outside trajectory span")
    w = trajectory.window(start, end)
    return count_rem_maxima(w.times, w.column("r"), threshold, debounce)


def analyze_trajectory(trajectory: Trajectory, threshold: Optional[float] = None) -> BoutReport:
    """Transitions, bouts, periods and REM counts of the post-transient part."""
    thr = trajectory.config.rem_threshold if threshold is None else threshold
    events = detect_transitions(trajectory)
    rep = bout_durations(events, trajectory.times[-1])
    rep.rem_counts = [count_rem_bouts(trajectory, b, thr) for b in rep.sleep_bouts]
    rep.wake_rem_counts = [count_rem_bouts(trajectory, b, thr) for b in rep.wake_bouts]
    return rep


# ---------------------------------------------------------------- phase drift


@dataclass
class DriftReport:
    times: List[float]
    offsets: List[float]
    period: float
    recovered: bool

    @property
    def stabilized_offset(self) -> float:
        return float(np.mean(self.offsets[-3:]))


def _reduce(offset: float, period: float) -> float:
    x = offset - period * math.floor(offset / period + 0.5)   # [-P/2, P/2)
    return period / 2 if x <= -period / 2 else x


def phase_drift(perturbed: Sequence[TransitionEvent], reference: Sequence[TransitionEvent],
                after: float = -math.inf, period: Optional[float] = None) -> DriftReport:
    """Offsets of perturbed wake initialisations after ``after`` against the reference run."""
    ref = _wake_times(reference)
    pert = _wake_times(perturbed)
    pert = pert[pert > after]
    if len(pert) < 3:
        raise InsufficientEvents(f"need 3 perturbed wake initialisations after t={after}, "
                                 f"got {len(pert)}")
    if period is None:
        if len(ref) < 2:
            raise InsufficientEvents("reference has fewer than 2 wake initialisations")
        period = float(np.diff(ref).mean())
    offsets = [float(_reduce(t - ref[np.argmin(np.abs(ref - t))], period)) for t in pert]
    tail = offsets[-3:]
    recovered = bool(max(tail) - min(tail) <= RECOVERY_TOLERANCE)
    return DriftReport(list(map(float, pert)), offsets, period, recovered)


# ---------------------------------------------------------------- protocols


@dataclass
class KnockoutResult:
    factor: float
    baseline: BoutReport
    knockout: BoutReport
    period_change: float
    ox_mean_baseline: float
    ox_mean_knockout: float
    baseline_trajectory: Trajectory = field(repr=False)
    knockout_trajectory: Trajectory = field(repr=False)


def run_orexin_knockout(config: Optional[SimulationConfig] = None, factor: float = 0.2,
                        params: Optional[ModelParameters] = None,
                        initial=None) -> KnockoutResult:
    """Baseline and knockout runs from the same initial state; knockout is active throughout."""
    config = config or SimulationConfig()
    params = params or default_parameters()
    initial = initial or default_initial_state()
    ko_params = apply_orexin_knockout(params, factor)
    base = simulate(params, config, initial)
    ko = base if ko_params is params else simulate(ko_params, config, initial)
    rb, rk = analyze_trajectory(base), analyze_trajectory(ko)
    change = math.nan
    if rb.periods and rk.periods:
        change = (rk.periods.mean - rb.periods.mean) / rb.periods.mean
    ox_b = float(base.post_transient().column("ox").mean())
    ox_k = float(ko.post_transient().column("ox").mean())
    return KnockoutResult(factor, rb, rk, change, ox_b, ox_k, base, ko)


@dataclass
class ReplayResult:
    trajectory: Trajectory
    reference: Trajectory
    report: BoutReport
    drift: Optional[DriftReport]
    window_end: float
    reference_period: float
    post_periods: Tuple[float, ...] = ()
    recovery_cycle: Optional[int] = None

    @property
    def recovery_periods(self) -> Optional[PeriodStats]:
        """Period statistics from the recovery cycle onwards."""
        if self.recovery_cycle is None:
            return None
        p = np.array(self.post_periods[self.recovery_cycle:])
        return PeriodStats(tuple(map(float, p)), float(p.mean()), float(p.std()),
                           float(p.std() / p.mean()))


def perturbation_end(schedule: Sequence[PerturbationEvent]) -> float:
    return max((e.time + e.hold for e in schedule), default=-math.inf)


def recovery_cycle(periods: Sequence[float], reference_period: float,
                   tolerance: float = 0.02, min_tail: int = 3) -> Optional[int]:
    """First cycle index from which every later period agrees with the reference.

    Agreement means the tail's coefficient of variation and its relative
    mean offset from ``reference_period`` are both below ``tolerance``.
    """
    p = np.asarray(periods, dtype=float)
    for k in range(len(p) - min_tail + 1):
        tail = p[k:]
        if (tail.std() / tail.mean() < tolerance
                and abs(tail.mean() - reference_period) / reference_period < tolerance):
            return k
    return None


def replay_schedule(schedule: Sequence[PerturbationEvent], config: Optional[SimulationConfig] = None,
                    params: Optional[ModelParameters] = None, initial=None,
                    extension_periods: int = 5) -> ReplayResult:
    """Perturbed run plus unperturbed reference, extended past the last event.

    Both runs are lengthened so that ``extension_periods`` reference periods,
    plus three spare cycles for the recovery statistics, follow the end of
    the perturbation window.
    """
    config = config or SimulationConfig()
    params = params or default_parameters()
    initial = initial or default_initial_state()
    schedule = tuple(schedule)
    reference = simulate(params, config, initial)
    period = estimate_periods(detect_transitions(reference)).mean
    end = perturbation_end(schedule)
    if schedule:
        needed = math.ceil(end + (extension_periods + 3) * period)
        if needed > reference.end_time:
            reference = resume(reference, needed - reference.end_time)
    ref_events = detect_transitions(reference)
    period = estimate_periods(ref_events).mean
    traj = simulate(params, reference.config, initial, schedule)
    report = analyze_trajectory(traj)
    drift = None
    post_periods: Tuple[float, ...] = ()
    try:
        drift = phase_drift(report.transitions, ref_events, after=end, period=period)
        post_periods = tuple(map(float, np.diff(drift.times)))
    except InsufficientEvents as exc:
        log.warning("drift not computed: %s", exc)
    return ReplayResult(traj, reference, report, drift, end, period, post_periods,
                        recovery_cycle(post_periods, period))


def sleep_camp_schedule(seed: int = 0, days: int = 10, start: float = 48.0,
                        day_length: float = 24.0) -> List[PerturbationEvent]:
    """Synthetic forced wake/sleep schedule for a ten-day camp, five events per day.

    Each day carries a morning forced wake, an afternoon forced wake that
    prolongs the wake bout, a delayed forced sleep at bedtime and a night
    awakening followed by a forced return to sleep.  Times are jittered by
    a seeded generator, so the same seed always gives the same schedule.
    """
    rng = np.random.default_rng(seed)
    events = []
    for d in range(days):
        base = start + d * day_length
        morning = 7.0 + rng.uniform(-1.0, 1.0)
        afternoon = 15.0 + rng.uniform(-1.5, 1.5)
        bedtime = 22.5 + rng.uniform(0.0, 1.5)
        night = bedtime + 2.0 + rng.uniform(0.0, 1.0)
        back = night + rng.uniform(0.5, 1.0)
        for t, kind in ((morning, EventKind.FORCE_WAKE), (afternoon, EventKind.FORCE_WAKE),
                        (bedtime, EventKind.FORCE_SLEEP), (night, EventKind.FORCE_WAKE),
                        (back, EventKind.FORCE_SLEEP)):
            events.append(PerturbationEvent(round(base + t, 3), kind))
    events.sort(key=lambda e: e.time)
    return events
