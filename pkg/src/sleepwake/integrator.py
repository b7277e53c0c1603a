"""Fixed-step RK4 integration with timed perturbation events."""
from __future__ import annotations

import dataclasses
import enum
import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import AmbiguousTransition, NegativeConcentration, NonFiniteState, ScheduleOutOfRange
from .model import (
    VARIABLES, BehavioralState, Marker, ModelParameters, StateVector,
    apply_orexin_knockout, classify_state, full_rhs,
)

log = logging.getLogger(__name__)

NEGATIVE_LIMIT = -1e-3


@dataclass(frozen=True)
class SimulationConfig:
    t_start: float = 0.0
    t_end: float = 216.0
    step: float = 0.002
    transient_discard: float = 48.0
    record_stride: int = 5
    clamp_warnings: bool = True
    rem_threshold: float = 0.5

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.t_end >= self.t_start:
            raise ValueError("t_end must not precede t_start")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be an integer >= 1")
        if self.transient_discard < 0:
            raise ValueError("transient_discard must be non-negative")
        span = self.t_end - self.t_start
        if span > 0 and not self.transient_discard < span:
            raise ValueError("transient_discard must be shorter than the simulated span")
        if not self.rem_threshold > 0:
            raise ValueError("rem_threshold must be positive")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.step))

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)


class EventKind(enum.Enum):
    FORCE_WAKE = "force_wake"
    FORCE_SLEEP = "force_sleep"
    KNOCKOUT_ON = "knockout_on"
    KNOCKOUT_OFF = "knockout_off"


@dataclass(frozen=True)
class PerturbationEvent:
    """A timed intervention.

    ``hold`` (hours, force events only) keeps AD pinned after the event;
    the default 0 sets it once.
    """

    time: float
    kind: EventKind
    factor: Optional[float] = None
    hold: float = 0.0

    def __post_init__(self):
        kind = EventKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is EventKind.KNOCKOUT_ON:
            if self.factor is None or not 0.0 <= self.factor <= 1.0:
                raise ValueError("knockout_on needs a factor in [0, 1]")
        elif self.factor is not None:
            raise ValueError(f"{kind.value} carries no factor")
        if self.hold < 0 or (self.hold and kind not in (EventKind.FORCE_WAKE, EventKind.FORCE_SLEEP)):
            raise ValueError("hold must be non-negative and is only valid for force events")


def default_initial_state() -> StateVector:
    """Wake-peak corner of the phase box, fast variables at 0.1, REM displaced."""
    return StateVector(*([0.1] * 9), ad=2.0, gaba_vlpo=0.01, r=1.0, v=0.0)


@dataclass(frozen=True)
class Sample:
    time: float
    state: StateVector
    behaviour: BehavioralState
    marker: Optional[Marker]
    transient: bool


class Trajectory:
    """Immutable record of a run, sampled every ``step * record_stride`` hours.

    Besides the samples it keeps the exact integrator end point so that
    :func:`resume` continues bit-for-bit.
    """

    def __init__(self, times, states, behaviour, markers, transient, *, config, params,
                 events, origin, end_index, end_state, active_factor=None, holds=(),
                 fingerprint=None):
        self.times = _frozen(times)
        self.states = _frozen(states)
        self.behaviour = tuple(behaviour)
        self.markers = tuple(markers)
        self.transient = _frozen(np.asarray(transient, dtype=bool))
        self.config = config
        self.params = params
        self.events = tuple(events)
        self.origin = float(origin)
        self.end_index = int(end_index)
        self.end_state = _frozen(end_state)
        self.active_factor = active_factor
        self.holds = tuple(holds)
        self._fingerprint = fingerprint

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> Sample:
        return Sample(float(self.times[i]), StateVector.from_array(self.states[i]),
                      self.behaviour[i], self.markers[i], bool(self.transient[i]))

    @property
    def end_time(self) -> float:
        return self.origin + self.end_index * self.config.step

    @property
    def spacing(self) -> float:
        return self.config.step * self.config.record_stride

    @property
    def params_fingerprint(self) -> str:
        if self.params is None:
            return self._fingerprint
        return self.params.fingerprint()

    def column(self, name: str) -> np.ndarray:
        return self.states[:, VARIABLES.index(name)]

    def window(self, t0: float, t1: float) -> "Trajectory":
        """Samples with ``t0 <= t <= t1`` (metadata copied, end point unchanged)."""
        sel = np.flatnonzero((self.times >= t0) & (self.times <= t1))
        sl = slice(sel[0], sel[-1] + 1) if len(sel) else slice(0, 0)
        return self._with_samples(sl)

    def post_transient(self) -> "Trajectory":
        return self._with_samples(slice(int(np.count_nonzero(self.transient)), None))

    def _with_samples(self, sl: slice) -> "Trajectory":
        return Trajectory(self.times[sl], self.states[sl], self.behaviour[sl], self.markers[sl],
                          self.transient[sl], config=self.config, params=self.params,
                          events=self.events, origin=self.origin, end_index=self.end_index,
                          end_state=self.end_state, active_factor=self.active_factor,
                          holds=self.holds, fingerprint=self._fingerprint)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float) if not isinstance(a, np.ndarray) or a.dtype != bool else a.copy()
    a.setflags(write=False)
    return a


def _check_finite(y, t):
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        name = VARIABLES[bad] if len(y) == len(VARIABLES) else bad
        raise NonFiniteState(t, name)


def rk4_step(rhs: Callable, state, t: float, h: float):
    """One classical RK4 step of the autonomous system ``y' = rhs(y)``.

    ``t`` only labels errors.  Accepts and returns either an array or a
    :class:`StateVector`.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    as_state = isinstance(state, StateVector)
    y = state.as_array() if as_state else np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(y), dtype=float)
    _check_finite(k1, t)
    k2 = np.asarray(rhs(y + 0.5 * h * k1), dtype=float)
    _check_finite(k2, t + 0.5 * h)
    k3 = np.asarray(rhs(y + 0.5 * h * k2), dtype=float)
    _check_finite(k3, t + 0.5 * h)
    k4 = np.asarray(rhs(y + h * k3), dtype=float)
    _check_finite(k4, t + h)
    out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return StateVector.from_array(out) if as_state else out


def _index_schedule(schedule: Sequence[PerturbationEvent], origin: float, step: float,
                    first: int, last: int):
    seen = set()
    by_index = {}
    prev = -np.inf
    for ev in schedule:
        if ev.time < prev:
            raise ValueError("schedule must be sorted by time")
        prev = ev.time
        if (ev.time, ev.kind) in seen:
            raise ValueError(f"duplicate {ev.kind.value} event at t={ev.time}")
        seen.add((ev.time, ev.kind))
        lo, hi = origin + first * step, origin + last * step
        if not lo - 1e-9 <= ev.time <= hi + 1e-9:
            raise ScheduleOutOfRange(f"event {ev.kind.value} at t={ev.time} outside [{lo}, {hi}]")
        idx = min(max(int(round((ev.time - origin) / step)), first), last)
        by_index.setdefault(idx, []).append(ev)
    return by_index


def _integrate(params, config, x0, *, origin, first, n_steps, schedule, active_factor, holds):
    h = config.step
    stride = config.record_stride
    x = np.array(x0, dtype=float)
    _check_finite(x, origin + first * h)
    active = params if active_factor is None else apply_orexin_knockout(params, active_factor)
    by_index = _index_schedule(schedule, origin, h, first, first + n_steps)
    holds = list(holds)

    times, states, behaviour, markers, transient = [], [], [], [], []
    prev_diff = None
    warned = False
    forced = False
    for i in range(first, first + n_steps + 1):
        t = origin + i * h
        for ev in by_index.get(i, ()):
            if ev.kind is EventKind.FORCE_WAKE:
                x[9] = params.ad_max
                forced = True
            elif ev.kind is EventKind.FORCE_SLEEP:
                x[9] = params.ad_min
                forced = True
            elif ev.kind is EventKind.KNOCKOUT_ON:
                active_factor = ev.factor
                active = apply_orexin_knockout(params, ev.factor)
            else:
                active_factor = None
                active = params
            if ev.hold > 0:
                holds.append((i + int(round(ev.hold / h)), float(x[9])))
        if holds:
            holds = [(end, level) for end, level in holds if end >= i]
            if holds:
                x[9] = holds[-1][1]
                forced = True
        k1 = full_rhs(x, active)
        _check_finite(k1, t)
        if i % stride == 0:
            with warnings.catch_warnings():
                if forced:
                    # a jump in AD, not the flow, produced this crossing
                    warnings.simplefilter("ignore", AmbiguousTransition)
                beh, mark = classify_state(x, k1, config.rem_threshold, prev_diff)
            forced = False
            prev_diff = x[9] - x[10]
            times.append(t)
            states.append(x.copy())
            behaviour.append(beh)
            markers.append(mark)
            transient.append(t - origin < config.transient_discard)
            if config.clamp_warnings and not warned and np.min(x[:11]) < NEGATIVE_LIMIT:
                j = int(np.argmin(x[:11]))
                warnings.warn(f"{VARIABLES[j]} = {x[j]:.4g} at t={t:.4g}", NegativeConcentration,
                              stacklevel=3)
                warned = True
        if i == first + n_steps:
            break
        k2 = full_rhs(x + 0.5 * h * k1, active)
        k3 = full_rhs(x + 0.5 * h * k2, active)
        k4 = full_rhs(x + h * k3, active)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(x, t + h)
    return dict(times=times, states=states, behaviour=behaviour, markers=markers,
                transient=transient, end_state=x, active_factor=active_factor,
                holds=[hd for hd in holds if hd[0] > first + n_steps])


def simulate(params: ModelParameters, config: Optional[SimulationConfig] = None,
             initial: Optional[StateVector] = None,
             schedule: Iterable[PerturbationEvent] = ()) -> Trajectory:
    """Integrate the coupled model from ``config.t_start`` to ``config.t_end``.

    Events snap to the nearest step boundary and act before the step that
    departs from that time, so the sample recorded there already shows them.
    """
    config = config or SimulationConfig()
    initial = initial or default_initial_state()
    schedule = tuple(schedule)
    n = config.n_steps
    out = _integrate(params, config, initial.as_array(), origin=config.t_start, first=0,
                     n_steps=n, schedule=schedule, active_factor=None, holds=())
    return Trajectory(
        np.array(out["times"]), np.array(out["states"]).reshape(-1, 13), out["behaviour"],
        out["markers"], out["transient"], config=config, params=params, events=schedule,
        origin=config.t_start, end_index=n, end_state=out["end_state"],
        active_factor=out["active_factor"], holds=out["holds"])


def resume(trajectory: Trajectory, additional: float,
           schedule: Iterable[PerturbationEvent] = ()) -> Trajectory:
    """Continue ``trajectory`` for ``additional`` hours with the same config and params."""
    if len(trajectory) == 0:
        raise ValueError("cannot resume an empty trajectory")
    if additional < 0:
        raise ValueError("additional must be non-negative")
    schedule = tuple(schedule)
    cfg = trajectory.config
    n = int(round(additional / cfg.step))
    if n == 0 and not schedule:
        return trajectory
    first = trajectory.end_index
    out = _integrate(trajectory.params, cfg, trajectory.end_state, origin=trajectory.origin,
                     first=first, n_steps=n, schedule=schedule,
                     active_factor=trajectory.active_factor, holds=trajectory.holds)
    old = slice(None)
    new_times = np.array(out["times"])
    last_recorded = np.isclose(trajectory.times[-1], trajectory.end_time, rtol=0, atol=cfg.step * 1e-6)
    if last_recorded and len(new_times) and first % cfg.record_stride == 0:
        # the launch sample is re-recorded (possibly altered by events at that instant)
        old = slice(0, len(trajectory) - 1)
    # marker on the first new sample must be relative to the last kept old sample
    behaviour, markers = list(out["behaviour"]), list(out["markers"])
    states_new = np.array(out["states"]).reshape(-1, 13)
    kept_states = trajectory.states[old]
    if len(states_new) and len(kept_states):
        prev_diff = kept_states[-1, 9] - kept_states[-1, 10]
        active = trajectory.params if trajectory.active_factor is None else \
            apply_orexin_knockout(trajectory.params, trajectory.active_factor)
        beh, mark = classify_state(states_new[0], full_rhs(states_new[0], active),
                                   cfg.rem_threshold, prev_diff)
        behaviour[0], markers[0] = beh, mark
    return Trajectory(
        np.concatenate([trajectory.times[old], new_times]),
        np.concatenate([kept_states, states_new]),
        trajectory.behaviour[old] + tuple(behaviour),
        trajectory.markers[old] + tuple(markers),
        np.concatenate([trajectory.transient[old], np.array(out["transient"], dtype=bool)]),
        config=cfg.replace(t_end=trajectory.end_time + n * cfg.step), params=trajectory.params,
        events=trajectory.events + schedule, origin=trajectory.origin, end_index=first + n,
        end_state=out["end_state"], active_factor=out["active_factor"], holds=out["holds"])
