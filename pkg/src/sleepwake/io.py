"""Schedule and trajectory files, JSON reports, plot data and run metadata."""
from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
import platform
import sys
import time
from pathlib import Path
from typing import Any, Iterable, List, Optional

import numpy as np

from . import __version__
from .errors import IncompatibleKind, ParseError, ValidationError
from .experiments import DriftReport
from .integrator import EventKind, PerturbationEvent, SimulationConfig, Trajectory
from .model import BehavioralState, Marker

FORMAT_VERSION = 1

SCHEDULE_HEADER = ("t_hours", "event", "factor")
SCHEDULE_HEADER_HOLD = SCHEDULE_HEADER + ("hold",)

TRAJECTORY_COLUMNS = ("t_hours", "GABA_BFw", "GABA_BFs", "OX", "H", "ACh_BF", "ACh_LDTPPT",
                      "NA", "S", "DA", "AD", "GABA_VLPO", "R", "V", "state", "marker")
TRAJECTORY_HEADER = ",".join(TRAJECTORY_COLUMNS)

PLOT_KINDS = ("timeseries", "phase_plane", "rem", "drift")


# ---------------------------------------------------------------- schedules


def _data_lines(text: str):
    """(line number, content) for lines that are neither blank nor comments."""
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield n, line


def parse_schedule_text(text: str, source: str = "<string>") -> List[PerturbationEvent]:
    lines = list(_data_lines(text))
    if not lines:
        raise ParseError("missing header row", source, 1)
    n, header = lines[0]
    cols = tuple(c.strip() for c in header.split(","))
    if cols not in (SCHEDULE_HEADER, SCHEDULE_HEADER_HOLD):
        raise ParseError(f"header must be {','.join(SCHEDULE_HEADER)}, got {header!r}", source, n)
    events: List[PerturbationEvent] = []
    seen = set()
    for n, line in lines[1:]:
        fields = [f.strip() for f in next(csv.reader([line]))]
        if not 2 <= len(fields) <= len(cols):
            raise ParseError(f"expected {len(cols)} fields, got {len(fields)}", source, n)
        fields += [""] * (len(cols) - len(fields))
        try:
            t = float(fields[0])
        except ValueError:
            raise ParseError(f"bad time {fields[0]!r}", source, n, 1) from None
        if not math.isfinite(t):
            raise ParseError(f"time must be finite, got {fields[0]!r}", source, n, 1)
        try:
            kind = EventKind(fields[1])
        except ValueError:
            raise ParseError(f"unknown event {fields[1]!r}", source, n, 2) from None
        factor = None
        if fields[2]:
            try:
                factor = float(fields[2])
            except ValueError:
                raise ParseError(f"bad factor {fields[2]!r}", source, n, 3) from None
        hold = 0.0
        if len(cols) == 4 and fields[3]:
            try:
                hold = float(fields[3])
            except ValueError:
                raise ParseError(f"bad hold {fields[3]!r}", source, n, 4) from None
        if kind is EventKind.KNOCKOUT_ON and factor is None:
            raise ValidationError("knockout_on requires a factor", source, n, 3)
        if kind is not EventKind.KNOCKOUT_ON and factor is not None:
            raise ValidationError(f"{kind.value} takes no factor", source, n, 3)
        if events and t < events[-1].time:
            raise ValidationError(f"time {t} is earlier than the previous row ({events[-1].time})",
                                  source, n, 1)
        if (t, kind) in seen:
            raise ValidationError(f"duplicate {kind.value} at t={t}", source, n)
        seen.add((t, kind))
        try:
            events.append(PerturbationEvent(t, kind, factor, hold))
        except ValueError as exc:
            raise ValidationError(str(exc), source, n) from None
    return events


def parse_schedule(path) -> List[PerturbationEvent]:
    path = Path(path)
    return parse_schedule_text(path.read_text(), str(path))


def format_schedule(events: Iterable[PerturbationEvent]) -> str:
    events = list(events)
    with_hold = any(e.hold for e in events)
    out = io.StringIO()
    out.write(f"# format_version: {FORMAT_VERSION}\n")
    out.write(",".join(SCHEDULE_HEADER_HOLD if with_hold else SCHEDULE_HEADER) + "\n")
    for e in events:
        row = [repr(float(e.time)), e.kind.value, "" if e.factor is None else repr(float(e.factor))]
        if with_hold:
            row.append(repr(float(e.hold)) if e.hold else "")
        out.write(",".join(row) + "\n")
    return out.getvalue()


def write_schedule(events, path) -> None:
    Path(path).write_text(format_schedule(events))


# ---------------------------------------------------------------- trajectories


def _config_dict(config: SimulationConfig) -> dict:
    return dataclasses.asdict(config)


def descriptor_path(path) -> Path:
    """Companion file holding the CSV's format version and run description."""
    path = Path(path)
    return path.with_name(path.name + ".info.json")


def trajectory_descriptor(trajectory: Trajectory) -> dict:
    return {"format_version": FORMAT_VERSION, "config": _config_dict(trajectory.config),
            "origin": trajectory.origin, "params_fingerprint": trajectory.params_fingerprint,
            "events": to_jsonable(list(trajectory.events)), "columns": list(TRAJECTORY_COLUMNS)}


def format_trajectory_csv(trajectory: Trajectory) -> str:
    """Header plus one row per sample, floats in shortest round-trip form."""
    out = io.StringIO()
    out.write(TRAJECTORY_HEADER + "\n")
    for t, x, beh, mark in zip(trajectory.times.tolist(), trajectory.states.tolist(),
                               trajectory.behaviour, trajectory.markers):
        fields = [repr(t)] + [repr(v) for v in x]
        fields += [beh.value, "-" if mark is None else mark.value]
        out.write(",".join(fields) + "\n")
    return out.getvalue()


def write_trajectory_csv(trajectory: Trajectory, path) -> None:
    path = Path(path)
    path.write_text(format_trajectory_csv(trajectory))
    descriptor_path(path).write_text(
        json.dumps(trajectory_descriptor(trajectory), indent=2, sort_keys=True) + "\n")


def parse_trajectory_text(text: str, source: str = "<string>",
                          descriptor: Optional[dict] = None) -> Trajectory:
    """Rebuild a trajectory; without a descriptor the default config is assumed."""
    meta = descriptor or {}
    rows = []
    header_seen = False
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != TRAJECTORY_HEADER:
                raise ParseError("unexpected trajectory header", source, n)
            header_seen = True
            continue
        fields = line.split(",")
        if len(fields) != len(TRAJECTORY_COLUMNS):
            raise ParseError(f"expected {len(TRAJECTORY_COLUMNS)} fields, got {len(fields)}",
                             source, n)
        nums = []
        for col, f in enumerate(fields[:14], start=1):
            try:
                nums.append(float(f))
            except ValueError:
                raise ParseError(f"bad number {f!r} in column {TRAJECTORY_COLUMNS[col - 1]}",
                                 source, n, col) from None
        try:
            beh = BehavioralState(fields[14])
        except ValueError:
            raise ParseError(f"unknown state {fields[14]!r}", source, n, 15) from None
        try:
            mark = None if fields[15] == "-" else Marker(fields[15])
        except ValueError:
            raise ParseError(f"unknown marker {fields[15]!r}", source, n, 16) from None
        rows.append((nums, beh, mark))
    if not header_seen:
        raise ParseError("missing trajectory header", source)
    if meta.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {meta['format_version']}", source)
    try:
        config = SimulationConfig(**meta["config"]) if "config" in meta else SimulationConfig()
        events = [PerturbationEvent(e["time"], e["kind"], e["factor"], e.get("hold", 0.0))
                  for e in meta.get("events", [])]
    except (ValueError, TypeError, KeyError) as exc:
        raise ParseError(f"bad descriptor: {exc}", source) from None
    origin = float(meta.get("origin", config.t_start))
    times = np.array([r[0][0] for r in rows])
    states = np.array([r[0][1:] for r in rows]).reshape(-1, 13)
    end_index = int(round((times[-1] - origin) / config.step)) if len(rows) else 0
    return Trajectory(times, states, [r[1] for r in rows], [r[2] for r in rows],
                      times - origin < config.transient_discard, config=config, params=None,
                      events=events, origin=origin, end_index=end_index,
                      end_state=states[-1] if len(rows) else np.zeros(13),
                      fingerprint=meta.get("params_fingerprint"))


def read_trajectory_csv(path) -> Trajectory:
    path = Path(path)
    desc = descriptor_path(path)
    descriptor = None
    if desc.exists():
        try:
            descriptor = json.loads(desc.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad descriptor: {exc.msg}", str(desc), exc.lineno, exc.colno) from None
    return parse_trajectory_text(path.read_text(), str(path), descriptor)


# ---------------------------------------------------------------- JSON


def to_jsonable(obj: Any) -> Any:
    """Plain JSON structure for the package's report types."""
    if isinstance(obj, (str, bool)) or obj is None:
        return obj
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Trajectory):
        return {"samples": len(obj), "t0": float(obj.times[0]) if len(obj) else None,
                "t1": float(obj.times[-1]) if len(obj) else None,
                "params_fingerprint": obj.params_fingerprint}
    if hasattr(obj, "summary") and callable(obj.summary):
        return to_jsonable(obj.summary())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
               if f.repr}
        for prop in ("trace", "determinant", "stabilized_offset", "recovery_periods"):
            if hasattr(type(obj), prop) and isinstance(getattr(type(obj), prop), property):
                out[prop] = to_jsonable(getattr(obj, prop))
        return out
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "items"):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_metadata(path, command: str, argv, resolved: dict) -> None:
    """Sidecar with the resolved configuration; the only file carrying a timestamp."""
    meta = {
        "format_version": FORMAT_VERSION,
        "command": command,
        "argv": list(argv),
        "resolved": to_jsonable(resolved),
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "created_unix": time.time(),
    }
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- plot data

_SCRIPT = '''"""Render {title} from {data_name}."""
import sys
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
data = np.genfromtxt(here / "{data_name}", delimiter=",", names=True, skip_header=2)
fig, ax = plt.subplots(figsize=(8, 4.5))
{body}
ax.set_title("{title}")
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else str(here / "{png_name}")
fig.savefig(out, dpi=150)
print(out)
'''

_BODIES = {
    "timeseries": ('t_hours,AD,GABA_VLPO', "AD and GABA_VLPO over time",
                   'ax.plot(data["t_hours"], data["AD"], label="AD")\n'
                   'ax.plot(data["t_hours"], data["GABA_VLPO"], label="GABA_VLPO")\n'
                   'ax.set_xlabel("time (h)")\nax.set_ylabel("level")\nax.legend()'),
    "phase_plane": ('GABA_VLPO,AD', "GABA_VLPO / AD phase plane",
                    'ax.plot(data["GABA_VLPO"], data["AD"])\n'
                    'ax.set_xlabel("GABA_VLPO")\nax.set_ylabel("AD")'),
    "rem": ('t_hours,R', "REM oscillator position",
            'ax.plot(data["t_hours"], data["R"])\n'
            'ax.set_xlabel("time (h)")\nax.set_ylabel("R")'),
    "drift": ('cycle,t_hours,offset_hours', "Phase offset per cycle",
              'ax.plot(data["cycle"], data["offset_hours"], "o-")\n'
              'ax.axhline(0, color="grey", lw=0.5)\n'
              'ax.set_xlabel("cycle after perturbation")\nax.set_ylabel("offset (h)")'),
}


def plot_rows(obj, kind: str) -> List[tuple]:
    if kind not in PLOT_KINDS:
        raise IncompatibleKind(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    if kind == "drift":
        if not isinstance(obj, DriftReport):
            raise IncompatibleKind("kind 'drift' needs a DriftReport")
        return [(i, t, o) for i, (t, o) in enumerate(zip(obj.times, obj.offsets))]
    if not isinstance(obj, Trajectory):
        raise IncompatibleKind(f"kind {kind!r} needs a Trajectory")
    t = obj.times
    if kind == "timeseries":
        return list(zip(t, obj.column("ad"), obj.column("gaba_vlpo")))
    if kind == "phase_plane":
        return list(zip(obj.column("gaba_vlpo"), obj.column("ad")))
    return list(zip(t, obj.column("r")))


def emit_plot_data(obj, kind: str, path) -> Path:
    """Write ``path`` (CSV data) and a matplotlib script next to it; returns the script path."""
    rows = plot_rows(obj, kind)
    header, title, body = _BODIES[kind]
    path = Path(path)
    lines = [f"# format_version: {FORMAT_VERSION}", f"# kind: {kind}", header]
    lines += [",".join(repr(float(v)) if not isinstance(v, (int, np.integer)) else str(v)
                       for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    script = path.with_name(path.stem + "_plot.py")
    script.write_text(_SCRIPT.format(title=title, data_name=path.name,
                                     png_name=path.stem + ".png", body=body))
    return script
