"""Coefficient tables, parameter validation and the eigenvalue-constrained search."""
from __future__ import annotations

import configparser
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .errors import ParseError, SearchExhausted
from .model import ModelParameters

log = logging.getLogger(__name__)

FORMAT_VERSION = 1

# Published coefficient values (uptake constants, slow rates, REM constants, c1..c61).
PUBLISHED_COEFFICIENTS: Dict[str, float] = {
    "ga1": 1.0, "hnet": 0.457, "hsert": 0.463, "hdat": 1.22,
    "k1": 0.49, "k2": 0.1, "k3": 0.3, "k4": 0.15, "mu": 0.3,
    "alpha": 1.0, "gamma": 8.0,
    "c1": 0.75709, "c2": 0.28014, "c3": 0.61048, "c4": 0.76636, "c5": 0.32431,
    "c6": 0.83153, "c7": 0.03471, "c8": 0.01, "c9": 0.19577, "c10": 0.79157,
    "c11": 0.97026, "c12": -1.0, "c13": 0.0, "c14": 0.36341, "c15": 0.70633,
    "c16": 0.1, "c17": 0.97643, "c18": 0.56740, "c19": 0.91859, "c20": 0.50364,
    "c21": 0.23758, "c22": 0.1, "c23": 1.0, "c24": 0.0, "c25": 0.92037,
    "c26": 0.04185, "c27": 0.10973, "c28": 0.32943, "c29": 0.57879, "c30": 1.0,
    "c31": 0.02091, "c32": 0.12648, "c33": 0.23472, "c34": 0.57122, "c35": 0.02332,
    "c36": 1.0, "c37": 0.61305, "c38": 0.06864, "c39": 0.08638, "c40": 0.1,
    "c41": 0.543, "c42": 0.0, "c43": 0.13822, "c44": 0.35956, "c45": 0.11839,
    "c46": 0.13753, "c47": 0.1, "c48": 0.537, "c49": 0.0, "c50": 0.67749,
    "c51": 0.53609, "c52": 0.36464, "c53": 0.59591, "c54": 0.75091, "c55": 0.1,
    "c56": 0.22, "c57": 1e-5, "c58": 1e-5, "c59": 1e-5, "c60": 1e-5, "c61": 1e-5,
}

# Constants the coefficient table does not list.
MODEL_CONSTANTS: Dict[str, float] = {
    "r0sq": 1.3, "ad_max": 2.0, "ad_min": 0.01, "gaba_max": 2.0, "gaba_min": 0.01,
    "time_scale": 1.0,
}

PUBLISHED_VALUES: Dict[str, float] = {**PUBLISHED_COEFFICIENTS, **MODEL_CONSTANTS}
KEYS: Tuple[str, ...] = tuple(PUBLISHED_VALUES)
C_KEYS: Tuple[str, ...] = tuple(f"c{i}" for i in range(1, 62))
SENTINELS = frozenset({"c12"})

# Rows 1-9 of the linearised system, column order GABA_BFw ... DA, AD, GABA_VLPO.
FAST_LAYOUT: Tuple[Tuple[str, ...], ...] = (
    ("-c1-ga1", "0", "c2", "0", "c3", "0", "0", "0", "0", "c4", "0"),
    ("0", "-c5-ga1", "0", "0", "0", "0", "-c6", "0", "0", "-c7", "c8"),
    ("0", "-c9", "c10-c11", "0", "0", "c12", "c13-c14", "-c15", "0", "c16", "-c17"),
    ("0", "0", "c18", "c19-c20", "c21", "0", "c22", "0", "0", "c23", "-c24"),
    ("0", "-c25", "c26", "c27", "-c28", "0", "0", "-c29", "0", "c30", "0"),
    ("0", "0", "c31", "c32", "0", "-c33", "-c34", "-c35", "0", "c36", "0"),
    ("0", "0", "c37", "0", "c38", "0", "-c39-c40-hnet", "0", "0", "c41", "-c42"),
    ("0", "0", "c43", "c44", "0", "0", "c45", "-c46-c47-hsert", "0", "c48", "-c49"),
    ("0", "0", "c50", "0", "0", "c51", "-c52", "c53", "-c54-hdat", "c55", "-c56"),
)
_TERM = re.compile(r"([+-]?)([a-z]+\d*)")


def _terms(expr: str):
    if expr == "0":
        return []
    return [(-1.0 if sign == "-" else 1.0, name) for sign, name in _TERM.findall(expr)]


FAST_TERMS = tuple(tuple(_terms(e) for e in row) for row in FAST_LAYOUT)
FAST_KEYS = tuple(sorted({name for row in FAST_TERMS for e in row for _, name in e
                          if name.startswith("c")}, key=lambda k: int(k[1:])))

# The published values make the fast block unstable (max Re = +0.351).  The
# defaults re-draw, with the seeded search below, the OX and H self-terms
# (the only "excitation minus removal" diagonals) and the ACh_LDT/PPT -> OX
# coupling c12, whose published -1 is a placeholder for a production term.
STABILIZATION_KEYS = ("c10", "c11", "c12", "c19", "c20")
STABILIZATION_SEED = 0
STABILIZATION_THRESHOLD = -0.05
STABILIZED_VALUES: Dict[str, float] = {
    "c10": 0.17566, "c11": 0.86318, "c12": 0.54146, "c19": 0.29971, "c20": 0.42269,
}


@dataclass(frozen=True)
class CoefficientTable:
    """Named coefficient values with a provenance tag per entry."""

    values: Mapping[str, float]
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.values) - set(KEYS)
        if unknown:
            raise KeyError(f"unknown coefficient(s): {', '.join(sorted(unknown))}")
        object.__setattr__(self, "values", {k: float(self.values.get(k, PUBLISHED_VALUES[k]))
                                            for k in KEYS})
        prov = {k: self.provenance.get(k, "published") for k in KEYS}
        object.__setattr__(self, "provenance", prov)

    @classmethod
    def published(cls) -> "CoefficientTable":
        return cls(dict(PUBLISHED_VALUES))

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def updated(self, changes: Mapping[str, float], provenance: str = "user") -> "CoefficientTable":
        values = dict(self.values)
        values.update(changes)
        prov = dict(self.provenance)
        prov.update({k: provenance for k in changes})
        return CoefficientTable(values, prov)


def assemble_fast_matrix(values: Mapping[str, float]) -> np.ndarray:
    m = np.zeros((9, 11))
    for i, row in enumerate(FAST_TERMS):
        for j, terms in enumerate(row):
            total = 0.0
            for sign, name in terms:
                total += sign * values[name]
            m[i, j] = total
    return m


def build_parameters(table: CoefficientTable) -> ModelParameters:
    v = table.values
    return ModelParameters(
        k1=v["k1"], k2=v["k2"], k3=v["k3"], k4=v["k4"], mu=v["mu"],
        a1=v["c57"], a2=v["c58"], a3=v["c59"], a4=v["c60"], a5=v["c61"],
        fast_matrix=assemble_fast_matrix(v),
        ga1=v["ga1"], hnet=v["hnet"], hsert=v["hsert"], hdat=v["hdat"],
        alpha=v["alpha"], gamma=v["gamma"], r0sq=v["r0sq"],
        ad_max=v["ad_max"], ad_min=v["ad_min"],
        gaba_max=v["gaba_max"], gaba_min=v["gaba_min"],
        time_scale=v["time_scale"],
        coefficients={k: v[k] for k in C_KEYS},
    )


def published_table() -> CoefficientTable:
    return CoefficientTable.published()


def default_table() -> CoefficientTable:
    return CoefficientTable.published().updated(STABILIZED_VALUES, provenance="searched")


def published_parameters() -> ModelParameters:
    """Parameters exactly as published (fast block not stable)."""
    return build_parameters(published_table())


def default_parameters() -> ModelParameters:
    """Published values with the re-drawn OX/H coefficients from the seeded search."""
    return build_parameters(default_table())


def fast_block_max_real(matrix) -> float:
    return float(np.max(np.linalg.eigvals(np.asarray(matrix)[:, :9]).real))


@dataclass(frozen=True)
class Violation:
    key: str
    message: str
    fatal: bool = True

    def __str__(self):
        return self.message if self.fatal else f"{self.message} (advisory)"


def validate(params: ModelParameters, epsilon_window=(0.29, 0.32)) -> List[Violation]:
    """List every invariant ``params`` breaks; empty means valid."""
    out: List[Violation] = []
    for key in ("k1", "k2", "k3", "k4", "mu"):
        value = getattr(params, key)
        if not value > 0:
            out.append(Violation(key, f"{key} must be positive"))
    for i, a in enumerate(params.epsilon_weights, start=1):
        if not 0.0 <= a <= 1e-3:
            out.append(Violation(f"a{i}", f"a{i} must lie in [0, 1e-3]"))
    if not 8.0 <= params.gamma <= 16.0:
        out.append(Violation("gamma", "gamma must lie in [8, 16]"))
    for key in ("r0sq", "alpha"):
        if not getattr(params, key) > 0:
            out.append(Violation(key, f"{key} must be positive"))
    if not params.ad_min < params.ad_max:
        out.append(Violation("ad_min", "ad_min must be below ad_max"))
    if not params.gaba_min < params.gaba_max:
        out.append(Violation("gaba_min", "gaba_min must be below gaba_max"))
    if not params.time_scale > 0:
        out.append(Violation("time_scale", "time_scale must be positive"))
    m = params.fast_matrix
    if not np.all(np.isfinite(m)):
        out.append(Violation("fast_matrix", "fast_matrix has non-finite entries"))
    elif np.max(np.abs(m)) > 3.0:
        i, j = np.unravel_index(np.argmax(np.abs(m)), m.shape)
        out.append(Violation("fast_matrix", f"fast_matrix[{i}][{j}] exceeds 3 in magnitude"))
    for key, value in params.coefficients.items():
        lo = -1.0 if key in SENTINELS else 0.0
        if not lo <= value <= 1.0:
            out.append(Violation(key, f"{key} must lie in [{lo:g}, 1]"))
    lo, hi = epsilon_window
    if not lo < params.mu <= hi:
        out.append(Violation("mu", f"baseline epsilon outside ({lo:g}, {hi:g}]", fatal=False))
    if np.all(np.isfinite(m)):
        worst = fast_block_max_real(m)
        if worst >= 0:
            out.append(Violation("fast_matrix",
                                 f"fast block not stable (max Re = {worst:.4g})", fatal=False))
    return out


# ---------------------------------------------------------------- search


@dataclass(frozen=True)
class SearchConstraints:
    """Bounds per coefficient plus the acceptance threshold.

    Entries missing from ``bounds`` are pinned to their ``base`` value.
    The predicate only involves the 9x9 fast block, which is linear and so
    independent of where the slow variables are frozen.
    """

    bounds: Mapping[str, Tuple[float, float]]
    max_real_part: float = 0.0
    epsilon_window: Tuple[float, float] = (0.29, 0.32)
    max_iterations: int = 10_000
    seed: int = 0
    base: CoefficientTable = field(default_factory=CoefficientTable.published)
    decimals: Optional[int] = 5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for key, (lo, hi) in self.bounds.items():
            if key not in KEYS:
                raise KeyError(f"unknown coefficient {key!r}")
            if not lo <= hi:
                raise ValueError(f"empty bounds for {key}: [{lo}, {hi}]")


@dataclass
class SearchResult:
    table: CoefficientTable
    accepted: bool
    iterations: int
    max_real_part: float
    log: List[Tuple[int, float]]


def published_bounds(keys=FAST_KEYS) -> Dict[str, Tuple[float, float]]:
    """Bounds pinning every key to its published value."""
    return {k: (PUBLISHED_VALUES[k], PUBLISHED_VALUES[k]) for k in keys}


def stabilization_constraints(seed: int = STABILIZATION_SEED,
                              threshold: float = STABILIZATION_THRESHOLD,
                              max_iterations: int = 10_000) -> SearchConstraints:
    """Published values pinned, the re-drawn coefficients free in [0, 1]."""
    bounds = published_bounds()
    bounds.update({k: (0.0, 1.0) for k in STABILIZATION_KEYS})
    return SearchConstraints(bounds=bounds, max_real_part=threshold,
                             seed=seed, max_iterations=max_iterations)


def search_coefficients(constraints: SearchConstraints) -> SearchResult:
    """Seeded uniform rejection search for a fast block with max Re(lambda) below threshold.

    Returns the first accepted candidate.  On exhaustion raises
    :class:`SearchExhausted` carrying the best candidate seen.
    """
    rng = np.random.default_rng(constraints.seed)
    keys = sorted(constraints.bounds, key=KEYS.index)
    base = dict(constraints.base.values)
    best: Optional[Tuple[float, Dict[str, float]]] = None
    history: List[Tuple[int, float]] = []
    for it in range(1, constraints.max_iterations + 1):
        draw = {}
        for key in keys:
            lo, hi = constraints.bounds[key]
            value = lo if lo == hi else float(rng.uniform(lo, hi))
            if constraints.decimals is not None and lo != hi:
                value = min(max(round(value, constraints.decimals), lo), hi)
            draw[key] = value
        values = {**base, **draw}
        worst = fast_block_max_real(assemble_fast_matrix(values))
        history.append((it, worst))
        if best is None or worst < best[0]:
            best = (worst, draw)
        if worst < constraints.max_real_part:
            table = constraints.base.updated(draw, provenance="searched")
            log.info("search accepted candidate %d (max Re = %.5g)", it, worst)
            return SearchResult(table, True, it, worst, history)
    worst, draw = best
    result = SearchResult(constraints.base.updated(draw, provenance="searched"),
                          False, constraints.max_iterations, worst, history)
    raise SearchExhausted(result)


# ---------------------------------------------------------------- files


def format_parameter_file(table: CoefficientTable) -> str:
    lines = ["# sleepwake parameter file", "[meta]", f"format_version = {FORMAT_VERSION}",
             "", "[parameters]"]
    lines += [f"{k} = {table.values[k]!r}" for k in KEYS]
    lines += ["", "[provenance]"]
    lines += [f"{k} = {table.provenance[k]}" for k in KEYS]
    return "\n".join(lines) + "\n"


def write_parameter_file(table: CoefficientTable, path) -> None:
    Path(path).write_text(format_parameter_file(table))


def parse_parameter_text(text: str, source: str = "<string>") -> CoefficientTable:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(str(exc), path=source) from exc
    unknown_sections = set(cp.sections()) - {"meta", "parameters", "provenance"}
    if unknown_sections:
        raise ParseError(f"unknown section(s): {', '.join(sorted(unknown_sections))}", path=source)
    if cp.has_section("meta"):
        version = cp["meta"].get("format_version", str(FORMAT_VERSION))
        if version.strip() != str(FORMAT_VERSION):
            raise ParseError(f"unsupported format_version {version!r}", path=source)
    if not cp.has_section("parameters"):
        raise ParseError("missing [parameters] section", path=source)
    values: Dict[str, float] = {}
    for key, raw in cp["parameters"].items():
        if key not in KEYS:
            raise ParseError(f"unknown parameter key {key!r}", path=source)
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"parameter {key!r}: not a number: {raw!r}", path=source) from None
        if not math.isfinite(value):
            raise ParseError(f"parameter {key!r}: non-finite value", path=source)
        values[key] = value
    missing = [k for k in KEYS if k not in values]
    if missing:
        log.info("%s: %d key(s) missing, using defaults: %s", source, len(missing), ", ".join(missing))
    defaults = default_table()
    merged = {**defaults.values, **values}
    provenance = {k: ("user" if k in values else defaults.provenance[k]) for k in KEYS}
    if cp.has_section("provenance"):
        for key, tag in cp["provenance"].items():
            if key not in KEYS:
                raise ParseError(f"unknown provenance key {key!r}", path=source)
            if key in values:
                provenance[key] = tag.strip()
    return CoefficientTable(merged, provenance)


def read_parameter_file(path) -> CoefficientTable:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read parameter file: {exc.strerror}", path=str(path)) from exc
    return parse_parameter_text(text, source=str(path))
