"""State space, parameters and right-hand sides of the sleep/wake model.

The model couples three blocks:

* a linear *fast* block of nine neurotransmitter concentrations driven by
  adenosine (AD) and VLPO GABA,
* a two-variable *slow* oscillator in (AD, GABA_VLPO) whose quadratic
  term moves mass from AD to GABA_VLPO at the same rate,
* a Lienard-type *REM* oscillator (position ``r``, velocity ``v``) that is
  damped while awake and self-excited while asleep.

Time is measured in hours.
"""
from __future__ import annotations

import dataclasses
import enum
import hashlib
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional, Tuple

import numpy as np

from .errors import AmbiguousTransition, InvalidFactor

#: Concentration fields in linearisation order (GABA_BFw ... DA, AD, GABA_VLPO).
CONCENTRATIONS = (
    "gaba_bfw", "gaba_bfs", "ox", "h", "ach_bf", "ach_ldtppt",
    "na", "s", "da", "ad", "gaba_vlpo",
)
FAST_VARIABLES = CONCENTRATIONS[:9]
VARIABLES = CONCENTRATIONS + ("r", "v")
INDEX = {name: i for i, name in enumerate(VARIABLES)}

# columns of the fast variables that lower epsilon, in a1..a5 order
EPSILON_COLUMNS = (INDEX["ach_bf"], INDEX["ach_ldtppt"], INDEX["na"], INDEX["s"], INDEX["da"])

# production sub-coefficients of the OX row, keyed by the donor column
OX_PRODUCTION = (
    ("c10", INDEX["ox"]),
    ("c12", INDEX["ach_ldtppt"]),
    ("c13", INDEX["na"]),
    ("c16", INDEX["ad"]),
)


@dataclass(frozen=True)
class StateVector:
    """The 13 dynamic variables at one instant."""

    gaba_bfw: float = 0.0
    gaba_bfs: float = 0.0
    ox: float = 0.0
    h: float = 0.0
    ach_bf: float = 0.0
    ach_ldtppt: float = 0.0
    na: float = 0.0
    s: float = 0.0
    da: float = 0.0
    ad: float = 0.0
    gaba_vlpo: float = 0.0
    r: float = 0.0
    v: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in VARIABLES], dtype=float)

    @classmethod
    def from_array(cls, x) -> "StateVector":
        x = np.asarray(x, dtype=float)
        if x.shape != (len(VARIABLES),):
            raise ValueError(f"expected {len(VARIABLES)} components, got shape {x.shape}")
        return cls(*(float(xi) for xi in x))

    def replace(self, **changes) -> "StateVector":
        return dataclasses.replace(self, **changes)

    @property
    def concentrations(self) -> np.ndarray:
        return self.as_array()[:11]


@dataclass(frozen=True, eq=False)
class ModelParameters:
    """All rate constants of the coupled model.

    ``fast_matrix`` is the 9x11 signed coefficient array of the fast block
    (uptake constants already folded into the diagonal).  ``coefficients``
    keeps the raw c-values it was assembled from, which the orexin knockout
    needs to separate production from removal.
    """

    k1: float
    k2: float
    k3: float
    k4: float
    mu: float
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    fast_matrix: np.ndarray
    ga1: float = 1.0
    hnet: float = 0.457
    hsert: float = 0.463
    hdat: float = 1.22
    alpha: float = 1.0
    gamma: float = 8.0
    r0sq: float = 1.3
    ad_max: float = 2.0
    ad_min: float = 0.01
    gaba_max: float = 2.0
    gaba_min: float = 0.01
    time_scale: float = 1.0
    coefficients: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.fast_matrix, dtype=float)
        if m.shape != (9, 11):
            raise ValueError(f"fast_matrix must be 9x11, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "fast_matrix", m)
        object.__setattr__(self, "coefficients", MappingProxyType(dict(self.coefficients)))

    @property
    def epsilon_weights(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3, self.a4, self.a5])

    def replace(self, **changes) -> "ModelParameters":
        return dataclasses.replace(self, **changes)

    def _key(self):
        scalars = tuple(getattr(self, f.name) for f in dataclasses.fields(self)
                        if f.name not in ("fast_matrix", "coefficients"))
        return scalars, self.fast_matrix.tobytes(), tuple(sorted(self.coefficients.items()))

    def __eq__(self, other):
        if not isinstance(other, ModelParameters):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def fingerprint(self) -> str:
        """Short stable digest identifying this parameter set."""
        return hashlib.sha256(repr(self._key()).encode()).hexdigest()[:16]


class BehavioralState(enum.Enum):
    WAKE = "wake"
    NREM = "nrem"
    REM = "rem"


class Marker(enum.Enum):
    WAKE_INIT = "wake_init"
    SLEEP_INIT = "sleep_init"


def _as_array(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.as_array()
    return np.asarray(state, dtype=float)


def eval_epsilon(state, params: ModelParameters) -> float:
    """Baseline GABA_VLPO loss ``mu`` lowered by the five wake-active transmitters."""
    x = _as_array(state)
    return params.mu - (params.a1 * x[4] + params.a2 * x[5] + params.a3 * x[6]
                        + params.a4 * x[7] + params.a5 * x[8])


def slow_rhs(state, params: ModelParameters, epsilon: float) -> Tuple[float, float]:
    x = _as_array(state)
    ad, g = float(x[9]), float(x[10])
    transfer = g * g * ad
    d_ad = params.k1 - params.k2 * ad - transfer
    d_gaba = -epsilon - params.k3 * g + params.k4 * ad + transfer
    return d_ad, d_gaba


def fast_rhs(state, params: ModelParameters) -> np.ndarray:
    return params.fast_matrix @ _as_array(state)[:11]


def rem_rhs(r, v, ad, gaba_vlpo, d_ad, params: ModelParameters) -> Tuple[float, float]:
    """REM oscillator; ``d_ad`` must be the analytic AD derivative at the same state."""
    damping = 2.0 * ((gaba_vlpo - ad) * (r * r - params.r0sq) + params.alpha * d_ad)
    return v, -damping * v - (params.gamma + d_ad * d_ad) * r


def full_rhs(state, params: ModelParameters) -> np.ndarray:
    """13-component derivative: fast block, slow block, REM block."""
    x = _as_array(state)
    (ach_bf, ach_ldt, na, s, da), (ad, g, r, v) = x[4:9].tolist(), x[9:13].tolist()
    eps = params.mu - (params.a1 * ach_bf + params.a2 * ach_ldt + params.a3 * na
                       + params.a4 * s + params.a5 * da)
    transfer = g * g * ad
    d_ad = params.k1 - params.k2 * ad - transfer
    d_g = -eps - params.k3 * g + params.k4 * ad + transfer
    out = np.empty(13)
    out[:9] = params.fast_matrix @ x[:11]
    out[9] = d_ad
    out[10] = d_g
    out[11] = v
    out[12] = (-2.0 * ((g - ad) * (r * r - params.r0sq) + params.alpha * d_ad) * v
               - (params.gamma + d_ad * d_ad) * r)
    if params.time_scale != 1.0:
        out *= params.time_scale
    return out


def classify_state(
    state,
    d_state,
    rem_threshold: float = 0.5,
    previous_diff: Optional[float] = None,
) -> Tuple[BehavioralState, Optional[Marker]]:
    """Behavioural state at one sample, plus a transition marker if the sign
    of ``ad - gaba_vlpo`` changed since the sample whose difference was
    ``previous_diff``.

    Wake iff AD > GABA_VLPO; asleep, REM iff ``|r| > rem_threshold``.
    """
    if rem_threshold <= 0:
        raise ValueError("rem_threshold must be positive")
    x = _as_array(state)
    dx = _as_array(d_state)
    diff = x[9] - x[10]
    if diff > 0:
        behaviour = BehavioralState.WAKE
    elif abs(x[11]) > rem_threshold:
        behaviour = BehavioralState.REM
    else:
        behaviour = BehavioralState.NREM

    marker = None
    if previous_diff is not None:
        if previous_diff <= 0 < diff:
            marker = Marker.WAKE_INIT
            expected = dx[9] > 0 and dx[10] < 0
        elif diff <= 0 < previous_diff:
            marker = Marker.SLEEP_INIT
            expected = dx[9] < 0 and dx[10] > 0
        if marker is not None and not expected:
            warnings.warn(
                f"{marker.value} crossing with d_ad={dx[9]:.4g}, d_gaba={dx[10]:.4g}",
                AmbiguousTransition, stacklevel=2)
    return behaviour, marker


def apply_orexin_knockout(params: ModelParameters, factor: float) -> ModelParameters:
    """Scale the production inflows of the OX equation by ``factor``.

    Only the positive production sub-coefficients from ACh_LDT/PPT, NA,
    OX itself and AD are scaled; removal and inhibition terms are kept.
    """
    if not (0.0 <= factor <= 1.0):
        raise InvalidFactor(f"knockout factor must lie in [0, 1], got {factor!r}")
    if factor == 1.0:
        return params
    matrix = np.array(params.fast_matrix)
    coeffs = dict(params.coefficients)
    ox_row = INDEX["ox"]
    for name, col in OX_PRODUCTION:
        value = coeffs.get(name, 0.0)
        if value > 0:
            matrix[ox_row, col] -= value * (1.0 - factor)
            coeffs[name] = value * factor
    return params.replace(fast_matrix=matrix, coefficients=coeffs)
