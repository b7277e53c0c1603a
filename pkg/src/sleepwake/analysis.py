"""Nullclines, fixed points, Jacobians, eigenvalues and the epsilon sweep."""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceFailure, MultipleRoots, NoRootInInterval, SingularSystem
from .model import FAST_VARIABLES, INDEX, EPSILON_COLUMNS, ModelParameters, eval_epsilon, slow_rhs


@dataclass(frozen=True)
class FixedPoint:
    gaba_vlpo: float
    ad: float
    residual: float


class Stability(enum.Enum):
    STABLE_NODE = "StableNode"
    STABLE_SPIRAL = "StableSpiral"
    UNSTABLE_NODE = "UnstableNode"
    UNSTABLE_SPIRAL = "UnstableSpiral"
    CENTER = "Center"
    SADDLE = "Saddle"
    MIXED = "Mixed"


@dataclass
class StabilityReport:
    fixed_point: FixedPoint
    jacobian: np.ndarray
    eigenvalues: List[complex]
    classification: Stability
    epsilon_used: float

    @property
    def trace(self) -> float:
        return float(np.trace(self.jacobian))

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.jacobian))


def ad_nullcline(gaba_vlpo, params: ModelParameters):
    return params.k1 / (params.k2 + gaba_vlpo * gaba_vlpo)


def gaba_nullcline(gaba_vlpo, params: ModelParameters, epsilon: float):
    """AD level at which dGABA_VLPO/dt vanishes for the given GABA_VLPO."""
    return (epsilon + params.k3 * gaba_vlpo) / (params.k4 + gaba_vlpo * gaba_vlpo)


def _intersection_cubic(params: ModelParameters, epsilon: float) -> np.ndarray:
    # k1 (k4 + g^2) - (eps + k3 g)(k2 + g^2), highest power first
    k1, k2, k3, k4 = params.k1, params.k2, params.k3, params.k4
    return np.array([-k3, k1 - epsilon, -k2 * k3, k1 * k4 - epsilon * k2])


def _fixed_point_at(g: float, params: ModelParameters, epsilon: float) -> FixedPoint:
    a = float(ad_nullcline(g, params))
    state = np.zeros(13)
    state[9], state[10] = a, g
    d_ad, d_g = slow_rhs(state, params, epsilon)
    return FixedPoint(g, a, max(abs(d_ad), abs(d_g)))


def find_fixed_points(params: ModelParameters, epsilon: float,
                      search_interval: Tuple[float, float] = (0.0, 3.0),
                      grid: int = 4001) -> List[FixedPoint]:
    """Every nullcline intersection inside ``search_interval``.

    Sign changes of the intersection cubic are bracketed on a grid, refined
    with Brent's method and polished by Newton steps.
    """
    lo, hi = search_interval
    if not lo < hi:
        raise ValueError("search interval must satisfy lo < hi")
    cubic = _intersection_cubic(params, epsilon)
    dcubic = np.polyder(cubic)
    xs = np.linspace(lo, hi, grid)
    ys = np.polyval(cubic, xs)
    roots = []
    for i in range(grid - 1):
        if ys[i] == 0.0:
            roots.append(xs[i])
        elif ys[i] * ys[i + 1] < 0:
            roots.append(brentq(lambda g: np.polyval(cubic, g), xs[i], xs[i + 1],
                                xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if ys[-1] == 0.0:
        roots.append(xs[-1])
    out = []
    for g in roots:
        for _ in range(3):
            slope = np.polyval(dcubic, g)
            if slope == 0:
                break
            g_new = g - np.polyval(cubic, g) / slope
            if not lo <= g_new <= hi:
                break
            g = g_new
        out.append(_fixed_point_at(float(g), params, epsilon))
    return out


def find_fixed_point(params: ModelParameters, epsilon: Optional[float] = None,
                     search_interval: Tuple[float, float] = (0.0, 3.0)) -> FixedPoint:
    """The unique slow-system fixed point in ``search_interval``.

    ``epsilon`` defaults to ``params.mu``.  Raises :class:`NoRootInInterval`
    or :class:`MultipleRoots` (which carries every root found).
    """
    eps = params.mu if epsilon is None else epsilon
    roots = find_fixed_points(params, eps, search_interval)
    if not roots:
        raise NoRootInInterval(f"nullclines do not intersect on {list(search_interval)} "
                               f"(epsilon={eps})")
    if len(roots) > 1:
        raise MultipleRoots(roots)
    return roots[0]


def jacobian_slow(point: FixedPoint, params: ModelParameters) -> np.ndarray:
    """Jacobian of (dAD/dt, dGABA_VLPO/dt) with respect to (AD, GABA_VLPO)."""
    g, a = point.gaba_vlpo, point.ad
    return np.array([[-params.k2 - g * g, -2.0 * g * a],
                     [params.k4 + g * g, -params.k3 + 2.0 * g * a]])


def jacobian_full(state, params: ModelParameters) -> np.ndarray:
    """11x11 Jacobian of the concentration equations at ``state``."""
    x = state.as_array() if hasattr(state, "as_array") else np.asarray(state, dtype=float)
    J = np.zeros((11, 11))
    J[:9] = params.fast_matrix
    J[9:, 9:] = jacobian_slow(FixedPoint(x[10], x[9], math.nan), params)
    # d(-epsilon)/dx = +a_i
    J[10, list(EPSILON_COLUMNS)] = params.epsilon_weights
    return J


def _fingerprint(m: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(m).tobytes()).hexdigest()[:12]


def eigenvalues(matrix) -> List[complex]:
    """Eigenvalues sorted by (real part, imaginary part)."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if m.shape[0] > 16:
        raise ValueError("matrix larger than 16x16")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    try:
        lam = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigenvalue iteration failed for matrix {_fingerprint(m)}") from exc
    return sorted((complex(z) for z in lam), key=lambda z: (z.real, z.imag))


def characteristic_residual(matrix, lam: complex) -> float:
    """Relative distance of ``matrix - lam I`` from singularity (smallest singular value)."""
    m = np.asarray(matrix, dtype=complex)
    s = np.linalg.svd(m - lam * np.eye(len(m)), compute_uv=False)
    return float(s[-1] / max(np.linalg.norm(m, 2), 1.0))


def classify(eigs: Sequence[complex], tol: float = 1e-12) -> Stability:
    re = np.array([z.real for z in eigs])
    im = np.array([z.imag for z in eigs])
    complex_pair = bool(np.any(np.abs(im) > tol))
    if np.all(np.abs(re) <= tol) and complex_pair:
        return Stability.CENTER
    if np.all(re < -tol):
        return Stability.STABLE_SPIRAL if complex_pair else Stability.STABLE_NODE
    if np.all(re > tol):
        return Stability.UNSTABLE_SPIRAL if complex_pair else Stability.UNSTABLE_NODE
    if not complex_pair and np.any(re < -tol) and np.any(re > tol):
        return Stability.SADDLE
    return Stability.MIXED


def stability_report(params: ModelParameters, epsilon: Optional[float] = None,
                     search_interval=(0.0, 3.0)) -> StabilityReport:
    eps = params.mu if epsilon is None else epsilon
    fp = find_fixed_point(params, eps, search_interval)
    J = jacobian_slow(fp, params)
    lam = eigenvalues(J)
    return StabilityReport(fp, J, lam, classify(lam), eps)


def full_equilibrium(params: ModelParameters, search_interval=(0.0, 3.0),
                     max_iter: int = 50) -> Tuple[np.ndarray, FixedPoint]:
    """Equilibrium of the 11 concentration equations.

    Alternates between the fast steady state for the current slow point and
    the slow fixed point for the resulting epsilon until epsilon settles.
    """
    block = params.fast_matrix[:, :9]
    drive = params.fast_matrix[:, 9:]
    eps = params.mu
    x = np.zeros(11)
    for _ in range(max_iter):
        fp = find_fixed_point(params, eps, search_interval)
        slow = np.array([fp.ad, fp.gaba_vlpo])
        try:
            x[:9] = np.linalg.solve(block, -drive @ slow)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem("fast block is singular") from exc
        x[9:] = slow
        new_eps = eval_epsilon(np.concatenate([x, [0.0, 0.0]]), params)
        if abs(new_eps - eps) < 1e-15:
            eps = new_eps
            break
        eps = new_eps
    fp = find_fixed_point(params, eps, search_interval)
    return x, fp


def full_stability_report(params: ModelParameters, search_interval=(0.0, 3.0)) -> StabilityReport:
    x, fp = full_equilibrium(params, search_interval)
    J = jacobian_full(np.concatenate([x, [0.0, 0.0]]), params)
    lam = eigenvalues(J)
    return StabilityReport(fp, J, lam, classify(lam), eval_epsilon(
        np.concatenate([x, [0.0, 0.0]]), params))


# ---------------------------------------------------------------- sweep


def _slow_orbit_extremes(params: ModelParameters, eps: np.ndarray, hours: float = 240.0,
                         settle: float = 120.0, step: float = 0.01):
    """Minima of AD and GABA_VLPO on the attractor of the frozen-epsilon slow system.

    Vectorised over ``eps``; starts from the wake-peak corner.
    """
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    a = np.full_like(eps, params.ad_max)
    g = np.full_like(eps, params.gaba_min)
    k1, k2, k3, k4 = params.k1, params.k2, params.k3, params.k4

    def f(a, g):
        tr = g * g * a
        return k1 - k2 * a - tr, -eps - k3 * g + k4 * a + tr

    a_min = np.full_like(eps, np.inf)
    g_min = np.full_like(eps, np.inf)
    n = int(round(hours / step))
    n_settle = int(round(settle / step))
    for i in range(n):
        ka1, kg1 = f(a, g)
        ka2, kg2 = f(a + 0.5 * step * ka1, g + 0.5 * step * kg1)
        ka3, kg3 = f(a + 0.5 * step * ka2, g + 0.5 * step * kg2)
        ka4, kg4 = f(a + step * ka3, g + step * kg3)
        a = a + step / 6.0 * (ka1 + 2 * ka2 + 2 * ka3 + ka4)
        g = g + step / 6.0 * (kg1 + 2 * kg2 + 2 * kg3 + kg4)
        if i >= n_settle:
            np.minimum(a_min, a, out=a_min)
            np.minimum(g_min, g, out=g_min)
    return a_min, g_min


def trapped(params: ModelParameters, eps) -> np.ndarray:
    """True where the slow attractor stays above the phase-box floor (ad_min, gaba_min)."""
    a_min, g_min = _slow_orbit_extremes(params, eps)
    return (a_min >= params.ad_min) & (g_min >= params.gaba_min)


@dataclass
class SweepPoint:
    epsilon: float
    classification: Optional[Stability]
    trace: float = math.nan
    determinant: float = math.nan
    full_max_real: float = math.nan
    bounded: bool = False
    oscillatory: bool = False
    error: Optional[str] = None


@dataclass
class Boundary:
    epsilon: float
    kind: str          # "hopf", "determinant", "trap" or "range"
    trace: float


@dataclass
class SweepResult:
    points: List[SweepPoint]
    window: Optional[Tuple[Boundary, Boundary]]
    hopf: List[float] = field(default_factory=list)
    full_hopf: List[float] = field(default_factory=list)
    reference: Tuple[float, float] = (0.29, 0.32)

    def window_bounds(self) -> Optional[Tuple[float, float]]:
        if self.window is None:
            return None
        return self.window[0].epsilon, self.window[1].epsilon


def _linear(params, eps, search_interval):
    fp = find_fixed_point(params, eps, search_interval)
    J = jacobian_slow(fp, params)
    return fp, J


def _bisect(pred, lo: float, hi: float, tol: float) -> float:
    """Bisect a predicate that differs at ``lo`` and ``hi``; returns the midpoint."""
    p_lo = pred(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid) == p_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def epsilon_stability_sweep(params: ModelParameters, range_: Tuple[float, float] = (0.25, 0.40),
                            resolution: float = 0.005, tol: float = 1e-4,
                            search_interval=(0.0, 3.0)) -> SweepResult:
    """Classify the slow fixed point along an epsilon grid and locate the oscillatory window.

    A grid point is oscillatory when its fixed point is an unstable focus or
    node with positive determinant *and* the slow attractor stays above the
    phase-box floor.  Window edges are bisected to ``tol``; each edge is
    labelled by the condition that changes there.
    """
    lo, hi = range_
    if lo > hi:
        raise ValueError("range must satisfy lo <= hi")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    n = int(math.floor((hi - lo) / resolution + 1e-9)) + 1
    grid = np.round(lo + resolution * np.arange(n), 12)
    if hi - grid[-1] > 1e-12:
        grid = np.append(grid, hi)

    points = []
    for eps in grid:
        try:
            fp, J = _linear(params, float(eps), search_interval)
        except (NoRootInInterval, MultipleRoots) as exc:
            points.append(SweepPoint(float(eps), None, error=str(exc)))
            continue
        lam = eigenvalues(J)
        pt = SweepPoint(float(eps), classify(lam), float(np.trace(J)), float(np.linalg.det(J)))
        try:
            full = full_stability_report(params.replace(mu=float(eps)), search_interval)
            pt.full_max_real = max(z.real for z in full.eigenvalues)
        except Exception as exc:  # recorded, not fatal
            pt.error = str(exc)
        points.append(pt)

    valid = [p for p in points if p.classification is not None]
    if valid:
        bounded = trapped(params, np.array([p.epsilon for p in valid]))
        for p, b in zip(valid, bounded):
            p.bounded = bool(b)
            p.oscillatory = p.trace > 0 and p.determinant > 0 and p.bounded

    def trace_at(eps):
        return float(np.trace(_linear(params, eps, search_interval)[1]))

    def det_at(eps):
        return float(np.linalg.det(_linear(params, eps, search_interval)[1]))

    def full_max_at(eps):
        return max(z.real for z in full_stability_report(params.replace(mu=eps),
                                                          search_interval).eigenvalues)

    hopf, full_hopf = [], []
    for p, q in zip(points, points[1:]):
        if p.classification is None or q.classification is None:
            continue
        if (p.trace > 0) != (q.trace > 0):
            hopf.append(_bisect(lambda e: trace_at(e) > 0, p.epsilon, q.epsilon, tol))
        if (p.full_max_real > 0) != (q.full_max_real > 0):
            full_hopf.append(_bisect(lambda e: full_max_at(e) > 0, p.epsilon, q.epsilon, tol))

    # longest contiguous run of oscillatory grid points
    best, run = None, None
    for i, p in enumerate(points):
        if p.oscillatory:
            run = (run[0], i) if run else (i, i)
            if best is None or run[1] - run[0] > best[1] - best[0]:
                best = run
        else:
            run = None
    window = None
    if best is not None:
        window = (_edge(points, best[0], -1, params, tol, trace_at, det_at),
                  _edge(points, best[1], +1, params, tol, trace_at, det_at))
    return SweepResult(points, window, hopf, full_hopf)


def _edge(points, i, direction, params, tol, trace_at, det_at) -> Boundary:
    inside = points[i]
    j = i + direction
    if j < 0 or j >= len(points) or points[j].classification is None:
        return Boundary(inside.epsilon, "range", inside.trace)
    outside = points[j]
    lo, hi = sorted((inside.epsilon, outside.epsilon))
    if (outside.trace > 0) != (inside.trace > 0):
        eps, kind = _bisect(lambda e: trace_at(e) > 0, lo, hi, tol), "hopf"
    elif (outside.determinant > 0) != (inside.determinant > 0):
        eps, kind = _bisect(lambda e: det_at(e) > 0, lo, hi, tol), "determinant"
    else:
        eps, kind = _bisect(lambda e: bool(trapped(params, np.array([e]))[0]), lo, hi, tol), "trap"
    return Boundary(eps, kind, trace_at(eps))


# ---------------------------------------------------------------- sub-systems


@dataclass
class SubsystemSteadyState:
    values: Dict[str, float]
    eigenvalues: List[complex]
    stable: bool


def subsystem_steady_state(params: ModelParameters, active_set, frozen_values: Mapping[str, float]
                           ) -> SubsystemSteadyState:
    """Steady state of the active fast equations with every other variable held fixed."""
    active = [v for v in FAST_VARIABLES if v in set(active_set)]
    unknown = set(active_set) - set(FAST_VARIABLES)
    if unknown:
        raise ValueError(f"not fast variables: {', '.join(sorted(unknown))}")
    if not active:
        raise ValueError("active_set must name at least one fast variable")
    inactive = [v for v in FAST_VARIABLES if v not in active] + ["ad", "gaba_vlpo"]
    missing = [v for v in inactive if v not in frozen_values]
    if missing:
        raise ValueError(f"frozen_values missing: {', '.join(missing)}")
    rows = [INDEX[v] for v in active]
    cols_in = [INDEX[v] for v in inactive]
    A = params.fast_matrix[np.ix_(rows, rows)]
    b = -params.fast_matrix[np.ix_(rows, cols_in)] @ np.array([frozen_values[v] for v in inactive])
    if np.linalg.cond(A) > 1e12:
        raise SingularSystem(f"active block {active} is singular")
    sol = np.linalg.solve(A, b)
    lam = eigenvalues(A)
    return SubsystemSteadyState(dict(zip(active, map(float, sol))), lam,
                                all(z.real < 0 for z in lam))
