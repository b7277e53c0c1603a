import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sleepwake import analysis as an
from sleepwake.errors import MultipleRoots, NoRootInInterval, SingularSystem
from sleepwake.model import FAST_VARIABLES, StateVector, fast_rhs, full_rhs, slow_rhs
from sleepwake.params import default_parameters

QUOTED = (0.703, 0.823)  # (gaba_vlpo, ad)


# ---------------------------------------------------------------- nullclines


def test_ad_nullcline_values(params):
    assert an.ad_nullcline(0.0, params) == pytest.approx(4.9)
    assert an.ad_nullcline(2.0, params) == pytest.approx(0.49 / 4.1)
    assert an.ad_nullcline(2.0, params) == pytest.approx(0.11951, abs=1e-5)


def test_ad_nullcline_strictly_decreasing(params):
    g = np.linspace(0, 50, 2001)
    vals = an.ad_nullcline(g, params)
    assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-3


def test_gaba_nullcline_values(params):
    assert an.gaba_nullcline(1.0, params, 0.3) == pytest.approx(0.6 / 1.15)
    assert an.gaba_nullcline(0.0, params, 0.3) == pytest.approx(2.0)
    assert an.gaba_nullcline(2.0, params, 0.3) == pytest.approx(0.9 / 4.15)


@given(st.floats(0, 3), st.floats(0.2, 0.4))
def test_gaba_nullcline_zeroes_gaba_derivative(g, eps):
    p = default_parameters()
    a = an.gaba_nullcline(g, p, eps)
    assert slow_rhs(StateVector(ad=a, gaba_vlpo=g), p, eps)[1] == pytest.approx(0, abs=1e-12)


@given(st.floats(0, 3))
def test_ad_nullcline_zeroes_ad_derivative(g):
    p = default_parameters()
    a = an.ad_nullcline(g, p)
    assert slow_rhs(StateVector(ad=a, gaba_vlpo=g), p, 0.3)[0] == pytest.approx(0, abs=1e-12)


# ---------------------------------------------------------------- fixed point


def test_fixed_point_unique_and_converged(params):
    fp = an.find_fixed_point(params, 0.3, (0.1, 2.0))
    assert 0.6 < fp.gaba_vlpo < 0.9 and 0.6 < fp.ad < 0.9
    assert fp.residual < 1e-10
    print(f"computed (g, a) = ({fp.gaba_vlpo:.6f}, {fp.ad:.6f}); quoted {QUOTED}; "
          f"difference ({fp.gaba_vlpo - QUOTED[0]:+.4f}, {fp.ad - QUOTED[1]:+.4f})")


def test_fixed_point_matches_grid_scan(params):
    g = np.arange(0.1, 2.0, 1e-5)
    diff = an.ad_nullcline(g, params) - an.gaba_nullcline(g, params, 0.3)
    idx = np.flatnonzero(np.sign(diff[:-1]) != np.sign(diff[1:]))
    assert len(idx) == 1
    fp = an.find_fixed_point(params, 0.3, (0.1, 2.0))
    assert abs(fp.gaba_vlpo - g[idx[0]]) <= 1e-5


def test_fixed_point_continuous_in_epsilon(params):
    a = an.find_fixed_point(params, 0.3, (0.1, 2.0))
    b = an.find_fixed_point(params, 0.3 + 1e-6, (0.1, 2.0))
    assert abs(a.gaba_vlpo - b.gaba_vlpo) < 1e-4 and abs(a.ad - b.ad) < 1e-4


def test_no_root_in_upper_interval(params):
    g = np.linspace(1.5, 2.0, 10001)
    diff = an.ad_nullcline(g, params) - an.gaba_nullcline(g, params, 0.3)
    assert np.all(diff < 0)
    with pytest.raises(NoRootInInterval):
        an.find_fixed_point(params, 0.3, (1.5, 2.0))


def test_multiple_roots_reported(params):
    # cubic with roots 0.5, 1 and 2: k3 = 1, k2 = 3.5, k1 = 4, k4 = 0.6875, eps = 0.5
    p = params.replace(k1=4.0, k2=3.5, k3=1.0, k4=0.6875)
    with pytest.raises(MultipleRoots) as exc:
        an.find_fixed_point(p, 0.5, (0.1, 3.0))
    roots = sorted(r.gaba_vlpo for r in exc.value.roots)
    assert roots == pytest.approx([0.5, 1.0, 2.0], abs=1e-10)
    assert all(r.residual < 1e-10 for r in exc.value.roots)


def test_empty_interval_rejected(params):
    with pytest.raises(ValueError):
        an.find_fixed_point(params, 0.3, (1.0, 1.0))


@given(st.floats(0.25, 0.4))
@settings(max_examples=30)
def test_nullclines_agree_at_fixed_point(eps):
    p = default_parameters()
    fp = an.find_fixed_point(p, eps)
    assert abs(an.ad_nullcline(fp.gaba_vlpo, p) - an.gaba_nullcline(fp.gaba_vlpo, p, eps)) < 1e-10
    assert fp.residual < 1e-10


# ---------------------------------------------------------------- Jacobians


def test_jacobian_slow_entries(params):
    J0 = an.jacobian_slow(an.FixedPoint(0.0, 0.0, 0.0), params)
    assert np.allclose(J0, [[-0.1, 0.0], [0.15, -0.3]])
    J1 = an.jacobian_slow(an.FixedPoint(1.0, 1.0, 0.0), params)
    assert np.allclose(J1, [[-1.1, -2.0], [1.15, 1.7]])


def test_fixed_point_is_unstable_spiral(params):
    rep = an.stability_report(params, 0.3, (0.1, 2.0))
    tr, det = rep.trace, rep.determinant
    assert tr > 0 and det > 0 and tr * tr - 4 * det < 0
    assert rep.classification is an.Stability.UNSTABLE_SPIRAL
    for lam in rep.eigenvalues:
        assert abs(lam * lam - tr * lam + det) < 1e-12


def _random_state(rng):
    return rng.uniform(0, 2, 13)


def test_jacobian_full_fast_rows_are_matrix(params):
    rng = np.random.default_rng(0)
    for _ in range(5):
        J = an.jacobian_full(_random_state(rng), params)
        assert np.array_equal(J[:9], params.fast_matrix)


def test_jacobian_full_slow_diagonal_at_quoted_point(params):
    J = an.jacobian_full(StateVector(ad=QUOTED[1], gaba_vlpo=QUOTED[0]), params)
    assert J[9, 9] == pytest.approx(-0.594209, abs=1e-12)


def test_jacobian_full_matches_finite_differences(params):
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(5):
        x = _random_state(rng)
        J = an.jacobian_full(x, params)
        fd = np.empty((11, 11))
        for j in range(11):
            e = np.zeros(13)
            e[j] = h
            fd[:, j] = (full_rhs(x + e, params)[:11] - full_rhs(x - e, params)[:11]) / (2 * h)
        assert np.max(np.abs(J - fd)) < 1e-6


def test_jacobian_full_slow_block_equals_slow_jacobian(params):
    x = StateVector(ad=0.9, gaba_vlpo=0.4)
    J = an.jacobian_full(x, params)
    assert np.array_equal(J[9:, 9:], an.jacobian_slow(an.FixedPoint(0.4, 0.9, 0.0), params))


def test_feedback_entries_have_weight_sign(params):
    J = an.jacobian_full(StateVector(), params)
    assert np.allclose(J[10, 4:9], params.epsilon_weights)
    assert np.all(J[9, :9] == 0) and np.all(J[10, :4] == 0)


# ---------------------------------------------------------------- eigenvalues


def test_eigenvalues_diagonal():
    assert an.eigenvalues([[-1, 0], [0, -2]]) == [-2, -1]


def test_eigenvalues_harmonic_block():
    lam = an.eigenvalues([[0, 1], [-8, 0]])
    assert lam[0] == pytest.approx(-2.8284271j) and lam[1] == pytest.approx(2.8284271j)


def test_eigenvalue_identities_random_3x3():
    rng = np.random.default_rng(7)
    for _ in range(200):
        M = rng.normal(size=(3, 3))
        lam = np.array(an.eigenvalues(M))
        tr, det = np.trace(M), np.linalg.det(M)
        assert abs(lam.sum() - tr) <= 1e-9 * max(1.0, abs(tr))
        assert abs(np.prod(lam) - det) <= 1e-9 * max(1.0, abs(det))
        for z in lam:
            assert an.characteristic_residual(M, z) < 1e-8


def test_eigenvalues_sorted():
    rng = np.random.default_rng(8)
    lam = an.eigenvalues(rng.normal(size=(8, 8)))
    keys = [(z.real, z.imag) for z in lam]
    assert keys == sorted(keys)


def test_eigenvalue_continuity():
    rng = np.random.default_rng(9)
    M = np.diag([-3.0, -1.0, 0.5, 2.0]) + 0.1 * rng.normal(size=(4, 4))
    E = rng.normal(size=(4, 4))
    E /= np.linalg.norm(E)
    a = np.array(an.eigenvalues(M))
    b = np.array(an.eigenvalues(M + 1e-8 * E))
    assert np.max(np.abs(a - b)) < 1e-6


@pytest.mark.parametrize("bad", [np.ones((2, 3)), np.ones((17, 17)), [[np.nan, 0], [0, 1]]])
def test_eigenvalues_preconditions(bad):
    with pytest.raises(ValueError):
        an.eigenvalues(bad)


@pytest.mark.parametrize("eigs, kind", [
    ([-1, -2], an.Stability.STABLE_NODE),
    ([-1 - 1j, -1 + 1j], an.Stability.STABLE_SPIRAL),
    ([1, 2], an.Stability.UNSTABLE_NODE),
    ([1 - 1j, 1 + 1j], an.Stability.UNSTABLE_SPIRAL),
    ([-1j, 1j], an.Stability.CENTER),
    ([-1, 2], an.Stability.SADDLE),
    ([-1, 1 - 1j, 1 + 1j], an.Stability.MIXED),
])
def test_classification(eigs, kind):
    assert an.classify(eigs) is kind


def test_full_report_dimension(params):
    rep = an.full_stability_report(params)
    assert rep.jacobian.shape == (11, 11) and len(rep.eigenvalues) == 11
    assert rep.classification is an.classify(rep.eigenvalues)


# ---------------------------------------------------------------- sweep


def test_sweep_window_contiguous(sweep):
    assert sweep.window is not None
    flags = [p.oscillatory for p in sweep.points]
    first, last = flags.index(True), len(flags) - 1 - flags[::-1].index(True)
    assert all(flags[first:last + 1])


def test_sweep_lower_edge_is_hopf(sweep, params):
    lo, _ = sweep.window
    assert lo.kind == "hopf"
    fp = an.find_fixed_point(params, lo.epsilon)
    assert abs(np.trace(an.jacobian_slow(fp, params))) < 1e-3


def test_sweep_upper_edge_is_trapping_floor(sweep, params):
    _, hi = sweep.window
    assert hi.kind == "trap"
    inside, outside = an.trapped(params, np.array([hi.epsilon - 2e-4, hi.epsilon + 2e-4]))
    assert inside and not outside


def test_sweep_classifications_match_trace(sweep):
    for p in sweep.points:
        assert (p.trace > 0) == (p.classification is an.Stability.UNSTABLE_SPIRAL)


def test_sweep_point_range(params):
    res = an.epsilon_stability_sweep(params, (0.3, 0.3), 0.005)
    assert len(res.points) == 1
    assert res.points[0].classification is an.Stability.UNSTABLE_SPIRAL


def test_sweep_preconditions(params):
    with pytest.raises(ValueError):
        an.epsilon_stability_sweep(params, (0.4, 0.3), 0.005)
    with pytest.raises(ValueError):
        an.epsilon_stability_sweep(params, (0.3, 0.4), 0.0)


def test_sweep_records_missing_roots(params):
    res = an.epsilon_stability_sweep(params, (0.3, 0.31), 0.005, search_interval=(1.5, 2.0))
    assert all(p.classification is None and "intersect" in p.error for p in res.points)
    assert res.window is None


# ---------------------------------------------------------------- sub-systems


def _frozen(params, fp, active):
    vals = {v: 0.1 for v in FAST_VARIABLES if v not in active}
    vals.update(ad=fp.ad, gaba_vlpo=fp.gaba_vlpo)
    return vals


def test_single_equation_steady_state(params):
    fp = an.find_fixed_point(params)
    frozen = _frozen(params, fp, {"gaba_bfs"})
    c = params.coefficients
    inflow = -c["c6"] * frozen["na"] - c["c7"] * frozen["ad"] + c["c8"] * frozen["gaba_vlpo"]
    expected = inflow / (c["c5"] + params.ga1)
    res = an.subsystem_steady_state(params, {"gaba_bfs"}, frozen)
    assert res.values["gaba_bfs"] == pytest.approx(expected, rel=1e-14)
    assert res.stable


def test_all_fast_variables_steady_state(params):
    fp = an.find_fixed_point(params)
    res = an.subsystem_steady_state(params, set(FAST_VARIABLES),
                                    {"ad": fp.ad, "gaba_vlpo": fp.gaba_vlpo})
    x = np.zeros(13)
    for i, v in enumerate(FAST_VARIABLES):
        x[i] = res.values[v]
    x[9], x[10] = fp.ad, fp.gaba_vlpo
    assert np.max(np.abs(fast_rhs(x, params))) < 1e-10


def test_empty_active_set(params):
    with pytest.raises(ValueError):
        an.subsystem_steady_state(params, set(), {})


def test_missing_frozen_value(params):
    with pytest.raises(ValueError):
        an.subsystem_steady_state(params, {"ox"}, {"ad": 1.0})


def test_singular_active_block(params):
    m = np.array(params.fast_matrix)
    m[1, 1] = 0.0
    p = params.replace(fast_matrix=m)
    frozen = {v: 0.1 for v in FAST_VARIABLES if v != "gaba_bfs"}
    frozen.update(ad=1.0, gaba_vlpo=1.0)
    with pytest.raises(SingularSystem):
        an.subsystem_steady_state(p, {"gaba_bfs"}, frozen)
