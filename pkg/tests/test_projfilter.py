import numpy as np
import pytest

from conftest import CUBIC_NATURAL, GAUSS2_NATURAL, cubic_model, linear2d_model, poly, scalar_linear_model
from projection_filter.errors import CapabilityError, StepFailure, StructuralError
from projection_filter.expfam import Bijection, gaussian_to_natural, natural_to_gaussian, prepare
from projection_filter.polyalg import ModelSpec, assemble_coefficients
from projection_filter.projfilter import MeasurementPath, ProjectionFilter
from projection_filter.quadrature import gauss_chebyshev, gauss_patterson, smolyak
from projection_filter.reference import GaussianBelief, KalmanBucy, make_rng, simulate_sde
from projection_filter.reference.kalman import kalman_bucy_step


def _filter(model, natural, grid, bijection=Bijection(), **kw):
    basis, co = assemble_coefficients(model, natural)
    return ProjectionFilter(co, prepare(basis, bijection, grid), **kw), basis


def test_measurement_path_validation():
    with pytest.raises(StructuralError):
        MeasurementPath(0.0, np.zeros(3))
    with pytest.raises(StructuralError):
        MeasurementPath(0.1, [0.0, np.nan])
    path = MeasurementPath(0.1, np.arange(7.0))
    assert path.increments.shape == (7, 1)
    coarse = path.coarsen(3)
    assert coarse.dt == pytest.approx(0.3)
    np.testing.assert_allclose(coarse.increments[:, 0], [3.0, 12.0])


def test_zero_dynamics_drift_vanishes():
    model = ModelSpec((poly("0"),), ((),), np.zeros((0, 0)), ())
    pf, basis = _filter(model, CUBIC_NATURAL, gauss_chebyshev(24))
    state = pf.initial_state([0.0, 1.0, 0.0, -1.0])
    assert np.array_equal(pf.drift(state), np.zeros(4))


def test_linear_model_drift_vanishes_at_riccati_fixed_point():
    r = 0.01
    p_inf = r * (-1 + np.sqrt(1 + 1 / r))
    model = linear2d_model(r)
    pf, basis = _filter(model, GAUSS2_NATURAL, smolyak("gauss_patterson", 2, 6), Bijection("arctanh", 1.0))
    theta = gaussian_to_natural([0.0, 0.0], p_inf * np.eye(2), basis)
    assert np.max(np.abs(pf.drift(pf.initial_state(theta)))) < 1e-6


def _direct_moments(man, theta):
    t = man.log_base + man.node_stats[:, : man.m] @ theta
    w = man.signs * np.exp(t - t.max())
    w /= w.sum()
    return w @ man.node_stats


def _direct_psi(man, theta):
    t = man.log_base + man.node_stats[:, : man.m] @ theta
    return t.max() + np.log(np.sum(man.signs * np.exp(t - t.max())))


def test_cubic_drift_matches_independent_assembly():
    model = cubic_model()
    basis, co = assemble_coefficients(model, CUBIC_NATURAL)
    man = prepare(basis, Bijection("arctanh", 2.0), gauss_chebyshev(96))
    pf = ProjectionFilter(co, man)
    theta = np.array([0.0, 1.0, 0.0, -1.0])
    eta_t = _direct_moments(man, theta)
    h = 1e-4
    E = np.eye(4) * h
    fisher = np.array([[(_direct_psi(man, theta + E[i] + E[j]) - _direct_psi(man, theta + E[i] - E[j])
                         - _direct_psi(man, theta - E[i] + E[j]) + _direct_psi(man, theta - E[i] - E[j])) / (4 * h * h)
                        for j in range(4)] for i in range(4)])
    eta = eta_t[:4]
    rhs = co.a0 + co.b0 * eta + co.A0 @ eta_t + eta * (co.bh @ eta_t)
    expect = np.linalg.solve(fisher, rhs)
    got = pf.drift(pf.initial_state(theta))
    np.testing.assert_allclose(got, expect, rtol=1e-6, atol=1e-6 * np.abs(expect).max())


def test_step_with_nothing_to_do_is_identity():
    pf, _ = _filter(cubic_model(), CUBIC_NATURAL, gauss_chebyshev(24), Bijection("arctanh", 2.0))
    s = pf.initial_state([0.0, 1.0, 0.0, -1.0])
    assert pf.step(s, [0.0], 0.0) is s


def test_pure_measurement_update_is_linear():
    pf, _ = _filter(cubic_model(), CUBIC_NATURAL, gauss_chebyshev(24), Bijection("arctanh", 2.0))
    s = pf.initial_state([0.0, 1.0, 0.0, -1.0])
    out = pf.step(s, [0.05], 0.0)
    np.testing.assert_array_equal(out.theta, s.theta + pf.coeffs.lam @ np.array([0.05]))


def _one_step_gap(dt):
    model = linear2d_model(0.01)
    pf, basis = _filter(model, GAUSS2_NATURAL, smolyak("gauss_patterson", 2, 6), Bijection("arctanh", 2.0))
    mean, cov = np.array([0.3, -0.2]), np.array([[1.0, 0.2], [0.2, 0.8]])
    dy = np.array([-0.5, 0.4]) * dt
    s = pf.step(pf.initial_state(gaussian_to_natural(mean, cov, basis)), dy, dt)
    m_pf, c_pf = natural_to_gaussian(s.theta, basis)
    A, C, Qe, Re = -np.eye(2), -np.eye(2), np.eye(2), 0.01 * np.eye(2)
    kb = kalman_bucy_step(GaussianBelief(mean, cov), dy, dt, A, C, Qe, Re)
    return max(np.abs(m_pf - kb.mean).max(), np.abs(c_pf - kb.cov).max())


def test_single_step_agrees_with_kalman_bucy_to_second_order():
    e1, e2 = _one_step_gap(1e-3), _one_step_gap(5e-4)
    # the information rate C^T R^-1 C = 100 sets the scale of the second-order term
    assert e1 < 2 * (100 * 1e-3) ** 2
    assert 3.5 < e1 / e2 < 4.5


def test_empty_path_gives_initial_state_only():
    pf, _ = _filter(cubic_model(), CUBIC_NATURAL, gauss_chebyshev(12), Bijection("arctanh", 2.0))
    traj = pf.run([0.0, 1.0, 0.0, -1.0], MeasurementPath(1e-4, np.zeros((0, 1))))
    assert len(traj) == 1 and traj.times[0] == 0.0


def test_observation_offset_is_handled():
    """h = -x + 1 on dy is the same problem as h = -x on dy - dt."""
    dt, n = 1e-3, 1000
    offset, plain = scalar_linear_model(offset=1.0, r=0.04), scalar_linear_model(r=0.04)
    _, path = simulate_sde(offset, [0.5], dt, n, make_rng(7))
    shifted = MeasurementPath(dt, path.increments - dt)
    grid = gauss_patterson(7)
    pf_off, basis = _filter(offset, ((1,), (2,)), grid)
    pf_plain, _ = _filter(plain, ((1,), (2,)), grid)
    theta0 = gaussian_to_natural([0.0], [[1.0]], basis)
    a = pf_off.run(theta0, path, stride=100).thetas
    b = pf_plain.run(theta0, shifted, stride=100).thetas
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)
    kb = KalmanBucy(plain).run(GaussianBelief([0.0], [[1.0]]), shifted, stride=100)
    for th, bel in zip(a, kb):
        m, c = natural_to_gaussian(th, basis)
        # both are first-order schemes; the gap is O(dt)
        assert m[0] == pytest.approx(bel.mean[0], abs=1e-2)
        assert c[0, 0] == pytest.approx(bel.cov[0, 0], rel=2e-2)


def test_heun_scheme_runs_and_stays_close_to_euler():
    model = cubic_model()
    _, path = simulate_sde(model, [1.0], 1e-4, 2000, make_rng(3))
    out = {}
    for scheme in ("euler", "heun"):
        pf, _ = _filter(model, CUBIC_NATURAL, gauss_chebyshev(48), Bijection("arctanh", 2.0), scheme=scheme)
        out[scheme] = pf.run([0.0, 1.0, 0.0, -1.0], path, stride=500).etas
    np.testing.assert_allclose(out["euler"], out["heun"], atol=5e-3)


def test_step_failure_reports_index_and_partial_trajectory():
    model = cubic_model()
    pf, _ = _filter(model, CUBIC_NATURAL, gauss_chebyshev(12), Bijection("arctanh", 2.0))
    # a large positive kick to the x^2 coefficient makes the density non-integrable
    inc = np.zeros((5, 1))
    inc[3, 0] = 1e3
    with pytest.raises(StepFailure) as info:
        pf.run([0.0, 1.0, 0.0, -1.0], MeasurementPath(1e-4, inc))
    assert info.value.step == 3
    assert len(info.value.trajectory) == 4


def test_trajectory_expectation_of_unknown_statistic():
    pf, _ = _filter(cubic_model(), CUBIC_NATURAL, gauss_chebyshev(12), Bijection("arctanh", 2.0))
    traj = pf.run([0.0, 1.0, 0.0, -1.0], MeasurementPath(1e-4, np.zeros((2, 1))))
    assert traj.expectation((10,)).shape == (3,)
    with pytest.raises(CapabilityError):
        traj.expectation((11,))


def test_runs_are_bit_identical(tmp_path):
    model = cubic_model()
    files = []
    for k in range(2):
        _, path = simulate_sde(model, [1.0], 1e-4, 500, make_rng(2024))
        pf, _ = _filter(model, CUBIC_NATURAL, gauss_chebyshev(12), Bijection("arctanh", 2.0))
        traj = pf.run([0.0, 1.0, 0.0, -1.0], path, stride=10)
        traj.to_csv(tmp_path / f"t{k}.csv")
        files.append((tmp_path / f"t{k}.csv").read_bytes())
    assert files[0] == files[1]


@pytest.mark.slow
def test_cubic_sensor_full_run_with_96_nodes():
    model = cubic_model()
    _, path = simulate_sde(model, [1.0], 1e-4, 14000, make_rng(2024))
    pf, _ = _filter(model, CUBIC_NATURAL, gauss_chebyshev(96), Bijection("arctanh", 2.0))
    traj = pf.run([0.0, 1.0, 0.0, -1.0], path, stride=100)
    assert len(traj) == 141
    assert traj.times[-1] == pytest.approx(1.4)
    assert np.all(np.isfinite(traj.thetas))
