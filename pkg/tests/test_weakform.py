import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from cascadetaxis.diagnostics import as_series
from cascadetaxis.grid import Grid
from cascadetaxis.model import ModelConfig, ModelError, ResupplySpec
from cascadetaxis.presets import make_initial
from cascadetaxis.stepper import run
from cascadetaxis.weakform import (
    EpsLadder,
    TestFunction,
    TestSum,
    bump,
    calibrated_slack_tol,
    eps_refinement,
    l2_distance,
    random_bumps,
    uniform_oracle,
    v_mass_inequality,
    weak_residual_u,
    weak_residual_w,
    weak_slack_v,
    weak_terms_u,
    weak_terms_v,
    weak_terms_w,
)

CFG = ModelConfig(beta=2.0, epsilon=0.05, t_final=1.0, dt_init=0.02)
R = ResupplySpec.constant(0.3)
PHI = TestFunction((0.45, 0.55, 0.4), (0.3, 0.25, 0.35), 1.3)


@pytest.fixture(scope="module")
def traj():
    g = Grid(16, 16)
    return run(make_initial(g, "perturbed_uniform", seed=7, amplitude=0.3), CFG, R)


@pytest.fixture(scope="module")
def uniform_traj():
    g = Grid(12, 12)
    return run(make_initial(g, "uniform", u_level=0.8, v_level=0.5, w_level=2.0), CFG, R)


def test_bump_quadrature_converges():
    g = Grid(64, 64)
    phi = TestFunction((0.5, 0.5, 0.0), (0.3, 0.3, 1.0))
    ix = quad(lambda x: bump(np.array((x - 0.5) / 0.3))[0], 0, 1)[0]
    assert g.integrate(phi.evaluate(g, 0.0)[0]) == pytest.approx(np.exp(-1) * ix * ix, rel=1e-6)


def test_bump_values_and_derivative():
    s = np.linspace(-0.95, 0.95, 39)
    val, der = bump(s)
    d = 1e-6
    fd = (bump(s + d)[0] - bump(s - d)[0]) / (2 * d)
    np.testing.assert_allclose(der, fd, rtol=1e-6, atol=1e-12)
    assert bump(np.array([0.0]))[0][0] == pytest.approx(np.exp(-1))
    assert not bump(np.array([-1.0, 1.0, 2.0]))[0].any()


def test_test_function_gradients_match_finite_differences(grid8):
    phi = TestFunction((0.5, 0.4, 0.5), (0.3, 0.35, 0.4), 2.0)
    g = Grid(32, 32)
    p, pt, px, py = phi.evaluate(g, 0.45)
    d = 1e-6
    np.testing.assert_allclose(pt, (phi.evaluate(g, 0.45 + d)[0] - phi.evaluate(g, 0.45 - d)[0]) / (2 * d), atol=1e-7)
    shifted = TestFunction((0.5 - d, 0.4, 0.5), phi.radii, 2.0)
    back = TestFunction((0.5 + d, 0.4, 0.5), phi.radii, 2.0)
    np.testing.assert_allclose(px, (shifted.evaluate(g, 0.45)[0] - back.evaluate(g, 0.45)[0]) / (2 * d), atol=1e-6)
    assert np.all(p >= 0)
    with pytest.raises(ValueError):
        TestFunction((0, 0, 0), (0.1, 0.0, 0.1))


def test_random_bumps_inside_domain():
    g = Grid(10, 10)
    bumps = random_bumps(g, 2.0, 25, seed=4)
    assert len(bumps) == 25
    for b in bumps:
        (cx, cy, _), (rx, ry, _) = b.center, b.radii
        assert rx <= cx <= 1 - rx and ry <= cy <= 1 - ry
        assert b.t_support[1] <= 2.0 + 1e-12 and b.nonneg
    assert random_bumps(g, 2.0, 3, seed=4) == bumps[:3]


def test_zero_test_function_gives_zero(traj):
    zero = PHI.scaled(0.0)
    assert weak_residual_u(traj, zero, CFG) == 0.0
    assert weak_residual_w(traj, zero, CFG, R) == 0.0
    assert weak_slack_v(traj, zero, CFG) == 0.0


def test_residuals_linear_in_test_function(traj):
    other = TestFunction((0.6, 0.3, 0.2), (0.2, 0.2, 0.3), 0.7)
    combo = TestSum([(2.0, PHI), (-0.5, other)])
    for f in (lambda p: weak_residual_u(traj, p, CFG), lambda p: weak_residual_w(traj, p, CFG, R)):
        assert f(combo) == pytest.approx(2.0 * f(PHI) - 0.5 * f(other), rel=1e-10, abs=1e-15)


@given(st.floats(0.01, 100.0))
@settings(max_examples=10)
def test_slack_scales_linearly(alpha):
    g = Grid(8, 8)
    tr = _small_traj(g)
    base = weak_slack_v(tr, PHI, CFG)
    assert weak_slack_v(tr, PHI.scaled(alpha), CFG) == pytest.approx(alpha * base, rel=1e-10, abs=1e-18)


_CACHE = {}


def _small_traj(g):
    if g not in _CACHE:
        _CACHE[g] = run(make_initial(g, "perturbed_uniform", seed=2), CFG, R)
    return _CACHE[g]


def test_support_and_sign_checks(traj):
    late = TestFunction((0.5, 0.5, 0.9), (0.2, 0.2, 0.3))
    with pytest.raises(ValueError, match="beyond"):
        weak_residual_u(traj, late, CFG)
    with pytest.raises(ValueError, match="nonnegative"):
        weak_slack_v(traj, PHI.scaled(-1.0), CFG)


def _scalar_reference(traj, phi, which):
    """Residual for spatially uniform trajectories from 1-D quadratures of the bump."""
    (cx, cy, ct), (rx, ry, rt) = phi.center, phi.radii
    g = traj.initial.grid
    nodes = (np.arange(g.nx) + 0.5) * g.h
    # 1-D midpoint sums: the space quadrature of the residual, done separably
    ix = g.h * sum(bump(np.array((x - cx) / rx))[0] for x in nodes)
    iy = g.h * sum(bump(np.array((y - cy) / ry))[0] for y in nodes)
    area_factor = phi.amplitude * ix * iy
    t = traj.times
    bt, dbt = bump((t - ct) / rt)
    A, At = area_factor * bt, area_factor * dbt / rt
    u = np.array([s.u.mean() for s in traj.snapshots])
    v = np.array([s.v.mean() for s in traj.snapshots])
    w = np.array([s.w.mean() for s in traj.snapshots])
    F = lambda s: s / (1 + CFG.epsilon * s)  # noqa: E731
    if which == "u":
        return -np.trapezoid(u * At, t) - u[0] * A[0]
    if which == "w":
        integrand = -w * At + (F(u) + F(v) + 1) * w * A - 0.3 * A
        return np.trapezoid(integrand, t) - w[0] * A[0]
    L = np.log1p(v)
    return np.trapezoid(-L * At - (v - v**2) / (v + 1) * A, t) - L[0] * A[0]


@pytest.mark.parametrize("which", ["u", "w", "v"])
def test_uniform_state_matches_scalar_reduction(uniform_traj, which):
    phi = TestFunction((0.5, 0.45, 0.3), (0.3, 0.3, 0.3), 1.1)
    f = {
        "u": lambda: weak_residual_u(uniform_traj, phi, CFG),
        "w": lambda: weak_residual_w(uniform_traj, phi, CFG, R),
        "v": lambda: weak_slack_v(uniform_traj, phi, CFG),
    }[which]
    assert f() == pytest.approx(_scalar_reference(uniform_traj, phi, which), rel=1e-8, abs=1e-12)


def test_uniform_state_residuals_small(uniform_traj):
    # exact value is 0; only time discretisation and time quadrature remain
    for phi in random_bumps(Grid(12, 12), 1.0, 5, seed=9):
        assert weak_terms_u(uniform_traj, phi, CFG).relative < 1e-2
        assert weak_terms_w(uniform_traj, phi, CFG, R).relative < 1e-2
        assert weak_terms_v(uniform_traj, phi, CFG).relative < 1e-2


def test_relative_residual_robust_to_cancellation(traj):
    t = weak_terms_u(traj, PHI, CFG)
    assert t.magnitude >= sum(abs(x) for x in t.terms.values()) * (1 - 1e-12)
    assert 0 <= t.relative < 0.05


def test_calibrated_tolerance(traj):
    g = traj.initial.grid
    data = make_initial(g, "perturbed_uniform", seed=7, amplitude=0.3)
    ud = uniform_oracle(data)
    assert g.integrate(ud.u0) == pytest.approx(g.integrate(data.u0))
    assert np.ptp(ud.w0) == 0.0
    bumps = random_bumps(g, 1.0, 4, seed=1)
    tol = calibrated_slack_tol(run(ud, CFG, R), bumps, CFG, 3.0)
    assert tol > 0
    assert calibrated_slack_tol(traj, [], CFG) == 0.0


def test_v_mass_inequality(traj):
    rep = v_mass_inequality(as_series(traj.records))
    assert rep.passed
    t = np.linspace(0, 1, 11)
    planted = {"t": t, "mass_v": 1 + t, "v_beta": np.ones_like(t)}
    bad = v_mass_inequality(planted)
    assert not bad.passed and bad.worst < 0 and bad.t_worst == 1.0


def test_ladder_validation():
    g = Grid(8, 8)
    d = make_initial(g, "uniform")
    with pytest.raises(ModelError):
        EpsLadder([0.1, 0.2], d, R, CFG)
    with pytest.raises(ModelError):
        EpsLadder([0.1, -0.1], d, R, CFG)
    with pytest.raises(ModelError):
        EpsLadder([0.1], d, R, ModelConfig(beta=3.0))
    lad = EpsLadder([0.1], d, R, CFG)
    assert lad.snapshot_times[-1] == pytest.approx(1.0) and len(lad.snapshot_times) == 20


def test_eps_refinement_trivial_cases():
    g = Grid(8, 8)
    d = make_initial(g, "perturbed_uniform", seed=1, amplitude=0.3)
    short = ModelConfig(beta=2.0, epsilon=0.1, t_final=0.2, dt_init=0.02)
    single = eps_refinement(EpsLadder([0.1], d, R, short))
    assert single.distances == [] and single.cauchy
    dup = eps_refinement(EpsLadder([0.1, 0.1, 0.05], d, R, short))
    assert dup.distances[0]["u"] == 0.0 and dup.distances[0]["w"] == 0.0
    assert dup.distances[1]["u"] > 0


def test_l2_distance_symmetric(traj):
    g = Grid(16, 16)
    other = run(make_initial(g, "perturbed_uniform", seed=8, amplitude=0.3), CFG, R, snapshot_stride=None, snapshot_times=list(traj.times[1:-1]))
    assert l2_distance(traj, other, "u") == pytest.approx(l2_distance(other, traj, "u"))
    assert l2_distance(traj, traj, "v") == 0.0
    short = run(make_initial(g, "uniform"), CFG, R, snapshot_stride=None)
    with pytest.raises(ValueError):
        l2_distance(traj, short, "u")
