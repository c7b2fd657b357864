import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascadetaxis.grid import Grid
from cascadetaxis.model import (
    InitialData,
    ModelConfig,
    ModelError,
    ResupplySpec,
    f_eval,
    f_prime,
    gradroot,
    resupply_field,
    validate_initial_data,
    validate_resupply,
)
from cascadetaxis.presets import gaussian, make_initial, make_resupply, smooth_noise, time_profile

REG = ModelConfig(beta=2.0, epsilon=0.05)
PLAIN = ModelConfig(beta=3.0)


def test_config_rejects_beta_two_without_epsilon():
    with pytest.raises(ModelError, match="positive regularization parameter epsilon"):
        ModelConfig(beta=2.0, epsilon=0.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"beta": 1.5},
        {"beta": 3.0, "epsilon": 0.1},
        {"cfl_advect": 0.0},
        {"cfl_advect": 1.5},
        {"dt_init": 0.0},
        {"t_final": 0.001, "dt_init": 0.01},
        {"chi_u": -1.0},
        {"w_floor": 0.0},
    ],
)
def test_config_rejections(kwargs):
    with pytest.raises(ModelError):
        ModelConfig(**kwargs)


def test_zero_final_time_allowed():
    assert ModelConfig(t_final=0.0).t_final == 0.0


def test_f_values():
    assert f_eval(2.0, PLAIN) == 2.0 and f_prime(2.0, PLAIN) == 1.0
    assert f_eval(2.0, REG) == pytest.approx(2.0 / 1.1)
    assert f_prime(0.0, REG) == 1.0
    assert isinstance(f_eval(1.0, REG), float)
    np.testing.assert_allclose(f_eval(np.array([0.0, 10.0]), REG), [0.0, 10.0 / 1.5])
    with pytest.raises(ModelError):
        f_eval(-1.0, REG)


@given(st.floats(0.0, 1e4), st.floats(1e-3, 10.0))
def test_regularized_response_bounds(s, eps):
    cfg = ModelConfig(beta=2.0, epsilon=eps)
    F = f_eval(s, cfg)
    assert 0.0 <= F <= s + 1e-12
    assert F <= 1.0 / eps
    assert 0.0 < f_prime(s, cfg) <= 1.0


@given(st.floats(0.01, 100.0), st.floats(1e-3, 1.0))
def test_f_prime_matches_finite_difference(s, eps):
    cfg = ModelConfig(beta=2.0, epsilon=eps)
    d = 1e-6 * max(1.0, s)
    fd = (f_eval(s + d, cfg) - f_eval(s - d, cfg)) / (2 * d)
    assert f_prime(s, cfg) == pytest.approx(fd, rel=1e-6)


def test_resupply_kinds(grid8):
    assert ResupplySpec.zero().r_star == 0.0
    spec = ResupplySpec.constant(0.3)
    assert spec.r_star == 0.3
    np.testing.assert_array_equal(resupply_field(spec, grid8, 1.0), 0.3)
    g = np.linspace(0, 2, 64).reshape(8, 8)
    sep = ResupplySpec.separable(g, lambda t: math.exp(-t), 1.0)
    assert sep.r_star == 2.0
    np.testing.assert_allclose(resupply_field(sep, grid8, 1.0), g * math.exp(-1.0))
    with pytest.raises(ModelError):
        resupply_field(spec, grid8, -1.0)
    with pytest.raises(ModelError):
        ResupplySpec.constant(-0.1)
    with pytest.raises(ModelError):
        ResupplySpec.separable(-g, lambda t: 1.0, 1.0)


def test_time_factor_above_declared_bound(grid8):
    spec = ResupplySpec.separable(grid8.constant(1.0), lambda t: 2.0, 1.0)
    with pytest.raises(ModelError, match="s_max"):
        resupply_field(spec, grid8, 0.5)


def test_validate_resupply_trivial_cases(grid8):
    for spec in (ResupplySpec.zero(), ResupplySpec.constant(0.7)):
        rep = validate_resupply(spec, grid8)
        assert rep.admissible and rep.windowed_gradroot_sup == 0.0


def test_gaussian_gradroot_quadrature():
    # oracle: for g = A exp(-|x|^2 / (2 s^2)) on the plane, int |grad sqrt g|^2 = A pi
    grid = Grid(128, 128)
    spec = make_resupply(grid, "separable", peak=2.0, width=0.08)
    rep = validate_resupply(spec, grid, window=1.0, t_end=2.0)
    assert rep.admissible
    assert rep.windowed_gradroot_sup == pytest.approx(2.0 * math.pi, rel=2e-3)
    assert gradroot(grid, spec.g) == pytest.approx(2.0 * math.pi, rel=2e-3)


def test_negative_resupply_flagged(grid8):
    spec = ResupplySpec.separable(grid8.constant(1.0), lambda t: math.cos(t), 1.0)
    rep = validate_resupply(spec, grid8, window=1.0, t_end=3.0)
    assert not rep.admissible and rep.negative_samples > 0
    assert any("negative" in m for m in rep.messages)


def test_initial_data_violations(grid8):
    good = make_initial(grid8, "uniform")
    assert validate_initial_data(good).ok
    rep = validate_initial_data(InitialData(grid8, good.u0, good.v0, grid8.zeros()))
    assert not rep.ok and rep.violations[0].startswith("w0 not strictly positive")
    rep = validate_initial_data(InitialData(grid8, grid8.zeros(), good.v0, good.w0))
    assert any(m.startswith("u0 identically zero") for m in rep.violations)
    neg = good.v0.copy()
    neg[0, 0] = -1e-3
    rep = validate_initial_data(InitialData(grid8, good.u0, neg, good.w0))
    assert any(m.startswith("v0 has negative entries") for m in rep.violations)
    rep = validate_initial_data(InitialData(grid8, np.ones(3), good.v0, good.w0))
    assert not rep.ok
    assert rep.summary["w0"].integral == pytest.approx(1.0)


def test_presets_deterministic_and_resolution_independent():
    a = make_initial(Grid(16, 16), "perturbed_uniform", seed=5)
    b = make_initial(Grid(16, 16), "perturbed_uniform", seed=5)
    np.testing.assert_array_equal(a.u0, b.u0)
    coarse = make_initial(Grid(8, 8), "perturbed_uniform", seed=5, amplitude=0.2)
    fine = make_initial(Grid(32, 32), "perturbed_uniform", seed=5, amplitude=0.2)
    # fine cell centres 1 and 2 straddle the coarse centre 0 symmetrically
    assert coarse.u0[0, 0] == pytest.approx(fine.u0[1:3, 1:3].mean(), abs=5e-3)
    with pytest.raises(ValueError, match="seed"):
        make_initial(Grid(8, 8), "perturbed_uniform")
    with pytest.raises(ValueError):
        make_initial(Grid(8, 8), "nope")


def test_noise_bounded(rng):
    n = smooth_noise(Grid(20, 20), rng, 4)
    assert np.abs(n).max() <= 1.0


def test_gaussian_bump_and_profiles(grid8):
    d = make_initial(grid8, "gaussian_bump", amplitude=2.0, width=0.2)
    assert d.u0.max() > 2.0 and d.v0.max() == d.v0.min()
    assert gaussian(grid8, 0.5, 0.5, 0.1).max() <= 1.0
    for name in ("constant", "exp_decay", "cosine"):
        s, smax = time_profile(name, 2.0)
        assert all(0 <= s(t) <= smax for t in np.linspace(0, 10, 41))
    with pytest.raises(ValueError):
        time_profile("square")
