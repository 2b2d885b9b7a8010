import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randgibbs.base import fiber_from_trace
from randgibbs.errors import InvalidConfig, NotConcave, TooShallowWeights, UnsupportedMeasure
from randgibbs.multifractal import (
    SpectrumCurve,
    T_curve,
    bowen_ruelle_t0,
    empirical_lq,
    ld_spectrum,
    legendre,
    legendre_value,
    legendre_window_sup,
    level_set_predictions,
    solve_T,
    variational_ratio,
    write_plot_data,
)
from randgibbs.scenarios import load_scenario
from randgibbs.symbolic import constant_potential
from randgibbs.thermo import gibbs_cylinder_weights

LOG32 = math.log(2) / math.log(3)
CANTOR_RADII = 3.0 ** -np.arange(6, 13)


@pytest.fixture(scope="module")
def cookie():
    sc = load_scenario("cookie_cutter")
    return sc, sc.sample()


@pytest.fixture(scope="module")
def three_state():
    sc = load_scenario("example_three_state")
    return sc, sc.sample()


def test_cookie_T_values(cookie):
    sc, f = cookie
    assert LOG32 == pytest.approx(0.63093, abs=1e-5)
    assert solve_T(f, sc.phi, sc.psi, 0.0) == pytest.approx(-LOG32, abs=1e-8)
    assert solve_T(f, sc.phi, sc.psi, 2.0) == pytest.approx(LOG32, abs=1e-8)
    assert abs(solve_T(f, sc.phi, sc.psi, 1.0)) < 1e-12


@pytest.mark.parametrize("ref, t0", [("cookie_cutter", LOG32), ("full_interval", 1.0)])
def test_bowen_ruelle_root(ref, t0):
    sc = load_scenario(ref)
    assert bowen_ruelle_t0(sc.sample(), sc.psi) == pytest.approx(t0, abs=1e-8)


def test_three_state_t0_in_unit_interval(three_state):
    sc, f = three_state
    t0 = bowen_ruelle_t0(f, sc.psi)
    assert 0 < t0 < 1
    assert solve_T(f, sc.phi, sc.psi, 0.0) == pytest.approx(-t0, abs=1e-8)


def test_full_interval_T_is_affine():
    sc = load_scenario("full_interval")
    q = np.linspace(-3, 3, 13)
    curve = T_curve(sc.sample(), sc.phi, sc.psi, q)
    assert np.allclose(curve.y, q - 1, atol=1e-8)
    star = legendre(curve)
    # T*(a) = a at the single slope a = 1
    assert star.x.tolist() == pytest.approx([1.0])
    assert star.y[0] == pytest.approx(1.0, abs=1e-8)


def test_affine_legendre():
    curve = SpectrumCurve("T", np.linspace(-2, 2, 9), np.linspace(-2, 2, 9) * 0.5 - 0.5)
    assert legendre_value(curve, [0.5])[0] == pytest.approx(0.5)
    assert legendre_value(curve, [0.7])[0] == -np.inf


@pytest.mark.parametrize("ref", ["cookie_cutter", "cookie_cutter_unequal", "full_interval", "example_three_state"])
def test_max_of_legendre_is_t0(ref):
    sc = load_scenario(ref)
    f = sc.sample()
    q = np.linspace(-5, 5, 41)
    star = legendre(T_curve(f, sc.phi, sc.psi, q), n_points=2001)
    t0 = bowen_ruelle_t0(f, sc.psi)
    assert np.max(star.y) == pytest.approx(t0, abs=1e-6)


def test_legendre_rejects_convex_curve():
    x = np.linspace(-1, 1, 5)
    with pytest.raises(NotConcave):
        legendre(SpectrumCurve("T", x, x**2))


def test_window_sup_dominates_pointwise():
    sc = load_scenario("cookie_cutter_unequal")
    f = sc.sample()
    curve = T_curve(f, sc.phi, sc.psi, np.linspace(-5, 5, 41))
    d = np.linspace(0.1, 1.5, 29)
    sup = legendre_window_sup(curve, d, 0.05)
    assert np.all(sup >= legendre_value(curve, d) - 1e-12)
    assert legendre_window_sup(curve, [10.0], 0.05)[0] == -np.inf


def test_empirical_lq_uniform_cookie(cookie):
    sc, f = cookie
    w = gibbs_cylinder_weights(f, sc.phi, 14)
    tau = empirical_lq(f, w, CANTOR_RADII, [0.0, 1.0, 2.0], resolution=1 / 9)
    assert tau.y[1] == pytest.approx(0.0, abs=1e-9)
    assert tau.y[2] == pytest.approx(LOG32, abs=0.05)
    assert tau.y[0] == pytest.approx(-LOG32, abs=0.05)


def test_empirical_lq_needs_fine_weights(cookie):
    sc, f = cookie
    w = gibbs_cylinder_weights(f, sc.phi, 8)
    with pytest.raises(TooShallowWeights):
        empirical_lq(f, w, CANTOR_RADII, [1.0])


def test_ld_spectrum_uniform_cookie(cookie):
    sc, f = cookie
    w = gibbs_cylinder_weights(f, sc.phi, 14)
    lower, upper = ld_spectrum(f, w, CANTOR_RADII, [LOG32, 3.0], eps=0.05, resolution=1 / 9)
    assert np.all(lower.y <= upper.y)
    assert lower.y[0] == pytest.approx(LOG32, abs=0.1)
    assert lower.y[1] == -np.inf and upper.y[1] == -np.inf


def test_variational_ratio_oracle():
    sc = load_scenario("cookie_cutter_unequal")
    f = sc.sample()
    rho = (0.9, 0.1)
    h = -(0.9 * math.log(0.9) + 0.1 * math.log(0.1))
    expected = (h + 0.9 * math.log(1 / 4) + 0.1 * math.log(3 / 4)) / -math.log(3)
    assert expected == pytest.approx(0.86595, abs=1e-5)
    assert variational_ratio(f, rho, sc.phi, sc.psi, 1.0, steps=10) == pytest.approx(expected, abs=1e-12)
    # the ratio never undercuts T
    assert expected >= solve_T(f, sc.phi, sc.psi, 1.0)


def test_variational_ratio_rejects_bad_measures(cookie):
    sc, f = cookie
    with pytest.raises(UnsupportedMeasure):
        variational_ratio(f, (0.5, 0.6), sc.phi, sc.psi, 1.0, steps=4)
    g = load_scenario("example_gamma")
    gf = fiber_from_trace(g.base, [3, 2, 1, 1, 1])
    uniform = lambda step: np.full(step.l, 1 / step.l)  # noqa: E731
    with pytest.raises(UnsupportedMeasure):
        variational_ratio(gf, uniform, g.phi, g.psi, 1.0, steps=4)


def test_contraction_required():
    sc = load_scenario("cookie_cutter")
    with pytest.raises(InvalidConfig):
        solve_T(sc.sample(), sc.phi, constant_potential(0.1), 1.0)


def test_level_set_predictions():
    sc = load_scenario("cookie_cutter_unequal")
    f = sc.sample()
    T = T_curve(f, sc.phi, sc.psi, np.linspace(-5, 5, 41))
    star = legendre(T, n_points=401)
    peak_d = float(star.x[np.argmax(star.y)])
    p = level_set_predictions(T, star, peak_d, peak_d)
    assert p.dim_H == pytest.approx(np.max(star.y), abs=1e-3)
    assert not p.below_peak
    d, dp = float(star.x[20]), float(star.x[300])
    p = level_set_predictions(T, star, d, dp)
    assert p.dim_H <= p.dim_P
    assert p.dim_P == pytest.approx(np.max(star.y), abs=1e-9)
    assert p.below_peak
    with pytest.raises(InvalidConfig):
        level_set_predictions(T, star, dp, d)


def test_plot_data(tmp_path, cookie):
    sc, f = cookie
    T = T_curve(f, sc.phi, sc.psi, [0.0, 1.0, 2.0])
    path = tmp_path / "spectrum.dat"
    write_plot_data(path, [T, legendre(T)], header=["seed: 0"])
    text = path.read_text()
    assert text.startswith("# seed: 0")


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_T_concave_nondecreasing_through_anchors(seed):
    sc = load_scenario("example_three_state")
    f = sc.sample(seed=seed, horizon=12)
    curve = T_curve(f, sc.phi, sc.psi, np.linspace(-4, 4, 17), depth=6)
    assert np.all(np.diff(curve.y) >= -1e-9)
    assert np.all(np.diff(curve.y, 2) <= 1e-7)
    assert curve.y[8] == pytest.approx(-bowen_ruelle_t0(f, sc.psi, depth=6), abs=1e-7)
    assert abs(solve_T(f, sc.phi, sc.psi, 1.0, depth=6)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-4, 4))
def test_variational_ratio_bounds_T(a, q):
    sc = load_scenario("cookie_cutter_unequal")
    f = sc.sample()
    assert variational_ratio(f, (a, 1 - a), sc.phi, sc.psi, q, steps=8) >= solve_T(f, sc.phi, sc.psi, q) - 1e-9
