import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randgibbs.base import fiber_from_trace
from randgibbs.branches import BranchMap, Identity, Polynomial, SineSeries, invert_branch
from randgibbs.errors import HorizonExhausted, NonMonotoneBranch
from randgibbs.geometry import attractor_cover, coding_point, cylinder_interval, interval_endpoints
from randgibbs.scenarios import load_scenario
from randgibbs.symbolic import CylinderWord, GeometricPotential, birkhoff_sums, enumerate_words

QUADRATIC = Polynomial((0.0, 7 / 8, 1 / 8))


def three_state_trace(trace):
    return fiber_from_trace(load_scenario("example_three_state").base, trace)


def test_invert_affine():
    assert invert_branch(BranchMap(Identity(), 0.0, 0.25), 0.5) == pytest.approx(1 / 8, abs=1e-15)


def test_invert_quadratic():
    br = BranchMap(QUADRATIC, 0.0, 1.0)
    assert invert_branch(br, 1.0) == pytest.approx(1.0, abs=1e-12)
    root = (-7 + math.sqrt(65)) / 2  # x^2 + 7x - 4 = 0
    assert root == pytest.approx(0.53113, abs=1e-5)
    x = invert_branch(br, 0.5)
    assert x == pytest.approx(root, abs=1e-12)
    assert abs(br.forward(x) - 0.5) <= 1e-12


def test_inverse_monotone_in_y():
    br = BranchMap(SineSeries(6.0, 24), 0.1, 0.6)
    ys = np.linspace(0, 1, 501)
    xs = invert_branch(br, ys)
    assert np.all(np.diff(xs) > 0)
    assert np.max(np.abs(br.forward(xs) - ys)) <= 1e-12


def test_non_monotone_branch_rejected():
    with pytest.raises(NonMonotoneBranch):
        BranchMap(Polynomial((0.0, 2.0, -1.0 + 1e-3)), 0.0, 1.0)  # endpoint misses 1
    with pytest.raises(NonMonotoneBranch):
        BranchMap(Polynomial((0.0, -1.0, 2.0)), 0.0, 1.0)  # decreasing near 0


def test_series_derivative_lower_bound():
    s = SineSeries(6.0, 24)
    u = np.linspace(0, 1, 100_001)
    assert np.all(s.derivative(u) >= 0.5)
    assert s.tail_bound() < 0.042


def test_middle_third_cylinder():
    f = load_scenario("cookie_cutter").sample()
    node = cylinder_interval(f, CylinderWord(0, (1, 1)))
    assert node.left == pytest.approx(0.0, abs=1e-15)
    assert node.right == pytest.approx(1 / 9, abs=1e-15)


def test_three_state_third_interval():
    f = three_state_trace([2, 0, 0])
    node = cylinder_interval(f, CylinderWord(0, (3,)))
    assert (node.left, node.right) == pytest.approx((2 / 3, 7 / 9), abs=1e-15)


def test_length_distortion_bound():
    """log|U^v| - S_n psi(u) is at most n times the largest one-step oscillation of psi."""
    sc = load_scenario("example_three_state")
    f = sc.sample(seed=4)
    n = 6
    eps = 0.0
    for k in range(n):
        for br in f[k].branches:
            v = br.psi(np.linspace(br.a, br.b, 20001))
            eps = max(eps, float(v.max() - v.min()))
    W = enumerate_words(f, 0, n)
    left, right = interval_endpoints(f, 0, W)
    S = birkhoff_sums(f, 0, n, sc.psi)
    gap = np.abs(np.log(right - left) - S)
    assert np.all(gap <= n * eps + 1e-9)


def test_middle_third_cover():
    f = load_scenario("cookie_cutter").sample()
    cover = attractor_cover(f, 2)
    assert len(cover) == 4
    assert not cover.touching.any()
    assert np.allclose(cover.left, [0, 2 / 9, 2 / 3, 8 / 9])


def test_quarter_cover_touches():
    cover = attractor_cover(three_state_trace([0, 0, 0]), 1)
    assert np.allclose(cover.lengths, 0.25)
    assert cover.touching.all()
    nodes = cover.nodes()
    assert nodes[0].touches_right and not nodes[0].touches_left
    assert nodes[1].left_neighbor == 0 and nodes[1].right_neighbor == 2


def test_total_length_nonincreasing():
    f = load_scenario("example_three_state").sample(seed=1)
    totals = [attractor_cover(f, n).lengths.sum() for n in range(1, 9)]
    assert np.all(np.diff(totals) <= 1e-12)


def test_cover_csv(tmp_path):
    cover = attractor_cover(load_scenario("cookie_cutter").sample(), 2)
    path = tmp_path / "cover.csv"
    cover.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "depth,word,left,right,length"
    assert lines[1].startswith("2,1.1,0.0,")


def test_coding_point_fixed_points():
    f = load_scenario("cookie_cutter").sample()
    x, err = coding_point(f, CylinderWord(0, (1,) * 20))
    assert x == 0.0 and err == pytest.approx(3.0**-20)
    x, err = coding_point(f, CylinderWord(0, (2,) * 20))
    assert err == pytest.approx(3.0**-20)
    assert abs(x - 1) <= err * (1 + 1e-6)


def test_coding_point_cauchy():
    f = load_scenario("example_three_state").sample(seed=2, horizon=80)
    rng = np.random.default_rng(0)
    word = [int(rng.integers(1, f[k].l + 1)) for k in range(60)]
    n = 40
    x_n, err_n = coding_point(f, CylinderWord(0, word[:n]))
    x_n2, _ = coding_point(f, CylinderWord(0, word[: n + 2]))
    assert err_n < 1e-8
    assert abs(x_n - x_n2) <= 1e-8


def test_coding_point_tolerance_unreachable():
    f = load_scenario("cookie_cutter").sample()
    with pytest.raises(HorizonExhausted):
        coding_point(f, CylinderWord(0, (1, 2)), tol=1e-6)


def test_length_discrepancy_decreases_on_average():
    """Replica mean of max |log|U^v| - S_n psi| / n over 12 fibers."""
    means = []
    for n in (2, 4, 6, 8):
        vals = []
        for seed in range(12):
            sc = load_scenario(f"example_three_state:seed={seed}")
            f = sc.sample()
            W = enumerate_words(f, 0, n)
            left, right = interval_endpoints(f, 0, W)
            vals.append(np.max(np.abs(np.log(right - left) - birkhoff_sums(f, 0, n, sc.psi))) / n)
        means.append(np.mean(vals))
    assert np.all(np.diff(means) < 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 6))
def test_nesting_and_order(seed, n):
    f = load_scenario("example_three_state").sample(seed=seed, horizon=12)
    parents = attractor_cover(f, n)
    kids = attractor_cover(f, n + 1)
    # each child lies in the parent with the same prefix
    index = {tuple(w): i for i, w in enumerate(parents.words.tolist())}
    for w, a, b in zip(kids.words.tolist(), kids.left, kids.right):
        i = index[tuple(w[:n])]
        assert parents.left[i] - 1e-13 <= a < b <= parents.right[i] + 1e-13
    # sorted by left endpoint = lexicographic order, siblings have disjoint interiors
    assert np.all(np.diff(kids.order) > 0)
    assert np.all(kids.left[1:] >= kids.right[:-1] - 1e-13)


def test_geometric_potential_domain():
    f = load_scenario("cookie_cutter").sample()
    psi = GeometricPotential()
    assert np.allclose(psi.first_values(f, 0, np.array([[1], [2]]), np.array([0.1, 0.9])), -math.log(3))
