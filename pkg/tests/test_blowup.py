import cmath
import math

import numpy as np
import pytest

from blowupdyn import blowup as bu
from blowupdyn import hamsys as hs
from blowupdyn.linalg import eigenvalues
from blowupdyn.roots import fd_jacobian

HALF_PI = math.pi / 2
ATAN2 = math.atan(2.0)


@pytest.fixture(scope="module")
def pendulum():
    return hs.simple_pendulum_torque()


@pytest.fixture(scope="module")
def pendulum_chart(pendulum):
    return bu.polar_chart(pendulum, hs.analyze_equilibrium(pendulum, [HALF_PI, 0.0]))


@pytest.fixture(scope="module")
def double():
    return hs.double_pendulum_torque()


@pytest.fixture(scope="module")
def double_chart(double):
    return bu.hyperspherical_chart(double, hs.analyze_equilibrium(double, [-HALF_PI, -HALF_PI, 0.0, 0.0]))


@pytest.fixture(scope="module")
def polar():
    return bu.paper_fixture("simple-eq7")


@pytest.fixture(scope="module")
def angular_roots():
    chart = bu.paper_fixture("double-eq17")
    return chart, bu.angular_equilibria(chart)


def _pullback_error(chart, sys, r, angles):
    """max |DPhi . (dr, dangles) - r F(Phi)| relative to 1 + |r F|."""
    x = np.array([r, *angles])
    D = fd_jacobian(lambda y: chart.chart_map(y[0], y[1:]), x, h=1e-6)
    lhs = D @ chart.field(r, angles)
    rhs = r * hs.vector_field(sys, chart.chart_map(r, angles))
    return np.max(np.abs(lhs - rhs)) / (1 + np.max(np.abs(rhs)))


def test_pullback_identity_polar(pendulum, pendulum_chart):
    rng = np.random.default_rng(1)
    for _ in range(20):
        r = rng.uniform(1e-3, 0.1)
        assert _pullback_error(pendulum_chart, pendulum, r, [rng.uniform(0, 2 * math.pi)]) <= 1e-8


def test_pullback_identity_hyperspherical(double, double_chart):
    rng = np.random.default_rng(2)
    for _ in range(20):
        R = rng.uniform(1e-3, 0.1)
        ang = [rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi), rng.uniform(0.1, math.pi - 0.1)]
        assert _pullback_error(double_chart, double, R, ang) <= 1e-8


def test_chart_maps(pendulum_chart, double_chart):
    assert np.allclose(pendulum_chart.chart_map(0.1, [0.0]), [HALF_PI + 0.1, 0.0], atol=1e-15)
    c = double_chart.center
    rng = np.random.default_rng(3)
    for _ in range(20):
        R = rng.uniform(0, 2)
        ang = rng.uniform(0, math.pi, 3)
        assert np.allclose(double_chart.chart_map(0.0, ang), c)
        d = double_chart.chart_map(R, ang) - c
        assert np.sum(d * d) == pytest.approx(R * R, rel=1e-14)


def test_nondegenerate_point_needs_force():
    osc = hs.harmonic_oscillator()
    eq = hs.analyze_equilibrium(osc, [0.0, 0.0])
    with pytest.raises(bu.BlowUpError):
        bu.polar_chart(osc, eq)
    assert bu.polar_chart(osc, eq, force=True).order == 1
    with pytest.raises(bu.BlowUpError):
        bu.hyperspherical_chart(osc, eq, force=True)


def test_polar_fixture_values(polar):
    lim = polar.desingularized(0.0, [math.pi / 4])
    assert lim[1] == pytest.approx(-math.sqrt(2) / 2, abs=1e-15)
    assert polar.desingularized(0.0, [0.0])[1] == 0.0


def test_polar_fixture_angular_points(polar):
    aes = bu.angular_equilibria(polar)
    angles = sorted(a.angles[0] for a in aes)
    assert angles == pytest.approx([0.0, math.pi], abs=1e-12)
    zero, pi = sorted(aes, key=lambda a: a.angles[0])
    assert zero.published and not pi.published
    assert np.allclose(zero.jacobian, [[0, 1], [-1, 1]], atol=1e-10)
    want = (complex(0.5, -math.sqrt(3) / 2), complex(0.5, math.sqrt(3) / 2))
    assert max(abs(a - b) for a, b in zip(zero.eigenvalues, want)) <= 1e-10
    assert zero.classification.tag == "UnstableFocus"
    assert zero.energy == pytest.approx(-1.0, abs=1e-15)
    # the r-first ordering of the same linearization is a saddle
    assert zero.standard["classification"].tag == "Saddle"


def test_polar_fixture_closed_form_over_parameters():
    rng = np.random.default_rng(4)
    for _ in range(50):
        m, L, g = rng.uniform(0.5, 2.0, 3)
        chart = bu.paper_fixture("simple-eq7", m=m, g=g, L=L)
        ae = bu.classify_angular(chart, bu.AngularEquilibrium(angles=(0.0,), canonical=(0.0,)))
        s = cmath.sqrt(1 - 4 * m**4 * L**6 * g**2)
        closed = sorted([(1 + s) / (2 * m * L**2), (1 - s) / (2 * m * L**2)], key=lambda z: (z.real, z.imag))
        assert max(abs(a - b) for a, b in zip(ae.eigenvalues, closed)) <= 1e-10


def test_polar_fixture_inflected_boundary():
    m = 4 ** -0.25
    chart = bu.paper_fixture("simple-eq7", m=m)
    ae = bu.classify_angular(chart, bu.AngularEquilibrium(angles=(0.0,), canonical=(0.0,)))
    assert ae.eigenvalues[0] == ae.eigenvalues[1]
    assert ae.eigenvalues[0] == pytest.approx(1 / (2 * m), abs=1e-12)
    assert ae.classification.tag == "InflectedNode"


def test_angular_fixture_residual_and_roots(angular_roots):
    chart, aes = angular_roots
    q1 = (HALF_PI, HALF_PI, ATAN2)
    assert np.allclose(chart.angular_system(q1), 0.0, atol=1e-15)
    assert len(aes) == 4
    for p in bu.PUBLISHED_ROOTS:
        assert any(max(abs(a - b) for a, b in zip(ae.angles, p)) <= 1e-8 for ae in aes)
    for ae in aes:
        assert ae.published
        assert ae.energy == pytest.approx(-3.0, abs=1e-10)
        assert str(ae.classification) == "Product(Saddle, InflectedNode)"
        assert np.max(np.abs(chart.angular_system(ae.angles))) <= 1e-9


def test_jacobian_fixture_is_triangular():
    J = bu.paper_fixture("double-eq19")
    assert np.allclose(np.triu(J, 1), 0.0)
    a = math.sqrt(5)
    assert max(abs(x - y) for x, y in zip(eigenvalues(J), (-a, a, a, a))) <= 1e-10


def test_unknown_fixture():
    with pytest.raises(KeyError):
        bu.paper_fixture("eq99")


def test_synthetic_sine_field():
    chart = bu.chart_from_field(["r*cos(theta)", "sin(theta)"])
    aes = bu.angular_equilibria(chart)
    assert sorted(a.angles[0] for a in aes) == pytest.approx([0.0, math.pi], abs=1e-12)


def test_angular_grid_minimum():
    with pytest.raises(ValueError):
        bu.angular_equilibria(bu.chart_from_field(["r", "sin(theta)"]), grid=4)


def test_recursion_resolves_synthetic_degenerate_point():
    chart = bu.chart_from_field(["r^2", "theta^2"])
    (ae,) = bu.angular_equilibria(chart)
    assert ae.angles[0] == pytest.approx(0.0, abs=1e-9) and ae.degenerate
    # the blown-up field is smooth, the finite-difference Jacobian agrees
    fd = fd_jacobian(lambda x: chart.desingularized(x[0], x[1:]), np.array([0.0, 0.0]))
    assert np.allclose(fd, chart.linearization((0.0,)), atol=1e-8)
    node = bu.recursive_blowup(chart, ae, depth=1)
    assert node.status == "resolved" and node.height == 1
    kids = node.children
    assert kids and all(not k.equilibrium.degenerate for k in kids)
    tags = sorted(k.equilibrium.classification.tag for k in kids)
    assert "Saddle" in tags


def test_recursion_contract():
    chart = bu.chart_from_field(["r^2", "theta^2"])
    (ae,) = bu.angular_equilibria(chart)
    node = bu.recursive_blowup(chart, ae, depth=0)
    assert node.status == "unresolved" and "unresolved after 0 blow-ups" in node.message
    plain = bu.chart_from_field(["r", "sin(theta)"])
    ae = bu.angular_equilibria(plain)[0]
    node = bu.recursive_blowup(plain, ae, depth=3)
    assert node.status == "resolved" and node.height == 0


def test_general_engine_on_the_pendulum(pendulum_chart):
    assert pendulum_chart.order == 1
    aes = bu.angular_equilibria(pendulum_chart)
    assert sorted(a.angles[0] for a in aes) == pytest.approx([0.0, math.pi], abs=1e-9)
    for ae in aes:
        assert ae.degenerate
        node = bu.recursive_blowup(pendulum_chart, ae, depth=3)
        assert node.status == "resolved"


def test_continuum_of_directions_is_flagged():
    # q' = p, p' = 0: the angular field on r=0 is -sin(theta)^2, isolated double roots
    sys = hs.build_system("p^2/2", ["q"], ["p"])
    chart = bu.polar_chart(sys, hs.analyze_equilibrium(sys, [0.0, 0.0]))
    aes = bu.angular_equilibria(chart)
    assert sorted(a.angles[0] for a in aes) == pytest.approx([0.0, math.pi], abs=1e-9)
    assert all(a.isolated and a.degenerate for a in aes)
    # angular field independent of theta and eta: whole circles of roots
    curve = bu.chart_from_field(
        ["r", "sin(theta)*sin(phi)", "sin(theta)*sin(phi)", "0*eta"],
        angles=("theta", "phi", "eta"),
        angle_ranges=((0.0, 2 * math.pi), (0.0, 2 * math.pi), (0.0, math.pi)),
    )
    roots = bu.angular_equilibria(curve, grid=8)
    assert roots and not any(r.isolated for r in roots)
