import json
import math

import numpy as np
import pytest

from blowupdyn import hamsys as hs
from blowupdyn.linalg import eigenvalues

HALF_PI = math.pi / 2
P0 = [-HALF_PI, -HALF_PI, 0.0, 0.0]


@pytest.fixture(scope="module")
def pendulum():
    return hs.simple_pendulum_torque(1.0, 1.0, 1.0, 1.0)


@pytest.fixture(scope="module")
def double():
    return hs.double_pendulum_torque(1.0, 1.0, 1.0)


@pytest.fixture(scope="module")
def osc():
    return hs.build_system("p^2/2 + q^2/2", ["q"], ["p"])


def test_presets_carry_their_hamiltonians(pendulum, double):
    assert pendulum.to_dict()["hamiltonian"] == "p^2/(2*m*L^2) - m*g*L*cos(phi) - T*phi"
    h = double.to_dict()["hamiltonian"]
    assert "+ 2*m*g*L*phi1 + m*g*L*phi2" in h
    assert double.dof == 2 and double.state_names == ("phi1", "phi2", "p1", "p2")


def test_validation_errors():
    with pytest.raises(hs.SystemError, match="unbound"):
        hs.build_system("p^2/2 + k*q^2", ["q"], ["p"])
    with pytest.raises(hs.SystemError, match="collide"):
        hs.build_system("q^2", ["q"], ["q"])
    with pytest.raises(hs.SystemError, match="collide"):
        hs.build_system("q^2 + p^2", ["q"], ["p"], {"q": 1.0})
    with pytest.raises(hs.SystemError):
        hs.build_system("q^2", ["q", "r", "s"], ["p", "u", "v"])


def test_vector_field_examples(pendulum, osc):
    assert np.allclose(hs.vector_field(pendulum, [HALF_PI, 0.0]), 0.0, atol=1e-15)
    assert np.allclose(hs.vector_field(osc, [0.0, 1.0]), [1.0, 0.0])
    v = hs.vector_field(pendulum, [0.0, 1.0])
    assert np.allclose(v, [1.0, 1.0], atol=1e-15)
    fd = hs.fd_jacobian_of_field(pendulum, [0.0, 1.0])
    assert np.allclose(fd, hs.jacobian(pendulum, [0.0, 1.0]), atol=1e-8)


def test_state_length_checked(pendulum):
    with pytest.raises(ValueError):
        hs.vector_field(pendulum, [0.0, 0.0, 0.0])


def test_energies(pendulum, double, osc):
    assert hs.energy(pendulum, [HALF_PI, 0.0]) == pytest.approx(-HALF_PI, abs=1e-15)
    assert hs.energy(double, P0) == pytest.approx(-1.5 * math.pi, abs=1e-14)
    assert hs.energy(osc, [0.0, 0.0]) == 0.0


def test_jacobians(pendulum, double, osc):
    assert np.allclose(hs.jacobian(pendulum, [HALF_PI, 0.0]), [[0, 1], [0, 0]], atol=1e-15)
    assert np.allclose(hs.jacobian(osc, [0.0, 0.0]), [[0, 1], [-1, 0]])
    J = hs.jacobian(double, P0)
    assert np.max(np.abs(J - hs.fd_jacobian_of_field(double, P0))) <= 1e-7


def test_find_equilibria_examples(pendulum, double, osc):
    diag = {}
    eqs = hs.find_equilibria(pendulum, [(-math.pi, math.pi), (-1, 1)], grid=21, diagnostics=diag)
    assert len(eqs) == 1
    assert np.allclose(eqs[0].state, [HALF_PI, 0.0], atol=1e-9)
    assert diag["unique"] == 1 and diag["seeds"] == 441
    eqs = hs.find_equilibria(double, [(-math.pi, 0)] * 2 + [(-1, 1)] * 2, grid=4)
    assert any(np.allclose(e.state, P0, atol=1e-9) for e in eqs)
    eqs = hs.find_equilibria(osc, [(-1, 1), (-1, 1)], grid=5)
    assert len(eqs) == 1 and np.allclose(eqs[0].state, 0.0)


def test_find_equilibria_rejects_bad_arguments(osc):
    for box, grid, tol in [([(1, 1), (0, 1)], 5, 1e-12), ([(0, 1), (0, 1)], 1, 1e-12), ([(0, 1), (0, 1)], 5, 0.0)]:
        with pytest.raises(ValueError):
            hs.find_equilibria(osc, box, grid, tol)


def test_find_equilibria_independent_of_seeding(monkeypatch):
    sys = hs.build_system("p^2/2 - cos(q) + q^3/10", ["q"], ["p"])
    box = [(-4, 4), (-1, 1)]
    a = hs.find_equilibria(sys, box, grid=15)
    b = hs.find_equilibria(sys, box, grid=(23, 7))
    monkeypatch.setenv("BLOWUPDYN_THREADS", "4")
    c = hs.find_equilibria(sys, box, grid=15)
    for other in (b, c):
        assert len(other) == len(a)
        for x, y in zip(a, other):
            assert np.allclose(x.state, y.state, atol=1e-9)


def test_every_equilibrium_meets_residual_bound(double):
    for e in hs.find_equilibria(double, [(-math.pi, math.pi)] * 2 + [(-1, 1)] * 2, grid=3):
        scale = hs.field_scale(double, e.state)
        assert np.linalg.norm(hs.vector_field(double, e.state)) <= 1e-9 * (1 + scale)


def test_analyze_equilibrium(pendulum, double, osc):
    e = hs.analyze_equilibrium(pendulum, [HALF_PI, 0.0])
    assert e.degenerate and e.classification.tag == "Degenerate"
    e = hs.analyze_equilibrium(osc, [0.0, 0.0])
    assert e.classification.tag == "Center" and not e.degenerate
    e = hs.analyze_equilibrium(double, P0)
    assert e.degenerate
    fd_eigs = eigenvalues(hs.fd_jacobian_of_field(double, P0))
    assert max(abs(z) for z in fd_eigs) < 1e-3  # nilpotent up to difference error
    with pytest.raises(hs.NotAnEquilibriumError):
        hs.analyze_equilibrium(osc, [0.5, 0.0])


def test_spectrum_symmetric_for_canonical_jacobians(double):
    rng = np.random.default_rng(5)
    for _ in range(50):
        s = rng.uniform(-2, 2, 4)
        eig = np.array(eigenvalues(hs.jacobian(double, s)))
        scale = max(1.0, np.max(np.abs(eig)))
        for z in eig:
            assert np.min(np.abs(eig + z)) <= 1e-8 * scale


def test_eigenvalue_invariants(double):
    rng = np.random.default_rng(6)
    for _ in range(50):
        M = hs.jacobian(double, rng.uniform(-2, 2, 4))
        eig = np.array(eigenvalues(M))
        nrm = np.linalg.norm(M)
        assert abs(eig.sum() - np.trace(M)) <= 1e-9 * max(1, nrm)
        assert abs(np.prod(eig) - np.linalg.det(M)) <= 1e-9 * max(1, nrm) ** 4
        for z in eig:
            assert abs(np.linalg.det(M - z * np.eye(4))) <= 1e-8 * max(1, nrm) ** 4


def test_load_system_json_and_yaml(tmp_path):
    doc = {"hamiltonian": "p^2/(2*m) + k*q^2/2", "coordinates": ["q"], "momenta": ["p"], "parameters": {"m": 1, "k": 4}}
    f = tmp_path / "osc.json"
    f.write_text(json.dumps(doc))
    sys = hs.load_system(f, {"k": 1.0})
    assert sys.parameters == {"m": 1.0, "k": 1.0}
    y = tmp_path / "osc.yaml"
    y.write_text("hamiltonian: p^2/2 + q^2/2\ncoordinates: [q]\nmomenta: [p]\n")
    assert hs.load_system(y).name == "osc"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"hamiltonian": "q"}))
    with pytest.raises(hs.SystemError):
        hs.load_system(bad)
