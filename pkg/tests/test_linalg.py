import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blowupdyn.linalg import Classification, charpoly, classify, eigenvalues, is_degenerate


def _close(a, b, tol):
    return max(abs(x - y) for x, y in zip(a, b)) <= tol


def test_two_by_two_cases():
    assert eigenvalues([[0, 1], [-1, 1]]) == pytest.approx(
        (complex(0.5, -math.sqrt(3) / 2), complex(0.5, math.sqrt(3) / 2)), abs=1e-15
    )
    l1, l2 = eigenvalues([[2.0, 1.0], [0.0, 2.0]])
    assert l1 == l2 == 2.0


def test_random_four_by_four_against_numpy():
    rng = np.random.default_rng(3)
    for _ in range(200):
        M = rng.normal(size=(4, 4))
        ours = sorted(eigenvalues(M), key=lambda z: (z.real, z.imag))
        ref = sorted(np.linalg.eigvals(M), key=lambda z: (z.real, z.imag))
        assert _close(ours, ref, 1e-9 * max(1, max(abs(z) for z in ref)))


def test_charpoly_of_companion():
    # roots 1, 2, 3, 4
    c = np.poly([1, 2, 3, 4])
    C = np.zeros((4, 4))
    C[0] = -c[1:]
    C[1:, :3] = np.eye(3)
    assert np.allclose(charpoly(C), c)


def test_multiple_root_is_merged_exactly():
    a = math.sqrt(5)
    J = np.array([[-a, 0, 0, 0], [0, a, 0, 0], [-0.5, 0, a, 0], [0, 0, 0, a]])
    e = eigenvalues(J)
    assert e[1] == e[2] == e[3]
    assert _close(e, (-a, a, a, a), 1e-12)


@pytest.mark.parametrize(
    "eigs, tag",
    [
        ((1 + 0j, 2 + 0j), "UnstableNode"),
        ((-1 + 0j, -2 + 0j), "StableNode"),
        ((3 + 0j, 3 + 0j), "InflectedNode"),
        ((-1 + 0j, 2 + 0j), "Saddle"),
        ((1 - 1j, 1 + 1j), "UnstableFocus"),
        ((-1 - 1j, -1 + 1j), "StableFocus"),
        ((-1j, 1j), "Center"),
        ((0j, 1 + 0j), "Degenerate"),
    ],
)
def test_planar_tags(eigs, tag):
    assert classify(eigs).tag == tag


def test_product_and_unpaired():
    a = math.sqrt(5)
    c = classify((-a, a, a, a))
    assert c.tag == "Product" and c.factors == ("Saddle", "InflectedNode")
    assert str(c) == "Product(Saddle, InflectedNode)"
    assert classify((1 + 0j, 2 + 0j, 3 + 0j, 5 + 0j)).tag == "Unpaired"
    c = classify((-1j, 1j, 1 - 2j, 1 + 2j))
    assert c.factors == ("Center", "UnstableFocus")


def test_unknown_tag_rejected():
    with pytest.raises(ValueError):
        Classification("Spiral")


# zero or normal-range magnitudes, so scaling never underflows
_parts = st.one_of(st.just(0.0), st.floats(min_value=1e-6, max_value=10), st.floats(min_value=-10, max_value=-1e-6))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.builds(complex, _parts, _parts),
        min_size=2,
        max_size=2,
    ),
    st.floats(min_value=1e-3, max_value=1e3),
)
def test_classification_is_scale_invariant(eigs, s):
    # use a conjugate pair or two reals so the spectrum is that of a real matrix
    a, b = eigs
    pair = (a, a.conjugate()) if abs(a.imag) > 1e-6 else (complex(a.real), complex(b.real))
    assert classify(pair).tag == classify(tuple(s * z for z in pair)).tag


def test_degeneracy_rule_is_relative():
    assert is_degenerate((1e-9 + 0j, 1 + 0j))
    assert not is_degenerate((1e-7 + 0j, 1 + 0j))
    # the bound grows with the spectral radius
    assert is_degenerate((1e-6 + 0j, 1e3 + 0j))
    assert not is_degenerate((1e-4 + 0j, 1e3 + 0j))
