import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from snns.separability import PartitionSpec
from snns.states import (
    bell,
    cluster_1d,
    contiguous_spec,
    from_descriptor,
    ghz,
    one,
    plus,
    random_biseparable,
    tensor,
    variable_bell,
    variable_w,
    w,
    wbar,
    zero,
)

R = 1 / math.sqrt(2)


def test_bell_states():
    np.testing.assert_allclose(bell("phi+").amplitudes, [R, 0, 0, R])
    np.testing.assert_allclose(bell("phi-").amplitudes, [R, 0, 0, -R])
    np.testing.assert_allclose(bell("psi+").amplitudes, [0, R, R, 0])
    np.testing.assert_allclose(bell("psi-").amplitudes, [0, R, -R, 0])
    # phi- differs from phi+ by a local Z on qubit 2
    Z = np.diag([1, -1])
    np.testing.assert_allclose(np.kron(np.eye(2), Z) @ bell("phi+").amplitudes, bell("phi-").amplitudes)
    with pytest.raises(ValueError):
        bell("chi")


def test_ghz_w_wbar():
    g = ghz(3).amplitudes
    assert g[0] == pytest.approx(R) and g[7] == pytest.approx(R)
    assert np.count_nonzero(g) == 2
    np.testing.assert_allclose(np.nonzero(w(3).amplitudes)[0], [1, 2, 4])
    np.testing.assert_allclose(np.nonzero(wbar(3).amplitudes)[0], [3, 5, 6])
    assert abs(np.vdot(w(3).amplitudes, wbar(3).amplitudes)) == 0
    with pytest.raises(ValueError):
        ghz(1)


def test_single_qubit_states():
    np.testing.assert_allclose(plus().amplitudes, [R, R])
    np.testing.assert_allclose(zero().amplitudes, [1, 0])
    np.testing.assert_allclose(one().amplitudes, [0, 1])


def test_tensor_contiguous_is_kron():
    t = tensor([bell(), plus()], PartitionSpec.parse("1,2|3", 3))
    np.testing.assert_allclose(t.amplitudes, np.kron(bell().amplitudes, plus().amplitudes))


def test_tensor_noncontiguous_blocks():
    t = tensor([bell(), plus()], PartitionSpec.parse("1,3|2", 3))
    a = t.amplitudes
    assert a[0b101] == pytest.approx(0.5)
    assert a[0b000] == pytest.approx(0.5)
    assert a[0b010] == pytest.approx(0.5)
    assert a[0b001] == 0
    # qubit 2 factors out as |+>
    m = a.reshape(2, 2, 2).transpose(1, 0, 2).reshape(2, 4)
    assert np.linalg.matrix_rank(m) == 1


def test_tensor_size_mismatch():
    with pytest.raises(ValueError):
        tensor([bell(), plus()], PartitionSpec.parse("1|2,3", 3))
    with pytest.raises(ValueError):
        tensor([bell()], PartitionSpec.parse("1|2", 2))


def test_variable_bell_endpoints_and_grid():
    np.testing.assert_allclose(variable_bell(0).amplitudes, [0, 0, 0, 1])
    np.testing.assert_allclose(variable_bell(1).amplitudes, [1, 0, 0, 0])
    np.testing.assert_allclose(variable_bell(0.5).amplitudes, bell().amplitudes)
    with pytest.raises(ValueError):
        variable_bell(1.5)


def test_variable_w_renormalized():
    v = variable_w(0.5).amplitudes
    raw = 0.5 * w(3).amplitudes + math.sqrt(0.5) * wbar(3).amplitudes
    np.testing.assert_allclose(v, raw / np.linalg.norm(raw))
    np.testing.assert_allclose(variable_w(1).amplitudes, w(3).amplitudes)
    np.testing.assert_allclose(variable_w(0).amplitudes, wbar(3).amplitudes)


@pytest.mark.parametrize("n", range(2, 7))
def test_cluster_flat_signs(n):
    a = cluster_1d(n).amplitudes
    np.testing.assert_allclose(np.abs(a), 2 ** (-n / 2))
    assert np.allclose(a.imag, 0)


def test_cluster_matches_controlled_z_circuit():
    n = 4
    state = np.full(2**n, 2 ** (-n / 2))
    idx = np.arange(2**n)
    for q in range(n - 1):
        # controlled-Z between neighbours q and q+1 (qubit 1 is the top bit)
        both = ((idx >> (n - 1 - q)) & 1) & ((idx >> (n - 2 - q)) & 1)
        state = state * np.where(both, -1, 1)
    np.testing.assert_allclose(cluster_1d(n).amplitudes, state)


def test_random_biseparable_is_product():
    t = random_biseparable([3, 3], seed=1)
    m = t.amplitudes.reshape(8, 8)
    sv = np.linalg.svd(m, compute_uv=False)
    assert sv[1] < 1e-12
    np.testing.assert_array_equal(t.amplitudes, random_biseparable([3, 3], seed=1).amplitudes)


def test_contiguous_spec():
    assert str(contiguous_spec([3, 3])) == "1,2,3|4,5,6"


@pytest.mark.parametrize(
    "text,n",
    [("bell:phi+", 2), ("ghz:3", 3), ("w:3", 3), ("wbar", 3), ("plus", 1), ("cluster_1d:4", 4),
     ("variable_bell:0.3", 2), ("variable_w:0.5", 3), ("random_biseparable:3,3@7", 6),
     ("bell:phi+@1,3 * plus@2", 3), ("ghz:3@1,2,3 * plus@4", 4)],
)
def test_descriptors(text, n):
    t = from_descriptor(text)
    assert t.n == n
    assert np.linalg.norm(t.amplitudes) == pytest.approx(1.0)


def test_descriptor_product_order_independent():
    a = from_descriptor("plus@2 * bell:phi+@1,3").amplitudes
    b = from_descriptor("bell:phi+@1,3 * plus@2").amplitudes
    np.testing.assert_allclose(a, b)


@pytest.mark.parametrize("text", ["nope", "ghz:x", "bell:phi+ * plus", "variable_bell:2"])
def test_bad_descriptors(text):
    with pytest.raises(ValueError):
        from_descriptor(text)


@given(st.floats(0, 1))
def test_variable_families_normalized(p):
    assert np.linalg.norm(variable_bell(p).amplitudes) == pytest.approx(1.0)
    assert np.linalg.norm(variable_w(p).amplitudes) == pytest.approx(1.0)
