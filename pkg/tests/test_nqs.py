import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import dense_psi
from snns.nqs import (
    NetworkParams,
    NeuralState,
    PhaseParams,
    TargetState,
    all_configurations,
    amplitude,
    basis_index,
    build_target,
    configuration_of_index,
    global_amplitude,
    indices_of,
    init_random,
    log2cosh,
    log_amplitude,
    phase_value,
)
from snns.separability import PartitionSpec, make_mask


def brute_amplitude(a, b, W, s):
    """Sum over all hidden configurations h in {-1,1}^H."""
    s = np.asarray(s, float)
    total = 0j
    for h in itertools.product([-1, 1], repeat=len(b)):
        h = np.asarray(h, float)
        total += np.exp(a @ s + b @ h + s @ W @ h)
    return total


def test_basis_convention_big_endian():
    # |01> on two qubits has index 1; qubit 1 is the most significant bit
    assert basis_index([-1, 1]) == 1
    assert basis_index([1, -1]) == 2
    assert basis_index([1, -1, 1]) == 5
    assert configuration_of_index(5, 3).tolist() == [1, -1, 1]
    configs = all_configurations(3)
    assert indices_of(configs).tolist() == list(range(8))


@given(st.integers(1, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 2**n - 1))))
def test_index_roundtrip(arg):
    n, i = arg
    assert basis_index(configuration_of_index(i, n)) == i


def test_amplitude_matches_hidden_sum(rng):
    for _ in range(5):
        n, h = 3, 2
        a = rng.normal(size=n) + 1j * rng.normal(size=n)
        b = rng.normal(size=h) + 1j * rng.normal(size=h)
        W = rng.normal(size=(n, h)) + 1j * rng.normal(size=(n, h))
        p = NetworkParams(a, b, W)
        for s in all_configurations(n):
            assert amplitude(p, s) == pytest.approx(brute_amplitude(a, b, W, s), rel=1e-10)


def test_log2cosh_stable_for_large_arguments():
    z = np.array([800.0 + 0.3j, -800.0 - 1.2j, 0.5 + 0.1j])
    out = log2cosh(z)
    assert np.all(np.isfinite(out))
    # log(2 cosh z) ~ |z| for large real part; imaginary part tracks sign(z) Im z
    assert out[0] == pytest.approx(800.0 + 0.3j)
    assert out[1] == pytest.approx(800.0 + 1.2j)
    assert out[2] == pytest.approx(np.log(2 * np.cosh(0.5 + 0.1j)))


@given(st.floats(-30, 30), st.floats(-3, 3))
def test_log2cosh_matches_definition(x, y):
    z = complex(x, y)
    direct = np.log(2 * np.cosh(z))
    got = log2cosh(np.array([z]))[0]
    # compare the exponentials; logs may differ by 2 pi i
    assert np.exp(got) == pytest.approx(np.exp(direct), rel=1e-9, abs=1e-12)


def test_zero_parameters_give_uniform_amplitude():
    p = NetworkParams.zeros(3, 4)
    for s in all_configurations(3):
        assert amplitude(p, s) == pytest.approx(2.0**4)
        assert log_amplitude(p, s) == pytest.approx(4 * math.log(2))


def test_masked_state_factorizes_across_blocks(rng):
    spec = PartitionSpec.parse("1,3|2", 3)
    mask = make_mask(spec, 2)
    state = init_random(3, 6, scale=0.5, seed=3, mask=mask)
    psi = dense_psi(state).reshape(2, 2, 2).transpose(0, 2, 1).reshape(4, 2)
    # rank one across the {1,3} | {2} cut
    sv = np.linalg.svd(psi, compute_uv=False)
    assert sv[1] / sv[0] < 1e-12


def test_masked_weights_zero_on_construction():
    mask = make_mask(PartitionSpec.parse("1|2", 2), 2)
    p = NetworkParams(np.ones(2, complex), np.ones(4, complex), np.ones((2, 4), complex))
    state = NeuralState(p, mask=mask)
    assert np.all(state.amplitude_params.W[~mask.allowed] == 0)
    assert state.n_params == 2 + 4 + 4


def test_set_parameters_only_touches_allowed_slots(rng):
    mask = make_mask(PartitionSpec.parse("1|2,3", 3), 2)
    state = init_random(3, 6, seed=1, mask=mask)
    vec = rng.normal(size=state.n_params) + 1j * rng.normal(size=state.n_params)
    state.set_parameters(vec)
    assert np.all(state.amplitude_params.W[~mask.allowed] == 0)
    np.testing.assert_array_equal(state.get_parameters(), vec)


def test_set_parameters_rejects_bad_vectors():
    state = init_random(2, 2, seed=0)
    with pytest.raises(ValueError):
        state.set_parameters(np.zeros(state.n_params + 1))
    bad = np.zeros(state.n_params, complex)
    bad[0] = np.nan
    with pytest.raises(ValueError):
        state.set_parameters(bad)


def test_parameter_layout_names():
    state = init_random(2, 1, m=1, seed=0)
    names = [name for name, _ in state.slot_names()]
    assert names == ["a", "a", "b", "W", "W", "c", "c", "d", "U", "U"]
    assert len(names) == state.n_params


def test_phase_value_range_and_global_amplitude():
    state = init_random(3, 3, m=3, scale=2.0, seed=4)
    for s in all_configurations(3):
        phi = phase_value(state, s)
        assert 0.0 <= phi < 1.0
        expected = np.exp(2j * math.pi * phi) * amplitude(state.amplitude_params, s)
        assert global_amplitude(state, s) == pytest.approx(expected)
    psi = np.exp(state.log_psi(all_configurations(3)))
    np.testing.assert_allclose(psi, dense_psi(state), rtol=1e-10)


def test_phase_layer_leaves_magnitudes_unchanged():
    amp = init_random(2, 2, seed=0)
    with_phase = NeuralState(amp.amplitude_params.copy(), init_random(2, 2, m=2, seed=5).phase_params)
    np.testing.assert_allclose(np.abs(dense_psi(amp)), np.abs(dense_psi(with_phase)), rtol=1e-12)


def _finite_difference(state, configs, k, part, h=1e-6):
    base = state.get_parameters()
    step = np.zeros_like(base)
    step[k] = h if part == 0 else 1j * h
    state.set_parameters(base + step)
    up = state.log_psi(configs)
    state.set_parameters(base - step)
    down = state.log_psi(configs)
    state.set_parameters(base)
    return (up - down) / (2 * h)


@pytest.mark.parametrize("m", [0, 2])
def test_log_derivatives_match_finite_differences(m):
    mask = make_mask(PartitionSpec.parse("1,2|3", 3), 2)
    phase_mask = make_mask(PartitionSpec.parse("1,2|3", 3), 1) if m else None
    state = init_random(3, 6, m=3 if m else 0, scale=0.4, seed=7, mask=mask, phase_mask=phase_mask)
    configs = all_configurations(3)
    D = state.log_derivatives_real(configs)
    for k in range(state.n_params):
        for part in (0, 1):
            fd = _finite_difference(state, configs, k, part)
            np.testing.assert_allclose(D[:, 2 * k + part], fd, rtol=1e-6, atol=1e-8)


def test_target_normalizes_and_roundtrips():
    t = TargetState.from_vector(np.array([3, 0, 0, 4j]))
    assert np.linalg.norm(t.amplitudes) == pytest.approx(1.0)
    assert t.amplitudes[3] == pytest.approx(0.8j)
    again = TargetState.from_dict(t.to_dict())
    np.testing.assert_allclose(again.amplitudes, t.amplitudes)


def test_target_rejects_zero_vector():
    with pytest.raises(ValueError):
        TargetState.from_vector(np.zeros(4))


def test_build_target_smoothing():
    sharp = build_target([(0, 1), (3, 1)], 2)
    np.testing.assert_allclose(sharp.amplitudes, [2**-0.5, 0, 0, 2**-0.5])
    smooth = build_target([(0, 1), (3, 1)], 2, sigma2=1.0)
    j = np.arange(4)
    raw = np.exp(-(j - 0) ** 2 / 1.0) + np.exp(-(j - 3) ** 2 / 1.0)
    np.testing.assert_allclose(smooth.amplitudes, raw / np.linalg.norm(raw))
    with pytest.raises(ValueError):
        build_target([(4, 1)], 2)
    with pytest.raises(ValueError):
        build_target([(0, 1)], 2, sigma2=-1)


@given(st.integers(0, 2**31 - 1))
def test_init_random_respects_scale(seed):
    state = init_random(3, 4, m=2, scale=0.05, seed=seed)
    vec = state.get_parameters()
    assert np.all(np.abs(vec.real) <= 0.05) and np.all(np.abs(vec.imag) <= 0.05)
    np.testing.assert_array_equal(vec, init_random(3, 4, m=2, scale=0.05, seed=seed).get_parameters())
