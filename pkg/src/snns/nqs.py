"""Restricted Boltzmann machine wavefunctions and target states.

Spin convention: spin -1 is bit 0, spin +1 is bit 1, and qubit 1 is the most
significant bit of a basis index.  Amplitudes are unnormalized.

A state may carry a second hidden layer that only contributes a phase,

    ln Psi(s) = ln Psi_amp(s) + 2*pi*i * Phi(s),

with Phi(s) the fractional part of Re[c.s + sum_k log 2cosh(U_k.s + d_k)] / 2pi.
The phase enters additively in the exponent so a segmented phase layer keeps
the product structure of a segmented amplitude layer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .separability import SegmentationMask

__all__ = [
    "NetworkParams",
    "PhaseParams",
    "NeuralState",
    "TargetState",
    "basis_index",
    "configuration_of_index",
    "all_configurations",
    "log2cosh",
    "amplitude",
    "log_amplitude",
    "global_amplitude",
    "phase_value",
    "build_target",
    "init_random",
]


def basis_index(s: Sequence[int]) -> int:
    """Basis index of a spin configuration (qubit 1 is the MSB)."""
    idx = 0
    for v in s:
        if v == 1:
            idx = (idx << 1) | 1
        elif v == -1:
            idx <<= 1
        else:
            raise ValueError(f"spin values must be -1 or +1, got {v!r}")
    return idx


def configuration_of_index(index: int, n: int) -> np.ndarray:
    if not 0 <= index < 2**n:
        raise ValueError(f"index {index} out of range for {n} qubits")
    bits = (index >> np.arange(n - 1, -1, -1)) & 1
    return (2 * bits - 1).astype(np.int8)


def all_configurations(n: int) -> np.ndarray:
    """All 2^n configurations as a (2^n, n) int8 array in basis-index order."""
    idx = np.arange(2**n)[:, None]
    bits = (idx >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def indices_of(configs: np.ndarray) -> np.ndarray:
    n = configs.shape[-1]
    weights = 1 << np.arange(n - 1, -1, -1)
    return ((np.asarray(configs) > 0).astype(np.int64) * weights).sum(axis=-1)


def log2cosh(z):
    """log(2 cosh z) for complex z without overflow for large |Re z|."""
    z = np.asarray(z, dtype=complex)
    w = np.where(z.real >= 0, z, -z)
    return w + np.log1p(np.exp(-2.0 * w))


def _check_array(name: str, arr, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.asarray(arr, dtype=complex)
    if arr.shape != shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(eq=False)
class NetworkParams:
    """Amplitude layer: visible bias a[N], hidden bias b[H], weights W[N, H]."""

    a: np.ndarray
    b: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a)
        b = np.asarray(self.b)
        self.a = _check_array("a", a, a.shape[:1])
        self.b = _check_array("b", b, b.shape[:1])
        self.W = _check_array("W", self.W, (self.a.size, self.b.size))

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.b.size

    def copy(self):
        return type(self)(self.a.copy(), self.b.copy(), self.W.copy())

    @classmethod
    def zeros(cls, n: int, h: int):
        return cls(np.zeros(n, complex), np.zeros(h, complex), np.zeros((n, h), complex))


class PhaseParams(NetworkParams):
    """Phase layer: visible bias c[N], hidden bias d[M], weights U[N, M].

    Shares storage names with :class:`NetworkParams`; ``c``, ``d`` and ``U``
    are aliases.
    """

    @property
    def c(self):
        return self.a

    @property
    def d(self):
        return self.b

    @property
    def U(self):
        return self.W


def _free_energy(params: NetworkParams, configs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (sum_i s_i a_i + sum_j log 2cosh(theta_j), theta) for a batch."""
    s = np.asarray(configs, dtype=float)
    theta = s @ params.W + params.b
    return s @ params.a + log2cosh(theta).sum(axis=-1), theta


def _as_batch(params: NetworkParams, s) -> np.ndarray:
    s = np.atleast_2d(np.asarray(s))
    if s.shape[-1] != params.n_visible:
        raise ValueError(
            f"configuration has {s.shape[-1]} spins, network has {params.n_visible} visible units"
        )
    return s


def log_amplitude(params: NetworkParams, s: Sequence[int]) -> complex:
    """Logarithm of the traced-out RBM amplitude for one configuration."""
    return complex(_free_energy(params, _as_batch(params, s))[0][0])


def amplitude(params: NetworkParams, s: Sequence[int]) -> complex:
    """exp(sum_i s_i a_i) * prod_j 2cosh(sum_i W_ij s_i + b_j)."""
    return complex(np.exp(log_amplitude(params, s)))


@dataclass(eq=False)
class NeuralState:
    """RBM state with an optional phase layer and optional segmentation masks.

    Masked weights are zero on construction and are never written by
    :meth:`set_parameters`, so they stay exactly zero under any update.
    """

    amplitude_params: NetworkParams
    phase_params: PhaseParams | None = None
    mask: "SegmentationMask | None" = None
    phase_mask: "SegmentationMask | None" = None
    _w_allowed: np.ndarray = field(init=False, repr=False)
    _u_allowed: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        n, h = self.amplitude_params.W.shape
        self._w_allowed = self._allowed(self.mask, (n, h), "mask")
        self.amplitude_params.W[~self._w_allowed] = 0.0
        self._u_allowed = None
        if self.phase_params is not None:
            if self.phase_params.n_visible != n:
                raise ValueError("phase layer visible size differs from amplitude layer")
            self._u_allowed = self._allowed(self.phase_mask, self.phase_params.W.shape, "phase_mask")
            self.phase_params.W[~self._u_allowed] = 0.0
        elif self.phase_mask is not None:
            raise ValueError("phase_mask given without a phase layer")

    @staticmethod
    def _allowed(mask, shape, name) -> np.ndarray:
        if mask is None:
            return np.ones(shape, dtype=bool)
        allowed = np.asarray(mask.allowed, dtype=bool)
        if allowed.shape != tuple(shape):
            raise ValueError(f"{name} shape {allowed.shape} does not match weights {tuple(shape)}")
        return allowed

    @property
    def n_visible(self) -> int:
        return self.amplitude_params.n_visible

    @property
    def weight_allowed(self) -> np.ndarray:
        return self._w_allowed

    @property
    def phase_weight_allowed(self) -> np.ndarray | None:
        return self._u_allowed

    # -- parameter layout -------------------------------------------------
    # Flattened order: a, b, W[allowed], c, d, U[allowed] (row-major).

    def slot_names(self) -> list[tuple[str, tuple[int, ...]]]:
        """(array name, index) for each entry of the flattened parameter vector."""
        p = self.amplitude_params
        slots = [("a", (i,)) for i in range(p.n_visible)]
        slots += [("b", (j,)) for j in range(p.n_hidden)]
        slots += [("W", tuple(int(x) for x in ij)) for ij in np.argwhere(self._w_allowed)]
        if self.phase_params is not None:
            q = self.phase_params
            slots += [("c", (i,)) for i in range(q.n_visible)]
            slots += [("d", (k,)) for k in range(q.n_hidden)]
            slots += [("U", tuple(int(x) for x in ik)) for ik in np.argwhere(self._u_allowed)]
        return slots

    @property
    def n_amplitude_params(self) -> int:
        p = self.amplitude_params
        return p.n_visible + p.n_hidden + int(self._w_allowed.sum())

    @property
    def n_params(self) -> int:
        count = self.n_amplitude_params
        if self.phase_params is not None:
            q = self.phase_params
            count += q.n_visible + q.n_hidden + int(self._u_allowed.sum())
        return count

    def get_parameters(self) -> np.ndarray:
        p = self.amplitude_params
        parts = [p.a, p.b, p.W[self._w_allowed]]
        if self.phase_params is not None:
            q = self.phase_params
            parts += [q.a, q.b, q.W[self._u_allowed]]
        return np.concatenate(parts)

    def set_parameters(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (self.n_params,):
            raise ValueError(f"parameter vector has shape {vec.shape}, expected ({self.n_params},)")
        if not np.all(np.isfinite(vec)):
            raise ValueError("non-finite parameter update")
        pos = 0

        def take(k):
            nonlocal pos
            out = vec[pos:pos + k]
            pos += k
            return out

        p = self.amplitude_params
        p.a[:] = take(p.n_visible)
        p.b[:] = take(p.n_hidden)
        p.W[self._w_allowed] = take(int(self._w_allowed.sum()))
        if self.phase_params is not None:
            q = self.phase_params
            q.a[:] = take(q.n_visible)
            q.b[:] = take(q.n_hidden)
            q.W[self._u_allowed] = take(int(self._u_allowed.sum()))

    def copy(self) -> "NeuralState":
        return NeuralState(
            self.amplitude_params.copy(),
            None if self.phase_params is None else self.phase_params.copy(),
            self.mask,
            self.phase_mask,
        )

    # -- evaluation ---------------------------------------------------------

    def log_psi(self, configs: np.ndarray) -> np.ndarray:
        """ln Psi for a (batch, N) array of configurations."""
        configs = _as_batch(self.amplitude_params, configs)
        out, _ = _free_energy(self.amplitude_params, configs)
        if self.phase_params is not None:
            x, _ = _free_energy(self.phase_params, configs)
            out = out + 1j * x.real
        return out

    def log_derivatives_real(self, configs: np.ndarray) -> np.ndarray:
        """d ln Psi / d(real coordinate), shape (batch, 2P), complex.

        Columns are interleaved: 2k is the derivative with respect to Re p_k,
        2k+1 with respect to Im p_k.  For amplitude parameters (holomorphic)
        column 2k+1 equals i times column 2k.
        """
        configs = _as_batch(self.amplitude_params, configs)
        s = configs.astype(float)
        batch = s.shape[0]

        def hol(params, allowed):
            theta = s @ params.W + params.b
            t = np.tanh(theta)
            dw = (s[:, :, None] * t[:, None, :])[:, allowed]
            return np.concatenate([s.astype(complex), t, dw], axis=1)

        out = np.empty((batch, 2 * self.n_params), dtype=complex)
        d_amp = hol(self.amplitude_params, self._w_allowed)
        k = d_amp.shape[1]
        out[:, 0:2 * k:2] = d_amp
        out[:, 1:2 * k:2] = 1j * d_amp
        if self.phase_params is not None:
            d_ph = hol(self.phase_params, self._u_allowed)
            out[:, 2 * k::2] = 1j * d_ph.real
            out[:, 2 * k + 1::2] = -1j * d_ph.imag
        return out


def phase_value(state: NeuralState, s: Sequence[int]) -> float:
    """Phi(s) in [0, 1); zero when the state has no phase layer."""
    if state.phase_params is None:
        return 0.0
    x, _ = _free_energy(state.phase_params, _as_batch(state.phase_params, s))
    return float(np.mod(x.real[0] / (2 * math.pi), 1.0))


def global_amplitude(state: NeuralState, s: Sequence[int]) -> complex:
    """exp(2 pi i Phi(s)) * Psi_amp(s), or Psi_amp(s) without a phase layer."""
    psi = amplitude(state.amplitude_params, s)
    if state.phase_params is None:
        return psi
    return complex(np.exp(2j * math.pi * phase_value(state, s)) * psi)


@dataclass(eq=False)
class TargetState:
    """Normalized dense target vector plus the declared entries it came from."""

    n_visible: int
    amplitudes: np.ndarray
    smoothing_variance: float = 0.0
    entries: tuple[tuple[int, complex], ...] = ()

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_visible,):
            raise ValueError(f"target needs {2**self.n_visible} amplitudes, got {amps.shape}")
        norm = np.linalg.norm(amps)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError("target amplitudes must be finite and not all zero")
        self.amplitudes = amps / norm
        if not self.entries:
            nz = np.flatnonzero(self.amplitudes)
            self.entries = tuple((int(i), complex(self.amplitudes[i])) for i in nz)

    @classmethod
    def from_vector(cls, vec, sigma2: float = 0.0) -> "TargetState":
        vec = np.asarray(vec, dtype=complex)
        n = int(round(math.log2(vec.size)))
        if 2**n != vec.size:
            raise ValueError("vector length must be a power of two")
        return cls(n, vec, 0.0) if sigma2 == 0 else build_target(
            [(i, vec[i]) for i in np.flatnonzero(vec)], n, sigma2
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n_visible,
            "entries": [[i, float(z.real), float(z.imag)] for i, z in self.entries],
            "sigma2": self.smoothing_variance,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TargetState":
        try:
            n = int(doc["n"])
            entries = [(int(i), complex(re, im)) for i, re, im in doc["entries"]]
            sigma2 = float(doc.get("sigma2", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed target document: {exc}") from exc
        return build_target(entries, n, sigma2)

    def overlap(self, vec: np.ndarray) -> complex:
        return complex(np.vdot(self.amplitudes, vec))


def build_target(amplitude_map: Iterable[tuple[int, complex]], n: int, sigma2: float = 0.0) -> TargetState:
    """Dense target from (basis index, amplitude) pairs.

    With ``sigma2 > 0`` each declared entry is spread as a Gaussian over basis
    indices, amp_j = sum_i amp_i exp(-(i - j)^2 / sigma2), then renormalized.
    """
    if sigma2 < 0:
        raise ValueError("smoothing variance must be nonnegative")
    dim = 2**n
    entries = [(int(i), complex(z)) for i, z in amplitude_map]
    for i, _ in entries:
        if not 0 <= i < dim:
            raise ValueError(f"basis index {i} out of range for {n} qubits")
    if not entries or all(z == 0 for _, z in entries):
        raise ValueError("target has no nonzero amplitude")
    vec = np.zeros(dim, dtype=complex)
    if sigma2 == 0:
        for i, z in entries:
            vec[i] += z
    else:
        j = np.arange(dim, dtype=float)
        for i, z in entries:
            vec += z * np.exp(-((i - j) ** 2) / sigma2)
    return TargetState(n, vec, float(sigma2), tuple(entries))


def init_random(
    n: int,
    h: int,
    m: int = 0,
    scale: float = 0.05,
    seed: int = 0,
    mask: "SegmentationMask | None" = None,
    phase_mask: "SegmentationMask | None" = None,
) -> NeuralState:
    """Random state with Re and Im of every parameter uniform in [-scale, scale]."""
    if n < 1 or h < 1:
        raise ValueError("need at least one visible and one hidden unit")
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)

    def draw(*shape):
        return rng.uniform(-scale, scale, shape) + 1j * rng.uniform(-scale, scale, shape)

    amp = NetworkParams(draw(n), draw(h), draw(n, h))
    phase = PhaseParams(draw(n), draw(m), draw(n, m)) if m > 0 else None
    return NeuralState(amp, phase, mask, phase_mask)
