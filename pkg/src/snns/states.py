"""Benchmark target states.

Kets are big-endian: qubit 1 is the leftmost label and the most significant
bit of the basis index, so |01> has index 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .nqs import TargetState
from .separability import PartitionSpec

__all__ = [
    "NamedTarget",
    "bell",
    "ghz",
    "w",
    "wbar",
    "plus",
    "zero",
    "one",
    "tensor",
    "variable_bell",
    "variable_w",
    "cluster_1d",
    "random_biseparable",
    "from_descriptor",
]

SQRT1_2 = 1.0 / math.sqrt(2.0)


@dataclass(eq=False)
class NamedTarget:
    name: str
    target: TargetState
    description: str = ""

    @property
    def n(self) -> int:
        return self.target.n_visible

    @property
    def amplitudes(self) -> np.ndarray:
        return self.target.amplitudes


def _named(name: str, vec, description: str = "") -> NamedTarget:
    return NamedTarget(name, TargetState.from_vector(np.asarray(vec, dtype=complex)), description)


_BELL = {
    "phi+": ([SQRT1_2, 0, 0, SQRT1_2], "(|00>+|11>)/sqrt2"),
    "phi-": ([SQRT1_2, 0, 0, -SQRT1_2], "(|00>-|11>)/sqrt2, (1 x Z)|phi+>"),
    "psi+": ([0, SQRT1_2, SQRT1_2, 0], "(|01>+|10>)/sqrt2"),
    "psi-": ([0, SQRT1_2, -SQRT1_2, 0], "(|01>-|10>)/sqrt2"),
}


def bell(which: str = "phi+") -> NamedTarget:
    key = which.lower().replace("⁺", "+").replace("⁻", "-").replace("φ", "phi").replace("ψ", "psi")
    if key not in _BELL:
        raise ValueError(f"unknown Bell state {which!r}; expected one of {sorted(_BELL)}")
    vec, desc = _BELL[key]
    return _named(f"bell:{key}", vec, desc)


def ghz(n: int = 3) -> NamedTarget:
    if n < 2:
        raise ValueError("GHZ needs n >= 2")
    vec = np.zeros(2**n, complex)
    vec[0] = vec[-1] = SQRT1_2
    return _named(f"ghz:{n}", vec, "(|0..0>+|1..1>)/sqrt2")


def _single_excitations(n: int) -> list[int]:
    return [1 << (n - 1 - q) for q in range(n)]


def w(n: int = 3) -> NamedTarget:
    if n < 3:
        raise ValueError("W needs n >= 3")
    vec = np.zeros(2**n, complex)
    vec[_single_excitations(n)] = 1 / math.sqrt(n)
    return _named(f"w:{n}", vec, "equal superposition of single excitations")


def wbar(n: int = 3) -> NamedTarget:
    if n < 3:
        raise ValueError("W-bar needs n >= 3")
    full = 2**n - 1
    vec = np.zeros(2**n, complex)
    vec[[full ^ i for i in _single_excitations(n)]] = 1 / math.sqrt(n)
    return _named(f"wbar:{n}", vec, "bit-flipped W state")


def plus() -> NamedTarget:
    return _named("plus", [SQRT1_2, SQRT1_2], "(|0>+|1>)/sqrt2")


def zero() -> NamedTarget:
    return _named("zero", [1, 0], "|0>")


def one() -> NamedTarget:
    return _named("one", [0, 1], "|1>")


def _permute_qubits(vec: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Place tensor factor axis k on qubit order[k] (0-based)."""
    n = len(order)
    t = vec.reshape((2,) * n)
    # axis k of t currently holds qubit order[k]; move it to position order[k]
    return np.moveaxis(t, list(range(n)), list(order)).reshape(-1)


def tensor(targets: Sequence[NamedTarget], assignment: PartitionSpec) -> NamedTarget:
    """Product of ``targets`` with factor m on qubit block m of ``assignment``.

    Blocks are taken in the partition's canonical order (by smallest qubit),
    and each factor's own qubit order follows the sorted block.
    """
    blocks = assignment.blocks
    if len(targets) != len(blocks):
        raise ValueError(f"{len(targets)} factors for {len(blocks)} blocks")
    for t, b in zip(targets, blocks):
        if t.n != len(b):
            raise ValueError(f"factor {t.name} has {t.n} qubits, block {b} has {len(b)}")
    vec = np.ones(1, complex)
    for t in targets:
        vec = np.kron(vec, t.amplitudes)
    order = [q - 1 for b in blocks for q in b]
    vec = _permute_qubits(vec, order)
    name = "*".join(f"{t.name}@{','.join(map(str, b))}" for t, b in zip(targets, blocks))
    return _named(name, vec, f"product over {assignment}")


def variable_bell(p: float) -> NamedTarget:
    """sqrt(p)|00> + sqrt(1-p)|11>."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return _named(f"variable_bell:{p:g}", [math.sqrt(p), 0, 0, math.sqrt(1 - p)])


def variable_w(p: float) -> NamedTarget:
    """p|W> + sqrt(1-p)|W-bar>, renormalized (the raw form has norm < 1 inside (0, 1))."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    vec = p * w(3).amplitudes + math.sqrt(1 - p) * wbar(3).amplitudes
    return _named(f"variable_w:{p:g}", vec, "renormalized")


def cluster_1d(n: int) -> NamedTarget:
    """Controlled-Z on each neighbouring pair of a chain of |+> qubits."""
    if n < 2:
        raise ValueError("cluster state needs n >= 2")
    bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    edges = (bits[:, :-1] & bits[:, 1:]).sum(axis=1)
    vec = (-1.0) ** edges / math.sqrt(2**n)
    return _named(f"cluster_1d:{n}", vec, "1-D cluster state")


def random_biseparable(block_sizes: Sequence[int], seed: int = 0) -> NamedTarget:
    """Product of independent complex-Gaussian block states on contiguous qubits."""
    rng = np.random.default_rng(seed)
    sizes = [int(k) for k in block_sizes]
    if any(k < 1 for k in sizes):
        raise ValueError("block sizes must be positive")
    vec = np.ones(1, complex)
    for k in sizes:
        block = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
        vec = np.kron(vec, block / np.linalg.norm(block))
    label = ",".join(map(str, sizes))
    return _named(f"random_biseparable:{label}@{seed}", vec, f"random product over blocks {label}")


def contiguous_spec(block_sizes: Sequence[int]) -> PartitionSpec:
    blocks, start = [], 1
    for k in block_sizes:
        blocks.append(tuple(range(start, start + k)))
        start += k
    return PartitionSpec(start - 1, tuple(blocks))


_SIMPLE = {"plus": plus, "zero": zero, "one": one}


def from_descriptor(text: str) -> NamedTarget:
    """Build a target from "name" or "name:args".

    Recognized: bell:phi+, ghz:3, w:3, wbar:3, plus, zero, one, cluster_1d:4,
    variable_bell:0.3, variable_w:0.5, random_biseparable:3,3@7, and products
    "ghz:3@1,2,3 * plus@4" (factor@qubits joined by '*').
    """
    text = text.strip()
    if "*" in text:
        factors, blocks = [], []
        for part in text.split("*"):
            desc, sep, qubits = part.strip().rpartition("@")
            if not sep:
                raise ValueError(f"product factor {part!r} needs '@qubits'")
            factors.append(from_descriptor(desc))
            blocks.append(tuple(int(q) for q in qubits.split(",")))
        n = sum(len(b) for b in blocks)
        spec = PartitionSpec(n, tuple(blocks))
        # factors must follow the canonical block order
        order = sorted(range(len(blocks)), key=lambda i: min(blocks[i]))
        return tensor([factors[i] for i in order], spec)
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    try:
        if name in _SIMPLE and not arg:
            return _SIMPLE[name]()
        if name == "bell":
            return bell(arg or "phi+")
        if name == "ghz":
            return ghz(int(arg or 3))
        if name == "w":
            return w(int(arg or 3))
        if name == "wbar":
            return wbar(int(arg or 3))
        if name == "cluster_1d":
            return cluster_1d(int(arg))
        if name == "variable_bell":
            return variable_bell(float(arg))
        if name == "variable_w":
            return variable_w(float(arg))
        if name == "random_biseparable":
            sizes, _, seed = arg.partition("@")
            return random_biseparable([int(k) for k in sizes.split(",")], int(seed or 0))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad target descriptor {text!r}: {exc}") from exc
    raise ValueError(f"unknown target descriptor {text!r}")
