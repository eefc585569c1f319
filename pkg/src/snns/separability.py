"""Qubit partitions, segmentation masks, and separability counting."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "PartitionSpec",
    "SegmentationMask",
    "make_mask",
    "count_free_params",
    "enumerate_set_partitions",
    "multinomial",
    "shape_degeneracy",
    "partitions_exactly_k",
    "count_GK",
    "bell_number",
    "dobinski_bell",
]

MAX_ENUMERATE = 10
MAX_BELL = 25


@dataclass(frozen=True)
class PartitionSpec:
    """K disjoint qubit blocks covering 1..n (1-based, canonical order).

    >>> str(PartitionSpec.parse("3|1,2", 3))
    '1,2|3'
    """

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a partition needs at least one qubit")
        blocks = tuple(sorted(tuple(sorted(int(q) for q in b)) for b in self.blocks))
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        flat = [q for b in blocks for q in b]
        if sorted(flat) != list(range(1, self.n + 1)):
            raise ValueError(f"blocks {blocks} do not partition qubits 1..{self.n}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def free(cls, n: int) -> "PartitionSpec":
        return cls(n, (tuple(range(1, n + 1)),))

    @classmethod
    def full(cls, n: int) -> "PartitionSpec":
        return cls(n, tuple((q,) for q in range(1, n + 1)))

    @classmethod
    def parse(cls, text: str, n: int) -> "PartitionSpec":
        """Parse "1,2|3" syntax; "free" is the single-block partition."""
        text = text.strip()
        if text.lower() == "free":
            return cls.free(n)
        try:
            blocks = [tuple(int(q) for q in part.split(",")) for part in text.split("|")]
        except ValueError as exc:
            raise ValueError(f"cannot parse partition {text!r}") from exc
        return cls(n, tuple(blocks))

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def is_free(self) -> bool:
        return self.k == 1

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(sorted((len(b) for b in self.blocks), reverse=True))

    def zero_based(self) -> list[list[int]]:
        return [[q - 1 for q in b] for b in self.blocks]

    def refines(self, other: "PartitionSpec") -> bool:
        """True if every block of self lies inside some block of other."""
        coarse = [set(b) for b in other.blocks]
        return self.n == other.n and all(any(set(b) <= c for c in coarse) for b in self.blocks)

    def __str__(self) -> str:
        if self.is_free:
            return "free"
        return "|".join(",".join(str(q) for q in b) for b in self.blocks)

    def label(self) -> str:
        """Filesystem-friendly name, e.g. "12-3" for 1,2|3."""
        if self.is_free:
            return "free"
        return "-".join("".join(str(q) if q < 10 else f"_{q}_" for q in b) for b in self.blocks)


@dataclass(frozen=True, eq=False)
class SegmentationMask:
    """Allowed visible-hidden connections for a segmented network.

    Block m of the partition connects only to the hidden units in
    ``allocation[m]`` (0-based hidden indices).
    """

    spec: PartitionSpec
    h_total: int
    allocation: tuple[tuple[int, ...], ...]
    allowed: np.ndarray

    @property
    def n(self) -> int:
        return self.spec.n


def make_mask(spec: PartitionSpec, neurons_per_qubit: int = 2) -> SegmentationMask:
    if not isinstance(spec, PartitionSpec):
        raise TypeError("make_mask needs a PartitionSpec")
    if neurons_per_qubit < 1:
        raise ValueError("need at least one hidden neuron per qubit")
    allocation = []
    allowed = np.zeros((spec.n, neurons_per_qubit * spec.n), dtype=bool)
    start = 0
    for block in spec.zero_based():
        hidden = tuple(range(start, start + neurons_per_qubit * len(block)))
        start += len(hidden)
        allocation.append(hidden)
        allowed[np.ix_(block, hidden)] = True
    allowed.flags.writeable = False
    return SegmentationMask(spec, start, tuple(allocation), allowed)


def count_free_params(mask: SegmentationMask) -> int:
    """N + H + sum_m |H_m| |S_m|."""
    return mask.n + mask.h_total + sum(
        len(h) * len(s) for h, s in zip(mask.allocation, mask.spec.blocks)
    )


def _restricted_growth(n: int) -> Iterator[list[int]]:
    # labels[i] <= 1 + max(labels[:i]); each string is one set partition
    labels = [0] * n
    maxes = [0] * n

    def rec(i):
        if i == n:
            yield labels
            return
        top = maxes[i - 1] + 1
        for v in range(top + 1):
            labels[i] = v
            maxes[i] = max(maxes[i - 1], v)
            yield from rec(i + 1)

    if n == 0:
        yield []
        return
    labels[0] = 0
    maxes[0] = 0
    yield from rec(1)


def enumerate_set_partitions(n: int, k: int | None = None) -> list[PartitionSpec]:
    """Every set partition of {1..n}, optionally only those with k blocks."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_ENUMERATE:
        raise ValueError(f"enumeration is capped at n={MAX_ENUMERATE}")
    out = []
    for labels in _restricted_growth(n):
        count = max(labels) + 1
        if k is not None and count != k:
            continue
        blocks = [[] for _ in range(count)]
        for q, lab in enumerate(labels, start=1):
            blocks[lab].append(q)
        out.append(PartitionSpec(n, tuple(tuple(b) for b in blocks)))
    return out


def _check_shape(n: int, shape: Sequence[int]) -> tuple[int, ...]:
    shape = tuple(int(m) for m in shape)
    if any(m < 1 for m in shape) or sum(shape) != n:
        raise ValueError(f"shape {shape} is not a partition of {n}")
    return shape


def multinomial(n: int, shape: Sequence[int]) -> int:
    """n! / prod(m_j!)."""
    shape = _check_shape(n, shape)
    out = math.factorial(n)
    for m in shape:
        out //= math.factorial(m)
    return out


def shape_degeneracy(n: int, shape: Sequence[int]) -> int:
    """Number of set partitions whose block sizes form ``shape``."""
    shape = _check_shape(n, shape)
    repeats = 1
    for count in Counter(shape).values():
        repeats *= math.factorial(count)
    return multinomial(n, shape) // repeats


def partitions_exactly_k(n: int, k: int) -> list[tuple[int, ...]]:
    """Integer partitions of n into exactly k parts, parts non-increasing."""
    if not 1 <= k <= n:
        return []
    out: list[tuple[int, ...]] = []

    def rec(remaining, parts_left, cap, prefix):
        if parts_left == 0:
            if remaining == 0:
                out.append(tuple(prefix))
            return
        # later parts are <= this one, so this one must be >= the average
        lo = max(1, -(-remaining // parts_left))
        for part in range(min(cap, remaining - (parts_left - 1)), lo - 1, -1):
            rec(remaining - part, parts_left - 1, part, prefix + [part])

    rec(n, k, n, [])
    return out


def count_GK(n: int, k: int) -> int:
    """Number of ways to split n qubits into exactly k blocks.

    k = 1 is counted as 1 (the single-block arrangement).
    """
    if k == 1:
        return 1
    return sum(shape_degeneracy(n, shape) for shape in partitions_exactly_k(n, k))


def bell_number(n: int) -> int:
    """Bell number via the Bell triangle (exact integers)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > MAX_BELL:
        raise ValueError(f"bell_number is capped at n={MAX_BELL}")
    if n == 0:
        return 1
    row = [1]
    for _ in range(n - 1):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[-1]


def dobinski_bell(n: int, terms: int = 200) -> int:
    """Truncated Dobinski series (1/e) sum_k k^n / k!, rounded to an integer."""
    total = Fraction(0)
    fact = 1
    for k in range(terms):
        if k:
            fact *= k
        total += Fraction(k**n, fact)
    # 1/e to enough digits via its own series
    inv_e = Fraction(0)
    fact = 1
    for k in range(terms):
        if k:
            fact *= k
        inv_e += Fraction((-1) ** k, fact)
    return round(total * inv_e)
