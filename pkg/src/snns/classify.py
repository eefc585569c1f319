"""Comparative classification: performance sets, witnesses, relative fidelity.

A restricted (segmented) learner witnesses a separability form when its
performance window intersects the free learner's.  The critical-fidelity
oracle computes the best product-state overlap directly from the target
vector, independently of any network.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .learning import FidelityTrace, LearningConfig, LearningError, train
from .nqs import NeuralState, TargetState, init_random
from .sampling import SamplerConfig
from .separability import PartitionSpec, make_mask
from .states import NamedTarget

__all__ = [
    "WITNESSED",
    "ENTANGLED",
    "NetworkConfig",
    "PerformanceSet",
    "ClassificationRow",
    "ClassificationReport",
    "CriticalFidelityResult",
    "make_learner",
    "performance_set",
    "run_trials",
    "witness_decision",
    "relative_fidelity",
    "gme",
    "critical_fidelity_oracle",
    "classify",
]

log = logging.getLogger(__name__)

WITNESSED = "witnessed-separable"
ENTANGLED = "entangled-across-partition"

# Final fidelities closer than this are not resolved by the learner.
DEFAULT_RESOLUTION = 5e-3

TargetLike = Union[NamedTarget, TargetState]


def _target(t: TargetLike) -> TargetState:
    return t.target if isinstance(t, NamedTarget) else t


def _target_id(t: TargetLike) -> str:
    return t.name if isinstance(t, NamedTarget) else f"target[{t.n_visible}]"


@dataclass(frozen=True)
class NetworkConfig:
    neurons_per_qubit: int = 2
    phase_neurons_per_qubit: int = 0
    init_scale: float = 0.05


def make_learner(n: int, spec: PartitionSpec, network: NetworkConfig, seed: int) -> NeuralState:
    """Random learner segmented according to ``spec`` (unmasked when free)."""
    rho, rho_phase = network.neurons_per_qubit, network.phase_neurons_per_qubit
    mask = None if spec.is_free else make_mask(spec, rho)
    phase_mask = None if spec.is_free or rho_phase == 0 else make_mask(spec, rho_phase)
    return init_random(n, rho * n, rho_phase * n, network.init_scale, seed, mask, phase_mask)


@dataclass
class PerformanceSet:
    spec: PartitionSpec
    mean: float
    spread: float
    fidelities: tuple[float, ...]
    resolution: float = 0.0
    traces: list[FidelityTrace] = field(default_factory=list, repr=False, compare=False)
    failures: list[str] = field(default_factory=list, repr=False, compare=False)

    @property
    def trials(self) -> int:
        return len(self.fidelities)

    @property
    def window(self) -> tuple[float, float]:
        half = max(self.spread, self.resolution)
        return max(0.0, self.mean - half), min(1.0, self.mean + half)

    def to_dict(self) -> dict:
        lo, hi = self.window
        return {
            "spec": str(self.spec),
            "mean": self.mean,
            "spread": self.spread,
            "window": [lo, hi],
            "trials": self.trials,
            "fidelities": list(self.fidelities),
        }


def performance_set(spec: PartitionSpec, fidelities: Sequence[float], resolution: float = 0.0) -> PerformanceSet:
    """Mean and spread sqrt(<F^2> - <F>^2) of a set of final fidelities."""
    f = np.asarray(fidelities, dtype=float)
    if f.size == 0:
        raise ValueError("no fidelities")
    mean = float(f.mean())
    var = float(np.mean(f**2) - mean**2)
    return PerformanceSet(spec, mean, math.sqrt(max(var, 0.0)), tuple(float(x) for x in f), resolution)


def _one_trial(args):
    target, spec, learn_cfg, sampler_cfg, network, seed = args
    state = make_learner(target.n_visible, spec, network, seed)
    try:
        return train(state, target, learn_cfg, sampler_cfg, trial_seed=seed), None
    except LearningError as exc:
        return None, f"seed {seed}: {exc}"


def _workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    try:
        return max(1, int(os.environ.get("SNNS_WORKERS", "1")))
    except ValueError:
        return 1


def run_trials(
    target: TargetLike,
    spec: PartitionSpec,
    M: int = 5,
    learn_cfg: LearningConfig | None = None,
    sampler_cfg: SamplerConfig | None = None,
    base_seed: int = 0,
    network: NetworkConfig | None = None,
    resolution: float = DEFAULT_RESOLUTION,
    workers: int | None = None,
) -> PerformanceSet:
    """Train M independent learners (seeds base_seed..base_seed+M-1)."""
    if M < 2:
        raise ValueError("need at least two trials")
    tgt = _target(target)
    if spec.n != tgt.n_visible:
        raise ValueError(f"partition {spec} is for {spec.n} qubits, target has {tgt.n_visible}")
    jobs = [
        (tgt, spec, learn_cfg or LearningConfig(), sampler_cfg or SamplerConfig(), network or NetworkConfig(), base_seed + i)
        for i in range(M)
    ]
    n_workers = _workers(workers)
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            results = list(pool.map(_one_trial, jobs))
    else:
        results = [_one_trial(j) for j in jobs]
    traces = [tr for tr, _ in results if tr is not None]
    failures = [err for _, err in results if err is not None]
    for err in failures:
        log.warning("trial failed for %s: %s", spec, err)
    if len(traces) < 2:
        raise LearningError(f"only {len(traces)} of {M} trials succeeded for {spec}")
    ps = performance_set(spec, [tr.final_fidelity for tr in traces], resolution)
    ps.traces = traces
    ps.failures = failures
    return ps


def witness_decision(free: PerformanceSet, restricted: PerformanceSet) -> str:
    """Closed-interval intersection of the two performance windows."""
    flo, fhi = free.window
    rlo, rhi = restricted.window
    return WITNESSED if rlo <= fhi and flo <= rhi else ENTANGLED


def relative_fidelity(free: PerformanceSet, restricted: PerformanceSet) -> float:
    if free.mean <= 0:
        raise ValueError("free learner failed")
    return min(1.0, max(0.0, restricted.mean / free.mean))


def gme(R: float) -> float:
    """1 - R^2."""
    if not 0.0 <= R <= 1.0:
        raise ValueError(f"relative fidelity {R} outside [0, 1]")
    return 1.0 - R * R


@dataclass
class CriticalFidelityResult:
    value: float
    blocks: list[np.ndarray]
    converged: bool


def _block_tensor(vec: np.ndarray, spec: PartitionSpec) -> np.ndarray:
    n = spec.n
    order = [q for b in spec.zero_based() for q in b]
    t = vec.reshape((2,) * n).transpose(order)
    return t.reshape([2 ** len(b) for b in spec.blocks])


def _contract_except(t: np.ndarray, factors: list[np.ndarray], keep: int) -> np.ndarray:
    # contract highest axes first so lower axis numbers stay valid
    out = t
    for m in range(len(factors) - 1, -1, -1):
        if m != keep:
            out = np.tensordot(out, np.conj(factors[m]), axes=([m], [0]))
    return out


def _unfold_leading(t: np.ndarray, m: int) -> np.ndarray:
    mat = np.moveaxis(t, m, 0).reshape(t.shape[m], -1)
    u, _, _ = np.linalg.svd(mat, full_matrices=False)
    return u[:, 0]


def critical_fidelity_oracle(
    target: TargetLike,
    spec: PartitionSpec,
    restarts: int = 20,
    max_sweeps: int = 500,
    tol: float = 1e-10,
    seed: int = 0,
) -> CriticalFidelityResult:
    """max |<target| psi_1 x ... x psi_K>| over normalized block states.

    Alternating maximization: with all blocks but one fixed, the best block
    state is the normalized contraction of the target with the others.  The
    first start uses leading singular vectors of each unfolding, the rest are
    random.
    """
    tgt = _target(target)
    if tgt.n_visible > 10:
        raise ValueError("oracle is limited to 10 qubits")
    if spec.n != tgt.n_visible:
        raise ValueError("partition size does not match target")
    t = _block_tensor(tgt.amplitudes, spec)
    K = spec.k
    if K == 1:
        return CriticalFidelityResult(1.0, [tgt.amplitudes.copy()], True)
    rng = np.random.default_rng(seed)
    best: CriticalFidelityResult | None = None
    for r in range(max(1, restarts)):
        if r == 0:
            factors = [_unfold_leading(t, m) for m in range(K)]
        else:
            factors = []
            for d in t.shape:
                v = rng.normal(size=d) + 1j * rng.normal(size=d)
                factors.append(v / np.linalg.norm(v))
        value, converged = -1.0, False
        for _ in range(max_sweeps):
            prev = value
            for m in range(K):
                v = _contract_except(t, factors, m)
                norm = float(np.linalg.norm(v))
                if norm == 0.0:
                    v = rng.normal(size=v.shape) + 1j * rng.normal(size=v.shape)
                    norm = float(np.linalg.norm(v))
                factors[m] = v / norm
                value = norm
            if abs(value - prev) < tol:
                converged = True
                break
        if best is None or value > best.value:
            best = CriticalFidelityResult(min(value, 1.0), [f.copy() for f in factors], converged)
    return best


@dataclass
class ClassificationRow:
    spec: PartitionSpec
    performance: PerformanceSet
    verdict: str
    R: float
    E: float
    alpha_oracle: float | None = None
    borderline: bool = False

    def to_dict(self) -> dict:
        return {
            "spec": str(self.spec),
            "mean": self.performance.mean,
            "spread": self.performance.spread,
            "window": list(self.performance.window),
            "verdict": self.verdict,
            "R": self.R,
            "E": self.E,
            "alpha_oracle": self.alpha_oracle,
            "borderline": self.borderline,
        }


@dataclass
class ClassificationReport:
    target_id: str
    free_set: PerformanceSet
    rows: list[ClassificationRow]
    notes: list[str] = field(default_factory=list)

    def row(self, spec: PartitionSpec | str) -> ClassificationRow:
        key = str(spec)
        for r in self.rows:
            if str(r.spec) == key:
                return r
        raise KeyError(key)

    def witnessed(self) -> list[str]:
        return [str(r.spec) for r in self.rows if r.verdict == WITNESSED]

    def to_dict(self) -> dict:
        return {
            "target": self.target_id,
            "free": self.free_set.to_dict(),
            "learners": [r.to_dict() for r in self.rows],
            "notes": list(self.notes),
        }

    def table(self) -> str:
        lines = [f"target: {self.target_id}", f"{'learner':<16}{'mean':>10}{'spread':>11}{'R':>9}{'E':>9}{'alpha':>9}  verdict"]
        for r in self.rows:
            alpha = "-" if r.alpha_oracle is None else f"{r.alpha_oracle:.4f}"
            flag = " (borderline)" if r.borderline else ""
            lines.append(
                f"{str(r.spec):<16}{r.performance.mean:>10.5f}{r.performance.spread:>11.2e}"
                f"{r.R:>9.4f}{r.E:>9.4f}{alpha:>9}  {r.verdict}{flag}"
            )
        return "\n".join(lines)


def _borderline(free: PerformanceSet, restricted: PerformanceSet, margin: float = 1e-3) -> bool:
    flo, fhi = free.window
    rlo, rhi = restricted.window
    gap = max(rlo - fhi, flo - rhi)  # >0 disjoint, <=0 overlapping
    return abs(gap) <= margin


def classify(
    target: TargetLike,
    candidate_specs: Sequence[PartitionSpec | str],
    M: int = 5,
    learn_cfg: LearningConfig | None = None,
    sampler_cfg: SamplerConfig | None = None,
    base_seed: int = 0,
    network: NetworkConfig | None = None,
    resolution: float = DEFAULT_RESOLUTION,
    oracle: bool = True,
    oracle_restarts: int = 20,
    workers: int | None = None,
) -> ClassificationReport:
    """Run the free learner and every candidate, and compare them."""
    tgt = _target(target)
    n = tgt.n_visible
    specs = [PartitionSpec.parse(s, n) if isinstance(s, str) else s for s in candidate_specs]
    if not specs:
        raise ValueError("no candidate partitions")
    free_spec = PartitionSpec.free(n)
    kwargs = dict(M=M, learn_cfg=learn_cfg, sampler_cfg=sampler_cfg, base_seed=base_seed,
                  network=network, resolution=resolution, workers=workers)
    free = run_trials(tgt, free_spec, **kwargs)
    ordered = [free_spec] + [s for s in specs if not s.is_free]
    rows, notes = [], []
    for spec in ordered:
        ps = free if spec.is_free else run_trials(tgt, spec, **kwargs)
        verdict = witness_decision(free, ps)
        R = relative_fidelity(free, ps)
        alpha = critical_fidelity_oracle(tgt, spec, oracle_restarts).value if oracle else None
        rows.append(ClassificationRow(spec, ps, verdict, R, gme(R), alpha, _borderline(free, ps) and not spec.is_free))
        if verdict == ENTANGLED:
            notes.append(f"{spec}: not reproducible as this product; entanglement spans at least one cut between its blocks")
    return ClassificationReport(_target_id(target), free, rows, notes)
