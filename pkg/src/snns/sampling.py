"""Expectation values by exact enumeration or Metropolis sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .nqs import all_configurations, basis_index

__all__ = [
    "SamplerConfig",
    "ExpectationEstimate",
    "enumerate_configs",
    "metropolis_chain",
    "expectation",
    "sample_table",
    "batch_means_error",
    "default_backend",
    "measure",
]

MAX_EXACT = 20
EXACT_DEFAULT_LIMIT = 12


def default_backend(n: int) -> str:
    return "exact" if n <= EXACT_DEFAULT_LIMIT else "mcmc"


@dataclass(frozen=True)
class SamplerConfig:
    backend: Literal["exact", "mcmc"] = "exact"
    n_samples: int = 5000
    burn_in: int = 1000
    thinning: int | None = None  # None means one sweep (N flips)
    seed: int = 0

    def __post_init__(self):
        if self.backend not in ("exact", "mcmc"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.thinning is not None and self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")

    def thin(self, n: int) -> int:
        return self.thinning if self.thinning is not None else n

    def with_seed(self, seed: int) -> "SamplerConfig":
        return SamplerConfig(self.backend, self.n_samples, self.burn_in, self.thinning, seed)


@dataclass(frozen=True)
class ExpectationEstimate:
    value: complex
    std_error: float = 0.0


def enumerate_configs(n: int) -> np.ndarray:
    """All 2^n spin configurations, row i having basis index i."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_EXACT:
        raise ValueError(f"exact enumeration is capped at n={MAX_EXACT}")
    return all_configurations(n)


def batch_means_error(values: np.ndarray, n_batches: int = 20) -> float:
    """Standard error of the mean from non-overlapping batch means."""
    values = np.asarray(values)
    n_batches = min(n_batches, values.size)
    if n_batches < 2:
        return 0.0
    size = values.size // n_batches
    means = values[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    var = np.var(means.real, ddof=1) + np.var(np.imag(means), ddof=1)
    return float(np.sqrt(var / n_batches))


def metropolis_chain(
    logweight: Callable[[np.ndarray], float],
    n: int,
    cfg: SamplerConfig,
) -> np.ndarray:
    """Single-spin-flip Metropolis samples from exp(logweight).

    Returns an (n_samples, n) int8 array.  ``logweight`` may return -inf for
    zero-weight configurations; such moves are never accepted.
    """
    rng = np.random.default_rng(cfg.seed)
    cache: dict[int, float] = {}

    def lw(s: np.ndarray) -> float:
        key = basis_index(s)
        val = cache.get(key)
        if val is None:
            val = float(logweight(s))
            if math.isnan(val) or val == math.inf:
                raise ValueError(f"non-finite log-weight {val} at configuration {s.tolist()}")
            if n <= MAX_EXACT:
                cache[key] = val
        return val

    s = None
    for _ in range(2**min(n, MAX_EXACT)):
        trial = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
        if lw(trial) > -math.inf:
            s = trial
            break
    if s is None:
        raise ValueError("could not find a starting configuration with nonzero weight")
    current = lw(s)

    thin = cfg.thin(n)
    total = cfg.burn_in + cfg.n_samples * thin
    flips = rng.integers(0, n, size=total)
    log_u = np.log(rng.random(total))
    out = np.empty((cfg.n_samples, n), dtype=np.int8)
    kept = 0
    for step in range(total):
        i = flips[step]
        s[i] = -s[i]
        proposed = lw(s)
        if log_u[step] < proposed - current:
            current = proposed
        else:
            s[i] = -s[i]
        if step >= cfg.burn_in and (step - cfg.burn_in + 1) % thin == 0:
            out[kept] = s
            kept += 1
    return out


def sample_table(probs: np.ndarray, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Independent draws of configurations from a tabulated distribution."""
    probs = np.asarray(probs, dtype=float)
    n = int(round(math.log2(probs.size)))
    idx = rng.choice(probs.size, size=n_samples, p=probs / probs.sum())
    return all_configurations(n)[idx]


def expectation(
    f: Callable[[np.ndarray], complex],
    weight: Callable[[np.ndarray], float],
    cfg: SamplerConfig,
    n: int,
) -> ExpectationEstimate:
    """<f> over the distribution proportional to ``weight``."""
    if cfg.backend == "exact":
        configs = enumerate_configs(n)
        w = np.array([_finite(weight(s), s, "weight") for s in configs], dtype=float)
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("total weight is zero")
        support = w > 0
        vals = np.array([_finite(f(s), s, "f") for s in configs[support]], dtype=complex)
        return ExpectationEstimate(complex(np.dot(vals, w[support]) / total), 0.0)

    def logweight(s):
        w = _finite(weight(s), s, "weight")
        if w < 0:
            raise ValueError("weights must be nonnegative")
        return math.log(w) if w > 0 else -math.inf

    try:
        samples = metropolis_chain(logweight, n, cfg)
    except ValueError as exc:
        if "starting configuration" in str(exc):
            raise ValueError("total weight is zero") from exc
        raise
    vals = np.array([_finite(f(s), s, "f") for s in samples], dtype=complex)
    return ExpectationEstimate(complex(vals.mean()), batch_means_error(vals))


def _finite(x, s, what):
    if not np.isfinite(x):
        raise ValueError(f"non-finite {what} at configuration {np.asarray(s).tolist()}")
    return x


def measure(
    log_psi: Callable[[np.ndarray], np.ndarray],
    n: int,
    cfg: SamplerConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Configurations, normalized weights and ln Psi for |Psi|^2 averages.

    Exact: every configuration weighted by |Psi|^2 / Z.  MCMC: chain samples
    with equal weights.
    """
    if cfg.backend == "exact":
        configs = enumerate_configs(n)
        lp = log_psi(configs)
        logw = 2.0 * lp.real
        w = np.exp(logw - logw.max())
        return configs, w / w.sum(), lp

    def logweight(s):
        return 2.0 * float(log_psi(s[None, :])[0].real)

    configs = metropolis_chain(logweight, n, cfg)
    return configs, np.full(len(configs), 1.0 / len(configs)), log_psi(configs)

