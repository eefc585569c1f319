"""Fidelity-driven learning of a neural state toward a fixed target.

All gradients are taken with respect to the real and imaginary parts of each
complex parameter as independent real coordinates.  The complex gradient
returned by :func:`loss_and_gradient` packs them as dL/dRe p + i dL/dIm p,
which for amplitude-layer parameters coincides with
<O*> - <(phi/Psi) O*> / <phi/Psi>.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .nqs import NeuralState, TargetState, all_configurations, indices_of, init_random
from .sampling import ExpectationEstimate, SamplerConfig, batch_means_error, measure, sample_table

__all__ = [
    "LearningConfig",
    "FidelityTrace",
    "NaturalGradientSystem",
    "LearningError",
    "ZeroOverlapError",
    "DegenerateSystemError",
    "log_derivatives",
    "fidelity",
    "exact_fidelity",
    "loss_and_gradient",
    "sgd_step",
    "build_sr_system",
    "natural_gradient_step",
    "train",
    "interleave",
    "deinterleave",
]

log = logging.getLogger(__name__)

DEFAULT_RATE = {"sgd": 0.05, "natural": 0.05}


class LearningError(RuntimeError):
    pass


class ZeroOverlapError(LearningError, ValueError):
    def __init__(self, msg="zero overlap, gradient undefined"):
        super().__init__(msg)


class DegenerateSystemError(LearningError, ValueError):
    def __init__(self, msg="degenerate SR system"):
        super().__init__(msg)


@dataclass(frozen=True)
class LearningConfig:
    optimizer: Literal["sgd", "natural"] = "natural"
    learning_rate: float | None = None  # None picks the optimizer's default
    max_iters: int = 2000
    convergence_tol: float = 1e-7
    sr_shift: float = 1e-3
    pinv_cutoff: float = 1e-10
    center: bool = False
    patience: int = 50
    reinit_scale: float = 0.05

    def __post_init__(self):
        if self.optimizer not in DEFAULT_RATE:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.convergence_tol < 0 or self.sr_shift < 0 or self.pinv_cutoff < 0:
            raise ValueError("tolerances must be nonnegative")

    @property
    def eta(self) -> float:
        return self.learning_rate if self.learning_rate is not None else DEFAULT_RATE[self.optimizer]


@dataclass
class FidelityTrace:
    fidelities: np.ndarray
    std_errors: np.ndarray
    final_params: NeuralState
    converged: bool = False
    reinitialized: bool = False

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelities[-1])

    @property
    def iterations(self) -> int:
        return len(self.fidelities) - 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "fidelity", "std_error"])
        for i, (f, e) in enumerate(zip(self.fidelities, self.std_errors)):
            writer.writerow([i, repr(float(f)), repr(float(e))])
        return buf.getvalue()


@dataclass
class NaturalGradientSystem:
    """S[r, l] = Re<O_r* O_l> and force f[r] over the 2P real coordinates."""

    S: np.ndarray
    f: np.ndarray
    fidelity: float = float("nan")


def interleave(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def deinterleave(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


def log_derivatives(state: NeuralState, s) -> np.ndarray:
    """d ln Psi / d Re p_k for one configuration, one entry per unmasked parameter.

    For amplitude parameters this is the complex derivative O_k; the
    derivative with respect to Im p_k is then i*O_k.  Phase-layer entries are
    the Re-part derivatives; see :meth:`NeuralState.log_derivatives_real` for
    both parts.
    """
    s = np.asarray(s)
    if s.ndim != 1:
        raise ValueError("expected a single configuration")
    return state.log_derivatives_real(s[None, :])[0, 0::2]


def _check_dims(state: NeuralState, target: TargetState) -> None:
    if state.n_visible != target.n_visible:
        raise ValueError(
            f"state has {state.n_visible} qubits but target has {target.n_visible}"
        )


@dataclass
class _Stats:
    fidelity: float
    std_error: float
    overlap_ratio: complex  # <phi/Psi> over |Psi|^2, Psi rescaled
    weights: np.ndarray
    ratio_weights: np.ndarray  # weights * phi/Psi
    configs: np.ndarray = field(repr=False)


def _rescaled(lp: np.ndarray, shift: float) -> np.ndarray:
    return np.exp(lp - shift)


def _statistics(state: NeuralState, target: TargetState, sampler: SamplerConfig) -> _Stats:
    _check_dims(state, target)
    n = state.n_visible
    configs, w, lp = measure(state.log_psi, n, sampler)
    phi = target.amplitudes[indices_of(configs)]
    shift = float(lp.real.max())
    psi = _rescaled(lp, shift)
    if sampler.backend == "exact":
        z = float(np.sum(np.abs(psi) ** 2))
        overlap = complex(np.vdot(psi, phi))
        ratio_w = np.conj(psi) * phi / z
        fid = abs(overlap) / math.sqrt(z)
        return _Stats(fid, 0.0, overlap / z, w, ratio_w, configs)

    ratio = phi / psi
    ratio_w = w * ratio
    a = complex(ratio_w.sum())
    se_a = batch_means_error(ratio)
    # <Psi/phi> over |phi|^2 by direct draws from the tabulated target
    rng = np.random.default_rng(sampler.seed + 7919)
    tconfigs = sample_table(np.abs(target.amplitudes) ** 2, sampler.n_samples, rng)
    tphi = target.amplitudes[indices_of(tconfigs)]
    tratio = _rescaled(state.log_psi(tconfigs), shift) / tphi
    b = complex(tratio.mean())
    se_b = batch_means_error(tratio)
    prod = abs(a * b)
    fid = math.sqrt(prod)
    if prod > 0:
        rel = math.hypot(se_a / abs(a), se_b / abs(b)) if abs(a) > 0 and abs(b) > 0 else math.inf
        se = 0.5 * fid * rel
    else:
        se = 0.0
    return _Stats(fid, se, a, w, ratio_w, configs)


def fidelity(state: NeuralState, target: TargetState, sampler: SamplerConfig | None = None) -> ExpectationEstimate:
    """F = sqrt(|<phi/Psi>_Psi <Psi/phi>_phi|).

    Returns 0 when the target has no weight where the state is supported.
    """
    sampler = sampler or SamplerConfig()
    st = _statistics(state, target, sampler)
    return ExpectationEstimate(st.fidelity, st.std_error)


def exact_fidelity(state: NeuralState, target: TargetState) -> float:
    """|<Psi|phi>| / (|Psi| |phi|) from the dense state vector."""
    _check_dims(state, target)
    lp = state.log_psi(all_configurations(state.n_visible))
    psi = np.exp(lp - lp.real.max())
    return abs(np.vdot(psi, target.amplitudes)) / (np.linalg.norm(psi) * np.linalg.norm(target.amplitudes))


def _real_gradient(state: NeuralState, st: _Stats) -> tuple[np.ndarray, np.ndarray]:
    if st.overlap_ratio == 0 or not np.isfinite(st.overlap_ratio):
        raise ZeroOverlapError()
    O = state.log_derivatives_real(st.configs)
    Oc = np.conj(O)
    grad = (st.weights @ Oc - (st.ratio_weights @ Oc) / st.ratio_weights.sum()).real
    return grad, O


def loss_and_gradient(
    state: NeuralState, target: TargetState, sampler: SamplerConfig | None = None
) -> tuple[float, np.ndarray]:
    """(-log F, complex gradient with one entry per unmasked parameter)."""
    sampler = sampler or SamplerConfig()
    st = _statistics(state, target, sampler)
    grad, _ = _real_gradient(state, st)
    return -math.log(st.fidelity), deinterleave(grad)


def sgd_step(state: NeuralState, gradient: np.ndarray, eta: float) -> NeuralState:
    """p <- p - eta * gradient on unmasked slots; updates ``state`` in place."""
    gradient = np.asarray(gradient, dtype=complex)
    if not np.all(np.isfinite(gradient)):
        raise LearningError("non-finite gradient")
    state.set_parameters(state.get_parameters() - eta * gradient)
    return state


def _sr_from_stats(state: NeuralState, st: _Stats, center: bool) -> NaturalGradientSystem:
    grad, O = _real_gradient(state, st)
    if center:
        O = O - st.weights @ O
    S = (np.conj(O).T @ (st.weights[:, None] * O)).real
    S = 0.5 * (S + S.T)
    return NaturalGradientSystem(S, grad, st.fidelity)


def build_sr_system(
    state: NeuralState,
    target: TargetState,
    sampler: SamplerConfig | None = None,
    center: bool = False,
) -> NaturalGradientSystem:
    """Covariance matrix and force for the natural-gradient update.

    The force is Re<O_r* F(s)> with the diagonal residual
    F(s) = 1 - phi(s) / (Psi(s) <phi/Psi>), i.e. Psi minus the target rescaled
    so its projection on Psi is Psi itself.  This makes f vanish exactly at
    fidelity stationary points and equal the gradient of -log F.
    """
    sampler = sampler or SamplerConfig()
    return _sr_from_stats(state, _statistics(state, target, sampler), center)


def solve_sr(system: NaturalGradientSystem, shift: float, cutoff: float) -> np.ndarray:
    """pinv(S + shift*I) f with singular values below cutoff*sigma_max dropped."""
    S = system.S + shift * np.eye(system.S.shape[0])
    evals, evecs = np.linalg.eigh(S)
    sv = np.abs(evals)
    top = sv.max() if sv.size else 0.0
    if not np.isfinite(top) or top == 0.0 or top < cutoff:
        raise DegenerateSystemError()
    keep = sv > cutoff * top
    return evecs[:, keep] @ ((evecs[:, keep].T @ system.f) / evals[keep])


def natural_gradient_step(
    state: NeuralState, system: NaturalGradientSystem, config: LearningConfig
) -> NeuralState:
    delta = solve_sr(system, config.sr_shift, config.pinv_cutoff)
    if not np.all(np.isfinite(delta)):
        raise LearningError("non-finite natural-gradient step")
    state.set_parameters(state.get_parameters() - config.eta * deinterleave(delta))
    return state


def _reinitialize(state: NeuralState, scale: float, seed: int) -> None:
    amp = state.amplitude_params
    m = 0 if state.phase_params is None else state.phase_params.n_hidden
    fresh = init_random(amp.n_visible, amp.n_hidden, m, scale, seed, state.mask, state.phase_mask)
    state.set_parameters(fresh.get_parameters())


def _iteration_sampler(sampler: SamplerConfig, trial_seed: int, it: int) -> SamplerConfig:
    if sampler.backend == "exact":
        return sampler
    seed = int(np.random.SeedSequence([sampler.seed, trial_seed, it]).generate_state(1)[0])
    return sampler.with_seed(seed)


def train(
    state: NeuralState,
    target: TargetState,
    learn_cfg: LearningConfig | None = None,
    sampler_cfg: SamplerConfig | None = None,
    trial_seed: int = 0,
) -> FidelityTrace:
    """Optimize ``state`` in place toward ``target`` and record the fidelity path.

    Stops after ``max_iters`` updates or once the fidelity changed by less
    than ``convergence_tol`` for ``patience`` consecutive iterations.
    """
    learn_cfg = learn_cfg or LearningConfig()
    sampler_cfg = sampler_cfg or SamplerConfig()
    _check_dims(state, target)
    fids: list[float] = []
    errs: list[float] = []
    quiet = 0
    converged = False
    reinitialized = False
    it = 0
    while True:
        st = _statistics(state, target, _iteration_sampler(sampler_cfg, trial_seed, it))
        if fids and abs(st.fidelity - fids[-1]) < learn_cfg.convergence_tol:
            quiet += 1
        else:
            quiet = 0
        fids.append(st.fidelity)
        errs.append(st.std_error)
        if quiet >= learn_cfg.patience:
            converged = True
            break
        if it >= learn_cfg.max_iters:
            break
        try:
            if learn_cfg.optimizer == "sgd":
                grad, _ = _real_gradient(state, st)
                sgd_step(state, deinterleave(grad), learn_cfg.eta)
            else:
                system = _sr_from_stats(state, st, learn_cfg.center)
                natural_gradient_step(state, system, learn_cfg)
        except ZeroOverlapError:
            if reinitialized:
                raise LearningError("zero overlap persisted after re-initialization") from None
            log.warning("zero overlap at iteration %d; re-initializing (trial seed %d)", it, trial_seed)
            _reinitialize(state, learn_cfg.reinit_scale, trial_seed + 1_000_003)
            reinitialized = True
        it += 1
    return FidelityTrace(
        np.clip(np.array(fids), 0.0, 1.0),
        np.array(errs),
        state.copy(),
        converged,
        reinitialized,
    )
