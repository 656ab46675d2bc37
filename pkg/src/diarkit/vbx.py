"""Bayesian HMM clustering of x-vector sequences (VBx).

States are speakers with latent PLDA-space means; emissions are Gaussian with
identity within-speaker covariance after the PLDA transform. Responsibilities
come from log-space forward-backward over a loop-probability HMM.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .embed_store import EmbeddingSet
from .errors import BadConfig, DimMismatch, EmptyInput
from .labels import compact
from .plda import PldaModel


@dataclass(frozen=True)
class VbxConfig:
    Fa: float = 0.3
    Fb: float = 16.0
    loopP: float = 0.9
    max_iters: int = 40
    elbo_tol: float = 1e-4
    min_speaker_mass: float = 1.0

    def __post_init__(self):
        if not self.Fa > 0:
            raise BadConfig("Fa", "must be > 0")
        if not self.Fb > 0:
            raise BadConfig("Fb", "must be > 0")
        if not 0 < self.loopP < 1:
            raise BadConfig("loopP", "must lie in (0, 1)")
        if self.max_iters < 1:
            raise BadConfig("max_iters", "must be >= 1")


@dataclass
class VbxState:
    gamma: np.ndarray
    speaker_priors: np.ndarray
    elbo_trace: list[float] = field(default_factory=list)
    kept: list[int] = field(default_factory=list)  # init cluster ids surviving, column order of gamma
    max_row_error: float = 0.0  # worst |sum(gamma[t]) - 1| seen over all iterations
    n_iters: int = 0


def _iterate(rho, G, phi, gamma, pi, cfg, state, backend):
    """Run VB updates until convergence; returns (gamma, pi)."""
    Fa, Fb, loopP = cfg.Fa, cfg.Fb, cfg.loopP
    S = gamma.shape[1]
    prev = None
    for _ in range(cfg.max_iters):
        Ns = gamma.sum(axis=0)
        inv_l = 1.0 / (1.0 + (Fa / Fb) * Ns[:, None] * phi[None, :])
        alpha = (Fa / Fb) * inv_l * (gamma.T @ rho)
        log_p = Fa * (rho @ alpha.T - 0.5 * ((inv_l + alpha ** 2) @ phi)[None, :] + G[:, None])
        with np.errstate(divide="ignore"):
            log_tr = np.log(loopP * np.eye(S) + (1.0 - loopP) * pi[None, :])
            log_pi = np.log(pi)
        gamma, tll, lfw, lbw = _kernels.forward_backward(log_p, log_tr, log_pi, backend=backend)
        sums = gamma.sum(axis=1)
        gamma = gamma / sums[:, None]
        state.max_row_error = max(state.max_row_error, float(np.max(np.abs(gamma.sum(axis=1) - 1.0))))
        elbo = tll + Fb * 0.5 * float(np.sum(np.log(inv_l) - inv_l - alpha ** 2 + 1.0))
        if len(log_p) > 1:
            switch = np.exp(logsumexp(lfw[:-1], axis=1, keepdims=True) + log_p[1:] + lbw[1:] - tll).sum(axis=0)
        else:
            switch = np.zeros(S)
        counts = gamma[0] + (1.0 - loopP) * pi * switch
        pi = counts / counts.sum()
        state.elbo_trace.append(float(elbo))
        state.n_iters += 1
        if prev is not None and elbo - prev < cfg.elbo_tol * abs(prev):
            break
        prev = elbo
    return gamma, pi


def vbx_run(es: EmbeddingSet, model: PldaModel, init, cfg: VbxConfig = VbxConfig(),
            backend: str | None = None) -> tuple[np.ndarray, VbxState]:
    """Re-cluster one time-ordered recording starting from the hard labeling ``init``."""
    if len(es) == 0:
        raise EmptyInput("VBx needs at least one embedding")
    if es.dim != model.dim:
        raise DimMismatch("vbx_run", model.dim, es.dim)
    init = compact(init)
    if len(init) != len(es):
        raise DimMismatch("init labels", len(es), len(init))
    x = model.project(es.vectors)
    T, D = x.shape
    phi = model.phi
    G = -0.5 * (np.sum(x ** 2, axis=1) + D * np.log(2 * np.pi))
    rho = x * np.sqrt(phi)[None, :]
    S = int(init.max()) + 1
    gamma = np.zeros((T, S))
    gamma[np.arange(T), init] = 1.0
    pi = np.full(S, 1.0 / S)
    kept = list(range(S))
    state = VbxState(gamma, pi, kept=kept)
    while True:
        gamma, pi = _iterate(rho, G, phi, gamma, pi, cfg, state, backend)
        mass = gamma.sum(axis=0)
        keep = mass >= cfg.min_speaker_mass
        if keep.all() or len(kept) == 1:
            break
        if not keep.any():
            keep[np.argmax(mass)] = True
        gamma = gamma[:, keep]
        sums = gamma.sum(axis=1, keepdims=True)
        gamma = np.where(sums > 0, gamma / np.where(sums > 0, sums, 1.0), 1.0 / keep.sum())
        pi = pi[keep] / pi[keep].sum()
        kept = [k for k, flag in zip(kept, keep) if flag]
    state.gamma = gamma
    state.speaker_priors = pi
    state.kept = kept
    return compact(np.argmax(gamma, axis=1)), state
