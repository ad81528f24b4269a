"""Hamiltonian Monte Carlo with leapfrog integration and dual-averaging
step-size adaptation.

One chain per target; identity mass matrix; warmup draws are discarded and
the adapted step size is frozen afterwards.  Trajectory lengths are drawn
uniformly from {1, ..., leapfrog_steps} each iteration: fixed lengths
phase-lock with near-Gaussian targets (the chain revisits the same orbit
phase, collapsing the effective sample size), while jittered lengths
decorrelate it.  Targets signal invalid regions by returning (-inf, zero
gradient); trajectories that hit them (or any non-finite gradient) are
marked divergent and rejected, which is how unbounded-support sampling
coexists with partially-defined models.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "HmcConfig",
    "SampleSet",
    "LeapfrogResult",
    "LowAcceptanceWarning",
    "leapfrog",
    "sample",
    "empirical_stats",
]


class LowAcceptanceWarning(UserWarning):
    """Post-warmup acceptance rate fell below 10%."""


@dataclass(frozen=True)
class HmcConfig:
    n_samples: int = 4000
    n_warmup: int = 500
    leapfrog_steps: int = 20
    initial_step_size: float = 0.01
    target_accept: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1 or self.n_warmup < 0 or self.leapfrog_steps < 1:
            raise ValueError("HMC counts must be positive")
        if not (0.0 < self.initial_step_size):
            raise ValueError("initial_step_size must be positive")
        if not (0.0 < self.target_accept < 1.0):
            raise ValueError("target_accept must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Draws from one model's parameter posterior plus summary moments."""

    samples: np.ndarray
    accept_rate: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        self.samples.flags.writeable = False
        if not (0.0 <= self.accept_rate <= 1.0):
            raise ValueError("accept_rate must lie in [0, 1]")

    def __len__(self):
        return self.samples.shape[0]


class LeapfrogResult(NamedTuple):
    position: np.ndarray
    momentum: np.ndarray
    diverged: bool
    logp: float
    grad: np.ndarray


def leapfrog(logp_and_grad, position, momentum, step, steps):
    """Integrate Hamiltonian dynamics for ``steps`` leapfrog steps.

    Time-reversible: re-integrating from (position', -momentum') recovers
    (position, -momentum).  A non-finite gradient or log-density anywhere on
    the trajectory marks it divergent (positions stop advancing).
    """
    lp, g = logp_and_grad(np.asarray(position, dtype=float))
    return _leapfrog(logp_and_grad, np.asarray(position, dtype=float),
                     np.asarray(momentum, dtype=float), step, steps, lp, g)


def _leapfrog(f, q, p, step, steps, lp, g):
    if not (math.isfinite(lp) and np.all(np.isfinite(g))):
        return LeapfrogResult(q, p, True, lp, g)
    q = q.copy()
    p = p + 0.5 * step * g
    for i in range(steps):
        q = q + step * p
        lp, g = f(q)
        if not (math.isfinite(lp) and np.all(np.isfinite(g))):
            return LeapfrogResult(q, p, True, lp, g)
        if i < steps - 1:
            p = p + step * g
    p = p + 0.5 * step * g
    return LeapfrogResult(q, p, False, lp, g)


@dataclass
class _DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    target: float
    mu: float
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    m: int = 0
    h_bar: float = 0.0
    log_eps_bar: float = 0.0
    log_eps: float = field(default=0.0)

    def update(self, alpha):
        self.m += 1
        frac = 1.0 / (self.m + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - alpha)
        self.log_eps = self.mu - math.sqrt(self.m) / self.gamma * self.h_bar
        self.log_eps = min(max(self.log_eps, math.log(1e-10)), math.log(1e3))
        eta = self.m ** -self.kappa
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar
        return math.exp(self.log_eps)


def sample(logp_and_grad, dim, init, cfg):
    """Draw cfg.n_samples points from the target after cfg.n_warmup
    adaptation iterations.  Deterministic given cfg.seed.

    Raises ValueError when the target is not finite at ``init``.  A
    post-warmup acceptance rate below 10% raises LowAcceptanceWarning
    (the samples are still returned).
    """
    rng = np.random.default_rng(cfg.seed)
    q = np.array(init, dtype=float)
    if q.shape != (dim,):
        raise ValueError(f"init must have shape ({dim},)")
    lp, g = logp_and_grad(q)
    if not (math.isfinite(lp) and np.all(np.isfinite(g))):
        raise ValueError("initial point has non-finite log-density or gradient")

    eps = cfg.initial_step_size
    adapt = _DualAveraging(target=cfg.target_accept, mu=math.log(10.0 * eps))
    adapt.log_eps_bar = math.log(eps)
    draws = np.empty((cfg.n_samples, dim))
    accepted = 0
    for it in range(cfg.n_warmup + cfg.n_samples):
        p0 = rng.standard_normal(dim)
        steps = int(rng.integers(1, cfg.leapfrog_steps + 1))
        res = _leapfrog(logp_and_grad, q, p0, eps, steps, lp, g)
        if res.diverged:
            alpha = 0.0
        else:
            with np.errstate(over="ignore"):
                d_h = (res.logp - 0.5 * float(res.momentum @ res.momentum)) - (
                    lp - 0.5 * float(p0 @ p0)
                )
            if not math.isfinite(d_h):
                alpha = 0.0
            elif d_h >= 0:
                alpha = 1.0
            else:
                alpha = math.exp(max(d_h, -745.0))
        if rng.uniform() < alpha:
            q, lp, g = res.position, res.logp, res.grad
            accept = True
        else:
            accept = False
        if it < cfg.n_warmup:
            eps = adapt.update(alpha)
            if it == cfg.n_warmup - 1:
                eps = math.exp(adapt.log_eps_bar)
        else:
            draws[it - cfg.n_warmup] = q
            accepted += accept

    accept_rate = accepted / cfg.n_samples
    if accept_rate < 0.1:
        warnings.warn(
            f"HMC acceptance rate {accept_rate:.3f} below 0.1 after warmup",
            LowAcceptanceWarning,
            stacklevel=2,
        )
    if cfg.n_samples >= 2:
        mean, cov, _ = empirical_stats(draws)
    else:
        mean, cov = draws[0].copy(), np.zeros((dim, dim))
    return SampleSet(samples=draws, accept_rate=accept_rate, mean=mean, covariance=cov)


def empirical_stats(s):
    """(mean, covariance, per-parameter variance) of a sample set.

    Covariance uses the N-1 denominator; per-parameter variance is
    trace(covariance) / n_params.  Requires at least two samples.
    """
    samples = s.samples if isinstance(s, SampleSet) else np.asarray(s, dtype=float)
    n = samples.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / (n - 1)
    return mean, cov, float(np.trace(cov)) / samples.shape[1]
