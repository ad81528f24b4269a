"""Candidate models: Gaussian priors with a soft output barrier, observation
likelihoods, marginal likelihood estimates, and the simulated ground truth.

The posterior a model carries after t observations is

    log p(theta | data) = log N(theta; mu, Sigma) - (m(x0, theta))^2 / (2 B^2)
                          + sum_t log phi(y_t; m(x_t, theta), sigma^2) + const

where the quadratic barrier keeps unconstrained samplers away from parameter
regions that produce enormous responses at the anchor point x0.  All
normalization constants are retained exactly (nothing is dropped), so values
from log_prior and log_posterior are directly comparable across models.
Parameter vectors that push the expression out of its domain get log-density
-inf with a zero gradient, which samplers treat as a rejection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .expr import Expr, SourceEmitter, compile_expr, exec_source, expr_names, print_expr

__all__ = [
    "Barrier",
    "ModelSpec",
    "Observation",
    "NoiseModel",
    "ModelUndefinedError",
    "log_prior",
    "log_posterior",
    "log_marginal_likelihood",
    "marginal_likelihood",
    "simulate_response",
    "make_posterior_logp",
]

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


class ModelUndefinedError(ValueError):
    """The model expression has no valid value at the requested point."""


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Known homoscedastic Gaussian measurement noise.

    sigma2 == 0 is allowed only for the noiseless simulation oracle; density
    evaluations require sigma2 > 0.
    """

    sigma2: float

    def __post_init__(self):
        if not (self.sigma2 >= 0.0):
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)


@dataclass(frozen=True, eq=False)
class Observation:
    x: np.ndarray
    y: float
    round_index: int

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen_array(self.x))
        object.__setattr__(self, "y", float(self.y))
        if self.round_index < 1:
            raise ValueError("round_index starts at 1")


@dataclass(frozen=True, eq=False)
class Barrier:
    """Soft penalty -(m(anchor, theta))^2 / (2 scale^2) added to the prior."""

    anchor: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "anchor", _frozen_array(self.anchor))
        if not (self.scale > 0.0):
            raise ValueError("barrier scale must be positive")

    @property
    def enabled(self):
        return math.isfinite(self.scale)


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """One candidate functional form with its Gaussian parameter prior."""

    name: str
    expr: Expr
    input_names: tuple
    param_names: tuple
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    barrier: Barrier | None = None

    def __post_init__(self):
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "param_names", tuple(self.param_names))
        object.__setattr__(self, "prior_mean", _frozen_array(self.prior_mean))
        object.__setattr__(self, "prior_cov", _frozen_array(self.prior_cov))
        n = len(self.param_names)
        declared = set(self.input_names) | set(self.param_names)
        if len(declared) != len(self.input_names) + len(self.param_names):
            raise ValueError(f"model {self.name!r}: duplicate names across inputs/params")
        unknown = expr_names(self.expr) - declared
        if unknown:
            raise ValueError(f"model {self.name!r}: undeclared names {sorted(unknown)}")
        if self.prior_mean.shape != (n,):
            raise ValueError(f"model {self.name!r}: prior_mean must have length {n}")
        if self.prior_cov.shape != (n, n):
            raise ValueError(f"model {self.name!r}: prior_cov must be {n}x{n}")
        if not np.allclose(self.prior_cov, self.prior_cov.T):
            raise ValueError(f"model {self.name!r}: prior_cov must be symmetric")
        try:
            np.linalg.cholesky(self.prior_cov)
        except np.linalg.LinAlgError:
            raise ValueError(f"model {self.name!r}: prior_cov is not positive definite") from None
        if self.barrier is not None and self.barrier.anchor.shape != (len(self.input_names),):
            raise ValueError(f"model {self.name!r}: barrier anchor dimension mismatch")

    @property
    def n_params(self):
        return len(self.param_names)

    def fns(self):
        return compile_expr(self.expr, self.input_names, self.param_names)


def _frozen_array(a):
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# Prior / posterior densities
# ---------------------------------------------------------------------------


def _prior_quad(spec, theta):
    n = spec.n_params
    chol = cho_factor(spec.prior_cov, lower=True)
    delta = theta - spec.prior_mean
    solved = cho_solve(chol, delta)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    lp = -0.5 * (n * LOG_2PI + logdet + delta @ solved)
    return lp, -solved


def log_prior(spec, theta):
    """Log prior density and its gradient at theta.

    Gaussian part plus the barrier penalty; -inf (zero gradient) when the
    barrier anchor evaluation hits a domain error.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise ValueError(f"theta must have length {spec.n_params}, got shape {theta.shape}")
    lp, grad = _prior_quad(spec, theta)
    if spec.barrier is not None and spec.barrier.enabled:
        v, dv = spec.fns().value_dtheta(spec.barrier.anchor, theta)
        if not np.isfinite(v):
            return -np.inf, np.zeros_like(grad)
        s = v / spec.barrier.scale**2
        lp -= 0.5 * v * s
        grad -= s * dv
    return float(lp), grad


def log_posterior(spec, theta, data, noise):
    """Log posterior (prior x observation likelihoods) with exact gradient.

    Any observation where the expression is undefined at this theta yields
    -inf with a zero-gradient sentinel.
    """
    lp, grad = log_prior(spec, theta)
    if not np.isfinite(lp):
        return lp, grad
    if not data:
        return lp, grad
    if not (noise.sigma2 > 0.0):
        raise ValueError("log_posterior requires sigma2 > 0")
    theta = np.asarray(theta, dtype=float)
    X = np.stack([obs.x for obs in data])
    y = np.array([obs.y for obs in data])
    mu, dmu = spec.fns().value_dtheta(tuple(X.T), theta)
    mu = np.broadcast_to(mu, y.shape)
    dmu = np.broadcast_to(dmu, (spec.n_params,) + y.shape)
    if not np.all(np.isfinite(mu)):
        return -np.inf, np.zeros_like(grad)
    r = y - mu
    lp += -0.5 * len(data) * math.log(2.0 * math.pi * noise.sigma2)
    lp += -0.5 * float(r @ r) / noise.sigma2
    grad = grad + dmu @ r / noise.sigma2
    if not np.isfinite(lp):
        return -np.inf, np.zeros_like(grad)
    return float(lp), grad


def log_marginal_likelihood(spec, samples, x, y, noise):
    """log of the sample average of phi(y; m(x, theta), sigma^2) over samples.

    Domain-error samples contribute zero density but still count in the
    average.  Raises ModelUndefinedError when every sample is invalid.
    """
    if not (noise.sigma2 > 0.0):
        raise ValueError("marginal likelihood requires sigma2 > 0")
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("samples must be a nonempty (N, n) array")
    x = np.asarray(x, dtype=float)
    mu = np.asarray(spec.fns().value(x, tuple(samples.T)), dtype=float)
    mu = np.broadcast_to(mu, (samples.shape[0],))
    valid = np.isfinite(mu)
    n_invalid = int(np.size(mu) - np.count_nonzero(valid))
    if n_invalid == np.size(mu):
        raise ModelUndefinedError(f"model {spec.name!r} undefined at x={x}")
    if n_invalid:
        log.debug("model %s: %d/%d samples undefined at x=%s", spec.name, n_invalid, mu.size, x)
    z = (y - mu[valid]) / noise.sigma
    log_phis = -0.5 * z * z - 0.5 * math.log(2.0 * math.pi * noise.sigma2)
    m = np.max(log_phis)
    return float(m + np.log(np.sum(np.exp(log_phis - m))) - np.log(mu.size))


def marginal_likelihood(spec, samples, x, y, noise):
    """Monte Carlo estimate of p(y | m, x); underflow-safe via log space."""
    return math.exp(log_marginal_likelihood(spec, samples, x, y, noise))


def simulate_response(spec, theta_true, x, noise, rng):
    """Ground-truth response m(x, theta_true) + N(0, sigma^2) noise drawn
    from the caller's generator; deterministic given the generator state."""
    theta_true = np.asarray(theta_true, dtype=float)
    x = np.asarray(x, dtype=float)
    v = float(spec.fns().value(x, theta_true))
    if not math.isfinite(v):
        raise ModelUndefinedError(f"model {spec.name!r} undefined at x={x}")
    if noise.sigma2 == 0.0:
        return v
    return v + noise.sigma * float(rng.standard_normal())


# ---------------------------------------------------------------------------
# Fast posterior target for the sampler
# ---------------------------------------------------------------------------
#
# HMC evaluates the posterior gradient tens of thousands of times per
# refresh; the generic path above costs too much in per-call numpy overhead.
# For each model we generate a straight-line kernel (expression value and
# parameter partials inlined by SourceEmitter) and JIT it with numba.  The
# kernel is cross-checked against log_posterior in the test suite, and a
# plain-python fallback keeps everything working if numba is unavailable.

try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

_KERNEL_CACHE = {}


def _emit_block(spec, em, indent, coord_src, fail_return):
    """Lines binding mangled input locals from coord_src, then the emitted
    expression value with a finiteness guard.  Returns the value's name."""
    pad = " " * indent
    lines = []
    for j, name in enumerate(spec.input_names):
        lines.append(f"{pad}v_{name} = {coord_src(j)}")
    val = em.value(spec.expr)
    derivs = [em.deriv(spec.expr, p) for p in spec.param_names]
    lines.extend(pad + ln for ln in em.lines)
    lines.append(f"{pad}if not np.isfinite({val}):")
    lines.append(f"{pad}    {fail_return}")
    return lines, val, derivs


def _kernel_source(spec):
    has_barrier = spec.barrier is not None and spec.barrier.enabled
    n = spec.n_params
    out = [
        "def _kernel(theta, X, y, sigma2, mu, prec, prior_const, anchor, inv_b2):",
        f"    n = {n}",
        "    grad = np.zeros(n)",
    ]
    for i, p in enumerate(spec.param_names):
        out.append(f"    v_{p} = theta[{i}]")
    out += [
        "    lp = prior_const",
        "    for i in range(n):",
        "        acc = 0.0",
        "        for j in range(n):",
        "            acc += prec[i, j] * (theta[j] - mu[j])",
        "        grad[i] = -acc",
        "        lp += -0.5 * (theta[i] - mu[i]) * acc",
    ]
    fail = "return -np.inf, np.zeros(n)"
    if has_barrier:
        em = SourceEmitter(prefix="b")
        lines, val, derivs = _emit_block(spec, em, 4, lambda j: f"anchor[{j}]", fail)
        out += lines
        out.append(f"    s_b = {val} * inv_b2")
        out.append(f"    lp += -0.5 * {val} * s_b")
        for i, d in enumerate(derivs):
            if d is not None:
                out.append(f"    grad[{i}] += -s_b * {d}")
    out += [
        "    T = y.shape[0]",
        "    if T > 0:",
        "        lp += -0.5 * T * np.log(2.0 * np.pi * sigma2)",
        "        inv_s2 = 1.0 / sigma2",
        "        for t_obs in range(T):",
    ]
    em = SourceEmitter(prefix="l")
    lines, val, derivs = _emit_block(spec, em, 12, lambda j: f"X[t_obs, {j}]", fail)
    out += lines
    out += [
        f"            r_obs = y[t_obs] - {val}",
        "            lp += -0.5 * r_obs * r_obs * inv_s2",
        "            coef = r_obs * inv_s2",
    ]
    for i, d in enumerate(derivs):
        if d is not None:
            out.append(f"            grad[{i}] += coef * {d}")
    out += [
        "    if not np.isfinite(lp):",
        f"        {fail}",
        "    return lp, grad",
    ]
    return "\n".join(out) + "\n"


def _get_kernel(spec):
    key = (
        print_expr(spec.expr),
        spec.input_names,
        spec.param_names,
        spec.barrier is not None and spec.barrier.enabled,
    )
    kernel = _KERNEL_CACHE.get(key)
    if kernel is None:
        ns = exec_source(_kernel_source(spec), f"kernel:{spec.name}")
        kernel = ns["_kernel"]
        if _HAVE_NUMBA:
            kernel = _njit(cache=False, error_model="numpy")(kernel)
        _KERNEL_CACHE[key] = kernel
    return kernel


def make_posterior_logp(spec, data, noise):
    """Callable theta -> (log posterior, gradient) over the given history.

    Semantically identical to log_posterior(spec, theta, data, noise) but
    compiled for the sampler's inner loop.
    """
    kernel = _get_kernel(spec)
    n = spec.n_params
    if data:
        if not (noise.sigma2 > 0.0):
            raise ValueError("posterior target requires sigma2 > 0")
        X = np.ascontiguousarray(np.stack([obs.x for obs in data]))
        y = np.array([obs.y for obs in data])
    else:
        X = np.zeros((0, len(spec.input_names)))
        y = np.zeros(0)
    sigma2 = noise.sigma2 if noise.sigma2 > 0.0 else 1.0  # unused when T == 0
    chol = np.linalg.cholesky(spec.prior_cov)
    prec = cho_solve((chol, True), np.eye(n))
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    prior_const = -0.5 * (n * LOG_2PI + logdet)
    if spec.barrier is not None and spec.barrier.enabled:
        anchor = np.asarray(spec.barrier.anchor, dtype=float)
        inv_b2 = 1.0 / spec.barrier.scale**2
    else:
        anchor = np.zeros(len(spec.input_names))
        inv_b2 = 0.0
    mu = np.asarray(spec.prior_mean, dtype=float)

    def target(theta):
        return kernel(np.asarray(theta, dtype=float), X, y, sigma2, mu, prec, prior_const, anchor, inv_b2)

    return target
