"""Design-criterion scores over candidate points, all oriented to maximize.

Three criteria are exposed:

* ``re``     -- response entropy H(y|x): favor points where the predictive
  is most spread out.
* ``js``     -- Jensen-Shannon / mutual information: the expected KL of each
  model's predictive from the pooled predictive, computed as
  H(y|x) - sum_m p(m) H(y|m,x).
* ``logdet`` -- log |det D(x)| of the pairwise-KL matrix over (model,
  sample) response Gaussians, on a deterministic per-model subsample.

When every model's parameters are point masses, H(y|m,x) is the constant
noise entropy and the re/js argmaxes coincide; with parameter uncertainty
they can differ, so both scores are available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import predictive

__all__ = [
    "Criterion",
    "CRITERION_KINDS",
    "kl_gauss",
    "score_re",
    "score_js",
    "score_logdet",
    "score",
    "score_and_grad",
]

CRITERION_KINDS = ("re", "js", "logdet")


@dataclass(frozen=True)
class Criterion:
    kind: str = "re"
    subsample_per_model: int = 50
    jitter: float = 1e-8

    def __post_init__(self):
        if self.kind not in CRITERION_KINDS:
            raise ValueError(f"criterion must be one of {CRITERION_KINDS}, got {self.kind!r}")
        if self.subsample_per_model < 2:
            raise ValueError("subsample_per_model must be >= 2")


def kl_gauss(mu1, mu2, sigma2):
    """KL divergence between two response Gaussians with equal variance:
    (mu1 - mu2)^2 / (2 sigma^2)."""
    if not (sigma2 > 0.0):
        raise ValueError("sigma2 must be positive")
    return (mu1 - mu2) ** 2 / (2.0 * sigma2)


def score_re(problem, belief, x, backend=None):
    """Response entropy H(y|x) under the current belief."""
    mv = predictive.build_mixture(problem, belief, x)
    return predictive.mixture_entropy(
        mv, backend or problem.backend, problem.grid_nodes, problem.quad_nodes
    )


def score_js(problem, belief, x, backend=None):
    """H(y|x) - sum_m p(m) H(y|m,x); zero when models are indistinguishable."""
    backend = backend or problem.backend
    if backend == "conv":
        return predictive.js_divergence_conv(problem, belief, x)[0]
    h_total = score_re(problem, belief, x, backend)
    h_models = predictive.per_model_entropies(problem, belief, x, backend)
    mv = predictive.build_mixture(problem, belief, x)
    alive = mv.weights > 0.0
    return h_total - float(mv.weights[alive] @ h_models[alive])


def _subsample_means(problem, belief, x, k):
    x = np.asarray(x, dtype=float)
    groups = []
    for spec, ss in zip(problem.models, belief.sample_sets):
        sub = ss.samples[:k]
        mu = np.asarray(spec.fns().value(x, tuple(sub.T)), dtype=float)
        mu = np.broadcast_to(mu, (sub.shape[0],))
        groups.append(mu[np.isfinite(mu)])
    v = np.concatenate(groups)
    if v.size > 10_000:
        raise ValueError(f"logdet matrix would have {v.size} rows; reduce subsample_per_model")
    if v.size < 2:
        raise ValueError("logdet needs at least two valid (model, sample) pairs")
    return v


def score_logdet(problem, belief, x, criterion=None):
    """log |det (D(x) + jitter I)| with D the pairwise-KL matrix over the
    per-model subsamples; hollow D makes |det| the usable magnitude."""
    crit = criterion or problem.criterion
    v = _subsample_means(problem, belief, x, crit.subsample_per_model)
    d_mat = kl_gauss(v[:, None], v[None, :], problem.noise.sigma2)
    d_mat = d_mat + crit.jitter * np.eye(v.size)
    _, logabs = np.linalg.slogdet(d_mat)
    return float(logabs)


def _logdet_and_grad(problem, belief, x, crit):
    x = np.asarray(x, dtype=float)
    k = crit.subsample_per_model
    vs, dvs = [], []
    for spec, ss in zip(problem.models, belief.sample_sets):
        sub = ss.samples[:k]
        v, dv = spec.fns().value_dx(x, tuple(sub.T))
        v = np.broadcast_to(v, (sub.shape[0],))
        dv = np.broadcast_to(dv, (problem.box.dim, sub.shape[0]))
        ok = np.isfinite(v) & np.all(np.isfinite(dv), axis=0)
        vs.append(v[ok])
        dvs.append(dv[:, ok])
    v = np.concatenate(vs)
    dv = np.concatenate(dvs, axis=1)
    if v.size > 10_000:
        raise ValueError(f"logdet matrix would have {v.size} rows; reduce subsample_per_model")
    diff = v[:, None] - v[None, :]
    a_mat = diff**2 / (2.0 * problem.noise.sigma2) + crit.jitter * np.eye(v.size)
    _, logabs = np.linalg.slogdet(a_mat)
    inv = np.linalg.inv(a_mat)
    grad = np.empty(problem.box.dim)
    for j in range(problem.box.dim):
        ddiff = dv[j][:, None] - dv[j][None, :]
        grad[j] = float(np.sum(inv * (diff * ddiff)) / problem.noise.sigma2)
    return float(logabs), grad


def score(problem, belief, x, criterion=None, backend=None):
    """Dispatch on the criterion kind; all scores are maximize-me."""
    crit = criterion or problem.criterion
    if crit.kind == "re":
        return score_re(problem, belief, x, backend)
    if crit.kind == "js":
        return score_js(problem, belief, x, backend)
    return score_logdet(problem, belief, x, crit)


def score_and_grad(problem, belief, x, criterion=None, backend=None):
    """Score plus its exact design-space gradient, for the optimizer."""
    crit = criterion or problem.criterion
    backend = backend or problem.backend
    if crit.kind == "re":
        return predictive.entropy_and_grad(problem, belief, x, backend)
    if crit.kind == "js":
        if backend == "conv":
            return predictive.js_divergence_conv(problem, belief, x, with_grad=True)
        h, g = predictive.entropy_and_grad(problem, belief, x, backend)
        mv = predictive.build_mixture(problem, belief, x)
        for i, w in enumerate(mv.weights):
            if w > 0.0:
                h_m, g_m = predictive.entropy_and_grad(problem, belief, x, backend, model_index=i)
                h -= w * h_m
                g = g - w * g_m
        return h, g
    return _logdet_and_grad(problem, belief, x, crit)
