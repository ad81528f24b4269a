"""Box-constrained criterion maximization and the sequential design loop.

One round is: maximize the criterion over the box (multi-start projected
gradient ascent), take the measurement at the winner, rescale model
probabilities by their marginal likelihoods, then refresh every model's
parameter samples against the full history.  Each observation changes every
model's posterior, so every round triggers a refresh; chains warm-start at
the previous sample mean.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import criteria, hmc
from .models import ModelUndefinedError, Observation, log_marginal_likelihood, make_posterior_logp
from .predictive import GridTooCoarseError
from .problem import BeliefState, OptimizerConfig

__all__ = [
    "Proposal",
    "RoundRecord",
    "optimize_design",
    "bayes_update",
    "update_model_probs",
    "refresh_samples",
    "init_belief",
    "apply_observation",
    "propose",
    "run_round",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Proposal:
    x: np.ndarray
    score: float


@dataclass(frozen=True, eq=False)
class RoundRecord:
    round: int
    x: np.ndarray
    y: float
    model_probs: np.ndarray
    variances: np.ndarray
    score: float
    ms: float


def _derived_seed(seed, *key):
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Criterion maximization
# ---------------------------------------------------------------------------


def _ascend(objective, value_only, box, x0, cfg):
    """Projected gradient ascent with Armijo backtracking from one start.
    Returns (x, f) or None when the start has a non-finite score.

    The first trial step evaluates the full objective (score + gradient) so
    an immediately accepted step costs one evaluation; only backtracking
    falls to score-only evaluations.  The step size grows again solely after
    clean first-try acceptances, which keeps overshoot retries rare.
    """
    evals = 0
    budget = 4 * cfg.max_iters

    def run(fn, *args):
        nonlocal evals
        evals += 1
        return fn(*args)

    out = run(objective, x0)
    if out is None or not math.isfinite(out[0]):
        return None
    x, (f, g) = x0, out
    t = 1.0
    grow_next = True
    flat_streak = 0
    step_floor = 1e-9 * float(np.max(box.upper - box.lower))
    for _ in range(cfg.max_iters):
        if evals >= budget:
            break
        if not np.all(np.isfinite(g)):
            break
        if np.max(np.abs(box.project(x + g) - x)) <= cfg.grad_tol:
            break
        if grow_next:
            t = min(t * 2.0, 1e8)
        accepted = None
        first_try = True
        backtracks = 0
        while t >= 1e-14 and backtracks < 40 and evals < budget:
            x_new = box.project(x + t * g)
            step = x_new - x
            if np.max(np.abs(step)) == 0.0:
                t *= cfg.shrink
                backtracks += 1
                first_try = False
                continue
            threshold = f + cfg.armijo_c * float(g @ step)
            if first_try:
                trial = run(objective, x_new)
                f_new = None if trial is None else trial[0]
            else:
                trial = None
                f_new = run(value_only, x_new)
            if f_new is not None and math.isfinite(f_new) and f_new >= threshold:
                if trial is None:
                    trial = run(objective, x_new)
                accepted = (x_new, trial)
                break
            t *= cfg.shrink
            backtracks += 1
            first_try = False
        if accepted is None:
            break
        grow_next = first_try
        x_new, out = accepted
        if out is None or not math.isfinite(out[0]):
            break
        # stop once accepted moves or gains stall (cfg.f_tol sits at the
        # objective's numerical noise floor) instead of chasing wiggle
        tiny_gain = out[0] - f <= cfg.f_tol * (1.0 + abs(f))
        tiny_step = np.max(np.abs(x_new - x)) <= step_floor
        if tiny_gain or tiny_step:
            flat_streak += 1
            if flat_streak >= 2:
                x, (f, g) = x_new, out
                break
        else:
            flat_streak = 0
        x, (f, g) = x_new, out
    return x, f


def optimize_design(objective, box, cfg=None, seed=0, value_only=None):
    """Maximize objective(x) -> (score, grad) over the box.

    Multi-start (Latin hypercube) projected gradient ascent; returns the
    best (x, score), breaking score ties within 1e-9 by lexicographically
    smallest x.  Raises RuntimeError when every start has a non-finite
    score.
    """
    cfg = cfg or OptimizerConfig()

    def safe_objective(x):
        try:
            return objective(x)
        except (ModelUndefinedError, GridTooCoarseError) as err:
            log.debug("objective failed at x=%s: %s", x, err)
            return None

    if value_only is None:
        value_fn = lambda x: (safe_objective(x) or (None,))[0]
    else:
        def value_fn(x):
            try:
                return value_only(x)
            except (ModelUndefinedError, GridTooCoarseError):
                return None

    rng = np.random.default_rng(seed)
    starts = box.sample_lhs(cfg.n_starts, rng)
    results = []
    for x0 in starts:
        res = _ascend(safe_objective, value_fn, box, x0, cfg)
        if res is not None:
            results.append(res)
    if not results:
        raise RuntimeError(
            f"all {cfg.n_starts} optimizer starts produced non-finite scores "
            f"(box {box.lower}..{box.upper})"
        )
    best = max(f for _, f in results)
    pool = [x for x, f in results if f >= best - 1e-9]
    x_star = min(pool, key=lambda x: tuple(x))
    f_star = next(f for x, f in results if x is x_star)
    return x_star, f_star


# ---------------------------------------------------------------------------
# Belief updates
# ---------------------------------------------------------------------------


EVIDENCE_CAP = 15.0


def bayes_update(probs, log_liks, evidence_cap=None):
    """probs * exp(log_liks), normalized in log space; uniform fallback
    (with a warning) when everything has zero likelihood.

    ``evidence_cap`` bounds one round's log-likelihood spread across models.
    The Monte Carlo marginal likelihood has catastrophically thin tails
    wherever the sample set happens not to cover the relevant parameter
    region, and at small noise a single such misjudgment (easily -50 nats
    or worse against the eventual best model) is unrecoverable under the
    raw update.  Capping the per-round spread keeps every update decisively
    informative while making any one round's verdict overturnable by a few
    later rounds.
    """
    probs = np.asarray(probs, dtype=float)
    log_liks = np.asarray(log_liks, dtype=float)
    if evidence_cap is not None and np.any(np.isfinite(log_liks)):
        top = np.max(log_liks[np.isfinite(log_liks)])
        log_liks = np.where(np.isfinite(log_liks), np.maximum(log_liks, top - evidence_cap), -np.inf)
    with np.errstate(divide="ignore"):
        lw = np.log(probs) + log_liks
    if not np.any(np.isfinite(lw)):
        warnings.warn("all models have zero likelihood; falling back to uniform", stacklevel=2)
        return np.full(probs.shape, 1.0 / probs.size)
    lw = lw - np.max(lw[np.isfinite(lw)])
    # keep the cumulative dynamic range representable so an outclassed model
    # stays revivable instead of underflowing to an absorbing zero
    lw = np.where(np.isfinite(lw), np.maximum(lw, -700.0), -np.inf)
    w = np.where(np.isfinite(lw), np.exp(lw), 0.0)
    return w / w.sum()


def update_model_probs(problem, belief, x, y):
    """One Bayes step over models: p(m) <- p(m) p(y|m,x) / p(y|x), with
    p(y|m,x) the Monte Carlo marginal over the current samples and the
    per-round evidence spread capped (see bayes_update)."""
    log_liks = np.empty(problem.n_models)
    for i, (spec, ss) in enumerate(zip(problem.models, belief.sample_sets)):
        try:
            log_liks[i] = log_marginal_likelihood(spec, ss.samples, x, y, problem.noise)
        except ModelUndefinedError:
            log_liks[i] = -np.inf
    return bayes_update(belief.model_probs, log_liks, evidence_cap=EVIDENCE_CAP)


def _sample_model(spec, history, noise, init_candidates, cfg):
    target = make_posterior_logp(spec, history, noise)
    init = None
    for candidate in init_candidates:
        lp, grad = target(candidate)
        if math.isfinite(lp) and np.all(np.isfinite(grad)):
            init = candidate
            break
    if init is None:
        raise ValueError(f"model {spec.name!r}: no finite initialization point")
    # adaptation can freeze a step size far off target when the posterior is
    # a narrow curved ridge; the resulting degenerate chain poisons the
    # belief update (its predictive misses wildly, and at small noise one
    # such miss is unrecoverable evidence), so retry with a finer initial
    # step and longer warmup (deterministic per attempt)
    attempt_cfg = cfg
    best = None
    for attempt in range(3):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", hmc.LowAcceptanceWarning)
            out = hmc.sample(target, spec.n_params, init, attempt_cfg)
        if best is None or out.accept_rate > best.accept_rate:
            best = out
        if out.accept_rate >= 0.45:
            return out
        log.warning(
            "model %s: HMC acceptance %.3f on attempt %d; retrying with smaller step",
            spec.name, out.accept_rate, attempt + 1,
        )
        attempt_cfg = replace(
            attempt_cfg,
            initial_step_size=attempt_cfg.initial_step_size / 5.0,
            n_warmup=2 * attempt_cfg.n_warmup,
            seed=attempt_cfg.seed + 1,
        )
    if best.accept_rate < 0.1:
        warnings.warn(
            f"model {spec.name!r}: HMC acceptance stayed below 0.1 after retries",
            hmc.LowAcceptanceWarning,
            stacklevel=2,
        )
    return best


def refresh_samples(problem, belief, hmc_cfg, seed=0):
    """Re-run HMC for every model against the full history.

    Chains initialize at the previous sample mean (prior mean as fallback).
    A model whose chain fails keeps its stale samples and is flagged.
    """
    sets, stale = [], []
    for i, (spec, ss) in enumerate(zip(problem.models, belief.sample_sets)):
        cfg = replace(hmc_cfg, seed=_derived_seed(seed, i))
        try:
            new_ss = _sample_model(
                spec, belief.history, problem.noise, (ss.mean, spec.prior_mean), cfg
            )
            sets.append(new_ss)
            stale.append(False)
        except Exception as err:  # keep the loop alive on a single-model failure
            log.warning("HMC refresh failed for model %s: %s", spec.name, err)
            sets.append(ss)
            stale.append(True)
    return BeliefState(
        model_probs=belief.model_probs,
        sample_sets=tuple(sets),
        history=belief.history,
        round=belief.round,
        stale=tuple(stale),
    )


def init_belief(problem, hmc_cfg, seed=0, prior_probs=None):
    """Belief at round 0: configured (default uniform) model probabilities
    and prior(+barrier) HMC samples for every model."""
    m = problem.n_models
    probs = np.full(m, 1.0 / m) if prior_probs is None else np.asarray(prior_probs, dtype=float)
    sets = []
    for i, spec in enumerate(problem.models):
        cfg = replace(hmc_cfg, seed=_derived_seed(seed, i))
        sets.append(_sample_model(spec, (), problem.noise, (spec.prior_mean,), cfg))
    return BeliefState(model_probs=probs, sample_sets=tuple(sets), history=(), round=0)


def propose(problem, belief, seed=0):
    """Phase A: the most informative next design point under the criterion."""
    x, f = optimize_design(
        lambda x: criteria.score_and_grad(problem, belief, x),
        problem.box,
        problem.optimizer,
        seed=seed,
        value_only=lambda x: criteria.score(problem, belief, x),
    )
    return Proposal(x=x, score=f)


def apply_observation(problem, belief, x, y, hmc_cfg, seed=0):
    """Phase B: ingest a measured response at x and return the next belief."""
    if not math.isfinite(y):
        raise ValueError(f"response must be finite, got {y}")
    x = np.asarray(x, dtype=float)
    if not problem.box.contains(x):
        raise ValueError(f"design point {x} outside the box")
    probs = update_model_probs(problem, belief, x, y)
    obs = Observation(x=x, y=float(y), round_index=belief.round + 1)
    pending = BeliefState(
        model_probs=probs,
        sample_sets=belief.sample_sets,
        history=belief.history + (obs,),
        round=belief.round + 1,
        stale=(True,) * problem.n_models,
    )
    return refresh_samples(problem, pending, hmc_cfg, seed=seed)


def run_round(problem, belief, oracle, hmc_cfg, seed=0):
    """One full propose -> observe -> update cycle against an oracle."""
    t_start = time.perf_counter()
    prop = propose(problem, belief, seed=_derived_seed(seed, 0))
    y = oracle(prop.x)
    updated = apply_observation(problem, belief, prop.x, y, hmc_cfg, seed=_derived_seed(seed, 1))
    variances = np.array([hmc.empirical_stats(ss)[2] for ss in updated.sample_sets])
    record = RoundRecord(
        round=updated.round,
        x=prop.x,
        y=float(y),
        model_probs=updated.model_probs,
        variances=variances,
        score=prop.score,
        ms=(time.perf_counter() - t_start) * 1e3,
    )
    return updated, record
