"""Experiment harness: config loading/validation, seeded end-to-end trials
against the simulated oracle, and CSV emission.

A campaign is ``trials`` independent runs (seed + trial index) of ``rounds``
propose/observe/update cycles.  Everything recorded in the CSVs is
deterministic given the config and seed; wall-clock timings go to a separate
timings.json so re-runs produce byte-identical CSVs.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import hmc as hmc_mod
from .criteria import CRITERION_KINDS, Criterion
from .design import init_belief, run_round
from .expr import ExprSyntaxError, parse_expr
from .models import Barrier, ModelSpec, NoiseModel, simulate_response
from .problem import DesignBox, DesignProblem, OptimizerConfig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TrialTrace",
    "load_config",
    "config_from_dict",
    "bundled_config_path",
    "apply_profile",
    "build_problem",
    "run_single_trial",
    "run_trials",
    "emit_results",
]

log = logging.getLogger(__name__)

PROFILES = {"desk": 1000, "full": 4000}


class ConfigError(ValueError):
    def __init__(self, message, field_path):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    models: tuple
    box: DesignBox
    noise: NoiseModel
    criterion: Criterion
    backend: str = "conv"
    hmc: hmc_mod.HmcConfig = field(default_factory=hmc_mod.HmcConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    truth_model: str | None = None
    truth_theta: np.ndarray | None = None
    prior_probs: np.ndarray | None = None
    rounds: int = 18
    trials: int = 20
    seed: int = 0
    grid_nodes: int | None = None
    quad_nodes: int = 8193
    out_dir: str | None = None


@dataclass(eq=False)
class TrialTrace:
    trial: int
    seed: int
    prior_variances: np.ndarray | None = None
    records: list = field(default_factory=list)
    error: str | None = None

    @property
    def failed(self):
        return self.error is not None


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _need(d, key, path, kind=None):
    if key not in d:
        raise ConfigError("missing required field", f"{path}.{key}" if path else key)
    v = d[key]
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(f"expected {kind.__name__}", f"{path}.{key}" if path else key)
    return v


def _vector(v, n, path):
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a numeric vector", path) from None
    if arr.shape != (n,):
        raise ConfigError(f"expected length {n}, got shape {arr.shape}", path)
    return arr


def _parse_model(entry, i, input_names, barrier, n_inputs):
    path = f"models[{i}]"
    name = _need(entry, "name", path, str)
    source = _need(entry, "expression", path, str)
    params = tuple(_need(entry, "params", path, list))
    try:
        expr = parse_expr(source)
    except ExprSyntaxError as err:
        raise ConfigError(str(err), f"{path}.expression") from None
    n = len(params)
    mean = _vector(_need(entry, "prior_mean", path), n, f"{path}.prior_mean")
    cov_raw = entry.get("prior_cov", "identity")
    if isinstance(cov_raw, str):
        if cov_raw != "identity":
            raise ConfigError("expected 'identity' or an n x n matrix", f"{path}.prior_cov")
        cov = np.eye(n)
    else:
        cov = np.asarray(cov_raw, dtype=float)
        if cov.shape != (n, n):
            raise ConfigError(f"expected {n}x{n} matrix", f"{path}.prior_cov")
    try:
        return ModelSpec(
            name=name,
            expr=expr,
            input_names=input_names,
            param_names=params,
            prior_mean=mean,
            prior_cov=cov,
            barrier=barrier,
        )
    except ValueError as err:
        raise ConfigError(str(err), path) from None


def _parse_criterion(raw):
    if isinstance(raw, str):
        raw = {"kind": raw}
    kind = raw.get("kind", "re")
    if kind not in CRITERION_KINDS:
        raise ConfigError(f"unknown criterion {kind!r}; valid options: {list(CRITERION_KINDS)}", "criterion")
    try:
        return Criterion(
            kind=kind,
            subsample_per_model=int(raw.get("subsample_per_model", 50)),
            jitter=float(raw.get("jitter", 1e-8)),
        )
    except ValueError as err:
        raise ConfigError(str(err), "criterion") from None


def _sub_config(d, key, cls, path, **overrides):
    raw = dict(d.get(key, {}))
    raw.update(overrides)
    try:
        return cls(**raw)
    except TypeError as err:
        raise ConfigError(str(err), path) from None
    except ValueError as err:
        raise ConfigError(str(err), path) from None


def config_from_dict(d, allow_truth=True, require_truth=False):
    """Validate a raw config dict; every failure names its field path."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object", "")
    input_names = tuple(_need(d, "inputs", "", list))
    if not input_names:
        raise ConfigError("need at least one input name", "inputs")

    box_raw = _need(d, "design_box", "", dict)
    lo = _vector(_need(box_raw, "lower", "design_box"), len(input_names), "design_box.lower")
    hi = _vector(_need(box_raw, "upper", "design_box"), len(input_names), "design_box.upper")
    try:
        box = DesignBox(lower=lo, upper=hi)
    except ValueError as err:
        raise ConfigError(str(err), "design_box") from None

    noise_raw = _need(d, "noise", "", dict)
    sigma2 = _need(noise_raw, "sigma2", "noise")
    if not (isinstance(sigma2, (int, float)) and sigma2 > 0):
        raise ConfigError("sigma2 must be a positive number", "noise.sigma2")
    noise = NoiseModel(sigma2=float(sigma2))

    barrier = None
    if "barrier" in d and d["barrier"] is not None:
        b = d["barrier"]
        scale = _need(b, "scale", "barrier")
        if not (isinstance(scale, (int, float)) and scale > 0):
            raise ConfigError("scale must be a positive number", "barrier.scale")
        anchor_raw = b.get("anchor", "center")
        if isinstance(anchor_raw, str):
            if anchor_raw != "center":
                raise ConfigError("expected 'center' or a vector", "barrier.anchor")
            anchor = box.center
        else:
            anchor = _vector(anchor_raw, len(input_names), "barrier.anchor")
        if not box.contains(anchor):
            raise ConfigError("anchor must lie inside the design box", "barrier.anchor")
        barrier = Barrier(anchor=anchor, scale=float(scale))

    models_raw = _need(d, "models", "", list)
    if not models_raw:
        raise ConfigError("need at least one model", "models")
    models = tuple(
        _parse_model(entry, i, input_names, barrier, len(input_names))
        for i, entry in enumerate(models_raw)
    )
    names = [m.name for m in models]
    if len(set(names)) != len(names):
        raise ConfigError("model names must be unique", "models")

    truth_model = truth_theta = None
    if "truth" in d and d["truth"] is not None:
        if not allow_truth:
            raise ConfigError("oracle not allowed in sessions", "truth")
        t = d["truth"]
        truth_model = _need(t, "model", "truth", str)
        if truth_model not in names:
            raise ConfigError(f"unknown model {truth_model!r}", "truth.model")
        n_true = len(models[names.index(truth_model)].param_names)
        truth_theta = _vector(_need(t, "theta_true", "truth"), n_true, "truth.theta_true")
    elif require_truth:
        raise ConfigError("simulated runs need a truth section", "truth")

    prior_probs = None
    if "prior_probs" in d and d["prior_probs"] is not None:
        prior_probs = _vector(d["prior_probs"], len(models), "prior_probs")
        if np.any(prior_probs < 0) or abs(prior_probs.sum() - 1.0) > 1e-9:
            raise ConfigError("prior_probs must be a probability vector", "prior_probs")

    rounds = int(d.get("rounds", 18))
    trials = int(d.get("trials", 20))
    if rounds < 1:
        raise ConfigError("rounds must be >= 1", "rounds")
    if trials < 1:
        raise ConfigError("trials must be >= 1", "trials")

    backend = d.get("backend", "conv")
    if backend not in ("conv", "quad"):
        raise ConfigError(f"unknown backend {backend!r}; valid options: ['conv', 'quad']", "backend")

    grid = d.get("grid", {})
    grid_nodes = grid.get("n_nodes")
    if grid_nodes is not None:
        grid_nodes = int(grid_nodes)
        if grid_nodes & (grid_nodes - 1) or grid_nodes < 8:
            raise ConfigError("n_nodes must be a power of two >= 8", "grid.n_nodes")

    return ExperimentConfig(
        models=models,
        box=box,
        noise=noise,
        criterion=_parse_criterion(d.get("criterion", "re")),
        backend=backend,
        hmc=_sub_config(d, "hmc", hmc_mod.HmcConfig, "hmc"),
        optimizer=_sub_config(d, "optimizer", OptimizerConfig, "optimizer"),
        truth_model=truth_model,
        truth_theta=truth_theta,
        prior_probs=prior_probs,
        rounds=rounds,
        trials=trials,
        seed=int(d.get("seed", 0)),
        grid_nodes=grid_nodes,
        quad_nodes=int(grid.get("quad_nodes", 8193)),
        out_dir=d.get("output"),
    )


def load_config(path, allow_truth=True, require_truth=False):
    """Parse and validate a JSON config file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError("file not found", str(path))
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err}", str(path)) from None
    return config_from_dict(raw, allow_truth=allow_truth, require_truth=require_truth)


def bundled_config_path():
    return resources.files("symdisc") / "configs" / "feynman_i246.json"


def apply_profile(cfg, profile):
    """desk = 1000 HMC samples per refresh, full = 4000."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; valid options: {list(PROFILES)}", "profile")
    return replace(cfg, hmc=replace(cfg.hmc, n_samples=PROFILES[profile]))


def build_problem(cfg):
    return DesignProblem(
        models=cfg.models,
        box=cfg.box,
        noise=cfg.noise,
        criterion=cfg.criterion,
        backend=cfg.backend,
        optimizer=cfg.optimizer,
        grid_nodes=cfg.grid_nodes,
        quad_nodes=cfg.quad_nodes,
    )


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


def _derived_seed(seed, *key):
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1, np.uint64)[0])


def run_single_trial(cfg, trial_index):
    """One seeded campaign of cfg.rounds rounds against the simulated oracle."""
    trial_seed = cfg.seed + trial_index
    problem = build_problem(cfg)
    truth_spec = cfg.models[[m.name for m in cfg.models].index(cfg.truth_model)]
    noise_rng = np.random.default_rng(np.random.SeedSequence(entropy=trial_seed, spawn_key=(9,)))

    def oracle(x):
        return simulate_response(truth_spec, cfg.truth_theta, x, cfg.noise, noise_rng)

    belief = init_belief(
        problem, cfg.hmc, seed=_derived_seed(trial_seed, 0), prior_probs=cfg.prior_probs
    )
    trace = TrialTrace(trial=trial_index, seed=trial_seed)
    trace.prior_variances = np.array(
        [hmc_mod.empirical_stats(ss)[2] for ss in belief.sample_sets]
    )
    for r in range(1, cfg.rounds + 1):
        belief, record = run_round(problem, belief, oracle, cfg.hmc, seed=_derived_seed(trial_seed, r))
        trace.records.append(record)
    return trace


def _trial_worker(args):
    cfg, t = args
    try:
        return run_single_trial(cfg, t)
    except Exception as err:  # record-and-continue per trial
        log.exception("trial %d failed", t)
        return TrialTrace(trial=t, seed=cfg.seed + t, error=f"{type(err).__name__}: {err}")


def run_trials(cfg, n_jobs=1):
    """All trials; failures are recorded on their trace, not raised.

    Trials are independent (seed + trial index) so they may run in parallel
    processes; results are returned in trial order either way.
    """
    if cfg.truth_model is None or cfg.truth_theta is None:
        raise ConfigError("simulated runs need a truth section", "truth")
    jobs = [(cfg, t) for t in range(cfg.trials)]
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=min(n_jobs, cfg.trials)) as pool:
            traces = list(pool.map(_trial_worker, jobs))
    else:
        traces = [_trial_worker(j) for j in jobs]
    return traces


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------


def _fmt(v):
    return repr(float(v))


def _header(cfg):
    cols = ["round"]
    cols += [f"x_{name}" for name in cfg.models[0].input_names]
    cols += ["y"]
    cols += [f"p_{m.name}" for m in cfg.models]
    cols += [f"var_{m.name}" for m in cfg.models]
    cols += ["score", "ms"]
    return cols


def emit_results(traces, out_dir, cfg):
    """Write per-trial CSVs, the across-trial aggregate CSV, and timings.

    The ``ms`` column is left empty in the CSVs (wall time is not
    reproducible across runs; see timings.json), so identical config + seed
    reproduces the CSV bytes exactly.
    """
    if not traces:
        raise ValueError("no traces to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(cfg)
    paths = {"trials": [], "aggregate": out / "aggregate.csv", "timings": out / "timings.json"}

    ok = [tr for tr in traces if not tr.failed]
    timings = {}
    for tr in traces:
        name = f"trial_{tr.trial + 1:02d}"
        timings[name] = {
            "error": tr.error,
            "round_ms": [round(rec.ms, 3) for rec in tr.records],
        }
        if tr.failed:
            continue
        path = out / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for rec in tr.records:
                writer.writerow(_row(rec))
        paths["trials"].append(path)

    if ok:
        with open(paths["aggregate"], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for r in range(len(ok[0].records)):
                recs = [tr.records[r] for tr in ok]
                writer.writerow(
                    [recs[0].round]
                    + [_fmt(v) for v in np.mean([rec.x for rec in recs], axis=0)]
                    + [_fmt(np.mean([rec.y for rec in recs]))]
                    + [_fmt(v) for v in np.mean([rec.model_probs for rec in recs], axis=0)]
                    + [_fmt(v) for v in np.mean([rec.variances for rec in recs], axis=0)]
                    + [_fmt(np.mean([rec.score for rec in recs]))]
                    + [""]
                )
    with open(paths["timings"], "w", encoding="utf-8") as fh:
        json.dump(timings, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def _row(rec):
    return (
        [rec.round]
        + [_fmt(v) for v in rec.x]
        + [_fmt(rec.y)]
        + [_fmt(v) for v in rec.model_probs]
        + [_fmt(v) for v in rec.variances]
        + [_fmt(rec.score), ""]
    )
