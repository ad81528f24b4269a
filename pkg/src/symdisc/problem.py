"""Shared state for a design campaign: the design box, the problem bundle
(models + noise + criterion/backend choices), and the belief snapshot that
evolves across rounds.

BeliefState instances are immutable; every round produces a new snapshot, so
criterion evaluations and sampler refreshes can read one concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .hmc import SampleSet
from .models import NoiseModel

__all__ = ["DesignBox", "OptimizerConfig", "DesignProblem", "BeliefState"]


@dataclass(frozen=True, eq=False)
class DesignBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("box requires lower < upper coordinatewise")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def contains(self, x, rtol=1e-9):
        pad = rtol * (self.upper - self.lower)
        return bool(np.all(x >= self.lower - pad) and np.all(x <= self.upper + pad))

    def sample_lhs(self, n, rng):
        """n Latin-hypercube points inside the box."""
        unit = qmc.LatinHypercube(d=self.dim, seed=rng).random(n)
        return qmc.scale(unit, self.lower, self.upper)


@dataclass(frozen=True)
class OptimizerConfig:
    """Multi-start projected gradient ascent with Armijo backtracking.

    f_tol is a stall cutoff: stop after two consecutive accepted steps whose
    relative gain falls below it.  The default keeps polishing down to
    roundoff; objectives with grid-discretization wiggle (the convolution
    backend resolves entropies to ~1e-7) should set it near that noise
    floor.
    """

    n_starts: int = 8
    max_iters: int = 200
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    shrink: float = 0.5
    f_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if not (0.0 < self.shrink < 1.0):
            raise ValueError("shrink must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class DesignProblem:
    """The fixed ingredients of a campaign: candidate models, design box,
    noise level, criterion, and numerical backend options."""

    models: tuple
    box: DesignBox
    noise: NoiseModel
    criterion: object
    backend: str = "conv"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    grid_nodes: int | None = None
    quad_nodes: int = 8193

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        if not self.models:
            raise ValueError("need at least one model")
        names = [m.name for m in self.models]
        if len(set(names)) != len(names):
            raise ValueError("model names must be unique")
        inputs = self.models[0].input_names
        for m in self.models:
            if m.input_names != inputs:
                raise ValueError("all models must share the same input names")
        if len(inputs) != self.box.dim:
            raise ValueError("design box dimension must match the model inputs")
        for m in self.models:
            if m.barrier is not None and not self.box.contains(m.barrier.anchor):
                raise ValueError(f"model {m.name!r}: barrier anchor outside the design box")
        if self.backend not in ("conv", "quad"):
            raise ValueError(f"backend must be 'conv' or 'quad', got {self.backend!r}")

    @property
    def input_names(self):
        return self.models[0].input_names

    @property
    def n_models(self):
        return len(self.models)

    def model_index(self, name):
        for i, m in enumerate(self.models):
            if m.name == name:
                return i
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Model probabilities, per-model parameter samples, and the history."""

    model_probs: np.ndarray
    sample_sets: tuple
    history: tuple = ()
    round: int = 0
    stale: tuple = ()

    def __post_init__(self):
        probs = np.array(self.model_probs, dtype=float)
        probs.flags.writeable = False
        object.__setattr__(self, "model_probs", probs)
        object.__setattr__(self, "sample_sets", tuple(self.sample_sets))
        object.__setattr__(self, "history", tuple(self.history))
        if not self.stale:
            object.__setattr__(self, "stale", (False,) * len(self.sample_sets))
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("model_probs must be a probability simplex vector")
        if len(self.sample_sets) != probs.shape[0] or len(self.stale) != probs.shape[0]:
            raise ValueError("model_probs, sample_sets, and stale flags must align")
        for s in self.sample_sets:
            if not isinstance(s, SampleSet) or len(s) == 0:
                raise ValueError("each model needs a nonempty SampleSet")

    def with_round(self, probs, sample_sets, observation, stale):
        return BeliefState(
            model_probs=probs,
            sample_sets=sample_sets,
            history=self.history + (observation,),
            round=self.round + 1,
            stale=stale,
        )
