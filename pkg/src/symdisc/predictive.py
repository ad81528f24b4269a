"""Predictive response density p(y|x), its entropy, and the entropy gradient.

The predictive at a design point x is a Gaussian mixture: every parameter
sample of every model contributes a component centered at that model's
response, all sharing the known noise variance.  Two interchangeable
backends estimate the entropy:

* ``quad``  -- direct composite-Simpson integration of -p log p, with the
  density evaluated in log space (underflow-safe).
* ``conv``  -- the fast route: component means are deposited onto a fine
  1-D grid with a 4-tap Keys cubic kernel (so off-grid locations are
  interpolated rather than rounded), and the impulse field is convolved
  with a sampled Gaussian mask via FFT.

The x-gradient of the entropy uses the same two routes; the convolution
backend convolves derivative-weighted impulses with the mask derivative
psi(z) = (z / sigma^2) phi(z).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from .models import ModelUndefinedError, NoiseModel

__all__ = [
    "MixtureView",
    "PredictiveGrid",
    "GridTooCoarseError",
    "build_mixture",
    "density_quad",
    "log_density_quad",
    "entropy_quad",
    "make_grid",
    "bin_impulses",
    "density_fft",
    "entropy_grid",
    "mixture_entropy",
    "entropy_and_grad",
    "js_divergence_conv",
    "grad_entropy_x",
    "per_model_entropies",
    "predictive_curve",
]

log = logging.getLogger(__name__)

MASK_HALF_WIDTH_SIGMAS = 8.0
MIN_GRID_NODES = 4096
MAX_GRID_NODES = 1 << 20


class GridTooCoarseError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MixtureView:
    """Component means per model at one design point, plus model weights.

    Invalid components (domain errors at x) are dropped, with the model's
    weight spread over its remaining samples; ``n_invalid`` records how many
    were dropped per model.
    """

    model_names: tuple
    weights: np.ndarray
    means: tuple
    n_invalid: tuple
    sigma2: float

    def __post_init__(self):
        if np.any(self.weights < 0) or abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ValueError("mixture weights must be a simplex vector")
        if sum(m.size for m in self.means) == 0:
            raise ValueError("mixture needs at least one valid component")

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    def components(self):
        """Flattened (weights, means) with per-model weight split evenly
        across that model's valid samples."""
        ws = [np.full(m.size, w / m.size) for w, m in zip(self.weights, self.means) if m.size]
        mus = [m for m in self.means if m.size]
        return np.concatenate(ws), np.concatenate(mus)


def build_mixture(problem, belief, x):
    """Evaluate every model at x over its current parameter samples.

    Models whose samples are all invalid at x are excluded (their weight is
    redistributed, with a log entry); raises ModelUndefinedError if nothing
    valid remains anywhere.
    """
    x = np.asarray(x, dtype=float)
    names, means, n_invalid, weights = [], [], [], []
    for spec, w, ss in zip(problem.models, belief.model_probs, belief.sample_sets):
        mu = np.asarray(spec.fns().value(x, tuple(ss.samples.T)), dtype=float)
        mu = np.ascontiguousarray(np.broadcast_to(mu, (len(ss),)))
        valid = np.isfinite(mu)
        bad = int(mu.size - np.count_nonzero(valid))
        names.append(spec.name)
        means.append(mu[valid])
        n_invalid.append(bad)
        weights.append(w)
        if bad:
            log.debug("model %s: %d/%d components invalid at x=%s", spec.name, bad, mu.size, x)
    weights = np.array(weights)
    alive = np.array([m.size > 0 for m in means])
    if not np.any(alive):
        raise ModelUndefinedError(f"every model is undefined at x={x}")
    if not np.all(alive):
        dead = [n for n, a in zip(names, alive) if not a]
        log.warning("models %s fully undefined at x=%s; weight redistributed", dead, x)
        weights = np.where(alive, weights, 0.0)
        total = weights.sum()
        if total <= 0.0:
            # surviving models all had zero probability; fall back to uniform
            weights = alive / alive.sum()
        else:
            weights = weights / total
    return MixtureView(
        model_names=tuple(names),
        weights=weights,
        means=tuple(means),
        n_invalid=tuple(n_invalid),
        sigma2=problem.noise.sigma2,
    )


# ---------------------------------------------------------------------------
# Quadrature backend
# ---------------------------------------------------------------------------


def _log_density(mv, y, chunk=4096):
    """log p(y) for an array of points, log-sum-exp over all components."""
    w, mu = mv.components()
    logw = np.log(w) - 0.5 * math.log(2.0 * math.pi * mv.sigma2)
    y = np.asarray(y, dtype=float)
    out = np.empty(y.size)
    flat = y.reshape(-1)
    inv_s = 1.0 / mv.sigma
    for s in range(0, flat.size, chunk):
        block = flat[s : s + chunk]
        z = (block[None, :] - mu[:, None]) * inv_s
        a = logw[:, None] - 0.5 * z * z
        m = np.max(a, axis=0)
        out[s : s + chunk] = m + np.log(np.sum(np.exp(a - m[None, :]), axis=0))
    return out.reshape(y.shape)


def log_density_quad(mv, y):
    """log of the exact mixture density at y; finite far into the tails
    (no underflow), which is what downstream log-space consumers rely on."""
    res = _log_density(mv, np.asarray(y, dtype=float))
    return float(res) if np.isscalar(y) or np.ndim(y) == 0 else res


def density_quad(mv, y):
    """Exact mixture density at y (scalar or array), evaluated in log space
    for underflow safety before exponentiating."""
    res = np.exp(_log_density(mv, np.asarray(y, dtype=float)))
    return float(res) if np.isscalar(y) or np.ndim(y) == 0 else res


def _simpson_nodes(mv, n_nodes):
    w, mu = mv.components()
    lo = float(mu.min()) - MASK_HALF_WIDTH_SIGMAS * mv.sigma
    hi = float(mu.max()) + MASK_HALF_WIDTH_SIGMAS * mv.sigma
    # grow the node count if the mean spread is large relative to sigma, so
    # the integrand stays resolved; Simpson needs an odd count
    need = int(math.ceil(8.0 * (hi - lo) / mv.sigma)) + 1
    n = max(n_nodes, min(need, (1 << 21) + 1))
    if n % 2 == 0:
        n += 1
    ys = np.linspace(lo, hi, n)
    h = (hi - lo) / (n - 1)
    wts = np.ones(n)
    wts[1:-1:2] = 4.0
    wts[2:-1:2] = 2.0
    wts *= h / 3.0
    return ys, wts


def entropy_quad(mv, n_nodes=8193):
    """-integral of p log p by composite Simpson over [min mean - 8 sigma,
    max mean + 8 sigma], with the 0 log 0 = 0 convention."""
    ys, wts = _simpson_nodes(mv, n_nodes)
    logp = _log_density(mv, ys)
    p = np.exp(logp)
    integrand = np.where(p > 0.0, -p * logp, 0.0)
    assert np.all(np.isfinite(integrand))
    return float(integrand @ wts)


# ---------------------------------------------------------------------------
# Convolution backend
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PredictiveGrid:
    """Fine 1-D response grid: impulse field, then density after convolution."""

    y0: float
    dy: float
    n_nodes: int
    impulses: np.ndarray | None = None
    density: np.ndarray | None = None
    dimpulses: tuple = ()

    @property
    def nodes(self):
        return self.y0 + self.dy * np.arange(self.n_nodes)

    @property
    def y_max(self):
        return self.y0 + self.dy * (self.n_nodes - 1)

    def trapezoid_weights(self):
        w = np.full(self.n_nodes, self.dy)
        w[0] = w[-1] = 0.5 * self.dy
        return w

    def mass(self):
        return float(self.density @ self.trapezoid_weights())


def make_grid(mv, n_nodes=None):
    """Auto-sized grid spanning all component means +/- 8 sigma.

    ``n_nodes`` (default 4096) is the minimum node count; it is doubled as
    needed so the spacing stays at or below sigma / 4, the convolution
    backend's resolution contract.
    """
    _, mu = mv.components()
    lo = float(mu.min()) - MASK_HALF_WIDTH_SIGMAS * mv.sigma
    hi = float(mu.max()) + MASK_HALF_WIDTH_SIGMAS * mv.sigma
    n = int(n_nodes) if n_nodes else MIN_GRID_NODES
    need = 4.0 * (hi - lo) / mv.sigma * (1.0 + 1e-9) + 1.0
    while n < need:
        n *= 2
    if n > MAX_GRID_NODES:
        raise GridTooCoarseError(
            f"mixture spread {hi - lo:.3g} too wide for sigma={mv.sigma:.3g} "
            f"at {MAX_GRID_NODES} nodes"
        )
    return PredictiveGrid(y0=lo, dy=(hi - lo) / (n - 1), n_nodes=n)


def _keys_weights(frac):
    """Keys cubic-convolution deposit weights (a = -0.5) at the four nodes
    around a fractional position; columns sum to exactly 1."""
    f = np.asarray(frac, dtype=float)
    near = lambda s: (1.5 * s - 2.5) * s * s + 1.0
    far = lambda s: -0.5 * (((s - 5.0) * s + 8.0) * s - 4.0)
    w0 = near(f)
    wp1 = near(1.0 - f)
    wp2 = far(2.0 - f)
    wm1 = 1.0 - (w0 + wp1 + wp2)  # partition of unity, exact by construction
    return np.stack([wm1, w0, wp1, wp2])


def _deposit(grid, positions, weights):
    u = (positions - grid.y0) / grid.dy
    i0 = np.floor(u).astype(np.int64)
    assert np.all(i0 >= 1) and np.all(i0 + 2 <= grid.n_nodes - 1), "impulse outside grid"
    kw = _keys_weights(u - i0)
    field = np.zeros(grid.n_nodes)
    for off in range(-1, 3):
        field += np.bincount(i0 + off, weights * kw[off + 1], minlength=grid.n_nodes)
    return field


def bin_impulses(mv, grid):
    """Deposit every component's weight onto the grid with the cubic kernel."""
    w, mu = mv.components()
    return replace(grid, impulses=_deposit(grid, mu, w))


def _gauss_mask(sigma, dy, derivative=False):
    half = int(math.ceil(MASK_HALF_WIDTH_SIGMAS * sigma / dy))
    z = np.arange(-half, half + 1) * dy
    mask = np.exp(-0.5 * (z / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    return (z / sigma**2) * mask if derivative else mask


def _convolve(field, mask):
    # cost-based cutover: direct is n*taps multiplies, FFT ~ n log n with a
    # large constant; short masks on long grids favor direct decisively
    n, taps = field.size, mask.size
    if n * taps <= 300_000 or taps <= 8.0 * math.log2(n + taps):
        full = np.convolve(field, mask, mode="full")
        start = (taps - 1) // 2
        return full[start : start + n]
    return fftconvolve(field, mask, mode="same")


def density_fft(grid, noise):
    """Convolve the impulse field with the Gaussian noise mask.

    Refuses grids coarser than sigma / 4.  The cubic kernel's negative lobes
    can leave tiny negative density values; these are clamped to zero and
    the mass renormalized (both logged).
    """
    sigma = noise.sigma
    if 4.0 * grid.dy > sigma * (1.0 + 1e-9):
        raise GridTooCoarseError(
            f"grid too coarse for noise scale: sigma={sigma:.3g} < 4*dy={4 * grid.dy:.3g}"
        )
    if grid.impulses is None:
        raise ValueError("grid has no impulses; call bin_impulses first")
    dens = _convolve(grid.impulses, _gauss_mask(sigma, grid.dy))
    neg = dens < 0.0
    if np.any(neg):
        clipped = -float(dens[neg].sum()) * grid.dy
        log.debug("clamped %d negative density nodes (mass %.3g)", int(neg.sum()), clipped)
        dens = np.where(neg, 0.0, dens)
    target = float(grid.impulses.sum())
    mass = float(dens @ grid.trapezoid_weights())
    if mass > 0.0 and abs(mass - target) > 1e-12:
        log.debug("renormalizing grid mass %.15g -> %.15g", mass, target)
        dens = dens * (target / mass)
    return replace(grid, density=dens)


def entropy_grid(grid):
    """-sum p log p dy over the grid (trapezoid end weights, 0 log 0 = 0)."""
    if grid.density is None:
        raise ValueError("grid has no density; call density_fft first")
    p = grid.density
    w = grid.trapezoid_weights()
    pos = p > 0.0
    return float(-(p[pos] * np.log(p[pos])) @ w[pos])


# ---------------------------------------------------------------------------
# Clustered convolution evaluation
# ---------------------------------------------------------------------------
#
# Component clusters separated by more than 16 sigma have overlap below
# exp(-32), so -p log p splits exactly into per-cluster integrals.  Gridding
# each cluster separately keeps the node count proportional to the occupied
# range rather than the full spread; a handful of outlier samples no longer
# force an enormous grid.

CLUSTER_GAP_SIGMAS = 16.0


def _cluster_slices(sorted_mu, sigma):
    cuts = np.flatnonzero(np.diff(sorted_mu) > CLUSTER_GAP_SIGMAS * sigma) + 1
    bounds = np.concatenate(([0], cuts, [sorted_mu.size]))
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _conv_entropy_clustered(cw, cmu, sigma2, cdx=None):
    """Entropy (and optionally its x-gradient) of a Gaussian mixture via
    per-cluster grid convolution.  cdx, when given, is (dim, n_comp).

    Cluster grids are sized by the sigma/4 spacing contract alone (entropy
    error at that spacing is ~1e-6; the Gaussian mask smooths cubic-binning
    error away), so isolated outlier components cost ~128 nodes each."""
    sigma = math.sqrt(sigma2)
    noise = NoiseModel(sigma2)
    order = np.argsort(cmu)
    mu_sorted = cmu[order]
    entropy = 0.0
    grad = np.zeros(cdx.shape[0]) if cdx is not None else None
    singles = []
    for a, b in _cluster_slices(mu_sorted, sigma):
        if b - a == 1:
            singles.append(cw[order[a]])
            continue
        idx = order[a:b]
        sub = MixtureView(
            model_names=("cluster",),
            weights=np.ones(1),
            means=(cmu[idx],),
            n_invalid=(0,),
            sigma2=sigma2,
        )
        grid = make_grid(sub, n_nodes=64)
        grid = density_fft(replace(grid, impulses=_deposit(grid, cmu[idx], cw[idx])), noise)
        dens = grid.density
        wts = grid.trapezoid_weights()
        pos = dens > 0.0
        logd = np.log(np.where(pos, dens, 1.0))
        entropy -= float((dens * logd) @ wts)
        if cdx is not None:
            psi = _gauss_mask(sigma, grid.dy, derivative=True)
            one_plus = np.where(pos, 1.0 + logd, 0.0)
            for j in range(grad.shape[0]):
                dp = _convolve(_deposit(grid, cmu[idx], cw[idx] * cdx[j, idx]), psi)
                grad[j] -= float((one_plus * dp) @ wts)
    if singles:
        # an isolated component's -w phi log(w phi) integral is exact:
        # w (log(sqrt(2 pi e) sigma) - log w), independent of its location,
        # so it also contributes nothing to the design gradient
        w = np.asarray(singles)
        entropy += float(np.sum(w * (0.5 * math.log(2.0 * math.pi * math.e * sigma2) - np.log(w))))
    return entropy, grad


# ---------------------------------------------------------------------------
# Shared entry points
# ---------------------------------------------------------------------------


def mixture_entropy(mv, backend="conv", grid_nodes=None, quad_nodes=8193):
    if backend == "quad":
        return entropy_quad(mv, n_nodes=quad_nodes)
    cw, cmu = mv.components()
    h, _ = _conv_entropy_clustered(cw, cmu, mv.sigma2)
    return h


def per_model_entropies(problem, belief, x, backend=None):
    """H(y | m, x) for each model, from single-model mixtures."""
    backend = backend or problem.backend
    out = np.empty(problem.n_models)
    for i, (spec, ss) in enumerate(zip(problem.models, belief.sample_sets)):
        mu = np.asarray(spec.fns().value(np.asarray(x, float), tuple(ss.samples.T)), dtype=float)
        mu = np.ascontiguousarray(np.broadcast_to(mu, (len(ss),)))
        mu = mu[np.isfinite(mu)]
        if mu.size == 0:
            out[i] = np.nan
            continue
        mv = MixtureView(
            model_names=(spec.name,),
            weights=np.ones(1),
            means=(mu,),
            n_invalid=(len(ss) - mu.size,),
            sigma2=problem.noise.sigma2,
        )
        out[i] = mixture_entropy(mv, backend, problem.grid_nodes, problem.quad_nodes)
    return out


def _mixture_with_dx(problem, belief, x, only=None, with_dx=True):
    """MixtureView plus stacked per-component d mean / d x (dim, n_comp).

    ``only`` restricts to a single model index (weight 1), for per-model
    entropies H(y|m,x).  ``with_dx=False`` skips the derivative evaluation
    (the returned cdx is None).
    """
    x = np.asarray(x, dtype=float)
    names, means, n_invalid, weights, dxs = [], [], [], [], []
    pairs = list(zip(problem.models, belief.model_probs, belief.sample_sets))
    if only is not None:
        spec, _, ss = pairs[only]
        pairs = [(spec, 1.0, ss)]
    for spec, w, ss in pairs:
        if with_dx:
            v, dx = spec.fns().value_dx(x, tuple(ss.samples.T))
            dx = np.ascontiguousarray(np.broadcast_to(dx, (problem.box.dim, len(ss))))
        else:
            v = spec.fns().value(x, tuple(ss.samples.T))
            dx = np.zeros((0, len(ss)))
        v = np.ascontiguousarray(np.broadcast_to(np.asarray(v, dtype=float), (len(ss),)))
        valid = np.isfinite(v)
        if with_dx:
            valid = valid & np.all(np.isfinite(dx), axis=0)
        names.append(spec.name)
        means.append(v[valid])
        dxs.append(dx[:, valid])
        n_invalid.append(int(v.size - valid.sum()))
        weights.append(w)
    weights = np.array(weights)
    alive = np.array([m.size > 0 for m in means])
    if not np.any(alive):
        raise ModelUndefinedError(f"every model is undefined at x={x}")
    if not np.all(alive):
        weights = np.where(alive, weights, 0.0)
        weights = weights / weights.sum() if weights.sum() > 0 else alive / alive.sum()
    mv = MixtureView(
        model_names=tuple(names),
        weights=weights,
        means=tuple(means),
        n_invalid=tuple(n_invalid),
        sigma2=problem.noise.sigma2,
    )
    comp_w = np.concatenate(
        [np.full(m.size, w / m.size) for w, m in zip(weights, means) if m.size]
    )
    comp_mu = np.concatenate([m for m in means if m.size])
    if not with_dx:
        return mv, comp_w, comp_mu, None
    comp_dx = np.concatenate([d for d, m in zip(dxs, means) if m.size], axis=1)
    return mv, comp_w, comp_mu, comp_dx


def entropy_and_grad(problem, belief, x, backend=None, model_index=None):
    """Predictive entropy and its design-space gradient in one pass.

    dH/dx_j = -int (1 + log p) dp/dx_j dy with
    dp/dx_j = sum_c w_c (dmu_c/dx_j) phi(y; mu_c, sigma^2) (y - mu_c)/sigma^2.
    With model_index set, both refer to that model's predictive alone.
    """
    backend = backend or problem.backend
    mv, cw, cmu, cdx = _mixture_with_dx(problem, belief, x, only=model_index)
    d = cdx.shape[0]
    if backend == "quad":
        ys, wts = _simpson_nodes(mv, problem.quad_nodes)
        logp = _log_density(mv, ys)
        p = np.exp(logp)
        entropy = float(np.where(p > 0.0, -p * logp, 0.0) @ wts)
        one_plus = 1.0 + logp
        grad = np.zeros(d)
        inv_s2 = 1.0 / mv.sigma2
        norm = 1.0 / (mv.sigma * math.sqrt(2.0 * math.pi))
        chunk = max(1, 2**22 // max(ys.size, 1))
        for s in range(0, cmu.size, chunk):
            e = min(cmu.size, s + chunk)
            diff = ys[None, :] - cmu[s:e, None]
            phi = norm * np.exp(-0.5 * inv_s2 * diff * diff)
            base = (cw[s:e, None] * phi * diff) * inv_s2
            for j in range(d):
                grad[j] -= np.sum((cdx[j, s:e, None] * base) * (one_plus * wts)[None, :])
        return entropy, grad
    return _conv_entropy_clustered(cw, cmu, mv.sigma2, cdx=cdx)


def grad_entropy_x(problem, belief, x, backend=None):
    """Gradient of the predictive entropy w.r.t. the design coordinates."""
    return entropy_and_grad(problem, belief, x, backend=backend)[1]


def js_divergence_conv(problem, belief, x, with_grad=False):
    """Jensen-Shannon score H(y|x) - sum_m p(m) H(y|m,x) on the convolution
    backend, with its design gradient when requested.

    The pooled density is the model-probability-weighted sum of the
    per-model densities, so one clustered pass over the union of components
    yields every per-model density piece once and assembles the pooled piece
    by linearity; nothing is convolved twice.
    """
    mv, cw, cmu, cdx = _mixture_with_dx(problem, belief, x, with_dx=with_grad)
    sigma = mv.sigma
    sigma2 = mv.sigma2
    noise = NoiseModel(sigma2)
    d = problem.box.dim
    sizes = np.array([m.size for m in mv.means])
    alive = np.flatnonzero((mv.weights > 0.0) & (sizes > 0))
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    group = np.repeat(np.arange(sizes.size), sizes)
    # per-model component weights 1/n_m; pooled weights are w_m times that
    qw = np.concatenate([np.full(n, 1.0 / n) for n in sizes if n])

    h_pool = 0.0
    h_model = np.zeros(sizes.size)
    g_pool = np.zeros(d) if with_grad else None
    g_model = np.zeros((sizes.size, d)) if with_grad else None

    order = np.argsort(cmu)
    const = 0.5 * math.log(2.0 * math.pi * math.e * sigma2)
    for a, b in _cluster_slices(cmu[order], sigma):
        idx = order[a:b]
        if b - a == 1:
            m_i = int(group[idx[0]])
            w_q = qw[idx[0]]
            h_model[m_i] += w_q * (const - math.log(w_q))
            w_p = mv.weights[m_i] * w_q
            if w_p > 0.0:
                h_pool += w_p * (const - math.log(w_p))
            continue  # isolated components contribute no design gradient
        sub = MixtureView(
            model_names=("cluster",), weights=np.ones(1), means=(cmu[idx],),
            n_invalid=(0,), sigma2=sigma2,
        )
        grid = make_grid(sub, n_nodes=64)
        wts = grid.trapezoid_weights()
        psi = _gauss_mask(sigma, grid.dy, derivative=True) if with_grad else None
        dens_pool = np.zeros(grid.n_nodes)
        dq = {}
        pieces = {}
        for m_i in alive:
            sel = idx[group[idx] == m_i]
            if sel.size == 0:
                continue
            q = density_fft(
                replace(grid, impulses=_deposit(grid, cmu[sel], qw[sel])), noise
            ).density
            pieces[m_i] = q
            dens_pool += mv.weights[m_i] * q
            pos = q > 0.0
            logq = np.log(np.where(pos, q, 1.0))
            h_model[m_i] -= float((q * logq) @ wts)
            if with_grad:
                dq[m_i] = np.stack(
                    [_convolve(_deposit(grid, cmu[sel], qw[sel] * cdx[j, sel]), psi) for j in range(d)]
                )
                g_model[m_i] -= (dq[m_i] * np.where(pos, 1.0 + logq, 0.0)) @ wts
        pos = dens_pool > 0.0
        logp = np.log(np.where(pos, dens_pool, 1.0))
        h_pool -= float((dens_pool * logp) @ wts)
        if with_grad:
            one_plus = np.where(pos, 1.0 + logp, 0.0)
            for m_i, dq_m in dq.items():
                g_pool -= mv.weights[m_i] * ((dq_m * one_plus) @ wts)

    js = h_pool - float(mv.weights[alive] @ h_model[alive])
    if not with_grad:
        return js, None
    grad = g_pool - mv.weights[alive] @ g_model[alive]
    return js, grad


def predictive_curve(problem, belief, x, n_points=201):
    """Downsampled (y, density) pairs at a design point, for display."""
    mv = build_mixture(problem, belief, x)
    grid = density_fft(bin_impulses(mv, make_grid(mv, n_nodes=problem.grid_nodes)), NoiseModel(mv.sigma2))
    idx = np.linspace(0, grid.n_nodes - 1, n_points).round().astype(int)
    return grid.nodes[idx], grid.density[idx]
