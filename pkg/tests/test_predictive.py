import math

import numpy as np
import pytest

from symdisc.models import ModelUndefinedError, NoiseModel
from symdisc.predictive import (
    GridTooCoarseError,
    MixtureView,
    PredictiveGrid,
    _keys_weights,
    bin_impulses,
    build_mixture,
    density_fft,
    density_quad,
    entropy_and_grad,
    entropy_grid,
    entropy_quad,
    grad_entropy_x,
    log_density_quad,
    make_grid,
    mixture_entropy,
)
from symdisc.criteria import Criterion
from symdisc.problem import BeliefState, DesignBox, DesignProblem
from tests.conftest import make_spec, point_mass, sample_set


def mk(means, sigma2, weights=None):
    means = [np.atleast_1d(np.asarray(m, dtype=float)) for m in means]
    w = np.full(len(means), 1.0 / len(means)) if weights is None else np.asarray(weights, float)
    return MixtureView(
        model_names=tuple(f"m{i}" for i in range(len(means))),
        weights=w,
        means=tuple(means),
        n_invalid=(0,) * len(means),
        sigma2=sigma2,
    )


def gaussian_entropy(sigma2):
    return 0.5 * math.log(2.0 * math.pi * math.e * sigma2)


class TestBuildMixture:
    def test_single_model_single_sample(self):
        spec = make_spec("m", "a*x", ("x",), ("a",))
        problem = DesignProblem(
            models=(spec,), box=DesignBox(np.zeros(1), np.ones(1)),
            noise=NoiseModel(0.1), criterion=Criterion("re"),
        )
        belief = BeliefState(model_probs=np.ones(1), sample_sets=(point_mass([2.0]),))
        mv = build_mixture(problem, belief, np.array([0.5]))
        assert mv.weights[0] == 1.0
        assert mv.means[0] == pytest.approx([1.0])

    def test_two_model_weights(self):
        m1 = make_spec("a", "a*x", ("x",), ("a",))
        m2 = make_spec("b", "b*x", ("x",), ("b",))
        problem = DesignProblem(
            models=(m1, m2), box=DesignBox(np.zeros(1), np.ones(1)),
            noise=NoiseModel(0.1), criterion=Criterion("re"),
        )
        belief = BeliefState(
            model_probs=np.array([0.3, 0.7]),
            sample_sets=(point_mass([1.0]), point_mass([2.0])),
        )
        mv = build_mixture(problem, belief, np.array([1.0]))
        assert np.allclose(mv.weights, [0.3, 0.7])

    def test_invalid_components_dropped_with_renormalization(self):
        spec = make_spec("m", "x^e", ("x",), ("e",))
        problem = DesignProblem(
            models=(spec,), box=DesignBox(np.array([-2.0]), np.array([2.0])),
            noise=NoiseModel(0.1), criterion=Criterion("re"),
        )
        belief = BeliefState(
            model_probs=np.ones(1), sample_sets=(sample_set([[2.0], [0.5], [3.0]]),)
        )
        mv = build_mixture(problem, belief, np.array([-1.0]))  # 0.5 exponent invalid
        assert mv.n_invalid == (1,)
        assert mv.means[0].size == 2
        w, mu = mv.components()
        assert w.sum() == pytest.approx(1.0)

    def test_all_invalid_raises(self):
        spec = make_spec("m", "x^e", ("x",), ("e",))
        problem = DesignProblem(
            models=(spec,), box=DesignBox(np.array([-2.0]), np.array([2.0])),
            noise=NoiseModel(0.1), criterion=Criterion("re"),
        )
        belief = BeliefState(model_probs=np.ones(1), sample_sets=(point_mass([0.5]),))
        with pytest.raises(ModelUndefinedError):
            build_mixture(problem, belief, np.array([-1.0]))


class TestDensityQuad:
    def test_single_gaussian_peak(self):
        assert density_quad(mk([[0.0]], 1.0), 0.0) == pytest.approx(0.3989422804014327)

    def test_two_component_average(self):
        assert density_quad(mk([[1.0, -1.0]], 1.0), 0.0) == pytest.approx(0.24197072451914337)

    def test_far_tail_finite_in_log_space(self):
        logp = log_density_quad(mk([[0.0]], 1.0), 40.0)
        assert np.isfinite(logp)
        assert logp == pytest.approx(-800.0 - 0.5 * math.log(2 * math.pi), rel=1e-9)


class TestEntropyQuad:
    @pytest.mark.parametrize("sigma2", [0.01, 1.0])
    def test_single_gaussian_closed_form(self, sigma2):
        assert entropy_quad(mk([[0.0]], sigma2)) == pytest.approx(
            gaussian_entropy(sigma2), abs=1e-4
        )

    def test_far_separation_adds_ln2(self):
        h = entropy_quad(mk([[0.0, 20.0]], 1.0))
        assert h == pytest.approx(gaussian_entropy(1.0) + math.log(2.0), abs=1e-3)


class TestKeysKernel:
    def test_on_node_is_delta(self):
        w = _keys_weights(np.array([0.0])).ravel()
        assert np.allclose(w, [0.0, 1.0, 0.0, 0.0])

    def test_midpoint_weights(self):
        w = _keys_weights(np.array([0.5])).ravel()
        assert np.allclose(w, [-0.0625, 0.5625, 0.5625, -0.0625])
        assert w.sum() == 1.0

    def test_partition_of_unity_exact(self):
        f = np.random.default_rng(0).uniform(0.0, 1.0, 1000)
        sums = _keys_weights(f).sum(axis=0)
        assert np.all(sums == 1.0)


class TestBinImpulses:
    def test_mean_on_node(self):
        mv = mk([[0.0]], 0.01)
        grid = PredictiveGrid(y0=-0.8, dy=0.8 / 2047.5, n_nodes=4096)
        # choose a grid where 0.0 falls exactly on node 2047.5... instead use make_grid
        grid = make_grid(mv)
        u = (0.0 - grid.y0) / grid.dy
        # force the impulse onto an exact node by shifting the mean
        target = grid.y0 + grid.dy * round(u)
        mv2 = mk([[target]], 0.01)
        out = bin_impulses(mv2, grid)
        nz = np.flatnonzero(out.impulses)
        assert nz.size == 1
        assert out.impulses[nz[0]] == pytest.approx(1.0)

    def test_superposition(self):
        mv_a = mk([[0.123]], 0.01)
        mv_b = mk([[0.271]], 0.01)
        both = mk([[0.123, 0.271]], 0.01)
        grid = make_grid(both)
        s = bin_impulses(both, grid).impulses
        a = bin_impulses(mv_a, grid).impulses
        b = bin_impulses(mv_b, grid).impulses
        assert np.allclose(s, 0.5 * a + 0.5 * b, atol=1e-15)

    def test_total_weight_conserved(self):
        rng = np.random.default_rng(5)
        mv = mk([rng.uniform(-2, 2, 300)], 0.04)
        out = bin_impulses(mv, make_grid(mv))
        assert out.impulses.sum() == pytest.approx(1.0, abs=1e-12)


class TestDensityFft:
    def test_impulse_on_node_reproduces_mask(self):
        mv = mk([[0.0]], 0.01)
        grid = make_grid(mv)
        out = density_fft(bin_impulses(mv, grid), NoiseModel(0.01))
        assert out.mass() == pytest.approx(1.0, abs=1e-6)

    def test_off_node_impulse_matches_shifted_gaussian(self):
        mu0 = 0.0123456
        mv = mk([[mu0]], 0.01)
        out = density_fft(bin_impulses(mv, make_grid(mv)), NoiseModel(0.01))
        exact = np.exp(-0.5 * ((out.nodes - mu0) / 0.1) ** 2) / (0.1 * math.sqrt(2 * math.pi))
        assert np.max(np.abs(out.density - exact)) <= 1e-4

    def test_refuses_coarse_grid(self):
        mv = mk([[0.0]], 1e-6)
        grid = PredictiveGrid(y0=-1.0, dy=0.01, n_nodes=201, impulses=np.zeros(201))
        with pytest.raises(GridTooCoarseError, match="grid too coarse"):
            density_fft(grid, NoiseModel(1e-6))

    def test_density_nonnegative(self):
        rng = np.random.default_rng(2)
        mv = mk([rng.uniform(-1, 1, 50)], 0.01)
        out = density_fft(bin_impulses(mv, make_grid(mv)), NoiseModel(0.01))
        assert np.all(out.density >= 0.0)


class TestEntropyGrid:
    def test_single_gaussian(self):
        mv = mk([[0.0]], 1.0)
        out = density_fft(bin_impulses(mv, make_grid(mv)), NoiseModel(1.0))
        assert entropy_grid(out) == pytest.approx(gaussian_entropy(1.0), abs=1e-3)

    def test_uniform_density(self):
        n = 4096
        grid = PredictiveGrid(y0=0.0, dy=1.0 / (n - 1), n_nodes=n)
        grid = grid.__class__(**{**grid.__dict__, "density": np.ones(n)})
        assert entropy_grid(grid) == pytest.approx(0.0, abs=1e-3)  # log(range) = log 1

    def test_agrees_with_quad_on_random_mixtures(self):
        rng = np.random.default_rng(9)
        for i in range(50):
            sigma2 = [0.01, 0.1, 1.0][i % 3]
            k = int(rng.integers(1, 4))
            mv = mk(
                [rng.uniform(-5, 5, int(rng.integers(1, 40))) for _ in range(k)],
                sigma2,
                rng.dirichlet(np.ones(k)),
            )
            h_quad = entropy_quad(mv)
            h_conv = mixture_entropy(mv, "conv")
            assert abs(h_quad - h_conv) <= 1e-3


class TestMixtureProperties:
    def test_shift_invariance(self):
        rng = np.random.default_rng(4)
        base = rng.uniform(-2, 2, 64)
        for c in (0.0, 5.0, -17.3):
            h0 = mixture_entropy(mk([base], 0.04), "conv")
            h1 = mixture_entropy(mk([base + c], 0.04), "conv")
            assert abs(h0 - h1) <= 1e-6

    def test_mixture_entropy_at_least_gaussian(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            mv = mk([rng.uniform(-3, 3, 30)], 0.25)
            assert entropy_quad(mv) >= gaussian_entropy(0.25) - 1e-4

    def test_mass_inside_grid(self):
        rng = np.random.default_rng(10)
        mv = mk([rng.uniform(-4, 4, 500)], 0.01)
        out = density_fft(bin_impulses(mv, make_grid(mv)), NoiseModel(0.01))
        assert 1.0 - 1e-3 <= out.mass() <= 1.0 + 1e-9

    def test_clustered_wide_mixture_matches_quad(self):
        rng = np.random.default_rng(12)
        bulk = rng.normal(0.0, 0.3, 150)
        outliers = np.array([120.0, -260.0, 515.0])
        mv = mk([np.concatenate([bulk, outliers])], 0.01)
        assert abs(entropy_quad(mv) - mixture_entropy(mv, "conv")) <= 1e-3


def _fd_entropy(problem, belief, x, j, h=1e-5):
    e = np.zeros_like(x)
    e[j] = h
    hp = entropy_quad(build_mixture(problem, belief, x + e), n_nodes=problem.quad_nodes)
    hm = entropy_quad(build_mixture(problem, belief, x - e), n_nodes=problem.quad_nodes)
    return (hp - hm) / (2 * h)


class TestGradEntropyX:
    def _problem(self, rng):
        spec = make_spec("m", "a*x^2 + b*x", ("x",), ("a", "b"))
        problem = DesignProblem(
            models=(spec,), box=DesignBox(np.array([0.1]), np.array([2.0])),
            noise=NoiseModel(0.1), criterion=Criterion("re"),
        )
        belief = BeliefState(
            model_probs=np.ones(1), sample_sets=(sample_set(rng.normal(1.0, 0.3, (40, 2))),)
        )
        return problem, belief

    def test_insensitive_coordinate_has_zero_gradient(self):
        spec = make_spec("m", "a*x", ("x", "u"), ("a",))
        problem = DesignProblem(
            models=(spec,), box=DesignBox(np.array([0.1, 0.1]), np.array([2.0, 2.0])),
            noise=NoiseModel(0.1), criterion=Criterion("re"),
        )
        belief = BeliefState(
            model_probs=np.ones(1), sample_sets=(sample_set([[0.5], [1.5], [0.9]]),)
        )
        for backend in ("quad", "conv"):
            g = grad_entropy_x(problem, belief, np.array([1.0, 1.0]), backend=backend)
            assert g[1] == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("backend", ["quad", "conv"])
    def test_matches_finite_differences(self, backend):
        rng = np.random.default_rng(55)
        problem, belief = self._problem(rng)
        for _ in range(20):
            x = rng.uniform(0.3, 1.8, 1)
            g = grad_entropy_x(problem, belief, x, backend=backend)
            fd = _fd_entropy(problem, belief, x, 0)
            assert abs(g[0] - fd) <= 1e-4 * (1.0 + abs(fd))

    def test_symmetric_pair_positive_gradient(self, two_linear_models):
        problem, belief = two_linear_models
        for backend in ("quad", "conv"):
            g = grad_entropy_x(problem, belief, np.array([0.2]), backend=backend)
            fd = _fd_entropy(problem, belief, np.array([0.2]), 0)
            assert g[0] > 0.0
            assert fd > 0.0

    def test_entropy_and_grad_consistent_with_entropy(self):
        rng = np.random.default_rng(56)
        problem, belief = self._problem(rng)
        x = np.array([0.9])
        h_conv, _ = entropy_and_grad(problem, belief, x, backend="conv")
        assert h_conv == pytest.approx(
            mixture_entropy(build_mixture(problem, belief, x), "conv"), rel=1e-12
        )
