import numpy as np
import pytest

from symdisc import ModelSpec, NoiseModel, SampleSet, parse_expr
from symdisc.criteria import Criterion
from symdisc.problem import BeliefState, DesignBox, DesignProblem


def make_spec(name, source, inputs, params, mean=None, cov=None, barrier=None):
    n = len(params)
    return ModelSpec(
        name=name,
        expr=parse_expr(source),
        input_names=tuple(inputs),
        param_names=tuple(params),
        prior_mean=np.zeros(n) if mean is None else np.asarray(mean, dtype=float),
        prior_cov=np.eye(n) if cov is None else np.asarray(cov, dtype=float),
        barrier=barrier,
    )


def point_mass(theta):
    th = np.atleast_2d(np.asarray(theta, dtype=float))
    n = th.shape[1]
    return SampleSet(samples=th, accept_rate=1.0, mean=th[0], covariance=np.zeros((n, n)))


def sample_set(samples):
    samples = np.asarray(samples, dtype=float)
    mean = samples.mean(axis=0)
    c = samples - mean
    cov = c.T @ c / max(samples.shape[0] - 1, 1)
    return SampleSet(samples=samples, accept_rate=1.0, mean=mean, covariance=cov)


@pytest.fixture
def two_linear_models():
    """Point-mass models y = x and y = -x on the box [-1, 1]."""
    m1 = make_spec("up", "a*x", ("x",), ("a",))
    m2 = make_spec("down", "a*x", ("x",), ("a",))
    problem = DesignProblem(
        models=(m1, m2),
        box=DesignBox(np.array([-1.0]), np.array([1.0])),
        noise=NoiseModel(0.01),
        criterion=Criterion("re"),
    )
    belief = BeliefState(
        model_probs=np.array([0.5, 0.5]),
        sample_sets=(point_mass([1.0]), point_mass([-1.0])),
    )
    return problem, belief


FEYNMAN_TRUE = "c*m^e1*(w^e2 + w0^e3)*z^e4"
FEYNMAN_INPUTS = ("m", "w", "w0", "z")
FEYNMAN_PARAMS = ("c", "e1", "e2", "e3", "e4")
FEYNMAN_THETA = np.array([0.25, 1.0, 2.0, 2.0, 2.0])
