"""symdisc: sequential Bayesian experimental design for symbolic model
discovery.

Given candidate symbolic models with uncertain parameters, the engine
repeatedly picks the measurement point most informative about which
functional form is true, ingests the response (simulated or human-entered),
and updates model probabilities and parameter posteriors.
"""

from .criteria import Criterion, kl_gauss, score, score_and_grad, score_js, score_logdet, score_re
from .design import (
    Proposal,
    RoundRecord,
    apply_observation,
    bayes_update,
    init_belief,
    optimize_design,
    propose,
    refresh_samples,
    run_round,
    update_model_probs,
)
from .expr import (
    ExprSyntaxError,
    compile_expr,
    eval_expr,
    expr_names,
    grad_expr,
    parse_expr,
    print_expr,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    TrialTrace,
    apply_profile,
    build_problem,
    bundled_config_path,
    config_from_dict,
    emit_results,
    load_config,
    run_single_trial,
    run_trials,
)
from .hmc import HmcConfig, SampleSet, empirical_stats, leapfrog, sample
from .models import (
    Barrier,
    ModelSpec,
    ModelUndefinedError,
    NoiseModel,
    Observation,
    log_marginal_likelihood,
    log_posterior,
    log_prior,
    make_posterior_logp,
    marginal_likelihood,
    simulate_response,
)
from .predictive import (
    GridTooCoarseError,
    MixtureView,
    PredictiveGrid,
    bin_impulses,
    build_mixture,
    density_fft,
    density_quad,
    log_density_quad,
    entropy_grid,
    entropy_quad,
    grad_entropy_x,
    make_grid,
    mixture_entropy,
    predictive_curve,
)
from .problem import BeliefState, DesignBox, DesignProblem, OptimizerConfig

__version__ = "0.1.0"
