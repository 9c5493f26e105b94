from .mcmc import PosteriorSamples, mcmc_sample, summarize, write_summary
from .models import (
    DEFAULT_CRISES,
    PriorSpec,
    SamplerConfig,
    epidemic_peak,
    fit_crisis_weights,
    fit_epidemic,
    fit_hierarchical,
    fit_logistic_trend,
    fit_robust_linear,
    predict_linear,
    predict_logistic_trend,
)

__all__ = [
    "DEFAULT_CRISES", "PosteriorSamples", "PriorSpec", "SamplerConfig", "epidemic_peak",
    "fit_crisis_weights", "fit_epidemic", "fit_hierarchical", "fit_logistic_trend",
    "fit_robust_linear", "mcmc_sample", "predict_linear", "predict_logistic_trend",
    "summarize", "write_summary",
]
