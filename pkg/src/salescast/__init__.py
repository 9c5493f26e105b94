"""Sales forecasting engine: features, base learners, stacking, Bayesian
models, a trend-correcting network and Q-learning agents for pricing and supply."""

__version__ = "0.1.0"
