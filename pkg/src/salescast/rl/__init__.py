from .dqn import (
    PRICING_AGENT,
    SUPPLY_AGENT,
    AgentConfig,
    DQNAgent,
    ReplayBuffer,
    TrainingLog,
    Transition,
    dqn_loss_and_grads,
    state_hash,
    train_agent,
)
from .envs import (
    PRICING_PRESETS,
    PricingEnv,
    PricingEnvConfig,
    SupplyEnv,
    SupplyEnvConfig,
    expected_pricing_rewards,
    f_sales,
    read_demand_csv,
)

__all__ = [
    "PRICING_AGENT", "PRICING_PRESETS", "SUPPLY_AGENT", "AgentConfig", "DQNAgent", "PricingEnv",
    "PricingEnvConfig", "ReplayBuffer", "SupplyEnv", "SupplyEnvConfig", "TrainingLog",
    "Transition", "dqn_loss_and_grads", "expected_pricing_rewards", "f_sales",
    "read_demand_csv", "state_hash", "train_agent",
]
