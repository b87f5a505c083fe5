from .base import Environment
from .cartpole import CartPole
from .data import (
    Dataset,
    Episode,
    Provenance,
    load_dataset,
    loads_dataset,
    dumps_dataset,
    monte_carlo_return,
    monte_carlo_returns,
    sample_trajectories,
    save_dataset,
)
from .policy import LeanPolicy, Policy, TabularPolicy, UniformPolicy
from .tabular import (
    TabularMdp,
    exact_return_dp,
    random_mdp,
    random_policy,
    skewed_policy,
    state_distributions,
    two_state_mdp,
)

ContinuousEnv = Environment

__all__ = [
    "CartPole", "ContinuousEnv", "Dataset", "Environment", "Episode", "LeanPolicy",
    "Policy", "Provenance", "TabularMdp", "TabularPolicy", "UniformPolicy",
    "dumps_dataset", "exact_return_dp", "load_dataset", "loads_dataset",
    "monte_carlo_return", "monte_carlo_returns", "random_mdp", "random_policy",
    "sample_trajectories", "save_dataset", "skewed_policy", "state_distributions",
    "two_state_mdp",
]
