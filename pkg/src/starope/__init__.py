"""Off-policy evaluation through abstract reward processes."""

from .abstraction import (
    Abstraction,
    identity_abstraction,
    kmeans_fit,
    lookup_abstraction,
    markov_violation_score,
    single_abstraction,
)
from .arp import Arp, NonTerminatingArp, arp_expected_return, arp_rollout_return, ground_truth_arp
from .estimators import (
    ESTIMATORS,
    StarConfig,
    SupportError,
    WeightTable,
    compute_weights,
    estimate_arp_off_policy,
    estimate_arp_on_policy,
    is_estimate,
    model_based_estimate,
    pdis_estimate,
    run_estimator,
    star_estimate,
    wis_estimate,
    wpdis_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "ESTIMATORS", "Abstraction", "Arp", "NonTerminatingArp", "StarConfig", "SupportError",
    "WeightTable", "arp_expected_return", "arp_rollout_return", "compute_weights",
    "estimate_arp_off_policy", "estimate_arp_on_policy", "ground_truth_arp", "identity_abstraction",
    "is_estimate", "kmeans_fit", "lookup_abstraction", "markov_violation_score", "model_based_estimate",
    "pdis_estimate", "run_estimator", "single_abstraction", "star_estimate", "wis_estimate",
    "wpdis_estimate",
]
