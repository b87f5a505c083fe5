import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starope.abstraction import identity_abstraction, kmeans_fit, lookup_abstraction, single_abstraction
from starope.arp import arp_expected_return
from starope.env import (
    CartPole,
    Dataset,
    Episode,
    LeanPolicy,
    TabularMdp,
    TabularPolicy,
    UniformPolicy,
    exact_return_dp,
    random_mdp,
    random_policy,
    sample_trajectories,
    two_state_mdp,
)
from starope.estimators import (
    ESTIMATORS,
    StarConfig,
    SupportError,
    compute_weights,
    estimate_arp_off_policy,
    estimate_arp_on_policy,
    is_estimate,
    model_based_estimate,
    pdis_estimate,
    run_estimator,
    star_estimate,
    step_ratios,
    wis_estimate,
    wpdis_estimate,
)

SWITCH = TabularPolicy([[0.0, 1.0], [0.0, 1.0]], name="switch")
BASELINES = (is_estimate, pdis_estimate, wis_estimate, wpdis_estimate)


def episode(states, actions, rewards, bprobs):
    return Episode(np.array(states), np.array(actions), np.array(rewards, dtype=float), np.array(bprobs, dtype=float))


def test_weights_on_policy_are_one():
    env, pi = random_mdp(5, 3, 15, seed=0), random_policy(5, 3, seed=1)
    ds = sample_trajectories(env, pi, 100, seed=0)
    for c in (None, 1, 3):
        assert np.all(compute_weights(ds, pi, c).weights == 1.0)


def test_weight_hand_example():
    ds = Dataset.from_episodes([episode([0, 1], [0, 0], [0, 0], [0.25, 0.5])])
    pi_e = TabularPolicy([[0.5, 0.5], [0.25, 0.75]])
    np.testing.assert_array_equal(step_ratios(ds, pi_e)[0], [2.0, 0.5])
    assert compute_weights(ds, pi_e, None).weights[0, 1] == 1.0
    assert compute_weights(ds, pi_e, 1).weights[0, 1] == 0.5
    assert compute_weights(ds, pi_e, 1).mode == "clipped:1"
    assert compute_weights(ds, pi_e, None).mode == "full"


def test_deterministic_pi_e_two_state_weight():
    ds = Dataset.from_episodes([episode([0, 1], [1, 1], [0, 1], [0.5, 0.5])])
    assert compute_weights(ds, SWITCH, None).weights[0, 1] == 4.0


def test_support_violation_names_location():
    ds = Dataset.from_episodes([episode([0, 0], [0, 1], [0, 0], [1.0, 1e-13])])
    with pytest.raises(SupportError, match="episode 0, timestep 1"):
        compute_weights(ds, UniformPolicy(2))


def test_negative_probability_rejected():
    class Bad(UniformPolicy):
        def probs(self, states):
            return np.tile([-0.5, 1.5], (len(states), 1))

    ds = Dataset.from_episodes([episode([0], [0], [0], [0.5])])
    with pytest.raises(ValueError):
        compute_weights(ds, Bad(2))


def test_config_rejects_bad_clip():
    with pytest.raises(ValueError):
        StarConfig(single_abstraction(), clip_c=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(2, 3), st.integers(1, 8), st.integers(0, 2**31 - 1), st.integers(1, 5))
def test_clipped_weights_are_window_products(S, A, T, seed, c):
    env = random_mdp(S, A, T, seed=seed, termination=0.1)
    pi_b, pi_e = random_policy(S, A, seed=seed), random_policy(S, A, seed=seed + 7)
    ds = sample_trajectories(env, pi_b, 8, seed=seed)
    r = step_ratios(ds, pi_e)
    w = compute_weights(ds, pi_e, c).weights
    full = compute_weights(ds, pi_e, None).weights
    for i, L in enumerate(ds.lengths):
        for t in range(L):
            assert w[i, t] == pytest.approx(np.prod(r[i, max(0, t - c + 1):t + 1]), rel=1e-12)
            assert full[i, t] == pytest.approx(np.prod(r[i, :t + 1]), rel=1e-12)
    rmax = r[ds.mask].max()
    # windows shorter than c are allowed, so the bound is r^c or r itself when r < 1
    assert w[ds.mask].max() <= max(rmax, rmax ** c) * (1 + 1e-12)
    assert np.all(w >= 0)


def test_on_policy_arp_from_identical_episodes():
    ds = sample_trajectories(two_state_mdp(), SWITCH, 3, seed=0)
    arp = estimate_arp_on_policy(ds, identity_abstraction(2))
    assert arp.P[0].tolist() == [0.0, 1.0]
    assert arp.R.tolist() == [0.0, 1.0] and arp.eta.tolist() == [1.0, 0.0] and arp.beta.tolist() == [0.0, 1.0]


def test_single_abstraction_counts():
    ds = sample_trajectories(random_mdp(5, 2, 12, seed=3, termination=0.2), UniformPolicy(2), 300, seed=1)
    arp = estimate_arp_on_policy(ds, single_abstraction())
    steps = ds.lengths.sum()
    assert arp.R[0] == pytest.approx(ds.rewards.sum() / steps, rel=1e-12)
    assert arp.beta[0] == pytest.approx(ds.n / steps, rel=1e-12)


def test_unvisited_abstract_state():
    ds = sample_trajectories(two_state_mdp(), TabularPolicy([[1.0, 0.0], [1.0, 0.0]]), 5, seed=0)
    arp = estimate_arp_on_policy(ds, identity_abstraction(2))
    assert arp.P[1, 1] == 1.0 and arp.R[1] == 0.0 and arp.eta[1] == 0.0
    assert not arp.visited[1]


def test_zero_weight_state_is_flagged():
    # state 1 is only reached through action 0, which pi_e never takes
    ds = Dataset.from_episodes([episode([0, 1], [0, 0], [0, 1], [0.5, 0.5]),
                                episode([0, 0], [1, 1], [0, 0], [0.5, 0.5])])
    arp = estimate_arp_off_policy(ds, StarConfig(identity_abstraction(2), None, SWITCH))
    assert arp.meta["zero_weight_states"] == [1]
    assert arp.P[1, 1] == 1.0 and arp.R[1] == 0.0


def test_off_policy_equals_on_policy_bitwise():
    env, pi = random_mdp(6, 3, 20, seed=2), random_policy(6, 3, seed=2)
    ds = sample_trajectories(env, pi, 500, seed=4)
    phi = lookup_abstraction([0, 1, 2, 0, 1, 2])
    on = estimate_arp_on_policy(ds, phi)
    for c in (None, 1, 4):
        off = estimate_arp_off_policy(ds, StarConfig(phi, c, pi))
        for name in ("P", "R", "eta", "beta"):
            assert getattr(off, name).tobytes() == getattr(on, name).tobytes()


def test_two_state_off_policy_unclipped_converges():
    ds = sample_trajectories(two_state_mdp(), UniformPolicy(2), 10_000, seed=0)
    est = star_estimate(ds, StarConfig(identity_abstraction(2), None, SWITCH))
    assert abs(est - 1.0) <= 0.05


def test_two_state_c1_identity_limit():
    # TwoState's horizon cap makes termination time-dependent, so the state
    # alone is not Markov for the ARP.  Enumerating the four equally likely
    # behavior episodes with c=1 weights (2 on switch steps): z0 has weighted
    # mass 6 of which 2 terminal, the 0->1 flow is 4, z1 always ends with
    # reward 1.  So beta(z0) = 1/3, P(z0, z1) = 1 and J = 2/3, not 1.
    four = Dataset.from_episodes([episode([0, 0], [0, a1], [0, 0], [0.5, 0.5]) for a1 in (0, 1)]
                                 + [episode([0, 1], [1, a1], [0, 1], [0.5, 0.5]) for a1 in (0, 1)])
    arp = estimate_arp_off_policy(four, StarConfig(identity_abstraction(2), 1, SWITCH))
    assert arp.beta[0] == pytest.approx(1 / 3, rel=1e-14)
    assert arp.P[0, 1] == 1.0
    assert arp_expected_return(arp) == pytest.approx(2 / 3, rel=1e-14)
    big = sample_trajectories(two_state_mdp(), UniformPolicy(2), 10_000, seed=0)
    assert abs(star_estimate(big, StarConfig(identity_abstraction(2), 1, SWITCH)) - 2 / 3) <= 0.02


def test_single_unclipped_on_policy_is_mean_return():
    env, pi = random_mdp(5, 2, 30, seed=5, termination=0.1), random_policy(5, 2, seed=5)
    ds = sample_trajectories(env, pi, 400, seed=2)
    mean = ds.returns.mean()
    assert abs(star_estimate(ds, StarConfig(single_abstraction(), None, pi)) - mean) <= 1e-10
    for fn in BASELINES:
        assert abs(fn(ds, pi) - mean) <= 1e-10


def test_zero_reward_everything_zero():
    mdp = random_mdp(4, 2, 10, seed=1)
    zero = TabularMdp(mdp.transition, np.zeros((4, 2)), mdp.initial_dist, mdp.termination, 10)
    ds = sample_trajectories(zero, UniformPolicy(2), 50, seed=0)
    pi_e = random_policy(4, 2, seed=3)
    assert star_estimate(ds, StarConfig(identity_abstraction(4), 2, pi_e)) == 0.0
    for fn in BASELINES:
        assert fn(ds, pi_e) == 0.0
    assert model_based_estimate(ds, pi_e, 4) == 0.0


def test_is_hand_enumeration():
    eps = [episode([0, 1], [1, 1], [0, 1], [0.5, 0.5]),  # rho 4, G 1
           episode([0, 1], [1, 0], [0, 1], [0.5, 0.5]),  # rho 0
           episode([0, 0], [0, 1], [0, 0], [0.5, 0.5]),  # rho 0
           episode([0, 1], [1, 1], [0, 1], [0.5, 0.5])]  # rho 4, G 1
    ds = Dataset.from_episodes(eps)
    assert is_estimate(ds, SWITCH) == (4 * 1 + 0 + 0 + 4 * 1) / 4
    assert wis_estimate(ds, SWITCH) == 1.0
    # PDIS: t=0 rewards are 0; t=1 weights (4, 0, 0, 4) on rewards (1, 1, 0, 1)
    assert pdis_estimate(ds, SWITCH) == 2.0
    assert wpdis_estimate(ds, SWITCH) == 1.0


def test_wpdis_zero_denominator_contributes_zero():
    ds = Dataset.from_episodes([episode([0, 0], [0, 0], [1, 1], [0.5, 0.5])])
    assert wpdis_estimate(ds, SWITCH) == 0.0
    assert wis_estimate(ds, SWITCH) == 0.0


def test_wpdis_variable_length_on_policy():
    ds = Dataset.from_episodes([episode([0], [0], [3.0], [1.0]),
                                episode([0, 0, 0], [0, 0, 0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0])])
    pi = UniformPolicy(1)
    assert wpdis_estimate(ds, pi) == 3.0 == ds.returns.mean()


def test_model_based_deterministic_coverage_is_exact():
    p = np.zeros((3, 2, 3))
    p[0, 0, 1] = p[0, 1, 2] = p[1, 0, 0] = p[1, 1, 2] = p[2, :, 2] = 1.0
    r = np.array([[1.0, 2.0], [3.0, 4.0], [0.0, 0.0]])
    mdp = TabularMdp(p, r, [1.0, 0.0, 0.0], [0.0, 0.0, 1.0], 400)
    eps = [episode([0, 1], [0, 1], [1, 4], [0.5, 0.5]),
           episode([0], [1], [2], [0.5]),
           episode([0, 1, 0], [0, 0, 1], [1, 3, 2], [0.5, 0.5, 0.5])]
    ds = Dataset.from_episodes(eps)
    pi_e = TabularPolicy([[0.5, 0.5], [1.0, 0.0], [0.5, 0.5]])
    assert model_based_estimate(ds, pi_e, 3) == pytest.approx(exact_return_dp(mdp, pi_e), abs=1e-9)


def test_model_based_two_state_on_policy_converges():
    ds = sample_trajectories(two_state_mdp(), UniformPolicy(2), 20_000, seed=3)
    assert abs(model_based_estimate(ds, UniformPolicy(2), 2) - 0.5) <= 0.02


def test_model_based_unvisited_pairs_finite():
    ds = sample_trajectories(two_state_mdp(), TabularPolicy([[1.0, 0.0], [1.0, 0.0]]), 10, seed=0)
    # pi_e takes action 1, never logged: dead end with zero reward
    assert model_based_estimate(ds, SWITCH, 2) == 0.0


def test_model_based_continuous_via_abstraction():
    ds = sample_trajectories(CartPole(), UniformPolicy(2), 300, seed=0)
    phi = kmeans_fit(ds.flat_states(), 8, seed=1)
    v = model_based_estimate(ds, LeanPolicy(), abstraction=phi)
    assert np.isfinite(v) and v > 0
    with pytest.raises(ValueError):
        model_based_estimate(ds, LeanPolicy())


@pytest.mark.parametrize("kappa", [2.0, 0.25, -4.0])
def test_scale_equivariance_exact(kappa):
    env = random_mdp(5, 2, 15, seed=9, termination=0.1)
    pi_b, pi_e = UniformPolicy(2), random_policy(5, 2, seed=4)
    ds = sample_trajectories(env, pi_b, 200, seed=3)
    sc = ds.scaled(kappa)
    for name in ESTIMATORS:
        kw = dict(abstraction=lookup_abstraction([0, 1, 1, 2, 0]), clip_c=2, num_states=5)
        assert run_estimator(name, sc, pi_e, **kw) == kappa * run_estimator(name, ds, pi_e, **kw)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 10.0))
def test_scale_equivariance_property(seed, kappa):
    env = random_mdp(4, 2, 10, seed=seed, termination=0.1)
    ds = sample_trajectories(env, UniformPolicy(2), 30, seed=seed)
    pi_e = random_policy(4, 2, seed=seed + 1)
    for name in ESTIMATORS:
        kw = dict(abstraction=identity_abstraction(4), clip_c=1, num_states=4)
        a = run_estimator(name, ds.scaled(kappa), pi_e, **kw)
        b = kappa * run_estimator(name, ds, pi_e, **kw)
        assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([None, 1, 2]))
def test_star_invariant_to_abstract_relabeling(seed, c):
    env = random_mdp(6, 2, 12, seed=seed, termination=0.1)
    ds = sample_trajectories(env, UniformPolicy(2), 60, seed=seed)
    pi_e = random_policy(6, 2, seed=seed + 3)
    table = np.array([0, 1, 2, 0, 1, 2])
    perm = np.random.default_rng(seed).permutation(3)
    a = star_estimate(ds, StarConfig(lookup_abstraction(table, 3), c, pi_e))
    b = star_estimate(ds, StarConfig(lookup_abstraction(perm[table], 3), c, pi_e))
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_estimators_deterministic():
    ds = sample_trajectories(random_mdp(5, 2, 20, seed=1), UniformPolicy(2), 100, seed=0)
    pi_e = random_policy(5, 2, seed=2)
    for name in ESTIMATORS:
        kw = dict(abstraction=identity_abstraction(5), clip_c=3, num_states=5)
        assert run_estimator(name, ds, pi_e, **kw) == run_estimator(name, ds, pi_e, **kw)


def test_run_estimator_errors():
    ds = sample_trajectories(two_state_mdp(), UniformPolicy(2), 10, seed=0)
    with pytest.raises(ValueError):
        run_estimator("nope", ds, SWITCH)
    with pytest.raises(ValueError):
        run_estimator("star", ds, SWITCH)
