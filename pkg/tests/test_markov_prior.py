import math

import numpy as np
import pytest

from blockreg.data_model import Hyperparameters, MarkerMap, ModelState
from blockreg.errors import DegenerateBeta, HyperparameterError
from blockreg.markov_prior import (
    MarkovActivationPrior,
    TransitionParams,
    chain_log_prior,
    initial_prob,
    no_recombination_prob,
    sample_beta_distribution,
    sample_pi0,
    transition_counts,
    transition_prob,
)


def _state(pi0=0.9, pi1=0.7, c=(0, 0, 0)):
    c = np.array(c, dtype=np.int8)
    return ModelState(beta=np.zeros(len(c)), c=c, sigma_sq=1.0, lambda_=1.0, pi0=pi0, pi1=pi1)


@pytest.mark.parametrize("d_kb,rho", [(0.0, 0.1), (1.0, 0.1), (12.5, 0.4), (1e4, 1.0)])
@pytest.mark.parametrize("c_prev", [0, 1])
def test_transition_rows_sum_to_one(d_kb, rho, c_prev):
    params = TransitionParams(pi0=0.83, pi1=0.61)
    total = transition_prob(c_prev, 0, d_kb, rho, params) + transition_prob(c_prev, 1, d_kb, rho, params)
    assert total == pytest.approx(1.0, abs=1e-15)


def test_no_distance_means_no_switch():
    params = TransitionParams(pi0=0.5, pi1=0.5)
    assert transition_prob(0, 0, 0.0, 0.3, params) == 1.0
    assert transition_prob(1, 0, 0.0, 0.3, params) == 0.0


def test_far_markers_follow_switch_matrix():
    params = TransitionParams(pi0=0.83, pi1=0.61)
    assert no_recombination_prob(1e4, 1.0) == 0.0
    assert transition_prob(1, 1, 1e4, 1.0, params) == 0.61
    assert transition_prob(0, 1, 1e4, 1.0, params) == pytest.approx(0.17)


def test_transition_params_range():
    with pytest.raises(HyperparameterError):
        TransitionParams(pi0=1.0, pi1=0.5)
    with pytest.raises(HyperparameterError):
        TransitionParams(pi0=0.5, pi1=0.0)


def test_chain_log_prior_matches_product():
    m = MarkerMap(positions_kb=[0.0, 1.0, 3.0, 3.5], rho=[0.0, 0.2, 0.1, 0.5])
    params = TransitionParams(pi0=0.8, pi1=0.6)
    c = np.array([0, 1, 1, 0])
    expected = math.log(0.5)
    for j in range(1, 4):
        expected += math.log(transition_prob(c[j - 1], c[j], m.d[j], m.rho[j], params))
    assert chain_log_prior(c, m, params) == pytest.approx(expected, rel=1e-14)


def test_impossible_chain_has_zero_prior():
    m = MarkerMap(positions_kb=[0.0, 0.0], rho=[0.0, 0.5])
    assert chain_log_prior(np.array([0, 1]), m, TransitionParams(0.8, 0.6)) == -math.inf


def test_full_recombination_reduces_to_independent_indicators():
    m = MarkerMap(positions_kb=[0.0, 1e4, 2e4, 3e4], rho=[0.0, 1.0, 1.0, 1.0])
    p = 0.3
    c = np.array([1, 0, 0, 1])
    expected = math.log(0.5) + math.log(1 - p) * 2 + math.log(p)
    assert chain_log_prior(c, m, TransitionParams(pi0=1 - p, pi1=p)) == pytest.approx(expected, rel=1e-14)


def test_transition_counts_fractional_and_switches():
    m = MarkerMap(positions_kb=[0.0, 1.0, 2.0, 3.0, 4.0], rho=[0.5] * 5)
    c = np.array([0, 0, 1, 1, 0])
    e = math.exp(-0.5)
    n00, n01 = transition_counts(c, m, 0, 0.9)
    assert n01 == 1
    assert n00 == pytest.approx((1 - e) * 0.9 / (e + (1 - e) * 0.9))
    n11, n10 = transition_counts(c, m, 1, 0.7)
    assert n10 == 1
    assert n11 == pytest.approx((1 - e) * 0.7 / (e + (1 - e) * 0.7))


def test_counts_single_marker():
    m = MarkerMap(positions_kb=[0.0], rho=[0.0])
    assert transition_counts(np.array([1]), m, 1, 0.5) == (0.0, 0)


def test_beta_draws_match_mean(rng):
    draws = np.array([sample_beta_distribution(10.0, 2.0, rng) for _ in range(20000)])
    assert np.all((draws > 0) & (draws < 1))
    assert draws.mean() == pytest.approx(10.0 / 12.0, abs=0.005)


def test_beta_draws_stay_inside_unit_interval(rng):
    for _ in range(200):
        value = sample_beta_distribution(1e-3, 1e-3, rng)
        assert 0.0 < value < 1.0


def test_degenerate_beta(rng):
    with pytest.raises(DegenerateBeta):
        sample_beta_distribution(0.0, 1.0, rng)


def test_pi0_posterior_without_linkage(rng):
    # far-apart markers: every same-state transition counts in full
    m = MarkerMap(positions_kb=np.arange(6) * 1e4, rho=np.ones(6))
    c = np.array([0, 0, 0, 0, 1, 1])
    hyper = Hyperparameters(a00=1.0, b00=1.0)
    draws = np.array([sample_pi0(c, m, 0.5, hyper, rng) for _ in range(20000)])
    # Beta(3 + 1, 1 + 1)
    assert draws.mean() == pytest.approx(4.0 / 6.0, abs=0.005)


def test_markov_prior_log_weights():
    m = MarkerMap(positions_kb=[0.0, 1.0, 2.0], rho=[0.0, 0.3, 0.3])
    prior = MarkovActivationPrior(m, Hyperparameters())
    state = _state(pi0=0.9, pi1=0.7, c=(0, 1, 1))
    params = TransitionParams(0.9, 0.7)

    lw0, lw1 = prior.log_weights(1, state.c, state)
    assert lw0 == pytest.approx(math.log(transition_prob(0, 0, 1.0, 0.3, params))
                                + math.log(transition_prob(0, 1, 1.0, 0.3, params)))
    assert lw1 == pytest.approx(math.log(transition_prob(0, 1, 1.0, 0.3, params))
                                + math.log(transition_prob(1, 1, 1.0, 0.3, params)))

    lw0, lw1 = prior.log_weights(0, state.c, state)
    assert lw1 - lw0 == pytest.approx(math.log(transition_prob(1, 1, 1.0, 0.3, params))
                                      - math.log(transition_prob(0, 1, 1.0, 0.3, params)))

    # the conditional weights agree with differences of the full chain prior
    c1 = state.c.copy()
    c1[2] = 0
    lw0, lw1 = prior.log_weights(2, state.c, state)
    assert lw1 - lw0 == pytest.approx(prior.log_prior(state.c, state) - prior.log_prior(c1, state))


def test_markov_prior_initialize_and_update(rng):
    m = MarkerMap(positions_kb=np.arange(5.0), rho=np.full(5, 0.2))
    prior = MarkovActivationPrior(m, Hyperparameters(a00=4.0, b00=1.0, a10=3.0, b10=1.0))
    state = _state(c=(0, 0, 1, 1, 0))
    prior.initialize(state)
    assert state.pi0 == pytest.approx(0.8)
    assert state.pi1 == pytest.approx(0.75)
    prior.update(state, rng)
    assert 0.0 < state.pi0 < 1.0
    assert 0.0 < state.pi1 < 1.0


def test_initial_prob_is_uniform():
    assert initial_prob(0) == initial_prob(1) == 0.5


def test_single_marker_chain_has_only_initial_term():
    m = MarkerMap(positions_kb=[2.0], rho=[0.3])
    assert chain_log_prior(np.array([1]), m, TransitionParams(0.8, 0.6)) == pytest.approx(math.log(0.5))


@pytest.mark.parametrize("c_prev", [0, 1])
def test_transition_limits(c_prev):
    params = TransitionParams(pi0=0.83, pi1=0.61)
    # d * rho = 1e-12: the state is copied
    assert transition_prob(c_prev, c_prev, 1e-12, 1.0, params) == pytest.approx(1.0, abs=1e-9)
    assert transition_prob(c_prev, 1 - c_prev, 1e-12, 1.0, params) == pytest.approx(0.0, abs=1e-9)
    # d * rho = 50: the switch matrix alone
    stay = 0.83 if c_prev == 0 else 0.61
    assert transition_prob(c_prev, c_prev, 50.0, 1.0, params) == pytest.approx(stay, abs=1e-9)
    assert transition_prob(c_prev, 1 - c_prev, 50.0, 1.0, params) == pytest.approx(1 - stay, abs=1e-9)


def test_transition_prob_worked_value():
    params = TransitionParams(pi0=0.8, pi1=0.5)
    assert transition_prob(0, 0, 1.0, 0.1, params) == pytest.approx(0.980967, abs=1e-6)
