"""
Recombination-aware Markov chain prior over activation indicators.

P(c) = P(c_1) * prod_j P(c_j | c_{j-1}) with

    P(c_j | c_{j-1}) = exp(-d_j rho_j) delta(c_j, c_{j-1})
                       + (1 - exp(-d_j rho_j)) Pi[c_{j-1}, c_j]

and Pi = [[pi0, 1 - pi0], [1 - pi1, pi1]]. A state change can only come
from the recombination branch, so switches are counted as whole
transitions while same-state transitions are split between the two
branches in proportion to their probabilities.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from blockreg.data_model import Hyperparameters, MarkerMap, ModelState
from blockreg.errors import DegenerateBeta, HyperparameterError

# Configure logging
logger = logging.getLogger(__name__)

# exp(-x) is treated as exactly 0 beyond this
MAX_EXPONENT = 700.0

INITIAL_PROB = 0.5


@dataclass(frozen=True)
class TransitionParams:
    pi0: float
    pi1: float

    def __post_init__(self):
        for name in ("pi0", "pi1"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise HyperparameterError(f"{name} must lie in the open interval (0, 1), got {value}")

    @classmethod
    def from_state(cls, state: ModelState) -> "TransitionParams":
        return cls(pi0=state.pi0, pi1=state.pi1)


def no_recombination_prob(d_kb: float, rho: float) -> float:
    """exp(-d * rho), clamped to 0 when d * rho > 700."""
    x = d_kb * rho
    if x > MAX_EXPONENT:
        return 0.0
    return math.exp(-x)


def no_recombination_probs(marker_map: MarkerMap) -> np.ndarray:
    """Vector of exp(-d_j rho_j); entry 0 is unused and set to 1."""
    x = marker_map.d * marker_map.rho
    keep = np.where(x > MAX_EXPONENT, 0.0, np.exp(-np.minimum(x, MAX_EXPONENT)))
    if len(keep):
        keep[0] = 1.0
    return keep


def _transition(c_prev: int, c_next: int, keep: float, pi0: float, pi1: float) -> float:
    stay = pi0 if c_prev == 0 else pi1
    switch_prob = stay if c_next == c_prev else 1.0 - stay
    return keep * (1.0 if c_next == c_prev else 0.0) + (1.0 - keep) * switch_prob


def transition_prob(c_prev: int, c_next: int, d_kb: float, rho: float, params: TransitionParams) -> float:
    """P(c_next | c_prev) across an interval of length d_kb with rate rho."""
    keep = no_recombination_prob(d_kb, rho)
    return _transition(int(c_prev), int(c_next), keep, params.pi0, params.pi1)


def initial_prob(c1: int) -> float:
    """P(c_1); uniform over both states."""
    return INITIAL_PROB


def _log(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


def chain_log_prior(c: np.ndarray, marker_map: MarkerMap, params: TransitionParams) -> float:
    """log P(c) under the Markov chain prior; -inf for impossible chains."""
    c = np.asarray(c, dtype=int)
    keep = no_recombination_probs(marker_map)
    total = _log(initial_prob(c[0]))
    for j in range(1, len(c)):
        total += _log(_transition(c[j - 1], c[j], keep[j], params.pi0, params.pi1))
    return total


def transition_counts(c: np.ndarray, marker_map: MarkerMap, state_value: int, prev_param: float) -> Tuple[float, int]:
    """
    Evidence counts for the stay probability of `state_value`.

    Returns (fractional same-state count, integer switch count). Each
    same-state transition is weighted by the share of its probability that
    comes from the recombination branch, evaluated at the previous
    iteration's parameter.
    """
    c = np.asarray(c, dtype=int)
    if len(c) < 2:
        return 0.0, 0
    keep = no_recombination_probs(marker_map)[1:]
    from_state = c[:-1] == state_value
    same = from_state & (c[1:] == state_value)
    switched = from_state & (c[1:] != state_value)
    recombined = (1.0 - keep) * prev_param
    weights = recombined / (keep + recombined)
    return float(np.sum(weights[same])), int(np.count_nonzero(switched))


def sample_beta_distribution(a: float, b: float, rng: np.random.Generator) -> float:
    """Beta(a, b) from two Gamma draws, kept inside the open unit interval."""
    if a <= 0 or b <= 0:
        raise DegenerateBeta(f"Beta shape parameters must be positive, got ({a}, {b})")
    g1 = rng.standard_gamma(a)
    g2 = rng.standard_gamma(b)
    total = g1 + g2
    if total > 0.0:
        value = g1 / total
    else:
        # both draws underflowed; all the mass is at the edges
        value = 1.0 if rng.random() < a / (a + b) else 0.0
    tiny = np.finfo(np.float64).eps
    return float(min(max(value, tiny), 1.0 - tiny))


def sample_pi0(c: np.ndarray, marker_map: MarkerMap, pi0_prev: float, hyper: Hyperparameters,
               rng: np.random.Generator) -> float:
    """Draw pi0 from Beta(n00 + a00, n01 + b00)."""
    n00, n01 = transition_counts(c, marker_map, 0, pi0_prev)
    return sample_beta_distribution(n00 + hyper.a00, n01 + hyper.b00, rng)


def sample_pi1(c: np.ndarray, marker_map: MarkerMap, pi1_prev: float, hyper: Hyperparameters,
               rng: np.random.Generator) -> float:
    """Draw pi1 from Beta(n11 + a10, n10 + b10)."""
    n11, n10 = transition_counts(c, marker_map, 1, pi1_prev)
    return sample_beta_distribution(n11 + hyper.a10, n10 + hyper.b10, rng)


class ActivationPrior:
    """Prior over the indicator sequence c, as seen by the Gibbs sampler."""

    name = "abstract"

    def initialize(self, state: ModelState) -> None:
        """Set this prior's parameters in a fresh state."""
        raise NotImplementedError

    def log_weights(self, j: int, c: np.ndarray, state: ModelState) -> Tuple[float, float]:
        """Unnormalized log prior of c_j = 0 and c_j = 1 given the other indicators."""
        raise NotImplementedError

    def update(self, state: ModelState, rng: np.random.Generator) -> None:
        """Draw this prior's parameters from their conditional posterior."""
        raise NotImplementedError


class MarkovActivationPrior(ActivationPrior):
    """The recombination-aware chain; parameters are state.pi0 and state.pi1."""

    name = "block"

    def __init__(self, marker_map: MarkerMap, hyper: Hyperparameters):
        self.marker_map = marker_map
        self.hyper = hyper
        self._keep = no_recombination_probs(marker_map)

    def initialize(self, state: ModelState) -> None:
        state.pi0 = self.hyper.a00 / (self.hyper.a00 + self.hyper.b00)
        state.pi1 = self.hyper.a10 / (self.hyper.a10 + self.hyper.b10)

    def log_weights(self, j: int, c: np.ndarray, state: ModelState) -> Tuple[float, float]:
        last = len(c) - 1
        weights = []
        for k in (0, 1):
            if j == 0:
                lw = _log(initial_prob(k))
            else:
                lw = _log(_transition(c[j - 1], k, self._keep[j], state.pi0, state.pi1))
            if j < last:
                lw += _log(_transition(k, c[j + 1], self._keep[j + 1], state.pi0, state.pi1))
            weights.append(lw)
        return weights[0], weights[1]

    def update(self, state: ModelState, rng: np.random.Generator) -> None:
        # both draws use the previous iteration's values for the fractional counts
        pi0_prev, pi1_prev = state.pi0, state.pi1
        state.pi0 = sample_pi0(state.c, self.marker_map, pi0_prev, self.hyper, rng)
        state.pi1 = sample_pi1(state.c, self.marker_map, pi1_prev, self.hyper, rng)

    def log_prior(self, c: np.ndarray, state: ModelState) -> float:
        return chain_log_prior(c, self.marker_map, TransitionParams.from_state(state))
