"""
Collapsed Gibbs sampler for spike-and-Laplace regression.

Each marker's indicator c_j is drawn with beta_j integrated out, then
beta_j is drawn given c_j from a two-component truncated-normal mixture.
After the marker sweep, sigma^2, the activation prior's parameters and
lambda are updated in that order.

The Laplace slab has scale 2 * lambda * sigma^2:

    p(beta_j | c_j = 1) = exp(-|beta_j| / (2 lambda sigma^2)) / (4 lambda sigma^2)
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import log_ndtr

from blockreg.data_model import (
    Dataset,
    Hyperparameters,
    ModelState,
    RetainedSample,
    SampleTrace,
    SamplingSchedule,
    initial_state,
    train_error,
)
from blockreg.errors import ConfigError, NumericalError, ZeroVarianceColumn
from blockreg.markov_prior import ActivationPrior, MarkovActivationPrior

# Configure logging
logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

# Rayleigh proposals beat plain normal rejection above this standardized bound
TAIL_SWITCH = 0.66

SIGMA_SHAPES = ("paper", "active")
# accepted spellings of the default shape
SIGMA_SHAPE_ALIASES = {"all": "paper"}


@dataclass(frozen=True)
class ActiveMarginal:
    """Pieces of the c_j = 1 marginal likelihood, all in log space."""

    log_A_minus: float
    log_A_plus: float
    mu_minus: float
    mu_plus: float
    s_sq: float
    log_K: float

    @property
    def total(self) -> float:
        return self.log_K + float(np.logaddexp(self.log_A_minus, self.log_A_plus))

    @property
    def log_prob_negative(self) -> float:
        return self.log_A_minus - float(np.logaddexp(self.log_A_minus, self.log_A_plus))


@dataclass(frozen=True)
class SamplerOptions:
    """
    sigma_shape: "paper" (alias "all") uses (N + 2J + nu0)/2 for the sigma^2 shape,
        "active" uses (N + 2J' + nu0)/2 with J' the number of active markers.
    update_*: switch individual parameter updates off to hold them fixed.
    """

    sigma_shape: str = "paper"
    update_sigma_sq: bool = True
    update_lambda: bool = True
    update_prior_params: bool = True
    log_every: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "sigma_shape", normalize_sigma_shape(self.sigma_shape))


def normalize_sigma_shape(value: str) -> str:
    """Canonical sigma^2 shape name; raises ConfigError for unknown values."""
    shape = SIGMA_SHAPE_ALIASES.get(value, value)
    if shape not in SIGMA_SHAPES:
        raise ConfigError(f"sigma_shape must be one of {SIGMA_SHAPES + tuple(SIGMA_SHAPE_ALIASES)}, got {value!r}")
    return shape


def residuals_excluding(j: int, X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """z_i = y_i - sum_{k != j} x_ik beta_k."""
    return y - X @ beta + X[:, j] * beta[j]


def marginal_loglik_inactive(z: np.ndarray, sigma_sq: float) -> float:
    n = len(z)
    return -0.5 * n * (LOG_2PI + math.log(sigma_sq)) - float(z @ z) / (2.0 * sigma_sq)


def _active_from_stats(s_xx: float, s_zx: float, s_zz: float, n: int, sigma_sq: float,
                       lambda_: float) -> ActiveMarginal:
    if s_xx <= 0.0:
        raise ZeroVarianceColumn("Column has zero sum of squares; its marginal likelihood is undefined")
    half_inv_lambda = 0.5 / lambda_
    mu_minus = (s_zx + half_inv_lambda) / s_xx
    mu_plus = (s_zx - half_inv_lambda) / s_xx
    s_sq = sigma_sq / s_xx
    s = math.sqrt(s_sq)
    log_norm = 0.5 * (LOG_2PI + math.log(s_sq))
    two_sigma_sq = 2.0 * sigma_sq
    # N(-) mass below zero is Phi(-mu/s); N(+) mass above zero is Phi(mu/s)
    log_A_minus = -(s_zz - (s_zx + half_inv_lambda) ** 2 / s_xx) / two_sigma_sq + log_norm + float(log_ndtr(-mu_minus / s))
    log_A_plus = -(s_zz - (s_zx - half_inv_lambda) ** 2 / s_xx) / two_sigma_sq + log_norm + float(log_ndtr(mu_plus / s))
    log_K = -0.5 * n * (LOG_2PI + math.log(sigma_sq)) - math.log(4.0 * lambda_ * sigma_sq)
    return ActiveMarginal(
        log_A_minus=log_A_minus,
        log_A_plus=log_A_plus,
        mu_minus=mu_minus,
        mu_plus=mu_plus,
        s_sq=s_sq,
        log_K=log_K,
    )


def marginal_loglik_active(z: np.ndarray, x_col: np.ndarray, sigma_sq: float, lambda_: float) -> ActiveMarginal:
    """
    Marginal likelihood of the residuals with beta_j integrated against the
    Laplace slab. The returned record's `total` is the log marginal.

    Raises:
        ZeroVarianceColumn: if sum(x_col^2) == 0
    """
    z = np.asarray(z, dtype=np.float64)
    x_col = np.asarray(x_col, dtype=np.float64)
    return _active_from_stats(float(x_col @ x_col), float(z @ x_col), float(z @ z), len(z), sigma_sq, lambda_)


def _draw_indicator(log_lik0: float, log_lik1: float, log_prior0: float, log_prior1: float,
                    rng: np.random.Generator) -> int:
    if log_prior0 == -math.inf and log_prior1 == -math.inf:
        # only reachable from a state the prior itself rules out; let the data decide
        logger.debug("Both indicator states have zero prior mass; using the likelihood alone")
        log_prior0 = log_prior1 = 0.0
    a = log_lik0 + log_prior0
    b = log_lik1 + log_prior1
    log_p1 = b - float(np.logaddexp(a, b))
    return 1 if rng.random() < math.exp(log_p1) else 0


def sample_cj(j: int, state: ModelState, dataset: Dataset, hyper: Hyperparameters, rng: np.random.Generator,
              prior: Optional[ActivationPrior] = None) -> Tuple[int, ActiveMarginal]:
    """
    Draw c_j with beta_j marginalized out.

    Returns the new indicator and the active-marker marginal, which
    sample_betaj needs when the indicator is 1.
    """
    prior = prior or MarkovActivationPrior(dataset.marker_map, hyper)
    X = dataset.X
    z = residuals_excluding(j, X, dataset.y, state.beta)
    active = marginal_loglik_active(z, X[:, j], state.sigma_sq, state.lambda_)
    inactive = marginal_loglik_inactive(z, state.sigma_sq)
    lw0, lw1 = prior.log_weights(j, state.c, state)
    return _draw_indicator(inactive, active.total, lw0, lw1, rng), active


def _standard_lower_truncated(lower: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Standard normal draws conditioned on Z > lower."""
    if lower > TAIL_SWITCH:
        # Rayleigh proposal with acceptance test U^2 * x <= c
        c = 0.5 * lower * lower
        x = c + rng.standard_exponential(size)
        rejected = rng.random(size) ** 2 * x > c
        while np.any(rejected):
            n_rejected = int(np.count_nonzero(rejected))
            proposal = c + rng.standard_exponential(n_rejected)
            accepted = rng.random(n_rejected) ** 2 * proposal <= c
            idx = np.flatnonzero(rejected)
            x[idx[accepted]] = proposal[accepted]
            rejected[idx[accepted]] = False
        return np.sqrt(2.0 * x)
    z = rng.standard_normal(size)
    rejected = z <= lower
    while np.any(rejected):
        n_rejected = int(np.count_nonzero(rejected))
        proposal = rng.standard_normal(n_rejected)
        accepted = proposal > lower
        idx = np.flatnonzero(rejected)
        z[idx[accepted]] = proposal[accepted]
        rejected[idx[accepted]] = False
    return z


def sample_truncated_normal(mean: float, sd: float, side: str, rng: np.random.Generator,
                            size: Optional[int] = None):
    """
    Draw from N(mean, sd^2) conditioned on the value being strictly negative
    (side="negative") or strictly positive (side="positive").

    Works deep in the tail: for a standardized bound above 0.66 a Rayleigh
    proposal is used instead of rejection from the untruncated normal.
    """
    if sd <= 0:
        raise ValueError(f"sd must be positive, got {sd}")
    n = 1 if size is None else int(size)
    tiny = np.nextafter(0.0, 1.0)
    if side == "positive":
        values = mean + sd * _standard_lower_truncated(-mean / sd, n, rng)
        values = np.maximum(values, tiny)
    elif side == "negative":
        values = mean - sd * _standard_lower_truncated(mean / sd, n, rng)
        values = np.minimum(values, -tiny)
    else:
        raise ValueError(f"side must be 'negative' or 'positive', got {side!r}")
    return float(values[0]) if size is None else values


def sample_betaj(c_j: int, active: ActiveMarginal, rng: np.random.Generator) -> float:
    """
    beta_j given c_j: exactly 0 for the spike, else a truncated-normal
    mixture where each side is weighted by its own integral mass, so the
    negative component has weight A(-) / (A(-) + A(+)).
    """
    if c_j == 0:
        return 0.0
    sd = math.sqrt(active.s_sq)
    if rng.random() < math.exp(active.log_prob_negative):
        return sample_truncated_normal(active.mu_minus, sd, "negative", rng)
    return sample_truncated_normal(active.mu_plus, sd, "positive", rng)


def sample_inverse_gamma(shape: float, scale: float, rng: np.random.Generator) -> float:
    """Inv-gamma with density proportional to x^(-shape-1) exp(-scale/x), drawn as 1/Gamma(shape, rate=scale)."""
    return 1.0 / rng.gamma(shape, 1.0 / scale)


def sample_sigma_sq(state: ModelState, dataset: Dataset, hyper: Hyperparameters, rng: np.random.Generator,
                    sigma_shape: str = "paper", rss: Optional[float] = None) -> float:
    if rss is None:
        rss = train_error(dataset.X, dataset.y, state.beta)
    n_coefficients = state.n_active if sigma_shape == "active" else dataset.n_markers
    shape = 0.5 * (dataset.n_individuals + 2 * n_coefficients + hyper.nu0)
    scale = 0.5 * (rss + float(np.sum(np.abs(state.beta))) / state.lambda_ + hyper.nu0 * hyper.s0_sq)
    return sample_inverse_gamma(shape, scale, rng)


def sample_lambda(state: ModelState, hyper: Hyperparameters, rng: np.random.Generator) -> float:
    active_abs = float(np.sum(np.abs(state.beta[state.c == 1])))
    shape = state.n_active + hyper.alpha
    scale = active_abs / (2.0 * state.sigma_sq) + hyper.gamma
    return sample_inverse_gamma(shape, scale, rng)


class GibbsSampler:
    """
    Runs sweeps for one dataset. Holds read-only data and the fitted values
    X @ beta of the state it last swept; the state and the rng belong to
    the caller.
    """

    def __init__(self, dataset: Dataset, hyper: Hyperparameters, prior: Optional[ActivationPrior] = None,
                 options: Optional[SamplerOptions] = None):
        self.dataset = dataset
        self.hyper = hyper
        self.prior = prior or MarkovActivationPrior(dataset.marker_map, hyper)
        self.options = options or SamplerOptions()
        self._X = dataset.X
        self._Xt = np.ascontiguousarray(self._X.T)
        self._y = dataset.y
        self._col_sq = np.einsum("ij,ij->j", self._X, self._X)
        if np.any(self._col_sq <= 0):
            raise ZeroVarianceColumn("Design matrix has an all-zero column")
        self.fitted = np.zeros(dataset.n_individuals)

    def new_state(self) -> ModelState:
        state = initial_state(self.dataset, self.hyper)
        self.prior.initialize(state)
        return state

    def sweep(self, state: ModelState, rng: np.random.Generator) -> ModelState:
        n = self.dataset.n_individuals
        y = self._y
        self.fitted = self._X @ state.beta
        fitted = self.fitted
        beta, c = state.beta, state.c
        sigma_sq, lambda_ = state.sigma_sq, state.lambda_
        log_inactive_const = -0.5 * n * (LOG_2PI + math.log(sigma_sq))

        for j in range(self.dataset.n_markers):
            x = self._Xt[j]
            b_old = beta[j]
            z = y - fitted
            if b_old != 0.0:
                z += x * b_old
            s_zx = float(x @ z)
            s_zz = float(z @ z)
            active = _active_from_stats(self._col_sq[j], s_zx, s_zz, n, sigma_sq, lambda_)
            inactive = log_inactive_const - s_zz / (2.0 * sigma_sq)
            lw0, lw1 = self.prior.log_weights(j, c, state)
            c[j] = _draw_indicator(inactive, active.total, lw0, lw1, rng)
            b_new = sample_betaj(c[j], active, rng)
            if b_new != b_old:
                fitted += x * (b_new - b_old)
                beta[j] = b_new

        if self.options.update_sigma_sq:
            residual = y - fitted
            state.sigma_sq = sample_sigma_sq(state, self.dataset, self.hyper, rng,
                                             sigma_shape=self.options.sigma_shape, rss=float(residual @ residual))
        if self.options.update_prior_params:
            self.prior.update(state, rng)
        if self.options.update_lambda:
            state.lambda_ = sample_lambda(state, self.hyper, rng)
        return state

    def _snapshot(self, state: ModelState, iteration: int) -> RetainedSample:
        snapshot = state.copy()
        if not snapshot.spike_consistent():
            raise NumericalError(f"Iteration {iteration}: inactive marker with nonzero coefficient")
        scalars = (snapshot.sigma_sq, snapshot.lambda_, snapshot.pi0, snapshot.pi1)
        if not (np.all(np.isfinite(snapshot.beta)) and all(math.isfinite(v) for v in scalars)):
            raise NumericalError(f"Iteration {iteration}: non-finite value in sampler state")
        return RetainedSample(state=snapshot, train_error=train_error(self._X, self._y, snapshot.beta))

    def run(self, schedule: SamplingSchedule, initial: Optional[ModelState] = None) -> SampleTrace:
        rng = np.random.default_rng(schedule.seed)
        state = initial.copy() if initial is not None else self.new_state()
        trace = SampleTrace(schedule=schedule)
        total = schedule.burn_in + schedule.iterations
        logger.info(
            f"Running {self.prior.name} chain: {self.dataset.n_markers} markers, {self.dataset.n_individuals} "
            f"individuals, {schedule.burn_in} burn-in + {schedule.iterations} iterations, thin {schedule.thin}"
        )
        for iteration in range(total):
            self.sweep(state, rng)
            kept = iteration - schedule.burn_in + 1
            if kept > 0 and kept % schedule.thin == 0:
                trace.samples.append(self._snapshot(state, iteration))
            if self.options.log_every and (iteration + 1) % self.options.log_every == 0:
                logger.debug(
                    f"Iteration {iteration + 1}/{total}: {state.n_active} active, sigma_sq={state.sigma_sq:.4g}, "
                    f"lambda={state.lambda_:.4g}, pi0={state.pi0:.4g}, pi1={state.pi1:.4g}"
                )
        logger.info(f"Chain finished with {len(trace)} retained samples")
        return trace


def gibbs_sweep(state: ModelState, dataset: Dataset, hyper: Hyperparameters, rng: np.random.Generator,
                prior: Optional[ActivationPrior] = None, options: Optional[SamplerOptions] = None) -> ModelState:
    """One full sweep; updates `state` in place and returns it."""
    return GibbsSampler(dataset, hyper, prior=prior, options=options).sweep(state, rng)


def run_chain(dataset: Dataset, hyper: Hyperparameters, schedule: SamplingSchedule,
              prior: Optional[ActivationPrior] = None, options: Optional[SamplerOptions] = None,
              initial: Optional[ModelState] = None) -> SampleTrace:
    """Burn in, then retain every `thin`-th state of `iterations` sweeps. All randomness comes from schedule.seed."""
    return GibbsSampler(dataset, hyper, prior=prior, options=options).run(schedule, initial=initial)
