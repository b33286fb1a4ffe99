"""
Comparison methods: ridge regression, the lasso with cross-validated
penalty, the spike-and-Laplace model with an independent Bernoulli prior
on the indicators, and the single-marker Wald test.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import stats

from blockreg.data_model import Dataset, Hyperparameters, ModelState, SampleTrace, SamplingSchedule
from blockreg.errors import DegenerateColumn, DimensionMismatch, NoConvergence, SolveFailure
from blockreg.gibbs_sampler import SamplerOptions, run_chain
from blockreg.markov_prior import ActivationPrior, sample_beta_distribution

# Configure logging
logger = logging.getLogger(__name__)

DEFAULT_RIDGE_REG = 0.1
P_VALUE_FLOOR = 1e-300


def ridge_fit(X: np.ndarray, y: np.ndarray, reg: float = DEFAULT_RIDGE_REG) -> np.ndarray:
    """Solve (X'X + reg I) beta = X'y by Cholesky factorization."""
    if reg <= 0:
        raise ValueError(f"Ridge regularization must be positive, got {reg}")
    gram = X.T @ X + reg * np.eye(X.shape[1])
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
        beta = scipy.linalg.cho_solve(factor, X.T @ y)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SolveFailure(f"Regularized normal equations could not be solved: {e}") from e
    if not np.all(np.isfinite(beta)):
        raise SolveFailure("Ridge solution is not finite")
    return beta


@dataclass
class LassoFit:
    beta: np.ndarray
    penalty: float
    n_iterations: int
    max_kkt_violation: float
    objective_history: List[float] = field(default_factory=list)


def soft_threshold(x: float, t: float) -> float:
    return math.copysign(max(abs(x) - t, 0.0), x)


def lasso_objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, penalty: float) -> float:
    """(1/2) sum of squared residuals + penalty * L1 norm."""
    r = y - X @ beta
    return 0.5 * float(r @ r) + penalty * float(np.sum(np.abs(beta)))


def lasso_kkt_violation(X: np.ndarray, y: np.ndarray, beta: np.ndarray, penalty: float) -> float:
    gradient = X.T @ (y - X @ beta)
    active = beta != 0
    violation = np.where(
        active,
        np.abs(gradient - penalty * np.sign(beta)),
        np.maximum(np.abs(gradient) - penalty, 0.0),
    )
    return float(np.max(violation)) if len(violation) else 0.0


def lasso_fit(X: np.ndarray, y: np.ndarray, penalty: float, tol: float = 1e-7, max_cycles: int = 10_000,
              kkt_tol: float = 1e-6, beta_init: Optional[np.ndarray] = None) -> LassoFit:
    """
    Cyclic coordinate descent with soft-thresholding.

    Works on X'X and X'y, keeping the gradient X'(y - X beta) current after
    each coordinate move. After a full pass that changes the solution, only
    the nonzero coefficients are cycled until they settle; a full pass then
    confirms the active set. Converges when the largest coefficient change
    in a full pass is below `tol` and the KKT conditions hold to `kkt_tol`.

    Raises:
        NoConvergence: after `max_cycles` cycles without convergence
    """
    if penalty < 0:
        raise ValueError(f"Lasso penalty must be non-negative, got {penalty}")
    n_markers = X.shape[1]
    gram = X.T @ X
    xty = X.T @ y
    col_sq = np.diag(gram).copy()
    beta = np.zeros(n_markers) if beta_init is None else np.array(beta_init, dtype=np.float64)
    history = [lasso_objective(X, y, beta, penalty)]
    active_only = False

    for cycle in range(1, max_cycles + 1):
        if active_only:
            coordinates = np.flatnonzero(beta)
        else:
            coordinates = range(n_markers)
            gradient = xty - gram @ beta
        max_change = 0.0
        for j in coordinates:
            if col_sq[j] == 0:
                continue
            rho = gradient[j] + col_sq[j] * beta[j]
            new = soft_threshold(rho, penalty) / col_sq[j]
            delta = new - beta[j]
            if delta != 0.0:
                gradient -= gram[j] * delta
                beta[j] = new
                max_change = max(max_change, abs(delta))
        history.append(lasso_objective(X, y, beta, penalty))
        if max_change >= tol:
            active_only = True
        elif active_only:
            active_only = False
        else:
            violation = lasso_kkt_violation(X, y, beta, penalty)
            if violation <= kkt_tol:
                return LassoFit(beta=beta, penalty=penalty, n_iterations=cycle, max_kkt_violation=violation,
                                objective_history=history)

    violation = lasso_kkt_violation(X, y, beta, penalty)
    raise NoConvergence(f"Lasso did not converge in {max_cycles} cycles at penalty {penalty}", violation)


def default_penalty_grid(X: np.ndarray, y: np.ndarray, n_values: int = 50, ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced penalties from max_j |x_j'y| down to ratio times that."""
    penalty_max = float(np.max(np.abs(X.T @ y)))
    if penalty_max == 0.0:
        return np.array([0.0])
    return penalty_max * np.logspace(0.0, math.log10(ratio), n_values)


def lasso_cv(X: np.ndarray, y: np.ndarray, grid: Optional[Sequence[float]] = None, folds: int = 5,
             seed: int = 0) -> float:
    """
    Choose the lasso penalty by k-fold cross-validated mean squared
    prediction error. Ties go to the larger penalty.

    Fold fits scale the penalty by n_train / N so that the chosen value
    applies to the full-data objective.
    """
    n = X.shape[0]
    if folds < 2:
        raise ValueError(f"Cross-validation needs at least 2 folds, got {folds}")
    if folds > n:
        raise DimensionMismatch(f"{folds} folds requested for {n} individuals")
    grid = default_penalty_grid(X, y) if grid is None else np.asarray(grid, dtype=np.float64)
    if len(grid) == 0:
        raise ValueError("Penalty grid is empty")
    grid = np.sort(grid)[::-1]
    if len(grid) == 1:
        return float(grid[0])

    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=int)
    fold_of[rng.permutation(n)] = np.arange(n) % folds
    errors = np.zeros((folds, len(grid)))

    for fold in range(folds):
        test = fold_of == fold
        X_train, y_train = X[~test], y[~test]
        X_test, y_test = X[test], y[test]
        scale = len(y_train) / n
        beta = None
        for k, penalty in enumerate(grid):
            fit = lasso_fit(X_train, y_train, penalty * scale, beta_init=beta)
            beta = fit.beta
            prediction_error = y_test - X_test @ beta
            errors[fold, k] = float(np.mean(prediction_error ** 2))

    cv_error = errors.mean(axis=0)
    best = int(np.argmin(cv_error))
    logger.debug(f"Lasso CV chose penalty {grid[best]:.6g} (CV error {cv_error[best]:.6g}) from {len(grid)} values")
    return float(grid[best])


class BernoulliActivationPrior(ActivationPrior):
    """
    Independent indicators, P(c_j = 1) = p, with a Beta prior on p.

    p is stored in state.pi1 and 1 - p in state.pi0.
    """

    name = "bernoulli"

    def __init__(self, hyper: Hyperparameters):
        self.hyper = hyper

    def initialize(self, state: ModelState) -> None:
        p = self.hyper.bern_a / (self.hyper.bern_a + self.hyper.bern_b)
        state.pi1, state.pi0 = p, 1.0 - p

    def log_weights(self, j: int, c: np.ndarray, state: ModelState) -> Tuple[float, float]:
        return math.log(1.0 - state.pi1), math.log(state.pi1)

    def update(self, state: ModelState, rng: np.random.Generator) -> None:
        n_active = state.n_active
        p = sample_beta_distribution(self.hyper.bern_a + n_active,
                                     self.hyper.bern_b + len(state.c) - n_active, rng)
        state.pi1, state.pi0 = p, 1.0 - p


def bernoulli_prior_chain(dataset: Dataset, hyper: Hyperparameters, schedule: SamplingSchedule,
                          options: Optional[SamplerOptions] = None,
                          initial: Optional[ModelState] = None) -> SampleTrace:
    """The block model's sampler with the Markov prior replaced by i.i.d. Bernoulli indicators."""
    return run_chain(dataset, hyper, schedule, prior=BernoulliActivationPrior(hyper), options=options,
                     initial=initial)


@dataclass
class WaldResult:
    statistic: np.ndarray
    p_value: np.ndarray
    neg_log10_p: np.ndarray


def single_marker_wald(X: np.ndarray, y: np.ndarray) -> WaldResult:
    """
    Per-marker simple regression y = a + b x_j with a t test on b.

    p-values are two-sided with N - 2 degrees of freedom and floored at
    1e-300 so that -log10(p) stays finite.

    Raises:
        DegenerateColumn: a marker column is constant
    """
    n = X.shape[0]
    if n < 3:
        raise DimensionMismatch(f"The Wald test needs at least 3 individuals, got {n}")
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sxx = np.einsum("ij,ij->j", xc, xc)
    if np.any(sxx == 0):
        raise DegenerateColumn(f"Marker column {int(np.flatnonzero(sxx == 0)[0])} is constant")
    b = (xc.T @ yc) / sxx
    residual = yc[:, None] - xc * b
    rss = np.einsum("ij,ij->j", residual, residual)
    df = n - 2
    se = np.sqrt(rss / df / sxx)

    with np.errstate(divide="ignore", invalid="ignore"):
        statistic = np.where(se > 0, b / se, np.sign(b) * np.inf)
    statistic = np.where((se == 0) & (b == 0), 0.0, statistic)
    p_value = 2.0 * stats.t.sf(np.abs(statistic), df)
    p_value = np.clip(p_value, P_VALUE_FLOOR, 1.0)
    return WaldResult(statistic=statistic, p_value=p_value, neg_log10_p=-np.log10(p_value))
