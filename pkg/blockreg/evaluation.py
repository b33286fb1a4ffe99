"""
Posterior summaries, marker ranking and precision-recall benchmarking.

Rankings are 0-based arrays of marker indices, best first. Ties are broken
by ascending marker index everywhere so every reported number is
reproducible.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from blockreg.baselines import (
    DEFAULT_RIDGE_REG,
    BernoulliActivationPrior,
    lasso_cv,
    lasso_fit,
    ridge_fit,
    single_marker_wald,
)
from blockreg.data_model import Dataset, Hyperparameters, SampleTrace, SamplingSchedule, center_phenotype
from blockreg.errors import BenchmarkError, ConfigError, EmptyTrace, EmptyTruth, NonFiniteValue
from blockreg.gibbs_sampler import SamplerOptions, run_chain
from blockreg.markov_prior import MarkovActivationPrior
from blockreg.simulator import SimConfig, replicate_seeds, simulate

# Configure logging
logger = logging.getLogger(__name__)

RANK_MODES = ("abs_beta", "p_c", "neg_log10_p")
METHODS = ("block", "bernoulli", "ridge", "lasso", "wald")
BAYESIAN_METHODS = ("block", "bernoulli")
RECALL_LEVELS = np.arange(1, 11) / 10.0


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    p_c: np.ndarray
    beta_mean: np.ndarray
    beta_best: np.ndarray
    c_best: np.ndarray
    n_samples: int


def posterior_summary(trace: SampleTrace) -> PosteriorSummary:
    """
    Activation frequencies, posterior-mean coefficients (spike zeros
    included) and the retained snapshot with the lowest train error. Ties
    in train error go to the earliest snapshot.

    Raises:
        EmptyTrace: the trace has no retained samples
    """
    n = len(trace)
    if n == 0:
        raise EmptyTrace("Cannot summarize a trace with no retained samples")
    indicators = trace.indicators
    p_c = np.count_nonzero(indicators, axis=0) / n
    beta_mean = trace.betas.mean(axis=0)
    best = int(np.argmin(trace.train_errors))
    best_state = trace.samples[best].state
    return PosteriorSummary(
        p_c=p_c,
        beta_mean=beta_mean,
        beta_best=best_state.beta.copy(),
        c_best=best_state.c.copy(),
        n_samples=n,
    )


def rank_markers(scores: Sequence[float], mode: str = "abs_beta") -> np.ndarray:
    """
    Order marker indices from most to least likely causal.

    abs_beta sorts by descending |score|; p_c and neg_log10_p sort by the
    descending raw score.
    """
    if mode not in RANK_MODES:
        raise ConfigError(f"Rank mode must be one of {RANK_MODES}, got {mode!r}")
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise NonFiniteValue(f"Ranking scores must be finite (marker {int(np.flatnonzero(~np.isfinite(scores))[0])})")
    key = np.abs(scores) if mode == "abs_beta" else scores
    return np.argsort(-key, kind="stable")


def ranks_from_order(ranking: np.ndarray) -> np.ndarray:
    """Per-marker 1-based rank given a best-first ranking."""
    ranks = np.empty(len(ranking), dtype=np.int64)
    ranks[ranking] = np.arange(1, len(ranking) + 1)
    return ranks


@dataclass(frozen=True, eq=False)
class PRCurve:
    k: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    auprc: float
    n_truth: int

    @property
    def points(self) -> List[Tuple[int, float, float]]:
        return list(zip(self.k.tolist(), self.precision.tolist(), self.recall.tolist()))


def precision_recall(ranking: Sequence[int], truth: Sequence[int]) -> PRCurve:
    """
    Precision and recall at every cutoff k = 1..J.

    The area is the step integral over recall: each causal marker adds
    1/|truth| of recall at the precision reached when it is included.

    Raises:
        EmptyTruth: no causal markers given
    """
    ranking = np.asarray(ranking, dtype=np.int64)
    n_markers = len(ranking)
    if not np.array_equal(np.sort(ranking), np.arange(n_markers)):
        raise ValueError("Ranking must be a permutation of the marker indices")
    truth = np.unique(np.asarray(truth, dtype=np.int64))
    if len(truth) == 0:
        raise EmptyTruth("Precision-recall needs at least one causal marker")
    if truth[0] < 0 or truth[-1] >= n_markers:
        raise ValueError(f"Causal marker indices must lie in [0, {n_markers})")

    is_causal = np.isin(ranking, truth)
    hits = np.cumsum(is_causal)
    k = np.arange(1, n_markers + 1)
    precision = hits / k
    recall = hits / len(truth)
    auprc = float(np.sum(precision[is_causal]) / len(truth))
    return PRCurve(k=k, precision=precision, recall=recall, auprc=auprc, n_truth=len(truth))


def precision_at_recall(curve: PRCurve, levels: Sequence[float] = RECALL_LEVELS) -> np.ndarray:
    """Precision at the first cutoff whose recall reaches each level."""
    out = np.empty(len(levels))
    for i, level in enumerate(levels):
        reached = np.flatnonzero(curve.recall >= level - 1e-12)
        out[i] = curve.precision[reached[0]] if len(reached) else 0.0
    return out


def expected_random_auprc(n_markers: int, n_truth: int) -> float:
    """Expected area of a uniformly random ranking."""
    harmonic = float(np.sum(1.0 / np.arange(1, n_markers + 1)))
    if n_markers == 1:
        return 1.0
    return (harmonic + (n_truth - 1) / (n_markers - 1) * (n_markers - harmonic)) / n_markers


def _standard_error(values: np.ndarray, axis: int = 0) -> Optional[np.ndarray]:
    n = values.shape[axis]
    if n < 2:
        return None
    return values.std(axis=axis, ddof=1) / math.sqrt(n)


def method_scores(method: str, dataset: Dataset, hyper: Hyperparameters, schedule: SamplingSchedule,
                  rank_mode: str = "abs_beta", ridge_reg: float = DEFAULT_RIDGE_REG, lasso_folds: int = 5,
                  options: Optional[SamplerOptions] = None) -> Tuple[np.ndarray, str]:
    """
    Fit one method on a (centered) dataset and return its ranking scores
    and the rank mode that applies to them. schedule.seed drives every
    random choice the method makes.
    """
    if method in BAYESIAN_METHODS:
        prior = (MarkovActivationPrior(dataset.marker_map, hyper) if method == "block"
                 else BernoulliActivationPrior(hyper))
        summary = posterior_summary(run_chain(dataset, hyper, schedule, prior=prior, options=options))
        if rank_mode == "p_c":
            return summary.p_c, "p_c"
        return summary.beta_mean, "abs_beta"
    X, y = dataset.X, dataset.y
    if method == "ridge":
        return ridge_fit(X, y, ridge_reg), "abs_beta"
    if method == "lasso":
        penalty = lasso_cv(X, y, folds=lasso_folds, seed=schedule.seed)
        return lasso_fit(X, y, penalty).beta, "abs_beta"
    if method == "wald":
        return single_marker_wald(X, y).neg_log10_p, "neg_log10_p"
    raise ConfigError(f"Unknown method {method!r}; expected one of {METHODS}")


@dataclass(eq=False)
class BenchmarkResult:
    methods: Tuple[str, ...]
    replicates: int
    master_seed: int
    recall_levels: np.ndarray = field(default_factory=lambda: RECALL_LEVELS.copy())
    precision: Dict[str, np.ndarray] = field(default_factory=dict)  # replicates x levels
    auprc: Dict[str, np.ndarray] = field(default_factory=dict)  # per replicate
    seeds: List[int] = field(default_factory=list)

    def mean_precision(self, method: str) -> np.ndarray:
        return self.precision[method].mean(axis=0)

    def se_precision(self, method: str) -> Optional[np.ndarray]:
        return _standard_error(self.precision[method])

    def mean_auprc(self, method: str) -> float:
        return float(np.mean(self.auprc[method]))

    def se_auprc(self, method: str) -> Optional[float]:
        se = _standard_error(self.auprc[method])
        return None if se is None else float(se)

    def to_dict(self) -> Dict[str, Dict[str, object]]:
        return {
            method: {
                "mean_auprc": self.mean_auprc(method),
                "se_auprc": self.se_auprc(method),
                "mean_precision": self.mean_precision(method).tolist(),
            }
            for method in self.methods
        }


def benchmark(replicates: int, config: SimConfig, methods: Sequence[str], schedule: SamplingSchedule,
              master_seed: int = 0, rank_mode: str = "abs_beta", hyper: Optional[Hyperparameters] = None,
              ridge_reg: float = DEFAULT_RIDGE_REG, lasso_folds: int = 5,
              options: Optional[SamplerOptions] = None) -> BenchmarkResult:
    """
    Simulate `replicates` datasets, fit every method on each and average
    precision at recall 0.1, 0.2, ..., 1.0 and the AUPRC.

    Each replicate gets two seeds spawned from `master_seed`: one for the
    simulator and one shared by all method fits. The phenotype is
    mean-centered before fitting.

    Raises:
        BenchmarkError: a replicate failed; carries its index and simulator seed
    """
    if replicates < 1:
        raise ConfigError(f"replicates must be at least 1, got {replicates}")
    methods = tuple(dict.fromkeys(methods))
    unknown = [m for m in methods if m not in METHODS]
    if not methods or unknown:
        raise ConfigError(f"Methods must be a nonempty subset of {METHODS}, got {list(methods)}")
    if rank_mode not in ("abs_beta", "p_c"):
        raise ConfigError(f"Benchmark rank mode must be abs_beta or p_c, got {rank_mode!r}")
    hyper = hyper or Hyperparameters()

    result = BenchmarkResult(methods=methods, replicates=replicates, master_seed=master_seed)
    precision: Dict[str, List[np.ndarray]] = {m: [] for m in methods}
    auprc: Dict[str, List[float]] = {m: [] for m in methods}
    for replicate, (sim_seed, fit_seed) in enumerate(replicate_seeds(master_seed, replicates, 2)):
        sim_seed, fit_seed = int(sim_seed), int(fit_seed)
        result.seeds.append(sim_seed)
        try:
            sim = simulate(replace(config, seed=sim_seed))
            dataset, _ = center_phenotype(sim.dataset)
            fit_schedule = replace(schedule, seed=fit_seed)
            for method in methods:
                scores, mode = method_scores(method, dataset, hyper, fit_schedule, rank_mode=rank_mode,
                                             ridge_reg=ridge_reg, lasso_folds=lasso_folds, options=options)
                curve = precision_recall(rank_markers(scores, mode), sim.causal_indices)
                precision[method].append(precision_at_recall(curve, result.recall_levels))
                auprc[method].append(curve.auprc)
        except Exception as e:
            logger.error(f"Benchmark replicate {replicate} failed (seed {sim_seed}): {e}")
            raise BenchmarkError(replicate, sim_seed, e) from e
        logger.info(
            f"Replicate {replicate + 1}/{replicates} done ({sim.dataset.n_markers} markers): "
            + ", ".join(f"{m}={auprc[m][-1]:.3f}" for m in methods)
        )

    result.precision = {m: np.array(v) for m, v in precision.items()}
    result.auprc = {m: np.array(v) for m, v in auprc.items()}
    return result
