"""
Fitting pipeline and command implementations shared by the CLI and the
MCP tool server.

Each `run_*` function reads its inputs, fits, writes its output files into
config.out and returns a JSON-friendly summary dict.
"""
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, TypeVar

import numpy as np

from blockreg import __version__, io_formats
from blockreg.baselines import (
    BernoulliActivationPrior,
    LassoFit,
    WaldResult,
    lasso_cv,
    lasso_fit,
    ridge_fit,
    single_marker_wald,
)
from blockreg.config import RunConfig
from blockreg.data_model import MAX_SEED, Dataset, Hyperparameters, SampleTrace, SamplingSchedule, center_phenotype
from blockreg.errors import ConfigError, SegmentError
from blockreg.evaluation import (
    PosteriorSummary,
    PRCurve,
    benchmark,
    posterior_summary,
    precision_recall,
    rank_markers,
    ranks_from_order,
)
from blockreg.gibbs_sampler import SamplerOptions, run_chain
from blockreg.markov_prior import MarkovActivationPrior
from blockreg.simulator import simulate, simulation_summary

# Configure logging
logger = logging.getLogger(__name__)

T = TypeVar("T")

TOP_MARKERS = 10


def segment_bounds(n_markers: int, segment_size: int) -> List[Tuple[int, int]]:
    """Consecutive [start, stop) segments; 0 means one segment."""
    if segment_size < 0:
        raise ConfigError(f"segment_size must be non-negative, got {segment_size}")
    if segment_size == 0 or segment_size >= n_markers:
        return [(0, n_markers)]
    return [(start, min(start + segment_size, n_markers)) for start in range(0, n_markers, segment_size)]


def segment_seed(seed: int, index: int) -> int:
    return (seed + index) % (MAX_SEED + 1)


def run_segmented(dataset: Dataset, segment_size: int, fit_fn: Callable[[Dataset, int], T]) -> List[T]:
    """
    Fit consecutive marker segments independently and return the results
    in genomic order. The indicator chain restarts at each segment start.

    Raises:
        SegmentError: a segment's fit failed; carries the segment index
    """
    bounds = segment_bounds(dataset.n_markers, segment_size)
    results = []
    for index, (start, stop) in enumerate(bounds):
        segment = dataset if len(bounds) == 1 else dataset.segment(start, stop)
        try:
            results.append(fit_fn(segment, index))
        except Exception as e:
            logger.error(f"Segment {index} (markers {start}..{stop - 1}) failed: {e}")
            raise SegmentError(index, e) from e
        if len(bounds) > 1:
            logger.info(f"Segment {index + 1}/{len(bounds)} done (markers {start}..{stop - 1})")
    return results


def concat_summaries(summaries: List[PosteriorSummary]) -> PosteriorSummary:
    return PosteriorSummary(
        p_c=np.concatenate([s.p_c for s in summaries]),
        beta_mean=np.concatenate([s.beta_mean for s in summaries]),
        beta_best=np.concatenate([s.beta_best for s in summaries]),
        c_best=np.concatenate([s.c_best for s in summaries]),
        n_samples=summaries[0].n_samples,
    )


@dataclass(eq=False)
class BayesianFit:
    summary: PosteriorSummary
    traces: List[SampleTrace]
    offset: float
    prior: str


def fit_bayesian(dataset: Dataset, hyper: Hyperparameters, schedule: SamplingSchedule, prior: str = "block",
                 segment_size: int = 0, options: Optional[SamplerOptions] = None) -> BayesianFit:
    """
    Center the phenotype and run one chain per segment. Segment i uses
    seed (schedule.seed + i) mod 2^64.
    """
    if prior not in ("block", "bernoulli"):
        raise ConfigError(f"prior must be block or bernoulli, got {prior!r}")
    centered, offset = center_phenotype(dataset)

    def fit_segment(segment: Dataset, index: int) -> SampleTrace:
        activation = (MarkovActivationPrior(segment.marker_map, hyper) if prior == "block"
                      else BernoulliActivationPrior(hyper))
        return run_chain(segment, hyper, replace(schedule, seed=segment_seed(schedule.seed, index)),
                         prior=activation, options=options)

    traces = run_segmented(centered, segment_size, fit_segment)
    summary = concat_summaries([posterior_summary(trace) for trace in traces])
    return BayesianFit(summary=summary, traces=traces, offset=offset, prior=prior)


def fit_ridge(dataset: Dataset, reg: float) -> Tuple[np.ndarray, float]:
    centered, offset = center_phenotype(dataset)
    return ridge_fit(centered.X, centered.y, reg), offset


def fit_lasso(dataset: Dataset, penalty: Optional[float] = None, folds: int = 5,
              seed: int = 0) -> Tuple[LassoFit, float]:
    """Lasso on the centered phenotype; the penalty is cross-validated unless given."""
    centered, offset = center_phenotype(dataset)
    X, y = centered.X, centered.y
    if penalty is None:
        penalty = lasso_cv(X, y, folds=folds, seed=seed)
    return lasso_fit(X, y, penalty), offset


def fit_wald(dataset: Dataset) -> WaldResult:
    return single_marker_wald(dataset.X, dataset.y)


def _out_dir(config: RunConfig) -> Path:
    return Path(config.out)


def _read_input(config: RunConfig) -> Dataset:
    return io_formats.read_dataset(config.genotypes, config.markers, config.phenotype)


def _manifest(config: RunConfig, command: str, files: List[Path], **extra: Any) -> Path:
    entries = {k: v for k, v in config.as_dict().items() if k not in ("log_level", "log_file")}
    entries.update(command=command, software_version=__version__, **extra)
    path = io_formats.write_manifest(_out_dir(config) / io_formats.MANIFEST_FILE, entries)
    files.append(path)
    return path


def _truth_curve(config: RunConfig, dataset: Dataset, ranking: np.ndarray, files: List[Path]) -> Optional[PRCurve]:
    if config.truth is None:
        return None
    causal, _ = io_formats.read_truth(config.truth, dataset.genotypes.marker_ids)
    curve = precision_recall(ranking, causal)
    files.append(io_formats.write_pr_curve(_out_dir(config) / "pr_curve.tsv", curve.k, curve.precision, curve.recall))
    return curve


def _top_markers(dataset: Dataset, ranking: np.ndarray, **columns: np.ndarray) -> List[Dict[str, Any]]:
    rows = []
    for j in ranking[:TOP_MARKERS]:
        row = {"marker_id": dataset.genotypes.marker_ids[j], "position_kb": float(dataset.marker_map.positions_kb[j])}
        row.update({name: values[j].item() for name, values in columns.items()})
        rows.append(row)
    return rows


def _result(files: List[Path], curve: Optional[PRCurve], **fields: Any) -> Dict[str, Any]:
    result = dict(fields)
    if curve is not None:
        result["auprc"] = curve.auprc
    result["files"] = [str(f) for f in files]
    return result


def run_simulate(config: RunConfig) -> Dict[str, Any]:
    sim = simulate(config.sim_config())
    out = _out_dir(config)
    files = io_formats.write_dataset(sim.dataset, out)
    marker_ids = sim.dataset.genotypes.marker_ids
    files.append(io_formats.write_truth(marker_ids, sim.true_beta, sim.causal_indices, out / io_formats.TRUTH_FILE))
    causal_ids = [marker_ids[j] for j in sim.causal_indices]
    _manifest(config, "simulate", files, n_individuals=sim.dataset.n_individuals, n_markers=sim.dataset.n_markers,
              block_count=sim.block_count, mean_snps_per_block=sim.mean_snps_per_block, causal_markers=causal_ids)
    return _result(files, None, n_individuals=sim.dataset.n_individuals, n_markers=sim.dataset.n_markers,
                   causal_markers=causal_ids, block_count=sim.block_count,
                   mean_snps_per_block=sim.mean_snps_per_block)


def run_sim_stats(config: RunConfig) -> Dict[str, Any]:
    rows = []
    for rho in config.rho_grid:
        stats = simulation_summary(replace(config.sim_config(), rho_per_kb=rho), config.replicates, config.seed)
        rows.append({
            "rho_per_kb": stats.rho_per_kb,
            "replicates": stats.replicates,
            "min_markers": stats.min_markers,
            "max_markers": stats.max_markers,
            "mean_markers": stats.mean_markers,
            "mean_snps_per_block": stats.mean_snps_per_block,
        })
    files = [io_formats.write_sim_stats(_out_dir(config) / "sim_stats.tsv", rows)]
    _manifest(config, "sim-stats", files)
    return _result(files, None, rows=rows)


def run_fit(config: RunConfig) -> Dict[str, Any]:
    if config.rank_mode not in ("abs_beta", "p_c"):
        raise ConfigError(f"fit ranks by abs_beta or p_c, got {config.rank_mode!r}")
    dataset = _read_input(config)
    fit = fit_bayesian(dataset, config.hyperparameters(), config.schedule(), prior=config.prior,
                       segment_size=config.segment_size, options=config.sampler_options())
    summary = fit.summary
    scores = summary.p_c if config.rank_mode == "p_c" else summary.beta_mean
    ranking = rank_markers(scores, config.rank_mode)
    out = _out_dir(config)
    files = [io_formats.write_beta_summary(out / "beta_summary.tsv", dataset, summary.p_c, summary.beta_mean,
                                           summary.beta_best, summary.c_best, ranks_from_order(ranking))]
    if len(fit.traces) == 1:
        files.append(io_formats.write_trace(out / "trace.tsv", fit.traces[0]))
    else:
        for index, trace in enumerate(fit.traces):
            files.append(io_formats.write_trace(out / f"trace_segment_{index:03d}.tsv", trace))
    curve = _truth_curve(config, dataset, ranking, files)
    _manifest(config, "fit", files, n_segments=len(fit.traces), n_retained=summary.n_samples,
              phenotype_offset=fit.offset)
    return _result(files, curve, prior=fit.prior, n_markers=dataset.n_markers, n_segments=len(fit.traces),
                   n_retained=summary.n_samples, phenotype_offset=fit.offset,
                   top_markers=_top_markers(dataset, ranking, p_c=summary.p_c, beta_mean=summary.beta_mean))


def run_ridge(config: RunConfig) -> Dict[str, Any]:
    dataset = _read_input(config)
    beta, offset = fit_ridge(dataset, config.ridge_reg)
    ranking = rank_markers(beta, "abs_beta")
    files = [io_formats.write_coefficients(_out_dir(config) / "beta_summary.tsv", dataset, beta,
                                           ranks_from_order(ranking))]
    curve = _truth_curve(config, dataset, ranking, files)
    _manifest(config, "ridge", files, phenotype_offset=offset)
    return _result(files, curve, n_markers=dataset.n_markers, phenotype_offset=offset,
                   top_markers=_top_markers(dataset, ranking, beta=beta))


def run_lasso(config: RunConfig) -> Dict[str, Any]:
    dataset = _read_input(config)
    fit, offset = fit_lasso(dataset, penalty=config.penalty, folds=config.folds, seed=config.seed)
    ranking = rank_markers(fit.beta, "abs_beta")
    files = [io_formats.write_coefficients(_out_dir(config) / "beta_summary.tsv", dataset, fit.beta,
                                           ranks_from_order(ranking))]
    curve = _truth_curve(config, dataset, ranking, files)
    _manifest(config, "lasso", files, chosen_penalty=fit.penalty, cycles=fit.n_iterations,
              max_kkt_violation=fit.max_kkt_violation, phenotype_offset=offset)
    return _result(files, curve, n_markers=dataset.n_markers, penalty=fit.penalty,
                   n_nonzero=int(np.count_nonzero(fit.beta)), cycles=fit.n_iterations, phenotype_offset=offset,
                   top_markers=_top_markers(dataset, ranking, beta=fit.beta))


def run_wald(config: RunConfig) -> Dict[str, Any]:
    dataset = _read_input(config)
    wald = fit_wald(dataset)
    ranking = rank_markers(wald.neg_log10_p, "neg_log10_p")
    files = [io_formats.write_wald(_out_dir(config) / "wald.tsv", dataset, wald.statistic, wald.p_value,
                                   wald.neg_log10_p, ranks_from_order(ranking))]
    curve = _truth_curve(config, dataset, ranking, files)
    _manifest(config, "wald", files)
    return _result(files, curve, n_markers=dataset.n_markers,
                   top_markers=_top_markers(dataset, ranking, statistic=wald.statistic, p_value=wald.p_value))


def run_benchmark(config: RunConfig) -> Dict[str, Any]:
    result = benchmark(config.replicates, config.sim_config(), config.methods, config.schedule(),
                       master_seed=config.seed, rank_mode=config.rank_mode, hyper=config.hyperparameters(),
                       ridge_reg=config.ridge_reg, lasso_folds=config.folds, options=config.sampler_options())
    curve_rows, summary_rows = [], []
    for method in result.methods:
        mean_precision = result.mean_precision(method)
        se_precision = result.se_precision(method)
        for i, level in enumerate(result.recall_levels):
            curve_rows.append({
                "method": method,
                "recall": float(level),
                "mean_precision": float(mean_precision[i]),
                "se_precision": None if se_precision is None else float(se_precision[i]),
            })
        summary_rows.append({
            "method": method,
            "replicates": result.replicates,
            "mean_auprc": result.mean_auprc(method),
            "se_auprc": result.se_auprc(method),
        })
    out = _out_dir(config)
    files = [
        io_formats.write_benchmark_curves(out / "pr_curve.tsv", curve_rows),
        io_formats.write_benchmark_summary(out / "summary.tsv", summary_rows),
    ]
    _manifest(config, "benchmark", files, replicate_seeds=result.seeds)
    return _result(files, None, summary=summary_rows)


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    "simulate": run_simulate,
    "sim-stats": run_sim_stats,
    "fit": run_fit,
    "ridge": run_ridge,
    "lasso": run_lasso,
    "wald": run_wald,
    "benchmark": run_benchmark,
}


def run_command(command: str, config: RunConfig) -> Dict[str, Any]:
    if command not in COMMAND_HANDLERS:
        raise ConfigError(f"Unknown command {command!r}")
    logger.info(f"Running {command} (seed {config.seed}, output {config.out})")
    return COMMAND_HANDLERS[command](config)
