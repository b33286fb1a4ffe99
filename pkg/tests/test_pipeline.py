import numpy as np
import pytest

from blockreg.baselines import BernoulliActivationPrior
from blockreg.config import RunConfig
from blockreg.data_model import SamplingSchedule, center_phenotype
from blockreg.errors import ConfigError, SegmentError
from blockreg.evaluation import posterior_summary
from blockreg.gibbs_sampler import run_chain
from blockreg.markov_prior import MarkovActivationPrior
from blockreg.pipeline import (
    concat_summaries,
    fit_bayesian,
    fit_lasso,
    fit_ridge,
    run_command,
    run_segmented,
    segment_bounds,
    segment_seed,
)

SCHEDULE = SamplingSchedule(burn_in=10, iterations=20, thin=2, seed=17)


def test_segment_bounds():
    bounds = segment_bounds(8217, 200)
    assert len(bounds) == 42
    assert bounds[0] == (0, 200)
    assert bounds[-1] == (8200, 8217)
    assert segment_bounds(10, 0) == [(0, 10)]
    assert segment_bounds(10, 10) == [(0, 10)]
    assert segment_bounds(10, 25) == [(0, 10)]
    with pytest.raises(ConfigError):
        segment_bounds(10, -1)


def test_segment_seed_wraps():
    assert segment_seed(5, 2) == 7
    assert segment_seed(2**64 - 1, 1) == 0


@pytest.mark.parametrize("segment_size", [0, 12, 50])
def test_single_segment_matches_unsegmented_chain(small_dataset, hyper, segment_size):
    fit = fit_bayesian(small_dataset, hyper, SCHEDULE, segment_size=segment_size)
    centered, offset = center_phenotype(small_dataset)
    trace = run_chain(centered, hyper, SCHEDULE, prior=MarkovActivationPrior(centered.marker_map, hyper))
    assert len(fit.traces) == 1
    assert fit.offset == pytest.approx(small_dataset.y.mean())
    np.testing.assert_array_equal(fit.traces[0].betas, trace.betas)
    np.testing.assert_array_equal(fit.summary.beta_mean, posterior_summary(trace).beta_mean)


def test_segments_use_shifted_seeds(small_dataset, hyper):
    fit = fit_bayesian(small_dataset, hyper, SCHEDULE, prior="bernoulli", segment_size=5)
    assert len(fit.traces) == 3
    assert fit.summary.p_c.shape == (12,)
    assert fit.summary.n_samples == 10
    centered, _ = center_phenotype(small_dataset)
    second = centered.segment(5, 10)
    trace = run_chain(second, hyper, SamplingSchedule(burn_in=10, iterations=20, thin=2, seed=18),
                      prior=BernoulliActivationPrior(hyper))
    np.testing.assert_array_equal(fit.traces[1].betas, trace.betas)


def test_segment_failure_names_segment(small_dataset):
    def fit_fn(segment, index):
        if index == 1:
            raise ValueError("boom")
        return index

    with pytest.raises(SegmentError) as exc:
        run_segmented(small_dataset, 5, fit_fn)
    assert exc.value.segment_index == 1


def test_concat_summaries(small_dataset, hyper):
    fit = fit_bayesian(small_dataset, hyper, SCHEDULE, segment_size=6)
    parts = [posterior_summary(t) for t in fit.traces]
    joined = concat_summaries(parts)
    np.testing.assert_array_equal(joined.p_c, np.concatenate([parts[0].p_c, parts[1].p_c]))


def test_fit_bayesian_rejects_unknown_prior(small_dataset, hyper):
    with pytest.raises(ConfigError):
        fit_bayesian(small_dataset, hyper, SCHEDULE, prior="horseshoe")


def test_point_estimates_use_centered_phenotype(small_dataset):
    beta, offset = fit_ridge(small_dataset, 0.1)
    assert beta.shape == (12,)
    assert offset == pytest.approx(small_dataset.y.mean())
    fit, _ = fit_lasso(small_dataset, penalty=1e6)
    assert np.all(fit.beta == 0.0)


def test_run_command_rejects_unknown_command():
    with pytest.raises(ConfigError):
        run_command("plot", RunConfig())


def test_sim_stats_command(tmp_path):
    config = RunConfig(out=tmp_path, replicates=2, rho_grid=(0.05, 1.0), n_haplotypes=40, region_kb=10.0)
    result = run_command("sim-stats", config)
    assert [row["rho_per_kb"] for row in result["rows"]] == [0.05, 1.0]
    lines = (tmp_path / "sim_stats.tsv").read_text().splitlines()
    assert lines[0] == "rho_per_kb\treplicates\tmin_markers\tmax_markers\tmean_markers\tmean_snps_per_block"
    assert len(lines) == 3


def test_benchmark_command(tmp_path):
    config = RunConfig(out=tmp_path, replicates=2, methods=("ridge", "wald"), n_haplotypes=60, region_kb=20.0,
                       causal_block_sizes=(2, 1))
    result = run_command("benchmark", config)
    assert [row["method"] for row in result["summary"]] == ["ridge", "wald"]
    curves = (tmp_path / "pr_curve.tsv").read_text().splitlines()
    assert curves[0] == "method\trecall\tmean_precision\tse_precision"
    assert len(curves) == 1 + 2 * 10
    manifest = (tmp_path / "manifest.txt").read_text()
    assert "replicate_seeds=" in manifest
