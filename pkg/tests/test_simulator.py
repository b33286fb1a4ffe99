import numpy as np
import pytest

from blockreg.data_model import GenotypeMatrix, MarkerMap
from blockreg.errors import AllMarkersFiltered, ConfigError, InfeasibleBlocks, OddHaplotypeCount
from blockreg.simulator import (
    HaplotypePanel,
    SimConfig,
    assign_causal_blocks,
    block_statistics,
    generate_haplotypes,
    generate_phenotype,
    maf_filter,
    minor_allele_frequency,
    pair_genotypes,
    recombination_free_runs,
    replicate_seeds,
    simulate,
    simulation_summary,
)


def _panel(sources):
    sources = np.asarray(sources, dtype=np.int16)
    n_markers = sources.shape[1]
    marker_map = MarkerMap(positions_kb=np.arange(n_markers, dtype=float), rho=np.full(n_markers, 0.1))
    return HaplotypePanel(haplotypes=np.zeros(sources.shape, dtype=np.uint8), marker_map=marker_map,
                          sources=sources)


def test_generate_haplotypes_shapes(rng):
    panel = generate_haplotypes(SimConfig(), rng)
    n_markers = len(panel.marker_map)
    assert n_markers >= 1
    assert panel.haplotypes.shape == (360, n_markers)
    assert set(np.unique(panel.haplotypes)) <= {0, 1}
    assert panel.sources.min() >= 0
    assert panel.sources.max() < 8
    assert panel.marker_map.rho[0] == 0.0
    assert np.all(np.diff(panel.marker_map.positions_kb) >= 0)
    assert np.all(panel.marker_map.positions_kb <= 40.0)


def test_no_recombination_gives_a_single_run(rng):
    panel = generate_haplotypes(SimConfig(rho_per_kb=0.0), rng)
    assert np.all(panel.sources == panel.sources[:, :1])
    assert recombination_free_runs(panel.sources) == [(0, len(panel.marker_map))]


def test_pairing_requires_even_count(rng):
    with pytest.raises(OddHaplotypeCount):
        pair_genotypes(np.zeros((3, 2), dtype=np.uint8), rng)


def test_pairing_counts_minor_allele(rng):
    haplotypes = np.ones((8, 3), dtype=np.uint8)
    haplotypes[:2, 1] = 0
    haplotypes[::2, 2] = 0
    genotypes = pair_genotypes(haplotypes, rng)
    assert genotypes.values.shape == (4, 3)
    np.testing.assert_array_equal(genotypes.values[:, 0], 0)
    assert genotypes.values[:, 1].sum() == 2
    assert np.all(genotypes.values.mean(axis=0) <= 1.0)
    assert genotypes.marker_ids == ("snp00001", "snp00002", "snp00003")


def test_minor_allele_frequency():
    genotypes = GenotypeMatrix(values=np.array([[0, 2], [1, 2], [2, 2], [1, 1]]), marker_ids=("a", "b"))
    np.testing.assert_allclose(minor_allele_frequency(genotypes), [0.5, 0.125])


def test_maf_filter_merges_interval_rates():
    genotypes = GenotypeMatrix(values=np.array([[0, 0, 1], [1, 0, 0], [2, 0, 1]]), marker_ids=("a", "b", "c"))
    marker_map = MarkerMap(positions_kb=[0.0, 1.0, 3.0], rho=[0.0, 0.1, 0.3])
    filtered = maf_filter(genotypes, marker_map, 0.01)
    np.testing.assert_array_equal(filtered.kept, [0, 2])
    assert filtered.genotypes.marker_ids == ("a", "c")
    np.testing.assert_array_equal(filtered.marker_map.d, [0.0, 3.0])
    assert filtered.marker_map.rho[1] == pytest.approx(0.7 / 3.0)


def test_maf_filter_can_remove_everything():
    genotypes = GenotypeMatrix(values=np.zeros((3, 2)), marker_ids=("a", "b"))
    marker_map = MarkerMap(positions_kb=[0.0, 1.0], rho=[0.0, 0.1])
    with pytest.raises(AllMarkersFiltered):
        maf_filter(genotypes, marker_map, 0.01)


def test_recombination_free_runs():
    sources = np.array([[0, 0, 1, 1, 1], [2, 2, 2, 3, 3]])
    assert recombination_free_runs(sources) == [(0, 2), (2, 3), (3, 5)]
    # a switch between kept markers still breaks the run
    assert recombination_free_runs(sources, kept=np.array([0, 1, 4])) == [(0, 2), (2, 3)]
    count, mean = block_statistics([(0, 2), (2, 3), (3, 5)])
    assert count == 3
    assert mean == pytest.approx(5.0 / 3.0)


def test_causal_blocks_stay_inside_runs(rng):
    panel = _panel([[0] * 6 + [1] * 6, [2] * 6 + [3] * 6])
    runs = recombination_free_runs(panel.sources)
    for _ in range(50):
        blocks = assign_causal_blocks(panel.marker_map, panel, (3, 2), rng)
        assert [len(b) for b in blocks] == [3, 2]
        for block in blocks:
            np.testing.assert_array_equal(np.diff(block), 1)
            assert any(start <= block[0] and block[-1] < stop for start, stop in runs)
        first, second = sorted(blocks, key=lambda b: b[0])
        assert second[0] - first[-1] >= 2


def test_infeasible_blocks_report_run_lengths(rng):
    panel = _panel([[0, 0, 0, 0, 1, 2]])
    with pytest.raises(InfeasibleBlocks) as exc:
        assign_causal_blocks(panel.marker_map, panel, (3, 2), rng, max_tries=5)
    assert exc.value.run_lengths == [4, 1, 1]


def test_simulate_defaults():
    sim = simulate(SimConfig(seed=4))
    assert sim.dataset.n_individuals == 180
    assert len(sim.causal_indices) == 10
    assert sorted(len(b) for b in sim.causal_blocks) == [2, 3, 5]
    np.testing.assert_array_equal(np.flatnonzero(sim.true_beta), sim.causal_indices)
    assert np.all(sim.true_beta[sim.causal_indices] == 2.5)
    assert sim.block_count >= 1
    assert np.all(minor_allele_frequency(sim.genotypes) > 0.01)
    assert np.all(sim.genotypes.values.mean(axis=0) <= 1.0)


def test_simulate_is_deterministic():
    a = simulate(SimConfig(seed=21))
    b = simulate(SimConfig(seed=21))
    np.testing.assert_array_equal(a.genotypes.values, b.genotypes.values)
    np.testing.assert_array_equal(a.phenotype.values, b.phenotype.values)
    np.testing.assert_array_equal(a.causal_indices, b.causal_indices)
    c = simulate(SimConfig(seed=22))
    assert not np.array_equal(a.phenotype.values, c.phenotype.values)


def test_simulate_gives_up_after_max_attempts():
    config = SimConfig(region_kb=2.0, causal_block_sizes=(30,), max_attempts=2)
    with pytest.raises((InfeasibleBlocks, AllMarkersFiltered)):
        simulate(config)


def test_low_recombination_gives_longer_blocks():
    low = simulation_summary(SimConfig(rho_per_kb=0.05), replicates=20, master_seed=1)
    high = simulation_summary(SimConfig(rho_per_kb=1.0), replicates=20, master_seed=1)
    assert low.mean_snps_per_block > high.mean_snps_per_block
    assert low.replicates == 20
    assert low.min_markers <= low.mean_markers <= low.max_markers


def test_replicate_seeds():
    seeds = replicate_seeds(7, 4, 2)
    assert seeds.shape == (4, 2)
    assert seeds.dtype == np.uint64
    assert len(np.unique(seeds)) == 8
    np.testing.assert_array_equal(seeds, replicate_seeds(7, 4, 2))


@pytest.mark.parametrize("overrides", [
    {"n_haplotypes": 7},
    {"n_haplotypes": 2},
    {"rho_per_kb": -0.1},
    {"n_ancestors": 0},
    {"maf_threshold": 0.5},
    {"causal_block_sizes": ()},
    {"causal_block_sizes": (2, 0)},
    {"max_attempts": 0},
])
def test_sim_config_validation(overrides):
    with pytest.raises(ConfigError):
        SimConfig(**overrides)


def test_noise_free_phenotype_is_exact(rng):
    genotypes = GenotypeMatrix(values=np.array([[0, 1, 2], [2, 0, 1], [0, 0, 0]]), marker_ids=("a", "b", "c"))
    phenotype = generate_phenotype(genotypes, [0, 2], 2.5, 0.0, rng)
    np.testing.assert_array_equal(phenotype.values, [5.0, 7.5, 0.0])
    assert phenotype.individual_ids == genotypes.individual_ids


def test_phenotype_noise_variance(rng):
    genotypes = GenotypeMatrix(values=np.zeros((100000, 1)), marker_ids=("a",))
    phenotype = generate_phenotype(genotypes, [], 2.5, 1.5, rng)
    assert np.var(phenotype.values) == pytest.approx(2.25, rel=0.02)
