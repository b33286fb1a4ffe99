"""
Block-structured genotype/phenotype simulator.

Sample haplotypes are mosaics of a few ancestral haplotypes. Recombination
events fall on marker intervals as a Poisson process (probability
1 - exp(-d_j rho_j) per interval) and are shared by the whole sample: at an
event every haplotype re-draws the ancestor it copies from. Haplotypes are
paired into diploid genotypes, filtered on minor allele frequency, and a
phenotype is generated from causal markers placed inside
recombination-free runs.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from blockreg.data_model import (
    Dataset,
    GenotypeMatrix,
    MarkerMap,
    PhenotypeVector,
    default_ids,
    validate_dataset,
)
from blockreg.errors import AllMarkersFiltered, ConfigError, InfeasibleBlocks, OddHaplotypeCount
from blockreg.markov_prior import MAX_EXPONENT

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    n_haplotypes: int = 360
    region_kb: float = 40.0
    markers_per_kb: float = 0.8
    rho_per_kb: float = 0.1
    n_ancestors: int = 8
    mutation_flip_prob: float = 0.01
    maf_threshold: float = 0.01
    causal_block_sizes: Tuple[int, ...] = (3, 2, 5)
    beta_causal: float = 2.5
    noise_sd: float = 1.0
    seed: int = 0
    max_attempts: int = 100

    def __post_init__(self):
        object.__setattr__(self, "causal_block_sizes", tuple(int(s) for s in self.causal_block_sizes))
        if self.n_haplotypes < 4 or self.n_haplotypes % 2:
            raise ConfigError(f"n_haplotypes must be an even number of at least 4, got {self.n_haplotypes}")
        for name in ("region_kb", "markers_per_kb", "rho_per_kb", "mutation_flip_prob", "noise_sd"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.n_ancestors < 1:
            raise ConfigError(f"n_ancestors must be at least 1, got {self.n_ancestors}")
        if not 0.0 <= self.maf_threshold < 0.5:
            raise ConfigError(f"maf_threshold must lie in [0, 0.5), got {self.maf_threshold}")
        if not self.causal_block_sizes or min(self.causal_block_sizes) < 1:
            raise ConfigError(f"causal_block_sizes must be a nonempty list of positive sizes, got {self.causal_block_sizes}")
        if self.max_attempts < 1:
            raise ConfigError(f"max_attempts must be at least 1, got {self.max_attempts}")


class HaplotypePanel(NamedTuple):
    haplotypes: np.ndarray  # n_haplotypes x J in {0, 1}
    marker_map: MarkerMap
    sources: np.ndarray  # ancestor copied by each haplotype at each marker


class FilteredMarkers(NamedTuple):
    genotypes: GenotypeMatrix
    marker_map: MarkerMap
    kept: np.ndarray  # column indices into the unfiltered panel


@dataclass(frozen=True, eq=False)
class SimDataset:
    dataset: Dataset
    causal_indices: np.ndarray
    causal_blocks: List[np.ndarray]
    true_beta: np.ndarray
    block_count: int
    mean_snps_per_block: float
    config: SimConfig = field(default_factory=SimConfig)

    @property
    def genotypes(self) -> GenotypeMatrix:
        return self.dataset.genotypes

    @property
    def marker_map(self) -> MarkerMap:
        return self.dataset.marker_map

    @property
    def phenotype(self) -> PhenotypeVector:
        return self.dataset.phenotype


def _recombination_probs(d: np.ndarray, rho: np.ndarray) -> np.ndarray:
    x = d * rho
    return np.where(x > MAX_EXPONENT, 1.0, -np.expm1(-np.minimum(x, MAX_EXPONENT)))


def generate_haplotypes(config: SimConfig, rng: np.random.Generator) -> HaplotypePanel:
    """
    Draw marker positions, ancestral haplotypes and the sample mosaic.

    The true per-interval rate rho_per_kb is recorded in the marker map.
    """
    n_markers = 0
    while n_markers < 1:
        n_markers = int(rng.poisson(config.region_kb * config.markers_per_kb))
    positions = np.sort(rng.uniform(0.0, config.region_kb, n_markers))
    rho = np.full(n_markers, config.rho_per_kb)
    rho[0] = 0.0
    marker_map = MarkerMap(positions_kb=positions, rho=rho)

    frequencies = rng.uniform(0.05, 0.95, n_markers)
    ancestors = (rng.random((config.n_ancestors, n_markers)) < frequencies).astype(np.uint8)

    events = rng.random(n_markers) < _recombination_probs(marker_map.d, marker_map.rho)
    events[0] = False
    sources = np.empty((config.n_haplotypes, n_markers), dtype=np.int16)
    current = rng.integers(config.n_ancestors, size=config.n_haplotypes)
    for j in range(n_markers):
        if events[j]:
            current = rng.integers(config.n_ancestors, size=config.n_haplotypes)
        sources[:, j] = current

    flips = rng.random((config.n_haplotypes, n_markers)) < config.mutation_flip_prob
    haplotypes = ancestors[sources, np.arange(n_markers)] ^ flips.astype(np.uint8)
    logger.debug(f"Generated {config.n_haplotypes} haplotypes over {n_markers} markers, "
                 f"{int(np.count_nonzero(events))} recombination events")
    return HaplotypePanel(haplotypes=haplotypes, marker_map=marker_map, sources=sources)


def pair_genotypes(haplotypes: np.ndarray, rng: np.random.Generator,
                   marker_ids: Optional[Sequence[str]] = None) -> GenotypeMatrix:
    """
    Randomly pair haplotype rows into individuals and count minor alleles.

    Columns whose '1' allele is the more frequent one are recoded so that
    every entry counts the less frequent allele.
    """
    n_haplotypes, n_markers = haplotypes.shape
    if n_haplotypes % 2:
        raise OddHaplotypeCount(f"Cannot pair {n_haplotypes} haplotypes")
    order = rng.permutation(n_haplotypes)
    genotypes = haplotypes[order[0::2]].astype(np.int8) + haplotypes[order[1::2]].astype(np.int8)
    major_is_one = genotypes.mean(axis=0) > 1.0
    genotypes[:, major_is_one] = 2 - genotypes[:, major_is_one]
    ids = default_ids("snp", n_markers) if marker_ids is None else tuple(marker_ids)
    return GenotypeMatrix(values=genotypes, marker_ids=ids)


def minor_allele_frequency(genotypes: GenotypeMatrix) -> np.ndarray:
    p = genotypes.values.mean(axis=0) / 2.0
    return np.minimum(p, 1.0 - p)


def maf_filter(genotypes: GenotypeMatrix, marker_map: MarkerMap, threshold: float) -> FilteredMarkers:
    """
    Keep markers whose MAF exceeds `threshold`.

    The rate of a merged interval is the length-weighted mean of the rates
    it spans.

    Raises:
        AllMarkersFiltered: no marker survives
    """
    maf = minor_allele_frequency(genotypes)
    kept = np.flatnonzero(maf > threshold)
    if len(kept) == 0:
        raise AllMarkersFiltered(f"No marker has minor allele frequency above {threshold}")

    rho = np.zeros(len(kept))
    for i in range(1, len(kept)):
        span = slice(kept[i - 1] + 1, kept[i] + 1)
        lengths = marker_map.d[span]
        rates = marker_map.rho[span]
        total = float(np.sum(lengths))
        rho[i] = float(np.sum(lengths * rates)) / total if total > 0 else float(np.mean(rates))
    filtered_map = MarkerMap(positions_kb=marker_map.positions_kb[kept], rho=rho)
    logger.debug(f"MAF filter kept {len(kept)} of {genotypes.n_markers} markers")
    return FilteredMarkers(genotypes=genotypes.select(kept), marker_map=filtered_map, kept=kept)


def recombination_free_runs(sources: np.ndarray, kept: Optional[np.ndarray] = None) -> List[Tuple[int, int]]:
    """
    Maximal [start, stop) runs of consecutive (kept) markers between which
    no haplotype changed the ancestor it copies.
    """
    n_markers = sources.shape[1]
    kept = np.arange(n_markers) if kept is None else np.asarray(kept)
    changes = np.zeros(sources.shape, dtype=np.int64)
    changes[:, 1:] = np.cumsum(sources[:, 1:] != sources[:, :-1], axis=1)
    at_kept = changes[:, kept]
    breaks = np.any(at_kept[:, 1:] != at_kept[:, :-1], axis=0)
    starts = [0] + [i + 1 for i in np.flatnonzero(breaks)]
    stops = starts[1:] + [len(kept)]
    return list(zip(starts, stops))


def block_statistics(runs: List[Tuple[int, int]]) -> Tuple[int, float]:
    """(number of recombination-free blocks, mean markers per block)."""
    n_markers = sum(stop - start for start, stop in runs)
    return len(runs), n_markers / len(runs)


def assign_causal_blocks(marker_map: MarkerMap, panel: HaplotypePanel, block_sizes: Sequence[int],
                         rng: np.random.Generator, kept: Optional[np.ndarray] = None,
                         max_tries: int = 200) -> List[np.ndarray]:
    """
    Place one contiguous causal block per requested size, each inside a
    recombination-free run, with at least one non-causal marker between
    blocks. Placements are drawn uniformly among the feasible starts.

    Returns the blocks in the order of `block_sizes`.

    Raises:
        InfeasibleBlocks: no placement was found
    """
    runs = recombination_free_runs(panel.sources, kept)
    n_markers = len(marker_map)
    run_of = np.empty(n_markers, dtype=int)
    for r, (start, stop) in enumerate(runs):
        run_of[start:stop] = r

    for _ in range(max_tries):
        blocked = np.zeros(n_markers + 2, dtype=bool)  # padded by one marker on each side
        blocks: List[Optional[np.ndarray]] = [None] * len(block_sizes)
        for position in rng.permutation(len(block_sizes)):
            size = block_sizes[position]
            candidates = [
                start for start in range(n_markers - size + 1)
                if run_of[start] == run_of[start + size - 1] and not blocked[start + 1:start + size + 1].any()
            ]
            if not candidates:
                break
            start = candidates[int(rng.integers(len(candidates)))]
            blocks[position] = np.arange(start, start + size)
            blocked[start:start + size + 2] = True
        else:
            return blocks

    lengths = sorted((stop - start for start, stop in runs), reverse=True)[:5]
    raise InfeasibleBlocks(f"Cannot place causal blocks of sizes {list(block_sizes)}", lengths)


def generate_phenotype(genotypes: GenotypeMatrix, causal: Sequence[int], beta_causal: float, noise_sd: float,
                       rng: np.random.Generator) -> PhenotypeVector:
    """y = X beta* + eps with beta*_j = beta_causal on causal markers and eps ~ N(0, noise_sd^2)."""
    beta = np.zeros(genotypes.n_markers)
    beta[np.asarray(causal, dtype=int)] = beta_causal
    noise = noise_sd * rng.standard_normal(genotypes.n_individuals)
    return PhenotypeVector(values=genotypes.as_float() @ beta + noise, individual_ids=genotypes.individual_ids)


def _filtered_panel(config: SimConfig, rng: np.random.Generator) -> Tuple[HaplotypePanel, FilteredMarkers]:
    panel = generate_haplotypes(config, rng)
    genotypes = pair_genotypes(panel.haplotypes, rng)
    return panel, maf_filter(genotypes, panel.marker_map, config.maf_threshold)


def simulate(config: SimConfig) -> SimDataset:
    """
    Full simulation pipeline. Haplotypes are redrawn (from the same
    generator) when the causal blocks do not fit, up to config.max_attempts times.
    """
    rng = np.random.default_rng(config.seed)
    for attempt in range(1, config.max_attempts + 1):
        try:
            panel, filtered = _filtered_panel(config, rng)
            blocks = assign_causal_blocks(filtered.marker_map, panel, config.causal_block_sizes, rng,
                                          kept=filtered.kept)
        except (InfeasibleBlocks, AllMarkersFiltered) as e:
            if attempt == config.max_attempts:
                raise
            logger.debug(f"Simulation attempt {attempt} rejected: {e}")
            continue
        break

    causal = np.sort(np.concatenate(blocks))
    phenotype = generate_phenotype(filtered.genotypes, causal, config.beta_causal, config.noise_sd, rng)
    dataset = validate_dataset(filtered.genotypes, filtered.marker_map, phenotype)
    true_beta = np.zeros(dataset.n_markers)
    true_beta[causal] = config.beta_causal
    block_count, mean_per_block = block_statistics(recombination_free_runs(panel.sources, filtered.kept))
    logger.info(f"Simulated {dataset.n_individuals} individuals x {dataset.n_markers} markers "
                f"(rho={config.rho_per_kb}/kb, {block_count} blocks, {mean_per_block:.2f} SNPs per block)")
    return SimDataset(
        dataset=dataset,
        causal_indices=causal,
        causal_blocks=blocks,
        true_beta=true_beta,
        block_count=block_count,
        mean_snps_per_block=mean_per_block,
        config=config,
    )


@dataclass(frozen=True)
class SimulationSummary:
    rho_per_kb: float
    replicates: int
    min_markers: int
    max_markers: int
    mean_markers: float
    mean_snps_per_block: float


def replicate_seeds(master_seed: int, replicates: int, per_replicate: int = 1) -> np.ndarray:
    """Independent 64-bit seeds, one row per replicate, derived from a master seed."""
    children = np.random.SeedSequence(master_seed).spawn(replicates)
    return np.array([child.generate_state(per_replicate, dtype=np.uint64) for child in children])


def simulation_summary(config: SimConfig, replicates: int, master_seed: int = 0) -> SimulationSummary:
    """Marker-count and block-size statistics over replicate panels (no causal placement)."""
    if replicates < 1:
        raise ConfigError(f"replicates must be at least 1, got {replicates}")
    counts, per_block = [], []
    for seed in replicate_seeds(master_seed, replicates)[:, 0]:
        rng = np.random.default_rng(int(seed))
        panel, filtered = _filtered_panel(replace(config, seed=int(seed)), rng)
        counts.append(len(filtered.kept))
        per_block.append(block_statistics(recombination_free_runs(panel.sources, filtered.kept))[1])
    return SimulationSummary(
        rho_per_kb=config.rho_per_kb,
        replicates=replicates,
        min_markers=int(min(counts)),
        max_markers=int(max(counts)),
        mean_markers=float(np.mean(counts)),
        mean_snps_per_block=float(np.mean(per_block)),
    )
