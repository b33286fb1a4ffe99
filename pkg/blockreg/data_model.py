"""
Core domain types for block-regularized regression.

This module holds the dataset records (genotypes, marker map, phenotype),
the model hyperparameters and sampling schedule, the per-iteration model
state, and the validation that every fit starts from.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from blockreg.errors import (
    ConstantColumn,
    DimensionMismatch,
    HyperparameterError,
    InvalidGenotype,
    NegativeDistance,
    NegativeRate,
    NonFiniteValue,
    ScheduleError,
)

# Configure logging
logger = logging.getLogger(__name__)

MAX_SEED = 2**64 - 1


def _frozen(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


def default_ids(prefix: str, count: int) -> Tuple[str, ...]:
    """Generate ids such as snp00001, ind00001."""
    return tuple(f"{prefix}{i + 1:05d}" for i in range(count))


@dataclass(frozen=True, eq=False)
class GenotypeMatrix:
    """N x J allele counts in {0, 1, 2}, one column per marker."""

    values: np.ndarray
    marker_ids: Tuple[str, ...]
    individual_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        raw = np.asarray(self.values)
        if raw.ndim != 2:
            raise DimensionMismatch(f"Genotypes must be a 2-D matrix, got {raw.ndim} dimensions")
        allowed = np.isin(raw, (0, 1, 2))
        if not np.all(allowed):
            bad = np.argwhere(~allowed)[0]
            raise InvalidGenotype(
                f"Genotype at individual {bad[0]}, marker {bad[1]} is {raw[bad[0], bad[1]]}; expected 0, 1 or 2"
            )
        values = raw.astype(np.int8)
        marker_ids = tuple(str(m) for m in self.marker_ids)
        if len(marker_ids) != values.shape[1]:
            raise DimensionMismatch(f"{len(marker_ids)} marker ids for {values.shape[1]} genotype columns")
        individual_ids = tuple(str(i) for i in self.individual_ids) or default_ids("ind", values.shape[0])
        if len(individual_ids) != values.shape[0]:
            raise DimensionMismatch(f"{len(individual_ids)} individual ids for {values.shape[0]} genotype rows")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "marker_ids", marker_ids)
        object.__setattr__(self, "individual_ids", individual_ids)

    @property
    def n_individuals(self) -> int:
        return self.values.shape[0]

    @property
    def n_markers(self) -> int:
        return self.values.shape[1]

    def as_float(self) -> np.ndarray:
        return self.values.astype(np.float64)

    def select(self, columns: Sequence[int]) -> "GenotypeMatrix":
        columns = np.asarray(columns, dtype=int)
        return GenotypeMatrix(
            values=self.values[:, columns],
            marker_ids=tuple(self.marker_ids[k] for k in columns),
            individual_ids=self.individual_ids,
        )


def interval_distances(positions_kb: np.ndarray) -> np.ndarray:
    """d[0] = 0, d[j] = positions[j] - positions[j-1]."""
    d = np.zeros(len(positions_kb), dtype=np.float64)
    if len(positions_kb) > 1:
        d[1:] = np.diff(positions_kb)
    return d


@dataclass(frozen=True, eq=False)
class MarkerMap:
    """
    Marker positions with per-interval distance and recombination rate.

    d[j] and rho[j] describe the interval between markers j-1 and j; the
    entries at index 0 are unused. Distances are in kb and rates per kb,
    so d * rho is dimensionless.
    """

    positions_kb: np.ndarray
    rho: np.ndarray
    d: np.ndarray = field(default=None)

    def __post_init__(self):
        positions = np.array(self.positions_kb, dtype=np.float64, copy=True).ravel()
        rho = np.array(self.rho, dtype=np.float64, copy=True).ravel()
        if rho.shape != positions.shape:
            raise DimensionMismatch(f"{len(rho)} recombination rates for {len(positions)} marker positions")
        d = interval_distances(positions) if self.d is None else np.array(self.d, dtype=np.float64, copy=True).ravel()
        if d.shape != positions.shape:
            raise DimensionMismatch(f"{len(d)} distances for {len(positions)} marker positions")
        object.__setattr__(self, "positions_kb", _frozen(positions))
        object.__setattr__(self, "rho", _frozen(rho))
        object.__setattr__(self, "d", _frozen(d))

    def __len__(self) -> int:
        return len(self.positions_kb)

    def select(self, start: int, stop: int) -> "MarkerMap":
        """Contiguous sub-map; the first marker of the slice starts a new chain."""
        d = self.d[start:stop].copy()
        rho = self.rho[start:stop].copy()
        if len(d):
            d[0] = 0.0
        return MarkerMap(positions_kb=self.positions_kb[start:stop], rho=rho, d=d)


@dataclass(frozen=True, eq=False)
class PhenotypeVector:
    values: np.ndarray
    individual_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        individual_ids = tuple(str(i) for i in self.individual_ids) or default_ids("ind", len(values))
        if len(individual_ids) != len(values):
            raise DimensionMismatch(f"{len(individual_ids)} individual ids for {len(values)} phenotype values")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "individual_ids", individual_ids)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class Dataset:
    """A validated (genotypes, marker map, phenotype) triple."""

    genotypes: GenotypeMatrix
    marker_map: MarkerMap
    phenotype: PhenotypeVector

    @property
    def X(self) -> np.ndarray:
        return self.genotypes.as_float()

    @property
    def y(self) -> np.ndarray:
        return self.phenotype.values

    @property
    def n_individuals(self) -> int:
        return self.genotypes.n_individuals

    @property
    def n_markers(self) -> int:
        return self.genotypes.n_markers

    def segment(self, start: int, stop: int) -> "Dataset":
        return Dataset(
            genotypes=self.genotypes.select(range(start, stop)),
            marker_map=self.marker_map.select(start, stop),
            phenotype=self.phenotype,
        )

    def with_phenotype(self, values: np.ndarray) -> "Dataset":
        return Dataset(
            genotypes=self.genotypes,
            marker_map=self.marker_map,
            phenotype=PhenotypeVector(values=values, individual_ids=self.phenotype.individual_ids),
        )


def validate_dataset(genotypes: GenotypeMatrix, marker_map: MarkerMap, phenotype: PhenotypeVector) -> Dataset:
    """
    Check that genotypes, marker map and phenotype describe one dataset.

    Distances are recomputed from the positions. Constant genotype columns
    are rejected because their zero sum of squares leaves the active-marker
    marginal undefined.

    Raises:
        DimensionMismatch: N or J disagree, N < 2 or J < 1
        NonFiniteValue: a phenotype, position or rate is NaN or infinite
        NegativeDistance: positions decrease
        NegativeRate: a recombination rate is negative
        ConstantColumn: a marker has zero sample variance
    """
    n, j = genotypes.values.shape
    if n < 2:
        raise DimensionMismatch(f"At least 2 individuals are required, got {n}")
    if j < 1:
        raise DimensionMismatch("At least 1 marker is required")
    if len(phenotype) != n:
        raise DimensionMismatch(f"Phenotype has {len(phenotype)} values for {n} individuals")
    if len(marker_map) != j:
        raise DimensionMismatch(f"Marker map has {len(marker_map)} markers for {j} genotype columns")
    if not np.all(np.isfinite(phenotype.values)):
        bad = int(np.flatnonzero(~np.isfinite(phenotype.values))[0])
        raise NonFiniteValue(f"Phenotype of individual {phenotype.individual_ids[bad]} is not finite")
    if not np.all(np.isfinite(marker_map.positions_kb)):
        raise NonFiniteValue("Marker positions must be finite")
    if not np.all(np.isfinite(marker_map.rho)):
        raise NonFiniteValue("Recombination rates must be finite")

    d = interval_distances(marker_map.positions_kb)
    if np.any(d < 0):
        bad = int(np.flatnonzero(d < 0)[0])
        raise NegativeDistance(
            f"Marker {genotypes.marker_ids[bad]} at {marker_map.positions_kb[bad]} kb precedes "
            f"marker {genotypes.marker_ids[bad - 1]} at {marker_map.positions_kb[bad - 1]} kb"
        )
    # rho[0] is unused and may be anything finite
    negative = marker_map.rho[1:] < 0
    if np.any(negative):
        bad = int(np.flatnonzero(negative)[0]) + 1
        raise NegativeRate(f"Recombination rate before marker {genotypes.marker_ids[bad]} is negative")

    values = genotypes.values
    constant = np.all(values == values[0:1, :], axis=0)
    if np.any(constant):
        raise ConstantColumn(genotypes.marker_ids[int(np.flatnonzero(constant)[0])])

    if genotypes.individual_ids != phenotype.individual_ids:
        raise DimensionMismatch("Phenotype individual ids do not match genotype individual ids")

    validated_map = MarkerMap(positions_kb=marker_map.positions_kb, rho=marker_map.rho, d=d)
    logger.debug(f"Validated dataset with {n} individuals and {j} markers")
    return Dataset(genotypes=genotypes, marker_map=validated_map, phenotype=phenotype)


@dataclass(frozen=True)
class Hyperparameters:
    """
    Prior settings.

    nu0, s0_sq: Inv-gamma(nu0/2, nu0*s0_sq/2) prior on sigma^2
    alpha, gamma: Inv-gamma(alpha, gamma) prior on lambda
    a00, b00 / a10, b10: Beta priors on pi0 / pi1
    bern_a, bern_b: Beta prior on p of the independent Bernoulli model
    """

    nu0: float = 1.0
    s0_sq: float = 1.0
    alpha: float = 1.0
    gamma: float = 1.0
    a00: float = 10.0
    b00: float = 2.0
    a10: float = 10.0
    b10: float = 2.0
    bern_a: float = 10.0
    bern_b: float = 2.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not np.isfinite(value) or value <= 0:
                raise HyperparameterError(f"Hyperparameter {name} must be a positive finite number, got {value}")


@dataclass(frozen=True)
class SamplingSchedule:
    burn_in: int = 2000
    iterations: int = 5000
    thin: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0:
            raise ScheduleError(f"burn_in must be non-negative, got {self.burn_in}")
        if self.thin < 1:
            raise ScheduleError(f"thin must be at least 1, got {self.thin}")
        if self.iterations < self.thin:
            raise ScheduleError(f"iterations ({self.iterations}) must be at least thin ({self.thin})")
        if not 0 <= self.seed <= MAX_SEED:
            raise ScheduleError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def n_retained(self) -> int:
        return self.iterations // self.thin


@dataclass(eq=False)
class ModelState:
    """One Gibbs state. c[j] == 0 implies beta[j] == 0."""

    beta: np.ndarray
    c: np.ndarray
    sigma_sq: float
    lambda_: float
    pi0: float
    pi1: float

    @property
    def transition_matrix(self) -> np.ndarray:
        return np.array([[self.pi0, 1.0 - self.pi0], [1.0 - self.pi1, self.pi1]])

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.c))

    def copy(self) -> "ModelState":
        return ModelState(
            beta=self.beta.copy(),
            c=self.c.copy(),
            sigma_sq=self.sigma_sq,
            lambda_=self.lambda_,
            pi0=self.pi0,
            pi1=self.pi1,
        )

    def spike_consistent(self) -> bool:
        return bool(np.all(self.beta[self.c == 0] == 0.0))


def initial_state(dataset: Dataset, hyper: Hyperparameters) -> ModelState:
    """
    All-inactive starting state.

    sigma^2 starts at the unbiased sample variance of y, lambda at 1 and
    pi0, pi1 at their prior means. Initialization draws no random numbers.
    """
    y = dataset.y
    variance = float(np.var(y, ddof=1))
    j = dataset.n_markers
    return ModelState(
        beta=np.zeros(j),
        c=np.zeros(j, dtype=np.int8),
        sigma_sq=variance if variance > 0 else 1.0,
        lambda_=1.0,
        pi0=hyper.a00 / (hyper.a00 + hyper.b00),
        pi1=hyper.a10 / (hyper.a10 + hyper.b10),
    )


@dataclass(frozen=True, eq=False)
class RetainedSample:
    state: ModelState
    train_error: float


@dataclass(eq=False)
class SampleTrace:
    schedule: SamplingSchedule
    samples: List[RetainedSample] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def betas(self) -> np.ndarray:
        return np.array([s.state.beta for s in self.samples])

    @property
    def indicators(self) -> np.ndarray:
        return np.array([s.state.c for s in self.samples])

    @property
    def train_errors(self) -> np.ndarray:
        return np.array([s.train_error for s in self.samples])

    def scalar(self, name: str) -> np.ndarray:
        return np.array([getattr(s.state, name) for s in self.samples], dtype=np.float64)


def train_error(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    residual = y - X @ beta
    return float(residual @ residual)


def center_phenotype(dataset: Dataset) -> Tuple[Dataset, float]:
    """Mean-center y; the design matrix has no intercept column."""
    offset = float(np.mean(dataset.y))
    return dataset.with_phenotype(dataset.y - offset), offset


def make_dataset(
    genotypes: np.ndarray,
    phenotype: np.ndarray,
    positions_kb: Optional[np.ndarray] = None,
    rho: Optional[np.ndarray] = None,
) -> Dataset:
    """Build and validate a dataset from plain arrays."""
    genotypes = np.asarray(genotypes)
    j = genotypes.shape[1]
    positions = np.arange(j, dtype=np.float64) if positions_kb is None else positions_kb
    rates = np.zeros(j) if rho is None else rho
    return validate_dataset(
        GenotypeMatrix(values=genotypes, marker_ids=default_ids("snp", j)),
        MarkerMap(positions_kb=positions, rho=rates),
        PhenotypeVector(values=phenotype),
    )
