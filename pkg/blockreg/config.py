"""
Run configuration for the blockreg commands.

Settings are merged from three layers, later layers taking precedence:
code defaults, an optional key=value config file, and command-line flags.
Config-file keys mirror the long flag names; hyphens and underscores are
interchangeable.
"""
import logging
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

from dotenv import dotenv_values

from blockreg.data_model import MAX_SEED, Hyperparameters, SamplingSchedule
from blockreg.errors import ConfigError
from blockreg.gibbs_sampler import SamplerOptions, normalize_sigma_shape
from blockreg.simulator import SimConfig

# Configure logging
logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "BLOCKREG_CONFIG"

COMMANDS = ("simulate", "sim-stats", "fit", "ridge", "lasso", "wald", "benchmark")
DATASET_COMMANDS = ("fit", "ridge", "lasso", "wald")


def parse_int_list(raw: str) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(raw).split(",") if v.strip())
    except ValueError as e:
        raise ConfigError(f"Expected a comma-separated list of integers, got {raw!r}") from e


def parse_float_list(raw: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(raw).split(",") if v.strip())
    except ValueError as e:
        raise ConfigError(f"Expected a comma-separated list of numbers, got {raw!r}") from e


def parse_name_list(raw: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in str(raw).split(",") if v.strip())


@dataclass(frozen=True)
class RunConfig:
    # output and logging
    out: Path = Path(".")
    seed: int = 0
    log_level: str = "INFO"
    log_file: Optional[Path] = None

    # inputs
    genotypes: Optional[Path] = None
    markers: Optional[Path] = None
    phenotype: Optional[Path] = None
    truth: Optional[Path] = None

    # sampling schedule
    burn_in: int = 2000
    iters: int = 5000
    thin: int = 10

    # hyperparameters
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
    sigma_shape: str = "paper"

    # fitting
    prior: str = "block"
    rank_mode: str = "abs_beta"
    segment_size: int = 0
    ridge_reg: float = 0.1
    penalty: Optional[float] = None
    folds: int = 5

    # simulation
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
    max_attempts: int = 100

    # benchmark and simulation statistics
    replicates: int = 50
    methods: Tuple[str, ...] = ("block", "bernoulli", "ridge", "lasso", "wald")
    rho_grid: Tuple[float, ...] = (0.05, 0.1, 0.5, 1.0)

    def schedule(self) -> SamplingSchedule:
        return SamplingSchedule(burn_in=self.burn_in, iterations=self.iters, thin=self.thin, seed=self.seed)

    def hyperparameters(self) -> Hyperparameters:
        return Hyperparameters(
            nu0=self.nu0, s0_sq=self.s0_sq, alpha=self.alpha, gamma=self.gamma,
            a00=self.a00, b00=self.b00, a10=self.a10, b10=self.b10,
            bern_a=self.bern_a, bern_b=self.bern_b,
        )

    def sampler_options(self) -> SamplerOptions:
        return SamplerOptions(sigma_shape=self.sigma_shape)

    def sim_config(self) -> SimConfig:
        return SimConfig(
            n_haplotypes=self.n_haplotypes,
            region_kb=self.region_kb,
            markers_per_kb=self.markers_per_kb,
            rho_per_kb=self.rho_per_kb,
            n_ancestors=self.n_ancestors,
            mutation_flip_prob=self.mutation_flip_prob,
            maf_threshold=self.maf_threshold,
            causal_block_sizes=self.causal_block_sizes,
            beta_causal=self.beta_causal,
            noise_sd=self.noise_sd,
            seed=self.seed,
            max_attempts=self.max_attempts,
        )

    def as_dict(self) -> Dict[str, Any]:
        return {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(self).items() if v is not None}


_PATH_FIELDS = {"out", "log_file", "genotypes", "markers", "phenotype", "truth"}
_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "causal_block_sizes": parse_int_list,
    "methods": parse_name_list,
    "rho_grid": parse_float_list,
    "penalty": float,
}


def _converter(name: str, default: Any) -> Callable[[str], Any]:
    if name in _CONVERTERS:
        return _CONVERTERS[name]
    if name in _PATH_FIELDS:
        return Path
    return type(default)


FIELD_DEFAULTS = {f.name: f.default for f in fields(RunConfig)}


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def convert_value(name: str, raw: Any) -> Any:
    """Convert a config-file string to the type of RunConfig.<name>."""
    if name not in FIELD_DEFAULTS:
        raise ConfigError(f"Unknown configuration key {name!r}")
    if not isinstance(raw, str):
        return raw
    try:
        return _converter(name, FIELD_DEFAULTS[name])(raw.strip())
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value {raw!r} for {name}: {e}") from e


def load_config_file(path: os.PathLike) -> Dict[str, Any]:
    """
    Read a flat key=value file.

    Raises:
        ConfigError: the file is missing, or a key is unknown, or a value does not convert
    """
    if not os.path.isfile(path):
        raise ConfigError(f"Config file {path} does not exist")
    values = {}
    for key, raw in dotenv_values(path).items():
        name = normalize_key(key)
        if raw is None or raw == "":
            raise ConfigError(f"Config key {key!r} in {path} has no value")
        values[name] = convert_value(name, raw)
    logger.debug(f"Loaded {len(values)} settings from {path}")
    return values


def build_run_config(command: str, flags: Dict[str, Any], config_path: Optional[os.PathLike] = None) -> RunConfig:
    """
    Merge defaults, the config file (explicit path, else $BLOCKREG_CONFIG)
    and explicitly given flags, then validate for `command`.
    """
    config_path = config_path or os.environ.get(CONFIG_ENV_VAR)
    file_values = load_config_file(config_path) if config_path else {}
    flag_values = {normalize_key(k): convert_value(normalize_key(k), v) for k, v in flags.items() if v is not None}
    merged = {**FIELD_DEFAULTS, **file_values, **flag_values}
    config = RunConfig(**merged)
    validate_run_config(command, config)
    return config


def validate_run_config(command: str, config: RunConfig) -> None:
    if command not in COMMANDS:
        raise ConfigError(f"Unknown command {command!r}; expected one of {COMMANDS}")
    if not 0 <= config.seed <= MAX_SEED:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {config.seed}")
    if config.segment_size < 0:
        raise ConfigError(f"segment_size must be non-negative, got {config.segment_size}")
    if config.prior not in ("block", "bernoulli"):
        raise ConfigError(f"prior must be block or bernoulli, got {config.prior!r}")
    normalize_sigma_shape(config.sigma_shape)
    if config.replicates < 1:
        raise ConfigError(f"replicates must be at least 1, got {config.replicates}")
    if config.folds < 2:
        raise ConfigError(f"folds must be at least 2, got {config.folds}")
    if config.penalty is not None and config.penalty < 0:
        raise ConfigError(f"penalty must be non-negative, got {config.penalty}")
    if command in DATASET_COMMANDS:
        for name in ("genotypes", "markers", "phenotype"):
            path = getattr(config, name)
            if path is None:
                raise ConfigError(f"{command} requires --{name}")
            if not Path(path).is_file():
                raise ConfigError(f"Input file {path} does not exist")
        if config.truth is not None and not Path(config.truth).is_file():
            raise ConfigError(f"Truth file {config.truth} does not exist")

