"""
Tab-separated file formats.

genotypes.tsv   individual_id, then one column per marker id (values 0/1/2)
markers.tsv     marker_id, position_kb, rho_per_kb (rate of the interval preceding the marker)
phenotype.tsv   individual_id, value
truth.tsv       marker_id, true_beta, causal

Every table is UTF-8 with a header row. Floats are written with 17
significant digits so files round-trip exactly, and nothing
time-dependent is ever written, so identical inputs give identical bytes.
"""
import logging
import os
import re
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from blockreg.data_model import Dataset, GenotypeMatrix, MarkerMap, PhenotypeVector, SampleTrace, validate_dataset
from blockreg.errors import DimensionMismatch, IoError, ParseError
from blockreg.utils import format_float

# Configure logging
logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

FLOAT_FORMAT = "%.17g"
GENOTYPE_CODES = ("0", "1", "2")

GENOTYPES_FILE = "genotypes.tsv"
MARKERS_FILE = "markers.tsv"
PHENOTYPE_FILE = "phenotype.tsv"
TRUTH_FILE = "truth.tsv"
MANIFEST_FILE = "manifest.txt"

MARKER_COLUMNS = ["marker_id", "position_kb", "rho_per_kb"]
PHENOTYPE_COLUMNS = ["individual_id", "value"]
TRUTH_COLUMNS = ["marker_id", "true_beta", "causal"]
TRACE_COLUMNS = ["retained_index", "sigma_sq", "lambda", "pi0", "pi1", "train_error"]


def _read_table(path: PathLike, expected: Optional[List[str]] = None) -> pd.DataFrame:
    """Read a TSV as strings, checking the header when `expected` is given."""
    path = str(path)
    if not os.path.exists(path):
        raise ParseError("file does not exist", path, 0)
    try:
        df = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise ParseError("file is empty", path, 1) from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise ParseError(f"malformed row: {e}", path, int(match.group(1)) if match else 0) from e
    except UnicodeDecodeError as e:
        raise ParseError(f"not valid UTF-8: {e}", path, 0) from e
    if expected is not None and list(df.columns) != expected:
        raise ParseError(f"header must be {' '.join(expected)}, got {' '.join(df.columns)}", path, 1)
    if df.isna().any().any():
        row, col = np.argwhere(df.isna().to_numpy())[0]
        raise ParseError("missing value", path, int(row) + 2, int(col) + 1)
    return df


def _parse_floats(df: pd.DataFrame, column: str, path: PathLike) -> np.ndarray:
    col_index = list(df.columns).index(column)
    values = np.empty(len(df))
    for row, cell in enumerate(df[column]):
        try:
            values[row] = float(cell)
        except ValueError:
            raise ParseError(f"{column} value {cell!r} is not a number", str(path), row + 2, col_index + 1)
    return values


def _parse_genotypes(df: pd.DataFrame, path: PathLike) -> np.ndarray:
    cells = df.iloc[:, 1:].to_numpy(dtype=object)
    valid = np.isin(cells, GENOTYPE_CODES)
    if not np.all(valid):
        row, col = np.argwhere(~valid)[0]
        raise ParseError(
            f"genotype {cells[row, col]!r} for individual {df.iloc[row, 0]}, marker {df.columns[col + 1]} "
            f"is not 0, 1 or 2",
            str(path), int(row) + 2, int(col) + 2,
        )
    return ((cells == "1") * 1 + (cells == "2") * 2).astype(np.int8)


def read_dataset(genotypes_path: PathLike, markers_path: PathLike, phenotype_path: PathLike) -> Dataset:
    """
    Parse the three input tables and validate them as one dataset.

    Raises:
        ParseError: a file is missing, malformed or has an unparseable cell
        DimensionMismatch: the tables disagree on markers or individuals
        plus every error of validate_dataset
    """
    geno_df = _read_table(genotypes_path)
    if geno_df.shape[1] < 2:
        raise ParseError("genotype table needs an id column and at least one marker column", str(genotypes_path), 1)
    genotypes = GenotypeMatrix(
        values=_parse_genotypes(geno_df, genotypes_path),
        marker_ids=tuple(geno_df.columns[1:]),
        individual_ids=tuple(geno_df.iloc[:, 0]),
    )

    marker_df = _read_table(markers_path, MARKER_COLUMNS)
    marker_ids = tuple(marker_df["marker_id"])
    if len(marker_ids) != genotypes.n_markers:
        raise DimensionMismatch(
            f"{markers_path} lists {len(marker_ids)} markers but {genotypes_path} has {genotypes.n_markers}"
        )
    if marker_ids != genotypes.marker_ids:
        bad = next(i for i, (a, b) in enumerate(zip(marker_ids, genotypes.marker_ids)) if a != b)
        raise DimensionMismatch(
            f"Marker {bad + 1} is {marker_ids[bad]} in {markers_path} but {genotypes.marker_ids[bad]} in {genotypes_path}"
        )
    marker_map = MarkerMap(
        positions_kb=_parse_floats(marker_df, "position_kb", markers_path),
        rho=_parse_floats(marker_df, "rho_per_kb", markers_path),
    )

    pheno_df = _read_table(phenotype_path, PHENOTYPE_COLUMNS)
    phenotype = PhenotypeVector(
        values=_parse_floats(pheno_df, "value", phenotype_path),
        individual_ids=tuple(pheno_df["individual_id"]),
    )
    dataset = validate_dataset(genotypes, marker_map, phenotype)
    logger.info(f"Read {dataset.n_individuals} individuals x {dataset.n_markers} markers from {genotypes_path}")
    return dataset


def _write_table(df: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, sep="\t", index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="",
                  encoding="utf-8")
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e
    logger.debug(f"Wrote {len(df)} rows to {path}")
    return path


def write_dataset(dataset: Dataset, out_dir: PathLike) -> List[Path]:
    out_dir = Path(out_dir)
    genotypes = pd.DataFrame(dataset.genotypes.values, columns=list(dataset.genotypes.marker_ids))
    genotypes.insert(0, "individual_id", list(dataset.genotypes.individual_ids))
    markers = pd.DataFrame({
        "marker_id": list(dataset.genotypes.marker_ids),
        "position_kb": dataset.marker_map.positions_kb,
        "rho_per_kb": dataset.marker_map.rho,
    })
    phenotype = pd.DataFrame({"individual_id": list(dataset.phenotype.individual_ids), "value": dataset.y})
    return [
        _write_table(genotypes, out_dir / GENOTYPES_FILE),
        _write_table(markers, out_dir / MARKERS_FILE),
        _write_table(phenotype, out_dir / PHENOTYPE_FILE),
    ]


def write_truth(marker_ids: Sequence[str], true_beta: np.ndarray, causal: Iterable[int], path: PathLike) -> Path:
    flags = np.zeros(len(marker_ids), dtype=np.int64)
    flags[np.asarray(list(causal), dtype=int)] = 1
    df = pd.DataFrame({"marker_id": list(marker_ids), "true_beta": np.asarray(true_beta, dtype=np.float64),
                       "causal": flags})
    return _write_table(df, path)


def read_truth(path: PathLike, marker_ids: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns (0-based causal marker indices, true coefficients) aligned to
    `marker_ids`. Markers absent from the file count as non-causal.
    """
    df = _read_table(path, TRUTH_COLUMNS)
    index_of = {m: i for i, m in enumerate(marker_ids)}
    true_beta = np.zeros(len(marker_ids))
    causal = []
    values = _parse_floats(df, "true_beta", path)
    for row, (marker, flag) in enumerate(zip(df["marker_id"], df["causal"])):
        if marker not in index_of:
            raise ParseError(f"unknown marker {marker}", str(path), row + 2, 1)
        if flag not in ("0", "1"):
            raise ParseError(f"causal flag {flag!r} is not 0 or 1", str(path), row + 2, 3)
        true_beta[index_of[marker]] = values[row]
        if flag == "1":
            causal.append(index_of[marker])
    return np.array(sorted(causal), dtype=np.int64), true_beta


def write_beta_summary(path: PathLike, dataset: Dataset, p_c: np.ndarray, beta_mean: np.ndarray,
                       beta_best: np.ndarray, c_best: np.ndarray, ranks: np.ndarray) -> Path:
    df = pd.DataFrame({
        "marker_id": list(dataset.genotypes.marker_ids),
        "position_kb": dataset.marker_map.positions_kb,
        "p_c": np.asarray(p_c, dtype=np.float64),
        "beta_mean": np.asarray(beta_mean, dtype=np.float64),
        "beta_best": np.asarray(beta_best, dtype=np.float64),
        "c_best": np.asarray(c_best, dtype=np.int64),
        "rank": ranks,
    })
    return _write_table(df, path)


def write_trace(path: PathLike, trace: SampleTrace) -> Path:
    df = pd.DataFrame({
        "retained_index": np.arange(len(trace), dtype=np.int64),
        "sigma_sq": trace.scalar("sigma_sq"),
        "lambda": trace.scalar("lambda_"),
        "pi0": trace.scalar("pi0"),
        "pi1": trace.scalar("pi1"),
        "train_error": trace.train_errors.astype(np.float64),
    }, columns=TRACE_COLUMNS)
    return _write_table(df, path)


def write_coefficients(path: PathLike, dataset: Dataset, beta: np.ndarray, ranks: np.ndarray) -> Path:
    """Per-marker table for the point-estimate baselines (ridge, lasso)."""
    df = pd.DataFrame({
        "marker_id": list(dataset.genotypes.marker_ids),
        "position_kb": dataset.marker_map.positions_kb,
        "beta": np.asarray(beta, dtype=np.float64),
        "rank": ranks,
    })
    return _write_table(df, path)


def write_wald(path: PathLike, dataset: Dataset, statistic: np.ndarray, p_value: np.ndarray,
               neg_log10_p: np.ndarray, ranks: np.ndarray) -> Path:
    df = pd.DataFrame({
        "marker_id": list(dataset.genotypes.marker_ids),
        "position_kb": dataset.marker_map.positions_kb,
        "statistic": statistic,
        "p_value": p_value,
        "neg_log10_p": neg_log10_p,
        "rank": ranks,
    })
    return _write_table(df, path)


def write_pr_curve(path: PathLike, k: np.ndarray, precision: np.ndarray, recall: np.ndarray) -> Path:
    return _write_table(pd.DataFrame({"k": k, "precision": precision, "recall": recall}), path)


def write_benchmark_curves(path: PathLike, rows: List[Dict[str, object]]) -> Path:
    return _write_table(pd.DataFrame(rows, columns=["method", "recall", "mean_precision", "se_precision"]), path)


def write_benchmark_summary(path: PathLike, rows: List[Dict[str, object]]) -> Path:
    return _write_table(pd.DataFrame(rows, columns=["method", "replicates", "mean_auprc", "se_auprc"]), path)


def write_sim_stats(path: PathLike, rows: List[Dict[str, object]]) -> Path:
    columns = ["rho_per_kb", "replicates", "min_markers", "max_markers", "mean_markers", "mean_snps_per_block"]
    return _write_table(pd.DataFrame(rows, columns=columns), path)


def _manifest_value(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, (list, tuple)):
        return ",".join(_manifest_value(v) for v in value)
    return str(value)


def write_manifest(path: PathLike, entries: Dict[str, object]) -> Path:
    """Flat run metadata as sorted key=value lines."""
    path = Path(path)
    lines = [f"{key}={_manifest_value(entries[key])}" for key in sorted(entries)]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e
    return path
