"""
Exception hierarchy for blockreg.

Library code raises these; the CLI and the MCP tool layer translate them
into exit codes and error payloads.
"""
from typing import List, Optional


class BlockRegError(Exception):
    """Root of every error raised by blockreg."""


class BlockRegValidationError(BlockRegError, ValueError):
    """Invalid input data, configuration or arguments."""


class DimensionMismatch(BlockRegValidationError):
    pass


class ConstantColumn(BlockRegValidationError):
    def __init__(self, marker_id: str):
        super().__init__(f"Marker {marker_id} has a constant genotype column")
        self.marker_id = marker_id


class NonFiniteValue(BlockRegValidationError):
    pass


class NegativeDistance(BlockRegValidationError):
    pass


class NegativeRate(BlockRegValidationError):
    pass


class InvalidGenotype(BlockRegValidationError):
    pass


class HyperparameterError(BlockRegValidationError):
    pass


class ScheduleError(BlockRegValidationError):
    pass


class ConfigError(BlockRegValidationError):
    pass


class ParseError(BlockRegValidationError):
    def __init__(self, message: str, path: str, line: int, column: Optional[int] = None):
        location = f"{path}:{line}" if column is None else f"{path}:{line}:{column}"
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line
        self.column = column


class OddHaplotypeCount(BlockRegValidationError):
    pass


class EmptyTruth(BlockRegValidationError):
    pass


class EmptyTrace(BlockRegValidationError):
    pass


class DegenerateBeta(BlockRegError):
    pass


class ZeroVarianceColumn(BlockRegError):
    pass


class SolveFailure(BlockRegError):
    pass


class NoConvergence(BlockRegError):
    def __init__(self, message: str, max_kkt_violation: float):
        super().__init__(f"{message} (max KKT violation {max_kkt_violation:.3g})")
        self.max_kkt_violation = max_kkt_violation


class DegenerateColumn(BlockRegError):
    pass


class AllMarkersFiltered(BlockRegError):
    pass


class InfeasibleBlocks(BlockRegError):
    def __init__(self, message: str, run_lengths: List[int]):
        super().__init__(f"{message}; largest recombination-free runs: {run_lengths}")
        self.run_lengths = run_lengths


class NumericalError(BlockRegError):
    pass


class SegmentError(BlockRegError):
    def __init__(self, segment_index: int, cause: Exception):
        super().__init__(f"Segment {segment_index} failed: {cause}")
        self.segment_index = segment_index


class BenchmarkError(BlockRegError):
    def __init__(self, replicate: int, seed: int, cause: Exception):
        super().__init__(f"Replicate {replicate} (seed {seed}) failed: {cause}")
        self.replicate = replicate
        self.seed = seed


class IoError(BlockRegError):
    """An output file could not be written."""
