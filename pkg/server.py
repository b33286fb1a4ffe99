"""
blockreg MCP Server

A Model Context Protocol (MCP) server exposing the blockreg library as tools:
simulating block-structured datasets, fitting the block-regularized model,
running the comparison methods and the precision-recall benchmark.

References:
- MCP Specification: https://modelcontextprotocol.io/
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, Optional

import anyio
from dotenv import load_dotenv
from mcp.server.fastmcp import FastMCP

# Add the server directory to PYTHONPATH
server_dir = os.path.dirname(os.path.abspath(__file__))
if server_dir not in sys.path:
    sys.path.insert(0, server_dir)

from blockreg import __version__
from blockreg.config import build_run_config
from blockreg.pipeline import run_command
from blockreg.utils import to_jsonable

logger = logging.getLogger(__name__)

# Initialize the MCP server
mcp_server = FastMCP("blockreg")

server_info = {
    "name": "blockreg",
    "version": __version__
}


async def _run_tool(command: str, flags: Dict[str, Any], description: str) -> Dict[str, Any]:
    """Build the run configuration, run the command in a worker thread and wrap the outcome."""
    try:
        config = build_run_config(command, flags)
        result = await anyio.to_thread.run_sync(run_command, command, config)
        return {"status": "success", **to_jsonable(result)}
    except Exception as e:
        logger.error(f"Error {description}: {str(e)}", exc_info=True)
        return {"status": "error", "message": f"Error {description}: {str(e)}"}


@mcp_server.tool()
async def simulate_dataset(out_dir: str, seed: int = 0, rho_per_kb: float = 0.1, beta_causal: float = 2.5,
                           n_haplotypes: int = 360, region_kb: float = 40.0) -> Dict[str, Any]:
    """Simulate a block-structured genotype/phenotype dataset and write it as TSV files.

    Args:
        out_dir: Directory for genotypes.tsv, markers.tsv, phenotype.tsv, truth.tsv
        seed: Random seed
        rho_per_kb: Recombination rate per kb; low rates give long haplotype blocks
        beta_causal: Effect size of each causal marker
        n_haplotypes: Number of sample haplotypes (paired into n_haplotypes/2 individuals)
        region_kb: Length of the simulated region in kb
    """
    flags = {"out": out_dir, "seed": seed, "rho_per_kb": rho_per_kb, "beta_causal": beta_causal,
             "n_haplotypes": n_haplotypes, "region_kb": region_kb}
    return await _run_tool("simulate", flags, "simulating dataset")


@mcp_server.tool()
async def fit_model(genotypes: str, markers: str, phenotype: str, out_dir: str, prior: str = "block",
                    burn_in: int = 2000, iterations: int = 5000, thin: int = 10, seed: int = 0,
                    segment_size: int = 0, rank_mode: str = "abs_beta",
                    truth: Optional[str] = None) -> Dict[str, Any]:
    """Fit the Bayesian sparse regression model by Gibbs sampling.

    Args:
        genotypes: Path to genotypes.tsv
        markers: Path to markers.tsv
        phenotype: Path to phenotype.tsv
        out_dir: Directory for beta_summary.tsv, trace.tsv and manifest.txt
        prior: "block" for the recombination-aware Markov prior, "bernoulli" for independent indicators
        burn_in: Sweeps discarded before retaining samples
        iterations: Sweeps after burn-in
        thin: Keep every thin-th sweep
        seed: Random seed
        segment_size: Fit consecutive segments of this many markers independently (0 = whole sequence)
        rank_mode: Rank markers by "abs_beta" (posterior-mean |beta|) or "p_c" (activation frequency)
        truth: Optional truth.tsv; when given the AUPRC is reported and pr_curve.tsv written
    """
    flags = {"genotypes": genotypes, "markers": markers, "phenotype": phenotype, "out": out_dir, "prior": prior,
             "burn_in": burn_in, "iters": iterations, "thin": thin, "seed": seed, "segment_size": segment_size,
             "rank_mode": rank_mode, "truth": truth}
    return await _run_tool("fit", flags, "fitting model")


@mcp_server.tool()
async def run_baseline(method: str, genotypes: str, markers: str, phenotype: str, out_dir: str,
                       seed: int = 0, ridge_reg: float = 0.1, penalty: Optional[float] = None, folds: int = 5,
                       truth: Optional[str] = None) -> Dict[str, Any]:
    """Fit ridge regression or the lasso.

    Args:
        method: "ridge" or "lasso"
        genotypes: Path to genotypes.tsv
        markers: Path to markers.tsv
        phenotype: Path to phenotype.tsv
        out_dir: Directory for beta_summary.tsv and manifest.txt
        seed: Seed for the cross-validation folds
        ridge_reg: Ridge regularization
        penalty: Fixed lasso penalty; cross-validated when omitted
        folds: Lasso cross-validation folds
        truth: Optional truth.tsv for precision-recall
    """
    if method not in ("ridge", "lasso"):
        return {"status": "error", "message": f"Unknown baseline method {method!r}; expected ridge or lasso"}
    flags = {"genotypes": genotypes, "markers": markers, "phenotype": phenotype, "out": out_dir, "seed": seed,
             "ridge_reg": ridge_reg, "penalty": penalty, "folds": folds, "truth": truth}
    return await _run_tool(method, flags, f"running {method}")


@mcp_server.tool()
async def run_wald_test(genotypes: str, markers: str, phenotype: str, out_dir: str,
                        truth: Optional[str] = None) -> Dict[str, Any]:
    """Run the single-marker Wald test on every marker.

    Args:
        genotypes: Path to genotypes.tsv
        markers: Path to markers.tsv
        phenotype: Path to phenotype.tsv
        out_dir: Directory for wald.tsv and manifest.txt
        truth: Optional truth.tsv for precision-recall
    """
    flags = {"genotypes": genotypes, "markers": markers, "phenotype": phenotype, "out": out_dir, "truth": truth}
    return await _run_tool("wald", flags, "running Wald test")


@mcp_server.tool()
async def run_benchmark(out_dir: str, replicates: int = 5, methods: str = "block,bernoulli,ridge,lasso,wald",
                        rho_per_kb: float = 0.1, beta_causal: float = 2.5, burn_in: int = 2000,
                        iterations: int = 5000, thin: int = 10, seed: int = 0) -> Dict[str, Any]:
    """Compare methods by precision-recall over simulated replicates.

    Args:
        out_dir: Directory for pr_curve.tsv, summary.tsv and manifest.txt
        replicates: Number of simulated datasets
        methods: Comma-separated subset of block,bernoulli,ridge,lasso,wald
        rho_per_kb: Recombination rate of the simulated regions
        beta_causal: Effect size of each causal marker
        burn_in: Burn-in sweeps of the Bayesian models
        iterations: Sweeps after burn-in
        thin: Keep every thin-th sweep
        seed: Master seed from which replicate seeds are derived
    """
    flags = {"out": out_dir, "replicates": replicates, "methods": methods, "rho_per_kb": rho_per_kb,
             "beta_causal": beta_causal, "burn_in": burn_in, "iters": iterations, "thin": thin, "seed": seed}
    return await _run_tool("benchmark", flags, "running benchmark")


def main():
    """
    Main entry point for the MCP server.
    """
    parser = argparse.ArgumentParser(description='blockreg MCP Server')
    parser.add_argument('--transport', choices=['stdio', 'sse'], default='stdio',
                        help='Transport type (stdio or sse)')
    parser.add_argument('--host', default='127.0.0.1',
                        help='Host to bind to (sse only)')
    parser.add_argument('--port', type=int, default=8081,
                        help='Port to run the server on (sse only)')
    parser.add_argument('--debug', action='store_true',
                        help='Enable debug logging')
    parser.add_argument('--log-file', default=None,
                        help='Log file path (if not specified, logs to stderr)')

    args = parser.parse_args()

    # Load environment variables
    load_dotenv()

    # Log to stderr so stdio JSON-RPC traffic stays clean
    log_handlers = [logging.StreamHandler(sys.stderr)]
    if args.log_file:
        log_handlers.append(logging.FileHandler(args.log_file))

    level_name = os.environ.get("BLOCKREG_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=logging.DEBUG if args.debug else getattr(logging, level_name, logging.INFO),
        handlers=log_handlers,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    mcp_server.settings.host = args.host
    mcp_server.settings.port = args.port
    logger.info(f"Starting {server_info['name']} {server_info['version']} MCP server ({args.transport})")
    mcp_server.run(transport=args.transport)


if __name__ == "__main__":
    main()
