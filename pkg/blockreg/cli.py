"""
Command-line interface: python -m blockreg <command> [options]

Exit status is 0 on success, 1 when a command fails and 2 for usage errors.
"""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from blockreg import __version__
from blockreg.config import build_run_config, parse_float_list, parse_int_list, parse_name_list
from blockreg.errors import BlockRegError, ConfigError
from blockreg.pipeline import run_command
from blockreg.utils import format_table

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV_VAR = "BLOCKREG_LOG_LEVEL"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    parser.add_argument('--seed', type=int, help='Random seed (default 0)')
    parser.add_argument('--out', type=Path, help='Output directory (default: current directory)')
    parser.add_argument('--config', type=Path, help='key=value config file (default: $BLOCKREG_CONFIG)')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')
    parser.add_argument('--log-file', type=Path, help='Also write logs to this file')
    parser.add_argument('--debug', action='store_true', help='Enable debug logging')
    return parser


def _dataset_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    parser.add_argument('--genotypes', type=Path, help='genotypes.tsv')
    parser.add_argument('--markers', type=Path, help='markers.tsv')
    parser.add_argument('--phenotype', type=Path, help='phenotype.tsv')
    parser.add_argument('--truth', type=Path, help='truth.tsv; when given, pr_curve.tsv is written')
    return parser


def _sampler_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    parser.add_argument('--burn-in', type=int, help='Burn-in sweeps (default 2000)')
    parser.add_argument('--iters', type=int, help='Sweeps after burn-in (default 5000)')
    parser.add_argument('--thin', type=int, help='Keep every thin-th sweep (default 10)')
    parser.add_argument('--sigma-shape', choices=['paper', 'all', 'active'],
                        help='Count all markers (paper, alias all) or only active ones in the sigma^2 shape')
    for name in ('nu0', 's0-sq', 'alpha', 'gamma', 'a00', 'b00', 'a10', 'b10', 'bern-a', 'bern-b'):
        parser.add_argument(f'--{name}', type=float, help=f'Hyperparameter {name.replace("-", "_")}')
    return parser


def _simulation_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    parser.add_argument('--n-haplotypes', type=int, help='Sample haplotypes, paired into individuals (default 360)')
    parser.add_argument('--region-kb', type=float, help='Region length in kb (default 40)')
    parser.add_argument('--markers-per-kb', type=float, help='Marker density (default 0.8)')
    parser.add_argument('--rho-per-kb', type=float, help='Recombination rate per kb (default 0.1)')
    parser.add_argument('--n-ancestors', type=int, help='Ancestral haplotypes (default 8)')
    parser.add_argument('--mutation-flip-prob', type=float, help='Per-allele copying error (default 0.01)')
    parser.add_argument('--maf-threshold', type=float, help='Minimum minor allele frequency (default 0.01)')
    parser.add_argument('--causal-block-sizes', type=parse_int_list, help='Comma-separated sizes (default 3,2,5)')
    parser.add_argument('--beta-causal', type=float, help='Effect of each causal marker (default 2.5)')
    parser.add_argument('--noise-sd', type=float, help='Phenotype noise standard deviation (default 1)')
    parser.add_argument('--max-attempts', type=int, help='Haplotype redraws when blocks do not fit (default 100)')
    return parser


def build_parser() -> argparse.ArgumentParser:
    common, dataset, sampler, simulation = _common_parser(), _dataset_parser(), _sampler_parser(), _simulation_parser()
    parser = argparse.ArgumentParser(prog='blockreg', description='Block-regularized regression for association mapping')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('simulate', parents=[common, simulation], argument_default=argparse.SUPPRESS,
                   help='Simulate a block-structured dataset')

    p = sub.add_parser('sim-stats', parents=[common, simulation], argument_default=argparse.SUPPRESS,
                       help='Marker and block statistics of simulated panels')
    p.add_argument('--replicates', type=int, help='Panels per rate (default 50)')
    p.add_argument('--rho-grid', type=parse_float_list, help='Comma-separated rates (default 0.05,0.1,0.5,1.0)')

    p = sub.add_parser('fit', parents=[common, dataset, sampler], argument_default=argparse.SUPPRESS,
                       help='Fit the Bayesian model')
    p.add_argument('--prior', choices=['block', 'bernoulli'], help='Activation prior (default block)')
    p.add_argument('--segment-size', type=int, help='Markers per independently fit segment (0 = whole sequence)')
    p.add_argument('--rank-mode', choices=['abs_beta', 'p_c'], help='Ranking score (default abs_beta)')

    p = sub.add_parser('ridge', parents=[common, dataset], argument_default=argparse.SUPPRESS,
                       help='Ridge regression')
    p.add_argument('--ridge-reg', type=float, help='Ridge regularization (default 0.1)')

    p = sub.add_parser('lasso', parents=[common, dataset], argument_default=argparse.SUPPRESS,
                       help='Lasso with cross-validated penalty')
    p.add_argument('--penalty', type=float, help='Fixed penalty instead of cross-validation')
    p.add_argument('--folds', type=int, help='Cross-validation folds (default 5)')

    sub.add_parser('wald', parents=[common, dataset], argument_default=argparse.SUPPRESS,
                   help='Single-marker Wald test')

    p = sub.add_parser('benchmark', parents=[common, sampler, simulation], argument_default=argparse.SUPPRESS,
                       help='Precision-recall benchmark over simulated replicates')
    p.add_argument('--replicates', type=int, help='Simulated datasets (default 50)')
    p.add_argument('--methods', type=parse_name_list, help='Comma-separated subset of block,bernoulli,ridge,lasso,wald')
    p.add_argument('--rank-mode', choices=['abs_beta', 'p_c'], help='Ranking score of the Bayesian models')
    p.add_argument('--ridge-reg', type=float, help='Ridge regularization (default 0.1)')
    p.add_argument('--folds', type=int, help='Lasso cross-validation folds (default 5)')
    return parser


def setup_logging(level: str, log_file: Optional[Path] = None) -> None:
    numeric = getattr(logging, str(level).upper(), None)
    if not isinstance(numeric, int):
        raise ConfigError(f"Unknown log level {level!r}")
    log_handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        log_handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=numeric, handlers=log_handlers, format=LOG_FORMAT, force=True)


def _print_result(command: str, result: dict) -> None:
    if command == 'benchmark':
        print(format_table(result['summary']))
    elif command == 'sim-stats':
        print(format_table(result['rows']))
    elif 'auprc' in result:
        print(f"AUPRC: {result['auprc']:.4f}")
    for path in result.get('files', []):
        print(path)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    flags = vars(args)
    command = flags.pop('command')
    config_path = flags.pop('config', None)
    debug = flags.pop('debug', False)
    if 'log_level' not in flags and os.environ.get(LOG_LEVEL_ENV_VAR):
        flags['log_level'] = os.environ[LOG_LEVEL_ENV_VAR]

    try:
        config = build_run_config(command, flags, config_path)
        setup_logging('DEBUG' if debug else config.log_level, config.log_file)
    except BlockRegError as e:
        setup_logging('INFO')
        logger.error(f"Invalid configuration: {e}")
        return 1

    try:
        result = run_command(command, config)
    except BlockRegError as e:
        logger.error(f"{command} failed: {e}")
        return 1
    except Exception as e:
        logger.error(f"{command} failed unexpectedly: {str(e)}", exc_info=True)
        return 1
    _print_result(command, result)
    return 0


if __name__ == '__main__':
    sys.exit(main())
