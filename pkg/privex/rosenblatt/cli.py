"""
Command line front end::

    rosenblatt simulate --H 0.75 --beta 0.44 --gamma 0.03 --n 64 --seed 7 --out results
    rosenblatt verify constants --H 0.75 --beta 0.44 --gamma 0.03
    rosenblatt verify law --config desk.json --threads 8

Settings come from an optional JSON ``--config`` file, overridden by any flags given. Unknown config keys are
rejected. Every file is written inside ``--out`` and named after the hash of the effective configuration:

 * ``simulate`` writes ``run_<hash>.csv`` (one row per output time) and ``run_<hash>.json`` (meta)
 * ``verify <suite>`` writes ``report_<suite>_<hash>.json`` and ``report_<suite>_<hash>.csv``

Exit codes: 0 success / all checks passed, 1 a verify check failed (the report is still written), 2 invalid
configuration or parameters (the violated constraint is printed to stderr), 3 I/O error.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from typing import List, Optional

from privex.helpers import DictObject, empty

from privex.rosenblatt import settings
from privex.rosenblatt.exceptions import ConfigError, DomainError, IntensityError, MeshTooCoarse, ParamError, \
    InvalidInput
from privex.rosenblatt.experiments import run_law_suite, run_coupling_rate, run_strong_rate, run_constants, \
    run_oracle_suite, run_component_rates, SCHEMA
from privex.rosenblatt.helpers import config_hash, dumps_json, write_csv
from privex.rosenblatt.kernels import validate_params
from privex.rosenblatt.objects import RunConfig, Params, RateFit
from privex.rosenblatt.process import assemble_run

__all__ = ['main', 'build_parser', 'load_config', 'build_config', 'cmd_simulate', 'cmd_verify', 'SUITES']

log = logging.getLogger(__name__)

SUITES = ('law', 'coupling', 'rate', 'constants', 'oracle', 'components')

CONFIG_KEYS = tuple(f.name for f in fields(RunConfig) if f.name != 'raw_data')

# flag dest -> RunConfig key
FLAG_KEYS = dict(
    H='H', beta='beta', gamma='gamma', a='a', T='T', n='n', reps='reps', seed='seed', bm_mesh='bm_mesh',
    output_grid_size='output_grid_size', block_mesh='block_mesh', ns='ns', out='out', with_reference='with_reference'
)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help="JSON file with run settings (flags override it)")
    common.add_argument('--H', type=float, default=None, help="Hurst index, 1/2 < H < 1")
    common.add_argument('--beta', type=float, default=None, help="rate parameter beta")
    common.add_argument('--gamma', type=float, default=None, help="rate-loss parameter gamma")
    common.add_argument('--a', type=float, default=None, help="left truncation point of the past (negative)")
    common.add_argument('--T', type=float, default=None, help="simulation horizon")
    common.add_argument('--n', type=int, default=None, help="transport intensity")
    common.add_argument('--reps', type=int, default=None, help="Monte Carlo replicates per study")
    common.add_argument('--seed', type=int, default=None, help="master seed")
    common.add_argument('--bm-mesh', dest='bm_mesh', type=int, default=None, help="knots per Brownian driver")
    common.add_argument('--output-grid-size', dest='output_grid_size', type=int, default=None,
                        help="cells in the output time grid of [0, T]")
    common.add_argument('--block-mesh', dest='block_mesh', type=float, default=None,
                        help="transport coupling block length (default max(1/n, 8/n^2))")
    common.add_argument('--ns', type=int, nargs='+', default=None, help="intensities for the rate studies")
    common.add_argument('--out', default=None, help="output directory (default: rosen_output)")
    common.add_argument('--threads', type=int, default=None,
                        help=f"worker threads (default: ROSEN_THREADS, currently {settings.THREADS})")
    common.add_argument('--with-reference', dest='with_reference', action='store_true', default=None,
                        help="simulate: also build the grid-Brownian reference path")
    common.add_argument('-v', '--verbose', action='count', default=0, help="more logging (repeat for debug)")

    parser = argparse.ArgumentParser(
        prog='rosenblatt', description="Strong approximation of the Rosenblatt process by transport processes."
    )
    sub = parser.add_subparsers(dest='command')
    sub.add_parser('simulate', parents=[common], help="simulate one path (and optionally its reference)")
    verify = sub.add_parser('verify', parents=[common], help="run an acceptance suite")
    verify.add_argument('suite', choices=SUITES, help="the suite to run")
    return parser


def load_config(path: str) -> dict:
    """
    Read a JSON run configuration.

    :raises ConfigError: the file is not a JSON object, or it contains keys :class:`.RunConfig` doesn't know
    :raises OSError: the file can't be read
    """
    with open(path, 'r') as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file '{path}' is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file '{path}' must hold a JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"config file '{path}' has unknown key(s): {', '.join(unknown)}")
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the ``--config`` file with the flags (flags win) into a :class:`.RunConfig`"""
    data = {} if empty(args.config) else load_config(args.config)
    for dest, key in FLAG_KEYS.items():
        val = getattr(args, dest, None)
        if val is not None:
            data[key] = val
    data['experiment'] = args.suite if args.command == 'verify' else 'simulate'
    try:
        return RunConfig(**data)
    except TypeError as e:
        raise ConfigError(f"invalid configuration: {e}")


def _path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    return os.path.join(cfg.out, name)


def cmd_simulate(cfg: RunConfig, p: Params) -> int:
    """Simulate one run and write ``run_<hash>.csv`` plus ``run_<hash>.json``"""
    run = assemble_run(None, p, seed=cfg.seed, with_reference=cfg.with_reference, block_mesh=cfg.block_mesh)
    h = config_hash(cfg.effective())
    write_csv(_path(cfg, f'run_{h}.csv'), run.header, run.rows())
    doc = DictObject(
        schema=SCHEMA, config=cfg.effective(), config_hash=h, meta=run.meta,
        trace=run.trace, X_centered=run.X_centered,
    )
    if run.Xref is not None:
        doc.update(ref_trace=run.ref_trace, Xref_centered=run.Xref_centered, sup_error=run.sup_error())
    with open(_path(cfg, f'run_{h}.json'), 'w') as fh:
        fh.write(dumps_json(doc))
    log.info("simulate: wrote run_%s.csv / .json to '%s'", h, cfg.out)
    return EXIT_OK


def _fit_report(suite: str, fit: RateFit, p: Params, cfg: RunConfig) -> DictObject:
    return DictObject(
        schema=SCHEMA, suite=suite, params=p.core(), seed=cfg.seed, reps=cfg.reps, epsilon=p.epsilon,
        alpha=p.alpha, alpha_hat=p.alpha_hat, fit=dict(fit), passed=bool(fit.passed),
    )


def cmd_verify(suite: str, cfg: RunConfig, p: Params, threads: Optional[int] = None) -> int:
    """Run ``suite`` and write ``report_<suite>_<hash>.json`` / ``.csv``; 0 when every check passes, else 1"""
    if suite not in SUITES:
        raise ConfigError(f"unknown suite '{suite}' (expected one of {', '.join(SUITES)})")
    reps, seed, ns = cfg.reps, cfg.seed, list(cfg.ns)
    if suite == 'law':
        report = run_law_suite(p, reps, seed, threads)
    elif suite == 'coupling':
        report = _fit_report(suite, run_coupling_rate(p, ns, reps, seed, threads), p, cfg)
    elif suite == 'rate':
        report = _fit_report(suite, run_strong_rate(p, ns, reps, seed, threads), p, cfg)
    elif suite == 'constants':
        report = run_constants(p)
    elif suite == 'oracle':
        report = run_oracle_suite(p, reps, seed, threads=threads)
    else:
        report = run_component_rates(p, ns, reps, seed, threads)

    h = config_hash(cfg.effective())
    report.config = cfg.effective()
    report.config_hash = h
    with open(_path(cfg, f'report_{suite}_{h}.json'), 'w') as fh:
        fh.write(dumps_json(report))
    if 'fit' in report:
        write_csv(_path(cfg, f'report_{suite}_{h}.csv'), ['n', 'median'],
                  zip(report.fit['ns'], report.fit['medians']))
    else:
        write_csv(_path(cfg, f'report_{suite}_{h}.csv'), ['name', 'value', 'target', 'tolerance', 'passed'],
                  ([c.name, c.value, c.target, c.tolerance, str(c.passed).lower()] for c in report.checks))
    log.info("verify %s: %s", suite, 'passed' if report.passed else 'FAILED')
    return EXIT_OK if report.passed else EXIT_FAILED


def _setup_logging(verbose: int):
    lvl = logging.DEBUG if verbose > 1 else (logging.INFO if verbose == 1 else None)
    if lvl is not None:
        _l = logging.getLogger('privex.rosenblatt')
        _l.setLevel(lvl)
        for h in _l.handlers:
            h.setLevel(lvl)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    _setup_logging(args.verbose)
    try:
        cfg = build_config(args)
        p = validate_params(cfg.params_dict())
        if args.command == 'simulate':
            return cmd_simulate(cfg, p)
        return cmd_verify(args.suite, cfg, p, args.threads)
    except (ParamError, DomainError, IntensityError, MeshTooCoarse, ConfigError, InvalidInput) as e:
        print(f"{e.code}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"ERR_IO: {e}", file=sys.stderr)
        return EXIT_IO


def console_main():
    sys.exit(main())
