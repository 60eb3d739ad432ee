#!/usr/bin/env python3
# Slit Tomography command line tool
# Simulates and reconstructs multiplexed tomography of slit qudits
# This is a thin wrapper that loads the modular slit_tomography integration

import argparse
import asyncio
import configparser
import json
import logging
import sys
import traceback

import numpy as np

from slit_tomography import SlitTomographyIntegration, SlitTomographyError
from slit_tomography.integration import PAPER_STATES, comparison_text, summary_text

CONFIG_SECTION = "slit_tomography"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def load_config_section(path=None):
    """[slit_tomography] section of the INI file; empty (all defaults) when missing"""
    parser = configparser.ConfigParser()
    if path:
        if not parser.read(path):
            logging.warning(f"[SlitTomography] Config file {path} not found, using defaults")
    if not parser.has_section(CONFIG_SECTION):
        parser.add_section(CONFIG_SECTION)
    return parser[CONFIG_SECTION]


def build_parser():
    parser = argparse.ArgumentParser(description="Multiplexed tomography of slit qudits")
    parser.add_argument('--config', help="INI file with a [slit_tomography] section")
    parser.add_argument('--debug', action='store_true', help="Enable debug logging")
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen-bases', help="Generate a well-conditioned tomography set")
    gen.add_argument('--dim', type=int)
    gen.add_argument('--trials', type=int)
    gen.add_argument('--seed', type=int)
    gen.add_argument('--out', required=True)

    bases = commands.add_parser('bases', help="Export the bundled tomography set")
    bases.add_argument('--paper-d6', action='store_true', required=True)
    bases.add_argument('--out', required=True)

    simulate = commands.add_parser('simulate', help="Simulate a measured probability table")
    simulate.add_argument('--set', dest='set_path', required=True)
    simulate.add_argument('--state', required=True)
    simulate.add_argument('--photons', type=int)
    simulate.add_argument('--noiseless', action='store_true')
    simulate.add_argument('--method', choices=('multiplexed', 'traditional'), default='multiplexed')
    simulate.add_argument('--seed', type=int)
    simulate.add_argument('--out', required=True)

    reconstruct = commands.add_parser('reconstruct', help="Reconstruct a density matrix from a table")
    reconstruct.add_argument('--set', dest='set_path', required=True)
    reconstruct.add_argument('--table', required=True)
    reconstruct.add_argument('--out', required=True)

    pattern = commands.add_parser('pattern', help="Export the interference pattern of one basis")
    pattern.add_argument('--set', dest='set_path', required=True)
    pattern.add_argument('--state', required=True)
    pattern.add_argument('--basis', type=int, required=True)
    pattern.add_argument('--samples-per-period', type=int)
    pattern.add_argument('--out', required=True)

    reproduce = commands.add_parser('reproduce-paper', help="Monte Carlo reproduction of the d=6 results")
    reproduce.add_argument('--state', choices=PAPER_STATES, action='append')
    reproduce.add_argument('--photons', type=int)
    reproduce.add_argument('--runs', type=int)
    reproduce.add_argument('--seed', type=int)
    reproduce.add_argument('--method', choices=('multiplexed', 'traditional'), default='multiplexed')
    reproduce.add_argument('--with-traditional', action='store_true')
    reproduce.add_argument('--out')

    compare = commands.add_parser('compare', help="Compare a multiplexed and a traditional result")
    compare.add_argument('--multiplexed', required=True)
    compare.add_argument('--traditional', required=True)
    return parser


def run_command(integration, args):
    if args.command == 'gen-bases':
        result = integration.gen_bases(args.dim, args.trials, args.seed, args.out)
        print(f"condition number {result.condition_number:.6g} (trial {result.selected_trial})")
    elif args.command == 'bases':
        result = integration.paper_bases(args.out)
        print(f"condition number {result.condition_number:.6g}")
    elif args.command == 'simulate':
        integration.simulate(args.set_path, args.state, args.photons, args.seed, args.out,
                             method=args.method, noiseless=args.noiseless)
    elif args.command == 'reconstruct':
        rho = integration.reconstruct(args.set_path, args.table, args.out)
        print(f"purity {rho.purity():.6f}")
    elif args.command == 'pattern':
        integration.pattern(args.set_path, args.state, args.basis, args.out, args.samples_per_period)
    elif args.command == 'reproduce-paper':
        document = asyncio.run(integration.reproduce_paper(
            states=args.state or PAPER_STATES,
            photons=args.photons,
            runs=args.runs,
            seed=args.seed,
            out=args.out,
            method=args.method,
            with_traditional=args.with_traditional,
        ))
        print(summary_text(document))
        if not args.out:
            print(json.dumps(document, indent=2, sort_keys=True))
    elif args.command == 'compare':
        print(comparison_text(integration.compare(args.multiplexed, args.traditional)))


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.INFO, format=LOG_FORMAT)

    try:
        section = load_config_section(args.config)
        integration = SlitTomographyIntegration(section)
        if integration.debug_mode:
            logging.getLogger().setLevel(logging.DEBUG)
        run_command(integration, args)
    except SlitTomographyError as e:
        logging.error(f"[SlitTomography] {e}")
        return e.status_code
    except np.linalg.LinAlgError as e:
        # eigh, lstsq or svdvals failed to converge
        logging.error(f"[SlitTomography] Linear algebra failure: {e}")
        return 3
    except ValueError as e:
        # configparser conversions of malformed option values
        logging.error(f"[SlitTomography] Invalid configuration: {e}")
        return 2
    except Exception as e:
        logging.error(f"[SlitTomography] Unexpected error: {str(e)}")
        logging.error(f"[SlitTomography] Traceback: {traceback.format_exc()}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
