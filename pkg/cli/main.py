#!/usr/bin/env python3
"""
furthlab command line
Runs one experiment (or all of them), writes report.json, timing.json and the CSV tables.

Exit codes: 0 every gate passed, 2 a gate failed, 1 usage, config or run error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from cli.config import VERBS, build_config, config_summary
from cli.experiments import run_experiments
from cli.plotdata import emit_plotdata
from cli.schema import build_payload, write_report, write_timing
from core.constants import PHASE_CONVENTIONS
from core.errors import ConfigError, FurthlabError
from core.report import ExperimentReport
from core.settings import load_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GATE_FAILED = 2

VERB_HELP = {
    "kernels": "heat and quantum kernels, Chapman-Kolmogorov residuals, density propagation",
    "paths": "Wiener path ensembles, diffusivity, velocity gaps and kinetic estimators",
    "evolve": "time-slice evolution of wavefunctions against analytic and spectral references",
    "wkb": "WKB wavefunctions against Numerov eigenstates and the energy decomposition",
    "radial": "spherical and cylindrical radial eigenproblems",
    "dispersions": "angular momentum dispersions and their uncertainty relations",
    "all": "every experiment in order",
}


class FurthlabParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors raise ConfigError instead of exiting with 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common_flags() -> argparse.ArgumentParser:
    common = FurthlabParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed, unsigned 64-bit (default 0)")
    common.add_argument("--out", help="output directory (default furthlab-out)")
    preset = common.add_mutually_exclusive_group()
    preset.add_argument("--quick", dest="preset", action="store_const", const="quick",
                        help="small Monte Carlo sizes and sweeps (default)")
    preset.add_argument("--full", dest="preset", action="store_const", const="full",
                        help="larger ensembles, longer sweeps, extra damping level")
    common.add_argument("--hbar", type=float, help="action quantum (default 1)")
    common.add_argument("--mass", type=float, help="particle mass (default 1)")
    common.add_argument("--phase-convention", choices=sorted(PHASE_CONVENTIONS), help="kernel phase sign")
    common.add_argument("--config", help="key=value config file; flags override it")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = FurthlabParser(prog="furthlab", description="Stochastic and quasiclassical quantum mechanics lab")
    common = _common_flags()
    verbs = parser.add_subparsers(dest="verb", metavar="verb", required=True)
    sub = {verb: verbs.add_parser(verb, parents=[common], help=VERB_HELP[verb]) for verb in VERBS}

    sub["kernels"].add_argument("--tau", type=float, help="total kernel time (default 1)")
    sub["kernels"].add_argument("--split", type=float, help="split fraction s in (0, 1) (default 0.5)")

    sub["paths"].add_argument("--eps", type=float, help="time step (default 0.01)")
    sub["paths"].add_argument("--n-paths", type=int, help="paths per ensemble (preset)")
    sub["paths"].add_argument("--n-steps", type=int, help="steps per path (preset)")
    sub["paths"].add_argument("--drift", type=float, help="drift velocity for the kinetic estimators (default 1)")

    sub["evolve"].add_argument("--eps", type=float, help="time slice of the barrier run (default 0.005)")
    sub["evolve"].add_argument("--steps", type=int, help="slices in the barrier run (default 1000)")

    sub["wkb"].add_argument("--level", type=int, help="oscillator level compared with WKB (default 10)")

    sub["radial"].add_argument("--potential", help="coulomb, harmonic, coulomb-regularized, ... (default coulomb)")
    sub["radial"].add_argument("--geometry", choices=["spherical", "cylindrical"], help="default spherical")
    sub["radial"].add_argument("--l", type=int, help="angular index (default 0)")
    sub["radial"].add_argument("--n-radial", type=int, help="radial node count (default 0)")
    sub["radial"].add_argument("--convention", choices=["half_integer", "integer"],
                               help="cylindrical azimuthal index l + 1/2 or l (default half_integer)")

    sub["dispersions"].add_argument("--l-max", type=int, help="largest l in the oracle scan (default 5)")
    return parser


def print_summary(reports: Sequence[ExperimentReport]) -> None:
    for report in reports:
        for gate in report.gates:
            mark = "✅" if gate.passed else "❌"
            print(f"{mark} {report.name}: {gate.name} measured={gate.measured:.6g} {gate.comparison} {gate.tolerance:.3g}")
        stats = report.get_stats()
        print(f"📊 {report.name}: {stats['gates_passed']}/{stats['gates_total']} gates passed, "
              f"{stats['warnings']} warnings, {stats['wall_time_s']}s")


def main(argv: Optional[List[str]] = None) -> int:
    settings = load_settings()
    logging.basicConfig(level=getattr(logging, settings.log_level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        config = build_config(args.verb, vars(args), args.config)
    except ConfigError as e:
        logger.error(f"configuration error: {e}")
        return EXIT_ERROR

    logger.info(f"config: {config_summary(config)}")
    print(f"🚀 furthlab {config.experiment} (preset={config.preset}, seed={config.seed}, threads={settings.threads})")
    try:
        reports = run_experiments(config, settings)
        output_dir = Path(config.output_dir)
        emit_plotdata(reports, output_dir)
        write_report(build_payload(config.experiment, config.as_dict(), reports), output_dir)
        write_timing(reports, output_dir)
    except FurthlabError as e:
        logger.error(f"{config.experiment} aborted: {e}")
        print(f"❌ {config.experiment} aborted: {e}")
        return EXIT_ERROR

    print_summary(reports)
    if all(report.passed for report in reports):
        print(f"✅ all gates passed; outputs in {output_dir}")
        return EXIT_OK
    print(f"❌ some gates failed; see {output_dir / 'report.json'}")
    return EXIT_GATE_FAILED


if __name__ == "__main__":
    sys.exit(main())
