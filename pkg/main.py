import argparse
import asyncio
import logging
import os
import sys

import kds_cfg
from domain.kds.encoder import ETA_RULES
from domain.kds.errors import KdsError
from domain.kds.spectral import SPECTRAL_MODES
from domain.kds.verify import SUITES
from domain.kds_cli.commands import COMMAND_HANDLERS
from domain.kds_cli.run_config import DATASETS, PREPROCESS_CHOICES, parse_values, resolve
from storage.repository.RunRp import RunRp

logging.basicConfig(level=logging.INFO, format=kds_cfg.LOG_FORMAT)
logging.getLogger('matplotlib').setLevel(logging.ERROR)


def _add_common(p):
    p.add_argument("--config", help="flat `key = value` config file; flags override its values")
    p.add_argument("--out", help=f"output directory (default ${{KDS_OUTPUT_ROOT}} or {kds_cfg.OUTPUT_ROOT})")
    p.add_argument("--seed", type=int)


def _add_training(p):
    p.add_argument("--m", type=int, help="number of atoms")
    p.add_argument("--T", type=int, help="unrolled encoder layers")
    p.add_argument("--lambda", dest="lam", type=float, help="locality weight")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--alpha", type=float, help="fixed encoder step size (default sigma_max(A)^-2)")
    p.add_argument("--learn-alpha", action="store_const", const=True)
    p.add_argument("--eta-rule", choices=ETA_RULES)
    p.add_argument("--final-encode-T", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None)


def _add_clustering(p, with_k=True):
    if with_k:
        p.add_argument("--k", type=int, help="number of clusters")
    p.add_argument("--mode", choices=SPECTRAL_MODES)
    p.add_argument("--replicates", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="kds", description="K-Deep Simplex dictionary learning and clustering")
    parser.add_argument("--quiet", action="store_true", help="hide progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    _add_common(p)
    p.add_argument("--dataset", choices=DATASETS)
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--atoms-per-cluster", type=int)
    p.add_argument("--cluster-offset", type=float)
    p.add_argument("--weighting", choices=("uniform", "area"))
    p.add_argument("--atoms-file")
    p.add_argument("--atom-clusters-file")

    p = sub.add_parser("fit", help="learn a dictionary and codes")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--labels", help="truth labels, used for ACC when --k is given")
    p.add_argument("--preset", choices=sorted(kds_cfg.DATASET_PRESETS))
    p.add_argument("--preprocess", choices=PREPROCESS_CHOICES)
    p.add_argument("--lambda-sweep", type=float, nargs='+')
    _add_training(p)
    _add_clustering(p)

    p = sub.add_parser("cluster", help="spectral clustering of stored codes")
    _add_common(p)
    p.add_argument("--codes")
    p.add_argument("--labels")
    p.add_argument("--atoms", help="atoms CSV, used to label atoms without code weight")
    p.add_argument("--data", help="data CSV; with --atoms, planar data is plotted coloured by cluster")
    p.add_argument("--include-atoms", action=argparse.BooleanOptionalAction, default=None)
    _add_clustering(p)

    p = sub.add_parser("benchmark", help="time encoding and clustering over an n grid")
    _add_common(p)
    p.add_argument("--grid", type=int, nargs='+')
    p.add_argument("--repeats", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--train-n", type=int)
    p.add_argument("--train-epochs", type=int)
    _add_training(p)
    _add_clustering(p, with_k=False)

    p = sub.add_parser("sweep", help="concentric circles accuracy over atom counts and separations")
    _add_common(p)
    p.add_argument("--sweep-m", type=int, nargs='+', help="atom counts")
    p.add_argument("--sweep-delta", type=float, nargs='+', help="circle separations")
    p.add_argument("--sweep-seeds", type=int, help="seeds averaged per cell")
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    _add_training(p)
    _add_clustering(p, with_k=False)

    p = sub.add_parser("verify", help="cross-check fast paths against reference implementations")
    _add_common(p)
    p.add_argument("--suite", choices=sorted(SUITES))
    return parser


async def main(command, config_path, flags):
    file_values = {}
    if config_path is not None:
        run_rp = RunRp(os.path.dirname(config_path) or ".")
        file_values = parse_values(run_rp.get_config(os.path.basename(config_path)), source=config_path)
    config = resolve(command, file_values, flags)
    logging.info(f"Running {command} -> {config.out}")
    return await COMMAND_HANDLERS[command](config)


def run_cli(argv=None):
    """Parse arguments, run one command and return its exit code (0 ok, 1 numerical failure, 2 usage or I/O)."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    flags = vars(args)
    command = flags.pop("command")
    config_path = flags.pop("config")
    if flags.pop("quiet"):
        kds_cfg.SHOW_PROGRESS = False
    flags = {key: tuple(value) if isinstance(value, list) else value for key, value in flags.items()}
    try:
        return asyncio.run(main(command, config_path, flags))
    except KdsError as e:
        logging.error(f"{command} failed: {e}")
        return e.exit_code


if __name__ == '__main__':
    sys.exit(run_cli())
