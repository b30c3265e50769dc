"""Main script, where all the fun starts"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import argparse
import asyncio
import logging
import sys
import typing

from . import configurator, loader, log, utils, validators
from ._types import ConfigError, LoadError
from .database import ArtifactStore
from .dispatcher import CommandDispatcher
from .experiment import ExperimentConfig
from .version import __version__

try:
    import uvloop

    uvloop.install()
except Exception:
    pass

logger = logging.getLogger(__name__)

COMMANDS = [
    "train",
    "attack",
    "defend-eval",
    "csbm-gen",
    "detect",
    "sweep",
    "ablate",
    "report",
]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

# Convenience flag → dotted config key
FLAGS = {
    "seed": "experiment.seeds",
    "budget": "experiment.budgets",
    "attack": "experiment.attacks",
    "defense": "experiment.defenses",
    "out": "experiment.out",
    "threads": "experiment.threads",
    "checkpoint": "train.checkpoint",
}


def parse_arguments(argv: typing.Optional[typing.List[str]] = None) -> typing.Tuple[argparse.Namespace, typing.List[str]]:
    """
    Parses the arguments
    :returns: Known arguments and the remaining `--dotted.key value` overrides
    """
    parser = argparse.ArgumentParser(
        prog="hiddenshift",
        description="Graph structure attack laboratory",
        epilog="Any config key can be overridden with --dotted.key value",
        allow_abbrev=False,
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", "-c", help="Flat key = value config file")
    parser.add_argument("--seed", nargs="+", type=int, help="Master seeds")
    parser.add_argument("--budget", nargs="+", type=float, help="Budget ratios of |E|")
    parser.add_argument("--attack", nargs="+", help="Attack names")
    parser.add_argument("--defense", nargs="+", help="Defense names, `none` for no defense")
    parser.add_argument("--out", "-o", help="Output directory")
    parser.add_argument("--threads", type=int, help="Worker threads for grid cells")
    parser.add_argument("--checkpoint", help="Surrogate checkpoint to write or reuse")
    parser.add_argument("--param", help="Sweep parameter: budget, beta or hidden_dim")
    parser.add_argument("--values", nargs="+", help="Sweep values")
    parser.add_argument("--input", "-i", help="Attacked graph directory for defend-eval")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug output")
    parser.add_argument("--version", action="version", version=utils.get_version_raw())

    arguments, overrides = parser.parse_known_args(argv)
    logging.debug(arguments)
    return arguments, overrides


class Lab:
    """Resolved configuration, plugin registry and output store for one run"""

    def __init__(self, arguments: argparse.Namespace, overrides: typing.List[str]):
        self.arguments = arguments
        self.modules = loader.Modules().register_all()

        flags = {key: getattr(arguments, flag) for flag, key in FLAGS.items()}
        if arguments.threads is not None:
            flags["experiment.threads"] = utils.parse_threads(arguments.threads)

        self.config = configurator.resolve(
            arguments.config,
            overrides,
            flags,
            self.modules.config_entries(),
        )
        self.modules.send_config(self.config)
        self.experiment = ExperimentConfig.from_config(self.config)
        self.store = ArtifactStore(self.experiment.out)

    @property
    def flat_config(self) -> typing.Dict[str, typing.Any]:
        return configurator.as_dict(self.config)

    @property
    def config_hash(self) -> str:
        return utils.config_hash(self.flat_config)

    def save_config(self):
        self.store.save_json(
            "config.json",
            {
                "command": self.arguments.command,
                "config": self.flat_config,
                "config_hash": self.config_hash,
                **utils.provenance(),
            },
        )

    async def amain(self) -> typing.Any:
        """Entrypoint for async work"""
        self.save_config()
        logger.info(
            f"hiddenshift {'.'.join(map(str, __version__))}: {self.arguments.command}"
            f" into {self.store.out_dir} (config {self.config_hash[:12]})"
        )
        return await CommandDispatcher(self).dispatch(self.arguments.command)


def main(argv: typing.Optional[typing.List[str]] = None) -> int:
    """Main entrypoint, returns the exit code"""
    arguments, overrides = parse_arguments(argv)
    if arguments.verbose:
        log.init(logging.DEBUG)

    try:
        lab = Lab(arguments, overrides)
        asyncio.run(lab.amain())
    except (ConfigError, LoadError, validators.ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except Exception:
        logger.exception("Run failed")
        return EXIT_RUNTIME

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
