"""Lab configuration: schema, config files, command-line overrides"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import logging
import typing

from . import validators
from ._types import ConfigError, ConfigValue, ModuleConfig

logger = logging.getLogger(__name__)

ABLATIONS = ["none", "rec", "hid"]


def _core_entries() -> typing.List[ConfigValue]:
    positive = validators.Float(minimum=0)
    probability = validators.Float(minimum=0, maximum=1)

    return [
        ConfigValue("dataset.path", "", "Dataset directory, empty for CSBM graphs", validator=validators.String()),
        ConfigValue("dataset.name", "", "Name used in result rows", validator=validators.String()),
        ConfigValue("csbm.n", 1000, "Node count", validator=validators.Integer(minimum=1)),
        ConfigValue("csbm.p_in", 0.006326, "Within-class edge probability", validator=probability),
        ConfigValue("csbm.q_out", 0.001481, "Cross-class edge probability", validator=probability),
        ConfigValue("csbm.sigma", 1.0, "Feature noise std", validator=positive),
        ConfigValue("csbm.feat_dim", 21, "Feature dimension", validator=validators.Integer(minimum=1)),
        ConfigValue("csbm.mean_scale", 0.5, "Class mean scale M", validator=positive),
        ConfigValue("csbm.train_ratio", 0.2, "Share of train nodes", validator=probability),
        ConfigValue("train.lr", 0.01, "Learning rate", validator=validators.Float(minimum=1e-12)),
        ConfigValue("train.epochs", 200, "Training epochs", validator=validators.Integer(minimum=1)),
        ConfigValue("train.weight_decay", 5e-4, "L2 regularization", validator=positive),
        ConfigValue("train.optimizer", "adam", "Optimizer", validator=validators.Choice(["adam", "sgd"])),
        ConfigValue("train.hidden_dim", 128, "Hidden layer width", validator=validators.Integer(minimum=1)),
        ConfigValue("train.dropout", 0.5, "Training-time dropout rate", validator=validators.Float(minimum=0, maximum=0.99)),
        ConfigValue("train.checkpoint", "", "Surrogate checkpoint to reuse instead of training", validator=validators.String()),
        ConfigValue("perturb.iterations", 300, "α optimisation steps", validator=validators.Integer(minimum=0)),
        ConfigValue("perturb.lr", 0.3, "α learning rate", validator=validators.Float(minimum=1e-12)),
        ConfigValue("perturb.beta", 0.2, "Similarity regularization", validator=positive),
        ConfigValue("perturb.eps_den", 1e-8, "Denominator guard", validator=positive),
        ConfigValue("perturb.pseudo_labels", False, "Use surrogate predictions for unlabeled nodes", validator=validators.Boolean()),
        ConfigValue("map.iterations", 300, "PGD steps", validator=validators.Integer(minimum=0)),
        ConfigValue("map.q", 20.0, "Step size scale", validator=validators.Float(minimum=1e-12)),
        ConfigValue("map.samples", 20, "Binary draws", validator=validators.Integer(minimum=1)),
        ConfigValue("map.tol", 1e-6, "Bisection tolerance", validator=validators.Float(minimum=1e-15)),
        ConfigValue("map.max_bisect", 100, "Bisection iteration cap", validator=validators.Integer(minimum=1)),
        ConfigValue("map.frozen_degree", False, "Treat degrees as constants in structure gradients", validator=validators.Boolean()),
        ConfigValue("map.prefixes", 8, "Top-k roundings of the relaxed flips compared with the random draws", validator=validators.Integer(minimum=0)),
        ConfigValue("experiment.attacks", ["ahsg"], "Attacks to run", validator=validators.Series(validators.String(non_empty=True), min_len=1)),
        ConfigValue("experiment.defenses", ["none"], "Defenses to evaluate", validator=validators.Series(validators.String(non_empty=True), min_len=1)),
        ConfigValue("experiment.budgets", [0.1], "Budget ratios of |E|", validator=validators.Series(probability, min_len=1)),
        ConfigValue("experiment.seeds", [0], "Master seeds", validator=validators.Series(validators.Integer(minimum=0), min_len=1)),
        ConfigValue("experiment.ablation", "none", "Replace ahsg with an ablated variant", validator=validators.Choice(ABLATIONS)),
        ConfigValue("experiment.out", "out", "Output directory", validator=validators.String(non_empty=True)),
        ConfigValue("experiment.threads", 1, "Worker threads for grid cells", validator=validators.Integer(minimum=1)),
    ]


def schema(extra: typing.Optional[typing.List[ConfigValue]] = None) -> ModuleConfig:
    """Every known key with its default; `extra` holds plugin-declared values"""
    entries = _core_entries()
    for entry in extra or []:
        entries.append(
            ConfigValue(entry.option, entry.default, entry.doc, validator=entry.validator)
        )

    return ModuleConfig(*entries)


def _set(config: ModuleConfig, key: str, value: typing.Any, where: str):
    if key not in config:
        raise ConfigError(f"{where}: unknown config key {key}")

    try:
        config[key] = value
    except validators.ValidationError as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_file(path: str, config: ModuleConfig) -> ModuleConfig:
    """
    Apply a `key = value` file on top of `config`
    :raises ConfigError: Unreadable file, malformed line or unknown key, with line number
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e

    for number, line in enumerate(lines, start=1):
        line = line.split("#", maxsplit=1)[0].strip()
        if not line:
            continue

        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value'")

        key, value = (part.strip() for part in line.split("=", maxsplit=1))
        _set(config, key, value, f"{path}:{number}")

    logger.debug(f"Read config {path}")
    return config


def apply_overrides(config: ModuleConfig, args: typing.List[str]) -> ModuleConfig:
    """`--dotted.key value` and `--dotted.key=value` pairs"""
    rest = list(args)
    while rest:
        token = rest.pop(0)
        if not token.startswith("--"):
            raise ConfigError(f"Unexpected argument {token}")

        key = token[2:]
        if "=" in key:
            key, value = key.split("=", maxsplit=1)
        elif rest:
            value = rest.pop(0)
        else:
            raise ConfigError(f"Missing value for --{key}")

        _set(config, key, value, "command line")

    return config


def resolve(
    path: typing.Optional[str],
    overrides: typing.List[str],
    flags: typing.Dict[str, typing.Any],
    extra: typing.Optional[typing.List[ConfigValue]] = None,
) -> ModuleConfig:
    """Defaults < config file < dotted overrides < named flags"""
    config = schema(extra)

    if path:
        parse_file(path, config)

    apply_overrides(config, overrides)

    for key, value in flags.items():
        if value is not None:
            _set(config, key, value, "command line")

    return config


def as_dict(config: ModuleConfig) -> typing.Dict[str, typing.Any]:
    return {key: config[key] for key in sorted(config)}
