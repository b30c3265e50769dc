#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import ast
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Union

import numpy as np

from . import validators  # skipcq: PY-W2000

logger = logging.getLogger(__name__)


class HiddenShiftError(Exception):
    """Base class of every error raised by the lab on purpose"""


class GraphFormatError(HiddenShiftError):
    """Dataset directory is missing a file or contains a malformed line"""

    def __init__(self, message: str, path: Optional[str] = None, line: int = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}" if path and line else (path or "")
        super().__init__(f"{where}: {message}" if where else message)


class DimensionError(HiddenShiftError):
    """Two operands disagree on shape"""


class NonFiniteError(HiddenShiftError):
    """NaN or inf showed up; carries the stage and step it happened at"""

    def __init__(self, stage: str, step: Optional[int] = None, detail: str = ""):
        self.stage = stage
        self.step = step
        at = f" at step {step}" if step is not None else ""
        super().__init__(f"Non-finite value in {stage}{at}{': ' + detail if detail else ''}")


class TrainingDivergedError(NonFiniteError):
    """Loss became NaN/inf during surrogate training"""


class ProjectionError(HiddenShiftError):
    """Bisection could not bracket or reach tolerance"""


class BudgetError(HiddenShiftError):
    """Budget is negative, out of range or exceeds the number of pairs"""


class ConfigError(HiddenShiftError):
    """Config file or override could not be understood"""


class LoadError(HiddenShiftError):
    """Tells user, why plugin can't be loaded"""

    def __init__(self, error_message: str):  # skipcq: PYL-W0231
        self._error = error_message

    def __str__(self) -> str:
        return self._error


@dataclass
class AttackContext:
    """Everything an attack may need besides the graph and the budget"""

    surrogate: Any = None  # gcn.GcnParams
    perturb_config: Any = None  # semantic.PerturbConfig
    map_config: Any = None  # mapping.MapConfig
    train_config: Any = None  # gcn.TrainConfig
    seed: int = 0
    workers: int = 1


@dataclass
class AttackResult:
    adjacency: np.ndarray
    method: str
    flips: int
    trace: Dict[str, Any] = field(default_factory=dict)


class Attack:
    """There is no help for this attack"""

    strings = {"name": "unknown"}
    needs_surrogate = True

    @property
    def name(self) -> str:
        return self.strings["name"]

    def config_complete(self):
        """Called when plugin config is populated"""

    def attack(self, graph, budget, context: AttackContext) -> AttackResult:
        raise NotImplementedError


class Defense:
    """There is no help for this defense"""

    strings = {"name": "unknown"}

    @property
    def name(self) -> str:
        return self.strings["name"]

    def config_complete(self):
        """Called when plugin config is populated"""

    def apply(self, graph):
        raise NotImplementedError


class _Placeholder:
    """Placeholder to determine if the default value is going to be set"""


@dataclass(repr=True)
class ConfigValue:
    option: str
    default: Any = None
    doc: Union[Callable[[], str], str] = "No description"
    value: Any = field(default_factory=_Placeholder)
    validator: Optional[validators.Validator] = None

    def __post_init__(self):
        if isinstance(self.value, _Placeholder):
            self.value = self.default

    def set_no_raise(self, value: Any) -> bool:
        """
        Sets the config value w/o ValidationError being raised
        Broken values are reset to default
        """
        return self.__setattr__("value", value, ignore_validation=True)

    def __setattr__(
        self,
        key: str,
        value: Any,
        *,
        ignore_validation: Optional[bool] = False,
    ) -> bool:
        if key == "value":
            if isinstance(value, str):
                try:
                    value = ast.literal_eval(value)
                except Exception:
                    pass

            # Convert value to list if it's tuple just not to mess up
            # with json convertations
            if isinstance(value, (set, tuple)):
                value = list(value)

            if isinstance(value, list):
                value = [
                    item.strip() if isinstance(item, str) else item for item in value
                ]

            if self.validator is not None and value is not None:
                try:
                    value = self.validator.validate(value)
                except validators.ValidationError as e:
                    if not ignore_validation:
                        raise validators.ValidationError(
                            f"{self.option}: {e}"
                        ) from e

                    logger.debug(
                        f"Config value was broken ({value}), so it was reset to"
                        f" {self.default}"
                    )

                    value = self.default

        object.__setattr__(self, key, value)
        return True


class ModuleConfig(dict):
    """Stores config values, keyed by dotted option name"""

    def __init__(self, *entries: ConfigValue):
        if not all(isinstance(entry, ConfigValue) for entry in entries):
            raise TypeError("ModuleConfig accepts ConfigValue entries only")

        self._config = {config.option: config for config in entries}

        super().__init__(
            {option: config.value for option, config in self._config.items()}
        )

    def getdef(self, key: str) -> Any:
        """Get the default value by key"""
        return self._config[key].default

    def __setitem__(self, key: str, value: Any):
        if key not in self._config:
            raise ConfigError(f"Unknown config key {key}")

        self._config[key].value = value
        self.update({key: self._config[key].value})

    def set_no_raise(self, key: str, value: Any):
        self._config[key].set_no_raise(value)
        self.update({key: self._config[key].value})

    def __getitem__(self, key: str) -> Any:
        try:
            return self._config[key].value
        except KeyError:
            return None

    def section(self, prefix: str) -> Dict[str, Any]:
        """All values under `prefix.`, with the prefix stripped"""
        return {
            option.split(".", maxsplit=1)[1]: config.value
            for option, config in self._config.items()
            if option.startswith(f"{prefix}.")
        }
