"""Registers attack and defense plugins"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import contextlib
import importlib.util
import inspect
import logging
import os
import sys
from importlib.abc import SourceLoader
from importlib.machinery import ModuleSpec
from typing import Dict, List, Optional, Union

from . import utils, validators  # noqa: F401
from ._types import (
    Attack,
    AttackContext,  # noqa: F401
    AttackResult,  # noqa: F401
    ConfigValue,  # noqa: F401
    Defense,
    LoadError,
    ModuleConfig,
)

logger = logging.getLogger(__name__)

MODULES_NAME = "modules"
NO_DEFENSE = "none"

Plugin = Union[Attack, Defense]


class StringLoader(SourceLoader):
    """Load a python module/file from a string"""

    def __init__(self, data: str, origin: str):
        self.data = data.encode("utf-8") if isinstance(data, str) else data
        self.origin = origin

    def get_code(self, fullname: str):
        return (
            compile(source, self.origin, "exec", dont_inherit=True)
            if (source := self.get_source(fullname))
            else None
        )

    def get_filename(self, *args, **kwargs) -> str:
        return self.origin

    def get_data(self, *args, **kwargs) -> bytes:
        return self.data


class Modules:
    """Stores all registered attacks and defenses"""

    def __init__(self):
        self.attacks: Dict[str, Attack] = {}
        self.defenses: Dict[str, Defense] = {}
        self.modules: List[Plugin] = []

    def register_all(self, mods: Optional[List[str]] = None) -> "Modules":
        """Load all plugins in the module directory"""
        if not mods:
            directory = os.path.join(utils.get_base_dir(), MODULES_NAME)
            mods = [
                os.path.join(directory, mod)
                for mod in sorted(os.listdir(directory))
                if mod.endswith(".py") and not mod.startswith("_")
            ]

        self._register_modules(mods)
        return self

    def _register_modules(self, modules: List[str], origin: str = "<core>"):
        for mod in modules:
            module_name = (
                f"{__package__}.{MODULES_NAME}."
                f"{os.path.basename(mod).rsplit('.py', maxsplit=1)[0]}"
            )
            logger.debug(f"Loading {module_name} from filesystem")

            try:
                with open(mod, "r", encoding="utf-8") as file:
                    spec = ModuleSpec(
                        module_name,
                        StringLoader(file.read(), mod),
                        origin=origin,
                    )

                self.register_module(spec, module_name, origin)
            except Exception as e:
                logger.exception(f"Failed to load plugin {mod} due to {e}:")

    def register_module(
        self,
        spec: ModuleSpec,
        module_name: str,
        origin: str = "<core>",
    ) -> Plugin:
        """Register single plugin from importlib spec"""
        module = importlib.util.module_from_spec(spec)
        sys.modules[module_name] = module
        spec.loader.exec_module(module)

        ret = next(
            (
                value()
                for value in vars(module).values()
                if inspect.isclass(value)
                and issubclass(value, (Attack, Defense))
                and value not in (Attack, Defense)
                and value.__module__ == module_name
            ),
            None,
        )

        if ret is None:
            raise LoadError(f"{module_name} defines no attack or defense")

        ret.__origin__ = origin
        self.complete_registration(ret)
        return ret

    def complete_registration(self, instance: Plugin):
        """Complete registration of instance"""
        registry = self.attacks if isinstance(instance, Attack) else self.defenses

        if instance.name in registry or instance.name == NO_DEFENSE:
            raise LoadError(f"Plugin name {instance.name} is already taken")

        registry[instance.name] = instance
        self.modules += [instance]
        logger.debug(f"Registered {type(instance).__name__} as {instance.name}")

    def lookup_attack(self, name: str) -> Attack:
        try:
            return self.attacks[name]
        except KeyError:
            raise LoadError(
                f"Unknown attack {name}, registered: {', '.join(sorted(self.attacks))}"
            )

    def lookup_defense(self, name: str) -> Optional[Defense]:
        """`none` means no preprocessing"""
        if name == NO_DEFENSE:
            return None

        try:
            return self.defenses[name]
        except KeyError:
            raise LoadError(
                f"Unknown defense {name}, registered:"
                f" {', '.join(sorted(self.defenses))}, {NO_DEFENSE}"
            )

    def config_entries(self) -> List[ConfigValue]:
        """Config values declared by plugins, merged into the lab schema"""
        return [
            mod.config._config[key]
            for mod in self.modules
            if isinstance(getattr(mod, "config", None), ModuleConfig)
            for key in mod.config
        ]

    def send_config(self, config: ModuleConfig):
        """Configure plugins from the resolved lab config"""
        for mod in self.modules:
            if isinstance(getattr(mod, "config", None), ModuleConfig):
                for key in mod.config:
                    with contextlib.suppress(validators.ValidationError):
                        mod.config.set_no_raise(
                            key,
                            config[key] if key in config else mod.config.getdef(key),
                        )

            try:
                mod.config_complete()
            except Exception as e:
                logger.exception(f"Failed to send config complete signal due to {e}")
                raise


def get_commands(obj) -> Dict[str, callable]:
    """Methods named `*cmd`, keyed by the subcommand they implement"""
    return {
        method_name.rsplit("cmd", maxsplit=1)[0].replace("_", "-"): getattr(obj, method_name)
        for method_name in dir(obj)
        if method_name.endswith("cmd") and callable(getattr(obj, method_name))
    }
