#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import pytest

from hiddenshift import validators
from hiddenshift._types import ConfigError, ConfigValue, ModuleConfig
from hiddenshift.configurator import apply_overrides, as_dict, parse_file, resolve, schema


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "lab.conf"
    path.write_text(
        "# comment line\n"
        "\n"
        "train.epochs = 50  # trailing comment\n"
        "experiment.attacks = ahsg, random\n"
        "experiment.budgets = 0.05, 0.1\n"
        "map.frozen_degree = true\n",
        encoding="utf-8",
    )
    return str(path)


def test_defaults():
    config = schema()

    assert config["perturb.beta"] == 0.2
    assert config["map.q"] == 20.0
    assert config["experiment.defenses"] == ["none"]
    assert config["csbm.feat_dim"] == 21


def test_parse_file(config_file):
    config = parse_file(config_file, schema())

    assert config["train.epochs"] == 50
    assert config["experiment.attacks"] == ["ahsg", "random"]
    assert config["experiment.budgets"] == [0.05, 0.1]
    assert config["map.frozen_degree"] is True


@pytest.mark.parametrize(
    "text, line",
    [
        ("train.epochs = 5\nno equals sign\n", 2),
        ("bogus.key = 1\n", 1),
        ("train.epochs = 5\n\ntrain.lr = abc\n", 3),
        ("experiment.ablation = everything\n", 1),
    ],
)
def test_bad_lines_name_the_line(tmp_path, text, line):
    path = tmp_path / "bad.conf"
    path.write_text(text, encoding="utf-8")

    with pytest.raises(ConfigError, match=f"bad.conf:{line}:"):
        parse_file(str(path), schema())


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read config"):
        parse_file(str(tmp_path / "absent.conf"), schema())


def test_overrides_in_both_spellings():
    config = apply_overrides(schema(), ["--train.epochs=7", "--experiment.seeds", "1,2,3"])

    assert config["train.epochs"] == 7
    assert config["experiment.seeds"] == [1, 2, 3]


@pytest.mark.parametrize(
    "args",
    [["train.epochs", "7"], ["--train.epochs"], ["--nope.key=1"], ["--train.epochs=-3"]],
)
def test_bad_overrides(args):
    with pytest.raises(ConfigError):
        apply_overrides(schema(), args)


def test_precedence(config_file):
    assert resolve(config_file, [], {})["train.epochs"] == 50
    assert resolve(config_file, ["--train.epochs", "30"], {})["train.epochs"] == 30
    assert (
        resolve(config_file, ["--train.epochs", "30"], {"train.epochs": 10})["train.epochs"]
        == 10
    )
    assert resolve(config_file, [], {"train.epochs": None})["train.epochs"] == 50


def test_plugin_entries_join_the_schema():
    extra = [ConfigValue("defense.knob", 3, "Knob", validator=validators.Integer(minimum=1))]
    config = resolve(None, ["--defense.knob=4"], {}, extra)

    assert config["defense.knob"] == 4
    assert extra[0].value == 3


def test_as_dict_is_sorted():
    keys = list(as_dict(schema()))
    assert keys == sorted(keys)


def test_module_config_validation():
    config = ModuleConfig(
        ConfigValue("a.ratio", 0.5, validator=validators.Float(minimum=0, maximum=1)),
        ConfigValue("a.names", ["x"], validator=validators.Series(validators.String(non_empty=True))),
    )

    config["a.names"] = "p, q"
    assert config["a.names"] == ["p", "q"]

    with pytest.raises(validators.ValidationError):
        config["a.ratio"] = 2

    config.set_no_raise("a.ratio", 2)
    assert config["a.ratio"] == 0.5
    assert config.section("a") == {"ratio": 0.5, "names": ["p", "q"]}

    with pytest.raises(ConfigError):
        config["b.other"] = 1
