#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import os

import numpy as np
import pytest

from hiddenshift.csbm import CsbmParams, bayes_accuracy, csbm_sample
from hiddenshift.experiment import ExperimentConfig, run_experiment
from hiddenshift.loader import NO_DEFENSE

from .conftest import data_root

pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2]
SWEEP = [0.05, 0.1, 0.15, 0.2]


def _mean(records, attack, defense=NO_DEFENSE, budget=0.1, field="attacked_accuracy"):
    values = [
        getattr(record, field)
        for record in records
        if record.ok
        and record.attack == attack
        and record.defense == defense
        and record.budget == pytest.approx(budget)
    ]
    assert len(values) == len(SEEDS), f"missing runs of {attack}/{defense}/{budget}"
    return float(np.mean(values))


def _dataset(name):
    directory = os.path.join(data_root(), name)
    if not os.path.isdir(directory):
        pytest.skip(f"{name} is not present under HIDDENSHIFT_DATA")

    return directory


@pytest.fixture(scope="module")
def csbm_records():
    return run_experiment(
        ExperimentConfig(
            attacks=["identity", "random", "pgd-ce", "ahsg"],
            defenses=[NO_DEFENSE],
            budgets=[0.05, 0.1, 0.15],
            seeds=SEEDS,
            csbm=CsbmParams(),
        )
    )


@pytest.fixture(scope="module")
def cora_records():
    return run_experiment(
        ExperimentConfig(
            attacks=["identity", "random", "ahsg"],
            defenses=[NO_DEFENSE, "jaccard", "svd"],
            budgets=SWEEP,
            seeds=SEEDS,
            dataset_path=_dataset("cora"),
        )
    )


@pytest.fixture(scope="module")
def cora_ablation_records():
    return run_experiment(
        ExperimentConfig(
            attacks=["ahsg-rec", "ahsg-hid"],
            defenses=[NO_DEFENSE],
            budgets=[0.1],
            seeds=SEEDS,
            dataset_path=_dataset("cora"),
        )
    )


def test_clean_csbm_bayes_accuracy():
    params = CsbmParams()
    accuracies = [bayes_accuracy(csbm_sample(params, seed), params) for seed in range(5)]

    assert np.mean(accuracies) == pytest.approx(0.924, abs=0.03)


def test_csbm_hidden_shift_keeps_semantics_better_than_pgd(csbm_records):
    ahsg = _mean(csbm_records, "ahsg", field="bayes_maintain")
    pgd = _mean(csbm_records, "pgd-ce", field="bayes_maintain")
    clean = _mean(csbm_records, "identity", field="bayes_maintain")

    assert ahsg >= pgd + 0.03
    assert clean >= ahsg


def test_csbm_accuracy_falls_with_budget(csbm_records):
    accuracies = [_mean(csbm_records, "ahsg", budget=ratio) for ratio in (0.05, 0.1, 0.15)]

    for before, after in zip(accuracies, accuracies[1:]):
        assert after <= before + 0.01

    assert accuracies[-1] < _mean(csbm_records, "identity", budget=0.15)


def test_csbm_hidden_shift_beats_random(csbm_records):
    assert _mean(csbm_records, "ahsg") <= _mean(csbm_records, "random")


@pytest.mark.parametrize("name, expected", [("cora", 0.823), ("citeseer", 0.666)])
def test_clean_accuracy(name, expected):
    records = run_experiment(
        ExperimentConfig(
            attacks=["identity"],
            defenses=[NO_DEFENSE],
            budgets=[0.0],
            seeds=SEEDS,
            dataset_path=_dataset(name),
        )
    )

    assert _mean(records, "identity", budget=0.0, field="clean_accuracy") == pytest.approx(
        expected, abs=0.03
    )


def test_cora_attack_strength(cora_records):
    attacked = _mean(cora_records, "ahsg")

    assert attacked <= 0.73
    assert attacked <= _mean(cora_records, "identity", field="clean_accuracy") - 0.09


def test_cora_accuracy_falls_with_budget(cora_records):
    accuracies = [_mean(cora_records, "ahsg", budget=ratio) for ratio in SWEEP]

    for before, after in zip(accuracies, accuracies[1:]):
        assert after <= before + 0.01


def test_cora_random_is_weakest(cora_records):
    assert _mean(cora_records, "ahsg") <= _mean(cora_records, "random") - 0.05


@pytest.mark.parametrize("defense, clean", [("jaccard", 0.786), ("svd", 0.729)])
def test_cora_defense_transfer(cora_records, defense, clean):
    defended = _mean(cora_records, "identity", defense, field="clean_accuracy")

    assert defended == pytest.approx(clean, abs=0.04)
    assert _mean(cora_records, "ahsg", defense) <= defended - 0.05


def test_cora_ablation_direction(cora_records, cora_ablation_records):
    full = _mean(cora_records, "ahsg")

    assert full <= _mean(cora_ablation_records, "ahsg-rec") - 0.03
    assert full <= _mean(cora_ablation_records, "ahsg-hid") - 0.03
