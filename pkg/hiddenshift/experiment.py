"""Experiment grids: attack × defense × budget × seed, sweeps, ablations, semantic audit"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import asyncio
import dataclasses
import itertools
import logging
import math
import os
import typing
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import utils
from ._types import AttackContext, AttackResult, BudgetError, ConfigError, Defense, ModuleConfig
from .csbm import CsbmParams, SemanticReport, SemanticRow, bayes_accuracy, bayes_maintain, csbm_sample
from .database import ArtifactStore
from .gcn import GcnParams, TrainConfig, accuracy, load_checkpoint, train_surrogate
from .graph import AttackBudget, Graph, budget_from_ratio, load_graph
from .loader import NO_DEFENSE, Modules
from .mapping import MapConfig
from .semantic import PerturbConfig

logger = logging.getLogger(__name__)

ABLATED = {"rec": "ahsg-rec", "hid": "ahsg-hid"}
ABLATION_ATTACKS = ["ahsg", "ahsg-rec", "ahsg-hid"]
ABLATION_BUDGETS = [0.05, 0.1]


@dataclass(frozen=True)
class ExperimentConfig:
    attacks: typing.List[str]
    defenses: typing.List[str]
    budgets: typing.List[float]
    seeds: typing.List[int]
    dataset_path: typing.Optional[str] = None
    dataset_name: str = ""
    csbm: typing.Optional[CsbmParams] = None
    ablation: str = "none"
    out: str = "out"
    threads: int = 1
    checkpoint: str = ""
    train: TrainConfig = field(default_factory=TrainConfig)
    perturb: PerturbConfig = field(default_factory=PerturbConfig)
    map: MapConfig = field(default_factory=MapConfig)

    def __post_init__(self):
        if not self.dataset_path and self.csbm is None:
            raise ConfigError("Either a dataset directory or CSBM parameters are needed")

        if any(not 0 <= ratio <= 1 for ratio in self.budgets):
            raise ConfigError(f"Budget ratios must be in [0, 1], got {self.budgets}")

        if self.ablation not in ["none", *ABLATED]:
            raise ConfigError(f"Unknown ablation mode {self.ablation}")

        if not (self.attacks and self.defenses and self.budgets and self.seeds):
            raise ConfigError("Attacks, defenses, budgets and seeds must be non-empty")

    @classmethod
    def from_config(cls, config: ModuleConfig) -> "ExperimentConfig":
        return cls(
            attacks=list(config["experiment.attacks"]),
            defenses=list(config["experiment.defenses"]),
            budgets=list(config["experiment.budgets"]),
            seeds=list(config["experiment.seeds"]),
            dataset_path=config["dataset.path"] or None,
            dataset_name=config["dataset.name"],
            csbm=CsbmParams(**config.section("csbm")),
            ablation=config["experiment.ablation"],
            out=config["experiment.out"],
            threads=config["experiment.threads"],
            checkpoint=config["train.checkpoint"],
            train=TrainConfig(
                **{
                    key: value
                    for key, value in config.section("train").items()
                    if key != "checkpoint"
                }
            ),
            perturb=PerturbConfig(**config.section("perturb")),
            map=MapConfig(**config.section("map")),
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    @property
    def name(self) -> str:
        if self.dataset_name:
            return self.dataset_name

        if self.dataset_path:
            return os.path.basename(os.path.normpath(self.dataset_path))

        return "csbm"

    def attack_names(self) -> typing.List[str]:
        """Configured attacks with `ahsg` swapped for the ablated variant"""
        if self.ablation == "none":
            return list(self.attacks)

        return [ABLATED[self.ablation] if name == "ahsg" else name for name in self.attacks]


@dataclass
class MetricsRecord:
    dataset: str
    attack: str
    defense: str
    budget: float
    seed: int
    clean_accuracy: typing.Optional[float] = None
    attacked_accuracy: typing.Optional[float] = None
    flip_count: int = 0
    budget_flips: int = 0
    bayes_maintain: typing.Optional[float] = None
    clean_bayes_accuracy: typing.Optional[float] = None
    status: str = "ok"
    error: str = ""
    wall_time: float = 0.0

    def __post_init__(self):
        if self.status == "ok" and self.flip_count > self.budget_flips:
            raise BudgetError(
                f"{self.attack} flipped {self.flip_count} pairs,"
                f" budget was {self.budget_flips}"
            )

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def sort_key(self) -> tuple:
        return (self.dataset, self.attack, self.defense, self.budget, self.seed)

    def row(self) -> typing.Dict[str, typing.Any]:
        """Everything except wall time, so reruns give identical tables"""
        return {
            key: value
            for key, value in dataclasses.asdict(self).items()
            if key != "wall_time"
        }


@dataclass
class Victim:
    name: str
    defense: typing.Optional[Defense]
    params: GcnParams
    clean_accuracy: float

    def defended(self, graph: Graph) -> Graph:
        return self.defense.apply(graph) if self.defense is not None else graph


@dataclass
class SeedState:
    seed: int
    graph: Graph
    source: typing.Optional[str]
    surrogate: GcnParams
    victims: typing.List[Victim]
    clean_bayes: typing.Optional[float] = None


def train_victim(
    clean_graph: Graph,
    defense: typing.Optional[Defense],
    train_config: TrainConfig,
    seed: int,
) -> Victim:
    """Victim GCN trained on the defended clean graph"""
    defended = defense.apply(clean_graph) if defense is not None else clean_graph
    params = train_surrogate(defended, dataclasses.replace(train_config, seed=seed))
    name = defense.name if defense is not None else NO_DEFENSE
    return Victim(name, defense, params, accuracy(defended, params))


def evaluate_victim(
    attacked_graph: Graph,
    defense: typing.Optional[Defense],
    train_config: TrainConfig,
    seed: int,
    clean_graph: typing.Optional[Graph] = None,
    victim: typing.Optional[Victim] = None,
) -> typing.Dict[str, typing.Any]:
    """
    Test accuracy of a victim on the (defended) attacked graph. The victim is
    trained on the clean graph unless an already trained one is passed.
    """
    if victim is None:
        victim = train_victim(clean_graph or attacked_graph, defense, train_config, seed)

    attacked_accuracy = accuracy(victim.defended(attacked_graph), victim.params)
    return {
        "accuracy": attacked_accuracy,
        "clean_accuracy": victim.clean_accuracy,
        "defense": victim.name,
        "seed": seed,
        **utils.provenance(),
    }


def base_graph(config: ExperimentConfig, seed: int) -> typing.Tuple[Graph, typing.Optional[str]]:
    """Clean graph for one seed and its source directory (None for CSBM samples)"""
    if config.dataset_path:
        return load_graph(config.dataset_path), os.path.abspath(config.dataset_path)

    return csbm_sample(config.csbm, utils.derive_seed(seed, "csbm")), None


def load_surrogate(config: ExperimentConfig, graph: Graph, seed: int) -> GcnParams:
    if config.checkpoint:
        params, header = load_checkpoint(config.checkpoint)
        params.check(graph)
        logger.info(f"Reusing surrogate from {config.checkpoint} (seed {header.get('seed')})")
        return params

    return train_surrogate(
        graph,
        dataclasses.replace(config.train, seed=utils.derive_seed(seed, "surrogate")),
    )


def _prepare_seed(config: ExperimentConfig, registry: Modules, seed: int) -> SeedState:
    _hs_cell_logging_tag = f"seed={seed}"  # noqa: F841

    graph, source = base_graph(config, seed)
    surrogate = load_surrogate(config, graph, seed)
    victims = [
        train_victim(
            graph,
            registry.lookup_defense(name),
            config.train,
            utils.derive_seed(seed, "victim", name),
        )
        for name in config.defenses
    ]
    clean_bayes = bayes_accuracy(graph, config.csbm) if source is None else None
    return SeedState(seed, graph, source, surrogate, victims, clean_bayes)


def cell_id(attack: str, budget: float, seed: int) -> str:
    return f"{attack}/b{budget:g}/s{seed}"


def run_attack(
    config: ExperimentConfig,
    registry: Modules,
    graph: Graph,
    surrogate: typing.Optional[GcnParams],
    seed: int,
    ratio: float,
    attack_name: str,
    store: typing.Optional[ArtifactStore] = None,
    source: typing.Optional[str] = None,
) -> typing.Tuple[AttackResult, AttackBudget, float]:
    """
    One attack at one budget, saving the attacked graph when a store is given
    :returns: Result, the budget used and elapsed seconds
    :raises BudgetError: The attack flipped more pairs than allowed
    """
    attack = registry.lookup_attack(attack_name)
    budget = budget_from_ratio(graph, ratio)
    context = AttackContext(
        surrogate=surrogate,
        perturb_config=config.perturb,
        map_config=config.map,
        train_config=config.train,
        seed=utils.derive_seed(seed, "attack", attack_name, ratio),
    )

    with utils.stopwatch() as elapsed:
        result = attack.attack(graph, budget, context)

    if result.flips > budget.epsilon_flips:
        raise BudgetError(f"{attack_name} exceeded its budget of {budget.epsilon_flips}")

    if store is not None:
        store.save_attack(
            os.path.join("attacks", config.name, cell_id(attack_name, ratio, seed)),
            graph,
            result,
            {
                "seed": seed,
                "attack_seed": context.seed,
                "budget": budget.epsilon_flips,
                "budget_ratio": ratio,
                "dataset": config.name,
                "source": source,
            },
        )

    return result, budget, elapsed[0]


def _run_cell(
    config: ExperimentConfig,
    registry: Modules,
    state: SeedState,
    ratio: float,
    attack_name: str,
    store: typing.Optional[ArtifactStore],
) -> typing.List[MetricsRecord]:
    _hs_cell_logging_tag = cell_id(attack_name, ratio, state.seed)

    graph = state.graph
    budget_flips = budget_from_ratio(graph, ratio).epsilon_flips
    base = dict(dataset=config.name, attack=attack_name, budget=ratio, seed=state.seed)

    try:
        result, budget, elapsed = run_attack(
            config,
            registry,
            graph,
            state.surrogate,
            state.seed,
            ratio,
            attack_name,
            store,
            state.source,
        )
        attacked = graph.with_adjacency(result.adjacency)
        maintained = bayes_maintain(graph, attacked, config.csbm) if state.source is None else None

        records = [
            MetricsRecord(
                **base,
                defense=victim.name,
                clean_accuracy=victim.clean_accuracy,
                attacked_accuracy=evaluate_victim(
                    attacked, victim.defense, config.train, state.seed, victim=victim
                )["accuracy"],
                flip_count=result.flips,
                budget_flips=budget.epsilon_flips,
                bayes_maintain=maintained,
                clean_bayes_accuracy=state.clean_bayes,
                wall_time=elapsed,
            )
            for victim in state.victims
        ]
        logger.info(
            f"{_hs_cell_logging_tag}: {result.flips} flips in"
            f" {utils.formatted_duration(elapsed)}, "
            + ", ".join(f"{r.defense}={r.attacked_accuracy:.3f}" for r in records)
        )
        return records
    except Exception as e:
        logger.exception(f"Cell {_hs_cell_logging_tag} failed")
        return [
            MetricsRecord(**base, defense=name, budget_flips=budget_flips, status="failed", error=str(e))
            for name in config.defenses
        ]


def _failed_seed(config: ExperimentConfig, seed: int, error: Exception) -> typing.List[MetricsRecord]:
    return [
        MetricsRecord(
            dataset=config.name,
            attack=attack,
            defense=defense,
            budget=ratio,
            seed=seed,
            status="failed",
            error=str(error),
        )
        for attack, defense, ratio in itertools.product(
            config.attack_names(), config.defenses, config.budgets
        )
    ]


def check_names(config: ExperimentConfig, registry: Modules):
    """
    :raises LoadError: An attack or defense is not registered
    """
    for name in config.attack_names():
        registry.lookup_attack(name)

    for name in config.defenses:
        registry.lookup_defense(name)


async def run_grid(
    config: ExperimentConfig,
    registry: Modules,
    store: typing.Optional[ArtifactStore] = None,
) -> typing.List[MetricsRecord]:
    """One record per (budget × seed × attack × defense), sorted"""
    check_names(config, registry)
    executor = ThreadPoolExecutor(max_workers=config.threads)

    async def seed_job(seed: int) -> typing.List[MetricsRecord]:
        try:
            state = await utils.run_sync(_prepare_seed, config, registry, seed, executor=executor)
        except Exception as e:
            logger.exception(f"Preparing seed {seed} failed")
            return _failed_seed(config, seed, e)

        cells = await asyncio.gather(
            *[
                utils.run_sync(
                    _run_cell,
                    config,
                    registry,
                    state,
                    ratio,
                    attack,
                    store,
                    executor=executor,
                )
                for ratio, attack in itertools.product(config.budgets, config.attack_names())
            ]
        )
        return list(itertools.chain.from_iterable(cells))

    try:
        results = await asyncio.gather(*[seed_job(seed) for seed in config.seeds])
    finally:
        executor.shutdown(wait=True)

    records = sorted(itertools.chain.from_iterable(results), key=MetricsRecord.sort_key)
    failed = sum(not record.ok for record in records)
    if failed:
        logger.warning(f"{failed} of {len(records)} records failed")

    return records


def run_experiment(
    config: ExperimentConfig,
    registry: typing.Optional[Modules] = None,
    store: typing.Optional[ArtifactStore] = None,
) -> typing.List[MetricsRecord]:
    return asyncio.run(run_grid(config, registry or Modules().register_all(), store))


def summarize(values: typing.List[float]) -> typing.Dict[str, float]:
    """Mean, sample std, count and a 95% normal interval half-width"""
    n = len(values)
    if not n:
        return {"mean": math.nan, "std": math.nan, "n_seeds": 0, "ci95": math.nan}

    std = float(np.std(values, ddof=1)) if n > 1 else 0.0
    return {
        "mean": float(np.mean(values)),
        "std": std,
        "n_seeds": n,
        "ci95": float(norm.ppf(0.975) * std / math.sqrt(n)),
    }


SWEEP_TYPES = {"budget": float, "beta": float, "hidden_dim": int}


def sweep_value(parameter: str, value: typing.Any) -> typing.Any:
    try:
        return SWEEP_TYPES[parameter](value)
    except KeyError:
        raise ConfigError(f"Cannot sweep {parameter}, choose one of {', '.join(SWEEP_TYPES)}")
    except ValueError:
        raise ConfigError(f"Invalid {parameter} value {value!r}")


def sweep_config(config: ExperimentConfig, parameter: str, value: typing.Any) -> ExperimentConfig:
    """
    Config for one sweep point; non-budget points get their own dataset tag
    so their records and artifacts stay apart
    """
    value = sweep_value(parameter, value)
    if parameter == "budget":
        return config.replace(budgets=[value])

    tagged = config.replace(dataset_name=f"{config.name}[{parameter}={value}]")
    if parameter == "beta":
        return tagged.replace(perturb=dataclasses.replace(config.perturb, beta=value))

    return tagged.replace(train=dataclasses.replace(config.train, hidden_dim=value))


async def sweep_grid(
    config: ExperimentConfig,
    parameter: str,
    values: typing.List[typing.Any],
    registry: Modules,
    store: typing.Optional[ArtifactStore] = None,
) -> typing.Tuple[typing.List[typing.Dict[str, typing.Any]], typing.List[MetricsRecord]]:
    """
    Attacked accuracy of the first configured attack and defense for each value
    :returns: Rows (value, mean, std, n_seeds, ci95) and all underlying records
    :raises ConfigError: Unknown parameter, bad or no values
    """
    if not values:
        raise ConfigError("Sweep needs at least one value")

    points = [(sweep_value(parameter, value), sweep_config(config, parameter, value)) for value in values]
    attack, defense = config.attack_names()[0], config.defenses[0]

    rows, everything = [], []
    for value, point in points:
        records = await run_grid(point, registry, store)
        accuracies = [
            record.attacked_accuracy
            for record in records
            if record.ok and record.attack == attack and record.defense == defense
        ]
        rows.append({"value": value, **summarize(accuracies)})
        everything.extend(records)

    return rows, everything


def sweep(
    config: ExperimentConfig,
    parameter: str,
    values: typing.List[typing.Any],
    registry: typing.Optional[Modules] = None,
    store: typing.Optional[ArtifactStore] = None,
) -> typing.List[typing.Dict[str, typing.Any]]:
    return asyncio.run(
        sweep_grid(config, parameter, values, registry or Modules().register_all(), store)
    )[0]


def ablation_config(config: ExperimentConfig) -> ExperimentConfig:
    """Full attack against both ablations at the two reference budgets"""
    return config.replace(attacks=ABLATION_ATTACKS, budgets=ABLATION_BUDGETS, ablation="none")


def _stderr(values: typing.List[float]) -> float:
    return float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0


def semantic_report(
    records: typing.List[MetricsRecord],
    attacks: typing.List[str],
    budget_ratio: float,
) -> SemanticReport:
    ok = [record for record in records if record.ok]
    clean = [record for record in ok if record.attack == "identity"]

    report = SemanticReport(
        budget_ratio=budget_ratio,
        clean_gcn_accuracy=float(np.mean([r.clean_accuracy for r in clean])) if clean else math.nan,
        clean_bayes_accuracy=(
            float(np.mean([r.clean_bayes_accuracy for r in clean])) if clean else math.nan
        ),
    )

    for attack in attacks:
        rows = [record for record in ok if record.attack == attack]
        if not rows:
            logger.warning(f"No successful runs of {attack} to report")
            continue

        accuracies = [r.attacked_accuracy for r in rows]
        maintained = [r.bayes_maintain for r in rows]
        report.rows.append(
            SemanticRow(
                attack=attack,
                gcn_accuracy=float(np.mean(accuracies)),
                gcn_stderr=_stderr(accuracies),
                bayes_maintain=float(np.mean(maintained)),
                bayes_stderr=_stderr(maintained),
                seeds=sorted(r.seed for r in rows),
            )
        )

    return report


async def detect_grid(
    attack_list: typing.List[str],
    params: CsbmParams,
    budget_ratio: float,
    seeds: typing.List[int],
    registry: Modules,
    base: typing.Optional[ExperimentConfig] = None,
    store: typing.Optional[ArtifactStore] = None,
) -> typing.Tuple[SemanticReport, typing.List[MetricsRecord]]:
    attacks = ["identity"] + [name for name in attack_list if name != "identity"]
    config = (base or ExperimentConfig(attacks, [NO_DEFENSE], [budget_ratio], seeds, csbm=params)).replace(
        attacks=attacks,
        defenses=[NO_DEFENSE],
        budgets=[budget_ratio],
        seeds=list(seeds),
        dataset_path=None,
        dataset_name="csbm",
        csbm=params,
        ablation="none",
    )
    records = await run_grid(config, registry, store)
    return semantic_report(records, list(attack_list), budget_ratio), records


def semantic_detect_experiment(
    attack_list: typing.List[str],
    params: CsbmParams,
    budget_ratio: float,
    seeds: typing.List[int],
    registry: typing.Optional[Modules] = None,
    base: typing.Optional[ExperimentConfig] = None,
    store: typing.Optional[ArtifactStore] = None,
) -> SemanticReport:
    """GCN accuracy and Bayes maintenance per attack on CSBM graphs"""
    return asyncio.run(
        detect_grid(
            attack_list,
            params,
            budget_ratio,
            seeds,
            registry or Modules().register_all(),
            base,
            store,
        )
    )[0]
