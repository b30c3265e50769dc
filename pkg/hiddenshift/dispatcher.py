"""Obviously, dispatches subcommands"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import dataclasses
import json
import logging
import os
import typing

from . import utils
from ._types import ConfigError
from .experiment import (
    ablation_config,
    base_graph,
    detect_grid,
    evaluate_victim,
    load_surrogate,
    run_attack,
    run_grid,
    sweep_grid,
)
from .gcn import accuracy, save_checkpoint, train_surrogate
from .graph import MANIFEST_FILE, load_graph, save_graph
from .csbm import csbm_sample
from .loader import get_commands
from .report import emit_report

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "surrogate.ckpt"


class CommandDispatcher:
    def __init__(self, lab: "Lab"):  # type: ignore  # noqa: F821
        self._lab = lab
        self.commands = get_commands(self)

    @property
    def config(self):
        return self._lab.experiment

    @property
    def seed(self) -> int:
        return self.config.seeds[0]

    async def dispatch(self, command: str) -> typing.Any:
        try:
            handler = self.commands[command]
        except KeyError:
            raise ConfigError(
                f"Unknown command {command}, available: {', '.join(sorted(self.commands))}"
            )

        logger.debug(f"Dispatching {command}")
        return await handler()

    async def traincmd(self) -> str:
        """Train the surrogate on the configured dataset and checkpoint it"""
        graph, _ = base_graph(self.config, self.seed)
        seed = utils.derive_seed(self.seed, "surrogate")
        params = await utils.run_sync(
            train_surrogate,
            graph,
            dataclasses.replace(self.config.train, seed=seed),
        )
        path = self._lab.arguments.checkpoint or self._lab.store.path(CHECKPOINT_NAME)
        save_checkpoint(path, params, seed, self._lab.config_hash)

        print(
            f"Train accuracy {accuracy(graph, params, graph.train_mask):.4f}\n"
            f"Test accuracy  {accuracy(graph, params):.4f}\n"
            f"Checkpoint     {path}"
        )
        return path

    async def attackcmd(self) -> str:
        """One attack at one budget and seed, written as an attacked graph directory"""
        name = self.config.attack_names()[0]
        ratio = self.config.budgets[0]
        graph, source = base_graph(self.config, self.seed)

        surrogate = None
        if self._lab.modules.lookup_attack(name).needs_surrogate:
            surrogate = await utils.run_sync(load_surrogate, self.config, graph, self.seed)

        if source is None:
            # Attacked CSBM graphs are written in full, so keep the clean one next to them
            save_graph(graph, self._lab.store.path("clean"), {"dataset": self.config.name})

        result, budget, elapsed = await utils.run_sync(
            run_attack,
            self.config,
            self._lab.modules,
            graph,
            surrogate,
            self.seed,
            ratio,
            name,
            self._lab.store,
            source,
        )
        path = self._lab.store.path(
            "attacks", self.config.name, f"{name}/b{ratio:g}/s{self.seed}"
        )
        print(
            f"{name}: {result.flips}/{budget.epsilon_flips} flips"
            f" in {utils.formatted_duration(elapsed)}\n{path}"
        )
        return path

    async def defend_evalcmd(self) -> typing.List[typing.Dict[str, typing.Any]]:
        """Victim accuracy on an attacked graph directory for every configured defense"""
        directory = self._lab.arguments.input
        if not directory:
            raise ConfigError("defend-eval needs --input pointing at an attacked graph")

        with open(os.path.join(directory, MANIFEST_FILE), "r", encoding="utf-8") as f:
            manifest = json.load(f)

        clean_path = manifest.get("source") or self.config.dataset_path
        if not clean_path and os.path.isdir(self._lab.store.path("clean")):
            clean_path = self._lab.store.path("clean")

        if not clean_path:
            raise ConfigError(f"No clean graph known for {directory}, set dataset.path")

        attacked, clean = load_graph(directory), load_graph(clean_path)
        seed = manifest.get("seed", self.seed)
        metrics = []
        for name in self.config.defenses:
            result = await utils.run_sync(
                evaluate_victim,
                attacked,
                self._lab.modules.lookup_defense(name),
                self.config.train,
                utils.derive_seed(seed, "victim", name),
                clean,
            )
            metrics.append(result)
            print(
                f"{name:>10}: clean {result['clean_accuracy']:.4f}"
                f" attacked {result['accuracy']:.4f}"
            )

        self._lab.store.save_json("defend_eval.json", {"input": directory, "metrics": metrics})
        return metrics

    async def csbm_gencmd(self) -> typing.List[str]:
        """Write one CSBM sample per seed as dataset directories"""
        paths = []
        for seed in self.config.seeds:
            graph = csbm_sample(self.config.csbm, utils.derive_seed(seed, "csbm"))
            path = self._lab.store.path("csbm", f"s{seed}")
            save_graph(
                graph,
                path,
                {
                    "seed": seed,
                    "params": dataclasses.asdict(self.config.csbm),
                    **utils.provenance(),
                },
            )
            print(f"s{seed}: {graph.n} nodes, {graph.num_edges} edges -> {path}")
            paths.append(path)

        return paths

    async def detectcmd(self):
        """Bayes maintenance and GCN accuracy per configured attack on CSBM graphs"""
        report, records = await detect_grid(
            self.config.attack_names(),
            self.config.csbm,
            self.config.budgets[0],
            self.config.seeds,
            self._lab.modules,
            self.config,
            self._lab.store,
        )
        emit_report(records, self._lab.store, semantic=report, config=self._lab.flat_config)

        print(
            f"Clean GCN {report.clean_gcn_accuracy:.4f},"
            f" clean Bayes {report.clean_bayes_accuracy:.4f}"
        )
        for row in report.rows:
            print(
                f"{row.attack:>12}: GCN {row.gcn_accuracy:.4f} ± {row.gcn_stderr:.4f},"
                f" Bayes maintain {row.bayes_maintain:.4f} ± {row.bayes_stderr:.4f}"
            )

        return report

    async def sweepcmd(self):
        """Attacked accuracy over values of one parameter"""
        parameter = self._lab.arguments.param
        if not parameter:
            raise ConfigError("sweep needs --param")

        rows, records = await sweep_grid(
            self.config,
            parameter,
            self._lab.arguments.values or [],
            self._lab.modules,
            self._lab.store,
        )
        emit_report(records, self._lab.store, sweeps={parameter: rows}, config=self._lab.flat_config)

        for row in rows:
            print(
                f"{parameter}={row['value']}: {row['mean']:.4f} ± {row['std']:.4f}"
                f" ({row['n_seeds']} seeds)"
            )

        return rows

    async def ablatecmd(self):
        """Full attack against its two ablations at 5% and 10%"""
        return await self._grid(ablation_config(self.config))

    async def reportcmd(self):
        """The configured grid with every report file"""
        return await self._grid(self.config)

    async def _grid(self, config):
        records = await run_grid(config, self._lab.modules, self._lab.store)
        emit_report(records, self._lab.store, config=self._lab.flat_config)

        for record in records:
            outcome = (
                f"{record.clean_accuracy:.4f} -> {record.attacked_accuracy:.4f}"
                if record.ok
                else f"failed: {record.error}"
            )
            print(
                f"{record.attack:>12} {record.defense:>8} b={record.budget:<5g}"
                f" s={record.seed}: {outcome}"
            )

        return records
