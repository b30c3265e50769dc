"""Result tables, grouped summaries, plot data and the HTML overview"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import itertools
import logging
import os
import typing

import jinja2
import numpy as np

from . import log, utils
from .csbm import SemanticReport
from .database import ArtifactStore
from .experiment import MetricsRecord, cell_id, summarize

logger = logging.getLogger(__name__)

TEMPLATE = "report.html.j2"
SWEEP_HEADER = ["value", "mean", "std", "n_seeds", "ci95"]


def _environment() -> jinja2.Environment:
    return jinja2.Environment(
        loader=jinja2.FileSystemLoader(os.path.join(utils.get_base_dir(), "templates")),
        autoescape=jinja2.select_autoescape(["html", "j2"]),
        keep_trailing_newline=True,
    )


def _mean(values: typing.List[typing.Optional[float]]) -> typing.Optional[float]:
    values = [value for value in values if value is not None]
    return float(np.mean(values)) if values else None


def group_key(record: MetricsRecord) -> str:
    return f"{record.dataset}/{record.attack}/{record.defense}/{record.budget:g}"


def summary(records: typing.List[MetricsRecord]) -> typing.Dict[str, typing.Dict[str, typing.Any]]:
    """Per (dataset, attack, defense, budget) means over successful seeds"""
    grouped = {}
    for key, group in itertools.groupby(sorted(records, key=MetricsRecord.sort_key), key=group_key):
        group = list(group)
        ok = [record for record in group if record.ok]
        attacked = summarize([record.attacked_accuracy for record in ok])
        grouped[key] = {
            "dataset": group[0].dataset,
            "attack": group[0].attack,
            "defense": group[0].defense,
            "budget": group[0].budget,
            "clean_accuracy": _mean([record.clean_accuracy for record in ok]),
            "attacked_accuracy": attacked["mean"] if ok else None,
            "attacked_std": attacked["std"] if ok else None,
            "flip_count": _mean([record.flip_count for record in ok]),
            "bayes_maintain": _mean([record.bayes_maintain for record in ok]),
            "seeds": [record.seed for record in ok],
            "failed": len(group) - len(ok),
        }

    return grouped


def budget_curves(records: typing.List[MetricsRecord]) -> typing.Dict[str, typing.List[typing.Dict[str, typing.Any]]]:
    """Attacked accuracy against budget per (dataset, attack, defense)"""
    curves = {}
    ok = sorted((record for record in records if record.ok), key=MetricsRecord.sort_key)
    for (dataset, attack, defense), group in itertools.groupby(
        ok, key=lambda record: (record.dataset, record.attack, record.defense)
    ):
        rows = []
        for budget, cell in itertools.groupby(group, key=lambda record: record.budget):
            rows.append({"value": budget, **summarize([record.attacked_accuracy for record in cell])})

        curves[f"{dataset}_{attack}_{defense}"] = rows

    return curves


def _save_curve(store: ArtifactStore, name: str, rows: typing.List[typing.Dict[str, typing.Any]]) -> str:
    return store.save_csv(
        os.path.join("plotdata", f"{name}.csv"),
        SWEEP_HEADER,
        ([row[key] for key in SWEEP_HEADER] for row in rows),
    )


def emit_report(
    records: typing.List[MetricsRecord],
    store: ArtifactStore,
    sweeps: typing.Optional[typing.Dict[str, typing.List[typing.Dict[str, typing.Any]]]] = None,
    semantic: typing.Optional[SemanticReport] = None,
    config: typing.Optional[typing.Dict[str, typing.Any]] = None,
) -> typing.List[str]:
    """
    Write results.csv, summary.json, plotdata/*.csv, timings.json,
    warnings.log, per-cell logs and report.html
    :param sweeps: Parameter name → sweep rows, each becomes a plot data file
    :param semantic: Semantic audit to include in the summary
    :returns: Paths written
    :raises ValueError: No records
    """
    if not records:
        raise ValueError("Cannot report on an empty set of records")

    records = sorted(records, key=MetricsRecord.sort_key)
    rows = [record.row() for record in records]
    paths = [store.save_records("results.csv", rows)]

    grouped = summary(records)
    document = {"groups": grouped}
    if semantic is not None:
        document["semantic"] = semantic.as_dict()

    paths.append(store.save_json("summary.json", document))

    for name, curve in budget_curves(records).items():
        paths.append(_save_curve(store, name, curve))

    for parameter, sweep_rows in (sweeps or {}).items():
        paths.append(_save_curve(store, f"sweep_{parameter}", sweep_rows))

    paths.append(
        store.save_json(
            "timings.json",
            {
                f"{cell_id(record.attack, record.budget, record.seed)}/{record.defense}": record.wall_time
                for record in records
            },
        )
    )

    handler = log.get_memory_handler()
    if handler is not None:
        paths.append(store.save_text("warnings.log", "\n".join(handler.dumps(logging.WARNING)) + "\n"))
        for cell in sorted({cell_id(record.attack, record.budget, record.seed) for record in records}):
            if lines := handler.dumps(logging.DEBUG, cell):
                paths.append(store.save_text(os.path.join("logs", f"{cell}.log"), "\n".join(lines) + "\n"))

    failed = [record for record in records if not record.ok]
    html = (
        _environment()
        .get_template(TEMPLATE)
        .render(
            groups=list(grouped.values()),
            failed=failed,
            semantic=semantic,
            sweeps=sweeps or {},
            config=config or {},
            provenance=utils.provenance(),
        )
    )
    paths.append(store.save_text("report.html", html))

    logger.info(f"Report with {len(records)} records written to {store.out_dir}")
    return paths
