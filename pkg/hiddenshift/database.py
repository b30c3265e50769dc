"""Artifact storage under the output directory"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import csv
import io
import logging
import os
import threading
import typing

import numpy as np

from . import utils
from ._types import AttackResult
from .graph import Graph, save_graph

logger = logging.getLogger(__name__)


def to_builtin(value: typing.Any) -> typing.Any:
    """Numpy scalars and arrays into plain JSON types"""
    if isinstance(value, dict):
        return {str(key): to_builtin(item) for key, item in value.items()}

    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]

    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())

    if isinstance(value, np.generic):
        return value.item()

    return value


def format_cell(value: typing.Any) -> str:
    if value is None:
        return ""

    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"

    return str(value)


class ArtifactStore:
    """Writes every artifact atomically and keeps an index of what was written"""

    def __init__(self, out_dir: str):
        self.out_dir = os.path.abspath(out_dir)
        self._written = []
        self._lock = threading.Lock()
        os.makedirs(self.out_dir, exist_ok=True)

    def __repr__(self):
        return f"<ArtifactStore {self.out_dir}>"

    @property
    def written(self) -> typing.List[str]:
        return sorted(self._written)

    def path(self, *parts: str) -> str:
        return os.path.join(self.out_dir, *parts)

    def _write(self, relpath: str, data: typing.Union[str, bytes]) -> str:
        path = self.path(relpath)
        utils.atomic_write(path, data)
        with self._lock:
            self._written.append(relpath)

        logger.debug(f"Wrote {relpath}")
        return path

    def save_text(self, relpath: str, text: str) -> str:
        return self._write(relpath, text)

    def save_json(self, relpath: str, obj: typing.Any) -> str:
        obj = to_builtin(obj)
        if not utils.is_serializable(obj):
            raise RuntimeError(
                f"Attempted to write {type(obj)=} to {relpath}. It is not"
                " JSON-serializable"
            )

        return self._write(relpath, utils.stable_json(obj))

    def save_csv(
        self,
        relpath: str,
        header: typing.List[str],
        rows: typing.Iterable[typing.Iterable[typing.Any]],
    ) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([format_cell(cell) for cell in row] for row in rows)
        return self._write(relpath, buffer.getvalue())

    def save_records(self, relpath: str, records: typing.List[typing.Dict[str, typing.Any]]) -> str:
        """CSV from dicts sharing the keys of the first one"""
        header = list(records[0]) if records else []
        return self.save_csv(relpath, header, ([record.get(key) for key in header] for record in records))

    def save_attack(
        self,
        relpath: str,
        graph: Graph,
        result: AttackResult,
        manifest: typing.Dict[str, typing.Any],
    ) -> str:
        """
        Attacked graph as an edge list plus manifest; features, labels and
        splits are read back from `manifest["source"]`, or written alongside
        when there is no source directory
        """
        directory = self.path(relpath)
        attacked = graph.with_adjacency(result.adjacency)
        stages = {
            name: (min(row["loss"] for row in value) if isinstance(value, list) else value)
            for name, value in result.trace.items()
            if not isinstance(value, list) or (value and "loss" in value[0])
        }
        manifest = {
            **manifest,
            "method": result.method,
            "flip_count": result.flips,
            "stages": stages,
            **utils.provenance(),
        }
        save_graph(
            attacked,
            directory,
            to_builtin(manifest),
            edges_only=bool(manifest.get("source")),
        )

        for name, rows in result.trace.items():
            if isinstance(rows, list) and rows and isinstance(rows[0], dict):
                self.save_records(os.path.join(relpath, f"{name}.csv"), rows)

        with self._lock:
            self._written.append(relpath)

        return directory
