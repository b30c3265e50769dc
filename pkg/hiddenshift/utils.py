"""Utilities"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import asyncio
import contextlib
import functools
import hashlib
import json
import logging
import os
import tempfile
import time
from datetime import timedelta
from typing import Any, Iterator, List, Optional, Union

import git

logger = logging.getLogger(__name__)


def get_base_dir() -> str:
    """Get directory of the package"""
    return get_dir(__file__)


def get_dir(mod: str) -> str:
    """Get directory of given module"""
    return os.path.abspath(os.path.dirname(os.path.abspath(mod)))


def run_sync(func, *args, executor=None, **kwargs):
    """
    Run a non-async function in a worker thread and return an awaitable
    :param func: Sync-only function to execute
    :param executor: Executor to use, default one of the loop if omitted
    :returns: Awaitable future
    """
    return asyncio.get_event_loop().run_in_executor(
        executor,
        functools.partial(func, *args, **kwargs),
    )


def is_serializable(x: Any, /) -> bool:
    """Checks if object is JSON-serializable"""
    try:
        json.dumps(x)
        return True
    except Exception:
        return False


def stable_json(obj: Any, /) -> str:
    """JSON with sorted keys and fixed layout, so equal inputs give equal bytes"""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def config_hash(obj: Any, /) -> str:
    """SHA-256 of the sorted-key JSON encoding"""
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def derive_seed(master_seed: int, stage: str, *indices: Any) -> int:
    """
    Derive an independent 63-bit seed for one stage of one grid cell
    :param master_seed: Seed of the whole run
    :param stage: Stage name, e.g. `surrogate` or `attack`
    :param indices: Cell coordinates (budget, attack name, ...)
    """
    key = "/".join([str(int(master_seed)), stage, *map(str, indices)])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << 63) - 1)


def atomic_write(path: str, data: Union[str, bytes], /):
    """Write to a temp file in the same directory, then rename over `path`"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")

    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)

        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.remove(tmp)
        raise


def get_git_hash() -> Union[str, bool]:
    """Get current lab git hash"""
    try:
        repo = git.Repo(get_base_dir(), search_parent_directories=True)
        return repo.head.commit.hexsha
    except Exception:
        return False


def get_version_raw() -> str:
    """Get the version of the lab"""
    from . import version

    return ".".join(list(map(str, list(version.__version__))))


def provenance() -> dict:
    """Version and commit stamped into every manifest"""
    return {
        "version": get_version_raw(),
        "git": get_git_hash() or None,
    }


@contextlib.contextmanager
def stopwatch() -> Iterator[List[float]]:
    """Yields a one-item list that holds elapsed seconds after the block"""
    box = [0.0]
    start = time.perf_counter()
    try:
        yield box
    finally:
        box[0] = time.perf_counter() - start


def formatted_duration(seconds: float) -> str:
    return str(timedelta(seconds=round(seconds)))


def parse_threads(value: Optional[int]) -> int:
    if not value:
        return 1

    return max(1, min(int(value), os.cpu_count() or 1))
