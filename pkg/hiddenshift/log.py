"""Main logging part"""

#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import inspect
import logging
from logging.handlers import RotatingFileHandler
from typing import List, Optional

CELL_TAG = "_hs_cell_logging_tag"

_main_formatter = logging.Formatter(
    fmt="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
    style="%",
)
_dump_formatter = logging.Formatter(
    fmt="[%(levelname)s] %(name)s: %(message)s",
    datefmt=None,
    style="%",
)


class MemoryLogsHandler(logging.Handler):
    """
    Keeps 2 buffers.
    One for dispatched records.
    One for records below the current level.
    When the length of the 2 together reaches capacity
    the oldest record is dropped, first trimming handled then unused.
    Every record is tagged with the grid cell that emitted it.
    """

    def __init__(self, targets: list, capacity: int):
        super().__init__(0)
        self.targets = targets
        self.capacity = capacity
        self.buffer = []
        self.handledbuffer = []
        self.lvl = logging.NOTSET  # Default loglevel

    def setLevel(self, level: int):
        self.lvl = level

    def dump(self) -> list:
        """Return a list of logging entries"""
        return self.handledbuffer + self.buffer

    def dumps(self, lvl: Optional[int] = 0, cell: Optional[str] = None) -> List[str]:
        """Return all entries of minimum level as list of strings"""
        return [
            _dump_formatter.format(record)
            for record in (self.handledbuffer + self.buffer)
            if record.levelno >= lvl
            and (cell is None or getattr(record, "hs_cell", None) == cell)
        ]

    def emit(self, record: logging.LogRecord):
        try:
            cell = next(
                (
                    frame_info.frame.f_locals[CELL_TAG]
                    for frame_info in inspect.stack(0)
                    if isinstance(
                        getattr(getattr(frame_info, "frame", None), "f_locals", {}).get(
                            CELL_TAG
                        ),
                        str,
                    )
                ),
                None,
            )
        except Exception:
            cell = None

        record.hs_cell = cell

        if len(self.buffer) + len(self.handledbuffer) >= self.capacity:
            if self.handledbuffer:
                del self.handledbuffer[0]
            else:
                del self.buffer[0]

        self.buffer.append(record)

        if record.levelno >= self.lvl >= 0:
            self.acquire()
            try:
                for precord in self.buffer:
                    for target in self.targets:
                        if precord.levelno >= target.level:
                            target.handle(precord)

                self.handledbuffer = (
                    self.handledbuffer[-(self.capacity - len(self.buffer)) :]
                    + self.buffer
                )
                self.buffer = []
            finally:
                self.release()


def get_memory_handler() -> Optional[MemoryLogsHandler]:
    """The installed buffering handler, if `init` was called"""
    return next(
        (
            handler
            for handler in logging.getLogger().handlers
            if isinstance(handler, MemoryLogsHandler)
        ),
        None,
    )


def init(level: int = logging.INFO, logfile: Optional[str] = "hiddenshift.log"):
    handler = logging.StreamHandler()
    handler.setLevel(level)
    handler.setFormatter(_main_formatter)

    targets = [handler]

    if logfile:
        rotating_handler = RotatingFileHandler(
            filename=logfile,
            mode="a",
            maxBytes=10 * 1024 * 1024,
            backupCount=1,
            encoding="utf-8",
            delay=True,
        )
        rotating_handler.setLevel(logging.DEBUG)
        rotating_handler.setFormatter(_main_formatter)
        targets += [rotating_handler]

    logging.getLogger().handlers = []
    logging.getLogger().addHandler(MemoryLogsHandler(targets, 7000))
    logging.getLogger().setLevel(logging.NOTSET)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    logging.getLogger("git").setLevel(logging.WARNING)
    logging.captureWarnings(True)
