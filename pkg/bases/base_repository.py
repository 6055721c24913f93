from pathlib import Path
from typing import Any, Generic, TypeVar

from core.exceptions import StorageError
from core.logger import logger

RecordT = TypeVar("RecordT")


class BaseRepository(Generic[RecordT]):
    """
    BaseRepository provides file persistence for one kind of record.

    Subclasses implement ``_dump`` and ``_load`` on an open file; this class
    owns path handling, directory creation and the translation of OS errors
    into ``StorageError`` naming the path.

    Methods:
        save(record): Write a record to the repository path.
        load(): Read the record back.
    Attributes:
        binary: Whether the file is opened in binary mode.
    """

    binary: bool = False

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def _open(self, mode: str):
        if self.binary:
            return self.path.open(mode + "b")
        return self.path.open(mode, encoding="utf-8", newline="")

    def _dump(self, handle, record: RecordT):
        raise NotImplementedError

    def _load(self, handle) -> RecordT:
        raise NotImplementedError

    def save(self, record: RecordT) -> Path:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self._open("w") as handle:
                self._dump(handle, record)
        except OSError as exc:
            raise StorageError(f"cannot write: {exc.strerror or exc}", self.path) from exc
        logger.info("file written", path=str(self.path), kind=type(self).__name__)
        return self.path

    def load(self) -> RecordT:
        try:
            with self._open("r") as handle:
                return self._load(handle)
        except OSError as exc:
            raise StorageError(f"cannot read: {exc.strerror or exc}", self.path) from exc

    def __repr__(self) -> Any:
        return f"{type(self).__name__}({str(self.path)!r})"
