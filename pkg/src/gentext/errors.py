"""Exception hierarchy shared by every module.

``InputError`` covers malformed or inconsistent inputs (CLI exit code 2);
``TrainingError`` covers failures while fitting (CLI exit code 3).
"""

from __future__ import annotations


class GentextError(Exception):
    """Base class; ``fold`` is set when the error surfaced inside a CV fold."""

    fold: int | None = None


class InputError(GentextError, ValueError):
    pass


class TrainingError(GentextError, RuntimeError):
    pass


class MissingColumn(InputError):
    pass


class UnknownLabel(InputError):
    def __init__(self, name: str, row: int | None = None):
        self.name = name
        self.row = row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"unknown label {name!r}{where}")


class DuplicateId(InputError):
    def __init__(self, doc_id: str, row: int | None = None):
        self.doc_id = doc_id
        self.row = row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"duplicate id {doc_id!r}{where}")


class EmptyText(InputError):
    def __init__(self, doc_id: str = "", row: int | None = None):
        self.doc_id = doc_id
        self.row = row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"empty text for id {doc_id!r}{where}")


class SpaceMismatch(InputError):
    pass


class TooFewDocuments(InputError):
    pass


class EmptyCorpus(InputError):
    pass


class EmptyClass(InputError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"class {name!r} has no training documents")


class ShapeMismatch(InputError):
    pass


class IdMismatch(InputError):
    def __init__(self, missing: list[str], extra: list[str]):
        self.missing = missing
        self.extra = extra
        parts = []
        if missing:
            parts.append("missing ids: " + ", ".join(missing[:10]))
        if extra:
            parts.append("extra ids: " + ", ".join(extra[:10]))
        super().__init__("; ".join(parts) or "id mismatch")


class FoldMismatch(InputError):
    pass


class UnknownLearner(InputError):
    pass


class VersionMismatch(InputError):
    pass


class SingleClassData(TrainingError):
    pass


class NonFiniteLoss(TrainingError):
    pass
