from __future__ import annotations


class IsaError(Exception):
    """Base class for description, transform and generation errors."""


class DescriptionError(IsaError):
    def __init__(self, msg: str, unit: str | None = None, line: int | None = None,
                 col: int | None = None, source: str | None = None):
        self.msg = msg
        self.unit = unit
        self.line = line
        self.col = col
        self.source = source
        where = []
        if source:
            where.append(source)
        if line is not None:
            where.append(f"line {line}" + (f", col {col}" if col is not None else ""))
        if unit:
            where.append(f"unit {unit}")
        super().__init__(f"{msg} ({'; '.join(where)})" if where else msg)


class LinkError(IsaError):
    pass


class TransformError(IsaError):
    pass


class GeneratorError(IsaError):
    pass
