"""UISA program images: a 16-byte header then little-endian instruction words.

Header layout (little-endian u32 each after the magic): magic ``UISA``,
format version, entry address, word count. Words load at address 0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from ..errors import IsaError

MAGIC = b"UISA"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


class ImageError(IsaError):
    pass


@dataclass
class Image:
    words: list[int]
    entry: int = 0

    def to_bytes(self) -> bytes:
        body = struct.pack(f"<{len(self.words)}I", *self.words)
        return _HEADER.pack(MAGIC, VERSION, self.entry, len(self.words)) + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "Image":
        if len(data) < _HEADER.size:
            raise ImageError("truncated UISA header")
        magic, version, entry, count = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ImageError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ImageError(f"unsupported UISA version {version}")
        if len(data) != _HEADER.size + 4 * count:
            raise ImageError(f"expected {count} words, file holds {(len(data) - _HEADER.size) / 4:g}")
        return cls(list(struct.unpack_from(f"<{count}I", data, _HEADER.size)), entry)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "Image":
        return cls.from_bytes(Path(path).read_bytes())

    def install(self, state) -> None:
        state.mem.load(0, struct.pack(f"<{len(self.words)}I", *self.words))
        state.pc = state.npc = self.entry
