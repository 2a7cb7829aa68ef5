"""Little-endian fixed-width encoding used by the model file formats."""

from __future__ import annotations

import struct

import numpy as np

from iotad.errors import ModelFormatError

_U8 = struct.Struct("<B")
_U32 = struct.Struct("<I")
_I64 = struct.Struct("<q")
_F64 = struct.Struct("<d")


class Writer:
    def __init__(self, magic: bytes) -> None:
        self._parts: list[bytes] = [magic]

    def u8(self, value: int) -> None:
        self._parts.append(_U8.pack(value))

    def u32(self, value: int) -> None:
        self._parts.append(_U32.pack(value))

    def i64(self, value: int) -> None:
        self._parts.append(_I64.pack(value))

    def f64(self, value: float) -> None:
        self._parts.append(_F64.pack(value))

    def f64_array(self, values: np.ndarray) -> None:
        self._parts.append(np.ascontiguousarray(values, dtype="<f8").tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes, magic: bytes) -> None:
        data = bytes(data)
        if len(data) < len(magic):
            raise ModelFormatError("truncated model: missing magic tag")
        tag = data[: len(magic)]
        if tag != magic:
            if tag[:2] == magic[:2]:
                raise ModelFormatError(f"unsupported model version {tag!r}, expected {magic!r}")
            raise ModelFormatError(f"bad magic tag {tag!r}, expected {magic!r}")
        self._data = data
        self._pos = len(magic)

    def _take(self, size: int) -> bytes:
        end = self._pos + size
        if end > len(self._data):
            raise ModelFormatError("truncated model bytes")
        chunk = self._data[self._pos : end]
        self._pos = end
        return chunk

    def u8(self) -> int:
        return _U8.unpack(self._take(1))[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def i64(self) -> int:
        return _I64.unpack(self._take(8))[0]

    def f64(self) -> float:
        return _F64.unpack(self._take(8))[0]

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(8 * count), dtype="<f8").astype(np.float64)

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise ModelFormatError(f"{len(self._data) - self._pos} trailing bytes after model")
