"""Little-endian binary framing shared by every model file.

Header (12 bytes): magic ``b"ASLM"``, u32 format version (1), then a 4-byte
type tag: ``CNN1`` for networks, ``KNN1`` / ``SVM1`` for the baselines.
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"ASLM"
VERSION = 1


class ModelFormatError(ValueError):
    code = "model_format"


class NotAModelFileError(ModelFormatError):
    code = "not_a_model_file"

    def __init__(self, msg="not a model file"):
        super().__init__(msg)


class VersionMismatchError(ModelFormatError):
    code = "version_mismatch"


class TruncatedFileError(ModelFormatError):
    code = "unexpected_eof"

    def __init__(self, msg="unexpected end of file"):
        super().__init__(msg)


class WrongModelTypeError(ModelFormatError):
    code = "wrong_model_type"


class Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def header(self, tag: bytes):
        self.parts += [MAGIC, struct.pack("<I", VERSION), tag]

    def u8(self, v):
        self.parts.append(struct.pack("<B", v))

    def u32(self, *vs):
        self.parts.append(struct.pack(f"<{len(vs)}I", *vs))

    def f64(self, v):
        self.parts.append(struct.pack("<d", v))

    def array(self, a):
        self.parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())

    def int_array(self, a):
        self.parts.append(np.ascontiguousarray(a, dtype="<u4").tobytes())

    def strings(self, names):
        self.u32(len(names))
        for name in names:
            raw = name.encode("utf-8")
            self.parts.append(struct.pack("<H", len(raw)) + raw)

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError()
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def header(self, expected_tag: bytes | None = None) -> bytes:
        if len(self.data) < 4 or self.data[:4] != MAGIC:
            raise NotAModelFileError()
        self.pos = 4
        (version,) = struct.unpack("<I", self.take(4))
        if version != VERSION:
            raise VersionMismatchError(f"unsupported model file version {version} (expected {VERSION})")
        tag = self.take(4)
        if expected_tag is not None and tag != expected_tag:
            raise WrongModelTypeError(f"model type {tag!r}, expected {expected_tag!r}")
        return tag

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u32(self, n: int = 1):
        vals = struct.unpack(f"<{n}I", self.take(4 * n))
        return vals[0] if n == 1 else vals

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def array(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)

    def int_array(self, count) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<u4").astype(np.int64)

    def strings(self) -> list[str]:
        out = []
        for _ in range(self.u32()):
            (n,) = struct.unpack("<H", self.take(2))
            out.append(self.take(n).decode("utf-8"))
        return out

    def expect_end(self):
        if self.pos != len(self.data):
            raise ModelFormatError(f"{len(self.data) - self.pos} trailing bytes after model data")


def peek_tag(data: bytes) -> bytes:
    return Reader(data).header()
