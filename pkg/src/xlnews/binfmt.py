"""Single-file binary containers: magic, version, JSON header, float64
matrices, CRC-64 trailer.  All integers and floats are little-endian."""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import crcmod.predefined
import numpy as np

FORMAT_VERSION = 1


class ContainerFormatError(ValueError):
    pass


def crc64(data: bytes) -> int:
    fn = crcmod.predefined.mkCrcFun("crc-64-we")
    return fn(data)


def _pack_matrix(M: np.ndarray) -> bytes:
    M = np.ascontiguousarray(M, dtype="<f8")
    if M.ndim != 2:
        raise ValueError("only 2-d matrices are stored")
    return struct.pack("<II", *M.shape) + M.tobytes(order="C")


def write_container(path: str | Path, magic: bytes, header: dict,
                    blocks: list[tuple[int, list[np.ndarray]]]) -> None:
    """``blocks`` holds ``(tag, matrices)`` per language or section; ``tag`` is
    an unsigned 64-bit integer such as a vocabulary fingerprint."""
    parts = [magic, struct.pack("<I", FORMAT_VERSION)]
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts += [struct.pack("<I", len(head)), head, struct.pack("<I", len(blocks))]
    for tag, mats in blocks:
        parts.append(struct.pack("<QI", tag, len(mats)))
        parts += [_pack_matrix(M) for M in mats]
    body = b"".join(parts)
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(body + struct.pack("<Q", crc64(body)))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ContainerFormatError("truncated container")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_container(path: str | Path, magic: bytes) -> tuple[dict, list[tuple[int, list[np.ndarray]]]]:
    data = Path(path).read_bytes()
    if len(data) < len(magic) + 4 + 8:
        raise ContainerFormatError("truncated container")
    if data[:len(magic)] != magic:
        raise ContainerFormatError(f"bad magic {data[:len(magic)]!r}, expected {magic!r}")
    body, (crc,) = data[:-8], struct.unpack("<Q", data[-8:])
    r = _Reader(body)
    r.take(len(magic))
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise ContainerFormatError(f"unsupported format version {version}")
    if crc64(body) != crc:
        raise ContainerFormatError("checksum mismatch")
    (hlen,) = r.unpack("<I")
    header = json.loads(r.take(hlen).decode())
    (nblocks,) = r.unpack("<I")
    blocks = []
    for _ in range(nblocks):
        tag, nmat = r.unpack("<QI")
        mats = []
        for _ in range(nmat):
            rows, cols = r.unpack("<II")
            raw = r.take(8 * rows * cols)
            mats.append(np.frombuffer(raw, dtype="<f8").reshape(rows, cols).astype(np.float64))
        blocks.append((tag, mats))
    if r.pos != len(body):
        raise ContainerFormatError("trailing bytes before checksum")
    return header, blocks
