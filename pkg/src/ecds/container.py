"""Binary container for encoded words plus their key=value metadata."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import BitWord

MAGIC = b"ECDS"
VERSION = 1
KIND_MEMBERSHIP = 1
KIND_POLYEVAL = 2
KIND_RAW = 3
KINDS = {KIND_MEMBERSHIP: "membership", KIND_POLYEVAL: "polyeval", KIND_RAW: "raw"}


class ContainerError(ValueError):
    pass


def format_metadata(meta: dict[str, object]) -> str:
    lines = []
    for key, value in meta.items():
        key, text = str(key), str(value)
        if "=" in key or "\n" in key or "\n" in text:
            raise ContainerError(f"metadata entry {key!r} cannot be serialized")
        lines.append(f"{key}={text}\n")
    return "".join(lines)


def parse_metadata(text: str) -> dict[str, str]:
    meta: dict[str, str] = {}
    for line in text.splitlines():
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ContainerError(f"malformed metadata line {line!r}")
        meta[key] = value
    return meta


def dump_bytes(kind: int, meta: dict[str, object], word: BitWord) -> bytes:
    if kind not in KINDS:
        raise ContainerError(f"unknown structure kind {kind}")
    text = format_metadata(meta).encode("utf-8")
    header = MAGIC + struct.pack("<BBI", VERSION, kind, len(text))
    return header + text + struct.pack("<Q", len(word)) + word.packed.tobytes()


def load_bytes(data: bytes) -> tuple[int, dict[str, str], BitWord]:
    if len(data) < 10 or data[:4] != MAGIC:
        raise ContainerError("bad magic: not an ECDS container")
    version, kind, mlen = struct.unpack_from("<BBI", data, 4)
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    if kind not in KINDS:
        raise ContainerError(f"unknown structure kind {kind}")
    pos = 10
    if len(data) < pos + mlen + 8:
        raise ContainerError("truncated container header")
    try:
        meta = parse_metadata(data[pos : pos + mlen].decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ContainerError("metadata is not UTF-8") from exc
    pos += mlen
    (nbits,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    nbytes = (nbits + 7) // 8
    if len(data) != pos + nbytes:
        raise ContainerError(f"payload size {len(data) - pos} does not match bit length {nbits}")
    payload = np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=pos)
    return kind, meta, BitWord(payload.copy(), nbits)


def write_container(path: str | Path, kind: int, meta: dict[str, object], word: BitWord) -> None:
    Path(path).write_bytes(dump_bytes(kind, meta, word))


def read_container(path: str | Path) -> tuple[int, dict[str, str], BitWord]:
    return load_bytes(Path(path).read_bytes())
