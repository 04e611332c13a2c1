"""Versioned checkpoint container.

Layout::

    KFSI1
    key=value            (header entries, one per line)
    field <name> <count> <shape>
    ...
    END
    <payload>            (little-endian float64, fields in header order)

``shape`` is the array shape joined by ``x`` (``-`` for scalars).  The
configuration travels base64-encoded in the header so a checkpoint is
self-contained.
"""
from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"KFSI1"
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    header: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.fields[name]

    def scalar(self, name: str) -> float:
        return float(np.asarray(self.fields[name]).reshape(-1)[0])

    @property
    def config_text(self) -> str:
        raw = self.header.get("config", "")
        return base64.b64decode(raw.encode("ascii")).decode("utf-8") if raw else ""


def encode_config(text: str) -> str:
    return base64.b64encode(text.encode("utf-8")).decode("ascii")


def _shape_token(a: np.ndarray) -> str:
    return "x".join(str(n) for n in a.shape) if a.ndim else "-"


def dumps(ckpt: Checkpoint) -> bytes:
    lines = [MAGIC.decode("ascii")]
    for key, value in ckpt.header.items():
        text = str(value)
        if "\n" in text or "=" in key or not key or " " in key:
            raise ValueError(f"header entry {key!r} cannot be stored on one line")
        lines.append(f"{key}={text}")
    arrays = []
    for name, value in ckpt.fields.items():
        a = np.array(value, dtype=float, order="C")
        if not name or " " in name:
            raise ValueError(f"invalid field name {name!r}")
        lines.append(f"field {name} {a.size} {_shape_token(a)}")
        arrays.append(a.astype(_DTYPE).tobytes())
    lines.append("END")
    return ("\n".join(lines) + "\n").encode("ascii") + b"".join(arrays)


def loads(data: bytes) -> Checkpoint:
    if not data.startswith(MAGIC + b"\n"):
        bad = next((i for i, (x, y) in enumerate(zip(data, MAGIC + b"\n")) if x != y), min(len(data), len(MAGIC)))
        raise FormatError("missing KFSI1 magic line", bad)
    pos = len(MAGIC) + 1
    header, specs = {}, []
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise FormatError("header is not terminated by END", pos)
        try:
            line = data[pos:end].decode("ascii")
        except UnicodeDecodeError:
            raise FormatError("non-ASCII byte in the header", pos) from None
        if line == "END":
            pos = end + 1
            break
        if line.startswith("field "):
            parts = line.split(" ")
            if len(parts) != 4 or not parts[2].isdigit():
                raise FormatError(f"malformed field line {line!r}", pos)
            count = int(parts[2])
            if parts[3] == "-":
                shape: tuple = ()
            else:
                try:
                    shape = tuple(int(n) for n in parts[3].split("x"))
                except ValueError:
                    raise FormatError(f"malformed shape in {line!r}", pos) from None
            if math.prod(shape) != count:
                raise FormatError(f"field {parts[1]!r}: shape {parts[3]} does not hold {count} values", pos)
            specs.append((parts[1], count, shape))
        elif "=" in line:
            key, value = line.split("=", 1)
            header[key] = value
        else:
            raise FormatError(f"unrecognized header line {line!r}", pos)
        pos = end + 1
    fields = {}
    for name, count, shape in specs:
        nbytes = count * _DTYPE.itemsize
        if pos + nbytes > len(data):
            raise FormatError(f"payload of field {name!r} is truncated", len(data))
        fields[name] = np.frombuffer(data, dtype=_DTYPE, count=count, offset=pos).astype(float).reshape(shape)
        pos += nbytes
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after the payload", pos)
    return Checkpoint(header, fields)


def write_checkpoint(path, ckpt: Checkpoint) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(ckpt))
    tmp.replace(path)
    return path


def read_checkpoint(path) -> Checkpoint:
    return loads(Path(path).read_bytes())


def field_offset(data: bytes, name: str) -> int:
    """Byte offset of the payload of ``name`` (used to locate data in a file)."""
    ckpt_end = data.find(b"\nEND\n") + len(b"\nEND\n")
    pos = ckpt_end
    for line in data[:ckpt_end].decode("ascii").splitlines():
        if line.startswith("field "):
            _, fname, count, _ = line.split(" ")
            if fname == name:
                return pos
            pos += int(count) * _DTYPE.itemsize
    raise KeyError(name)
