"""Kernel and modes files, in JSON and in a little-endian binary layout.

Binary layout (all little-endian)::

    b"ETSC"  u32 version=1  u8 kind
    kind 0 (kernel): u32 n, n x f64 coeffs [, u8 extension, f64 gamma]
    kind 1 (modes):  u32 h, f64 gamma, u32 origin_length,
                     h x (f64 re, f64 im) poles, h x (f64 re, f64 im) weights

The kernel's extension trailer is only written for the decay policy; a file
that ends right after the coefficients uses zero extension.
"""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .conversion import SsmModes
from .toeplitz import DECAY, ZEROS, ToeplitzKernel

MAGIC = b"ETSC"
VERSION = 1
KIND_KERNEL = 0
KIND_MODES = 1
KERNEL_FORMAT = "etsc-kernel"
MODES_FORMAT = "etsc-modes"

_HEADER = struct.Struct("<4sIB")
_EXT_CODES = {ZEROS: 0, DECAY: 1}

PathLike = Union[str, Path]


class FormatError(ValueError):
    """Malformed file; carries a byte offset (binary) or JSON path (text)."""

    def __init__(self, message: str, *, offset: int | None = None, path: str | None = None):
        where = f" at byte {offset}" if offset is not None else f" at {path}" if path else ""
        super().__init__(f"{message}{where}")
        self.offset = offset
        self.path = path


# JSON


def kernel_to_json(k: ToeplitzKernel) -> str:
    ext = {"kind": k.extension}
    if k.extension == DECAY:
        ext["gamma"] = float(k.gamma)
    doc = {
        "format": KERNEL_FORMAT,
        "version": VERSION,
        "n": k.n,
        "extension": ext,
        "coeffs": [float(c) for c in k.coeffs],
    }
    return json.dumps(doc, allow_nan=False)


def modes_to_json(m: SsmModes) -> str:
    doc = {
        "format": MODES_FORMAT,
        "version": VERSION,
        "h": m.h,
        "gamma": float(m.gamma),
        "origin_length": int(m.origin_length),
        "lambda": [[float(z.real), float(z.imag)] for z in m.lam],
        "b": [[float(z.real), float(z.imag)] for z in m.weights],
    }
    return json.dumps(doc, allow_nan=False)


def _field(doc: dict, key: str, path: str = "$"):
    if not isinstance(doc, dict):
        raise FormatError("expected an object", path=path)
    if key not in doc:
        raise FormatError(f"missing field {key!r}", path=path)
    return doc[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError("expected a number", path=path)
    value = float(value)
    if not math.isfinite(value):
        raise FormatError("expected a finite number", path=path)
    return value


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError("expected an integer", path=path)
    return value


def _header(doc, fmt: str) -> None:
    if _field(doc, "format") != fmt:
        raise FormatError(f"expected format {fmt!r}", path="$.format")
    if _field(doc, "version") != VERSION:
        raise FormatError("unsupported version", path="$.version")


def _load(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", path="$") from exc


def kernel_from_json(text: str) -> ToeplitzKernel:
    doc = _load(text)
    _header(doc, KERNEL_FORMAT)
    n = _integer(_field(doc, "n"), "$.n")
    coeffs = _field(doc, "coeffs")
    if not isinstance(coeffs, list):
        raise FormatError("expected an array", path="$.coeffs")
    if len(coeffs) != n or n < 1:
        raise FormatError(f"expected {n} coefficients, found {len(coeffs)}", path="$.coeffs")
    values = [_number(c, f"$.coeffs[{i}]") for i, c in enumerate(coeffs)]
    ext = _field(doc, "extension")
    kind = _field(ext, "kind", "$.extension")
    if kind == ZEROS:
        return ToeplitzKernel(np.array(values), ZEROS)
    if kind == DECAY:
        gamma = _number(_field(ext, "gamma", "$.extension"), "$.extension.gamma")
        if not 0.0 < gamma <= 1.0:
            raise FormatError("gamma must lie in (0, 1]", path="$.extension.gamma")
        return ToeplitzKernel(np.array(values), DECAY, gamma)
    raise FormatError(f"unknown extension kind {kind!r}", path="$.extension.kind")


def _complex_list(doc, key: str, h: int) -> np.ndarray:
    items = _field(doc, key)
    if not isinstance(items, list) or len(items) != h:
        raise FormatError(f"expected {h} complex entries", path=f"$.{key}")
    out = np.empty(h, dtype=complex)
    for i, pair in enumerate(items):
        p = f"$.{key}[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise FormatError("expected [re, im]", path=p)
        out[i] = complex(_number(pair[0], p + "[0]"), _number(pair[1], p + "[1]"))
    return out


def modes_from_json(text: str) -> SsmModes:
    doc = _load(text)
    _header(doc, MODES_FORMAT)
    h = _integer(_field(doc, "h"), "$.h")
    if h < 1:
        raise FormatError("h must be positive", path="$.h")
    gamma = _number(_field(doc, "gamma"), "$.gamma")
    origin = _integer(_field(doc, "origin_length"), "$.origin_length")
    lam = _complex_list(doc, "lambda", h)
    b = _complex_list(doc, "b", h)
    return SsmModes(lam=lam, weights=b, gamma=gamma, origin_length=origin)


# binary


def kernel_to_bytes(k: ToeplitzKernel) -> bytes:
    out = _HEADER.pack(MAGIC, VERSION, KIND_KERNEL) + struct.pack("<I", k.n)
    out += np.asarray(k.coeffs, dtype="<f8").tobytes()
    if k.extension == DECAY:
        out += struct.pack("<Bd", _EXT_CODES[DECAY], k.gamma)
    return out


def modes_to_bytes(m: SsmModes) -> bytes:
    out = _HEADER.pack(MAGIC, VERSION, KIND_MODES)
    out += struct.pack("<IdI", m.h, m.gamma, m.origin_length)
    out += np.asarray(m.lam, dtype="<c16").tobytes()
    out += np.asarray(m.weights, dtype="<c16").tobytes()
    return out


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        s = struct.Struct(fmt)
        if self.pos + s.size > len(self.data):
            raise FormatError(f"truncated file: need {s.size} more bytes", offset=self.pos)
        vals = s.unpack_from(self.data, self.pos)
        self.pos += s.size
        return vals

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        if self.pos + size > len(self.data):
            raise FormatError(f"truncated file: need {size} more bytes", offset=self.pos)
        arr = np.frombuffer(self.data, dtype=dtype, count=count, offset=self.pos)
        self.pos += size
        return arr.astype(dtype[1:] if dtype.startswith("<") else dtype)

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(f"{len(self.data) - self.pos} trailing bytes", offset=self.pos)


def _read_header(r: _Reader, expected_kind: int) -> None:
    magic, version, kind = r.take("<4sIB")
    if magic != MAGIC:
        raise FormatError("bad magic", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if kind != expected_kind:
        raise FormatError(f"expected kind {expected_kind}, found {kind}", offset=8)


def kernel_from_bytes(data: bytes) -> ToeplitzKernel:
    r = _Reader(data)
    _read_header(r, KIND_KERNEL)
    (n,) = r.take("<I")
    if n < 1:
        raise FormatError("kernel length must be positive", offset=r.pos - 4)
    start = r.pos
    coeffs = r.array("<f8", n)
    if not np.all(np.isfinite(coeffs)):
        bad = int(np.flatnonzero(~np.isfinite(coeffs))[0])
        raise FormatError("non-finite coefficient", offset=start + 8 * bad)
    if r.pos == len(data):
        return ToeplitzKernel(coeffs, ZEROS)
    ext_at = r.pos
    code, gamma = r.take("<Bd")
    r.finish()
    if code == _EXT_CODES[ZEROS]:
        return ToeplitzKernel(coeffs, ZEROS)
    if code == _EXT_CODES[DECAY] and 0.0 < gamma <= 1.0:
        return ToeplitzKernel(coeffs, DECAY, gamma)
    raise FormatError(f"bad extension (code {code}, gamma {gamma})", offset=ext_at)


def modes_from_bytes(data: bytes) -> SsmModes:
    r = _Reader(data)
    _read_header(r, KIND_MODES)
    h, gamma, origin = r.take("<IdI")
    if h < 1:
        raise FormatError("h must be positive", offset=9)
    start = r.pos
    lam = r.array("<c16", h)
    b = r.array("<c16", h)
    r.finish()
    for arr, base in ((lam, start), (b, start + 16 * h)):
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise FormatError("non-finite value", offset=base + 16 * bad)
    return SsmModes(lam=lam, weights=b, gamma=gamma, origin_length=origin)


# files


def _is_binary(data: bytes) -> bool:
    return data[:4] == MAGIC


def _wants_binary(path: Path, fmt: str | None) -> bool:
    if fmt is not None:
        if fmt not in ("json", "binary"):
            raise ValueError(f"unknown format {fmt!r}")
        return fmt == "binary"
    return path.suffix.lower() in (".bin", ".etsc")


def save_kernel(path: PathLike, k: ToeplitzKernel, fmt: str | None = None) -> None:
    path = Path(path)
    if _wants_binary(path, fmt):
        path.write_bytes(kernel_to_bytes(k))
    else:
        path.write_text(kernel_to_json(k))


def load_kernel(path: PathLike) -> ToeplitzKernel:
    data = Path(path).read_bytes()
    if _is_binary(data):
        return kernel_from_bytes(data)
    return kernel_from_json(data.decode("utf-8"))


def save_modes(path: PathLike, m: SsmModes, fmt: str | None = None) -> None:
    path = Path(path)
    if _wants_binary(path, fmt):
        path.write_bytes(modes_to_bytes(m))
    else:
        path.write_text(modes_to_json(m))


def load_modes(path: PathLike) -> SsmModes:
    data = Path(path).read_bytes()
    if _is_binary(data):
        return modes_from_bytes(data)
    return modes_from_json(data.decode("utf-8"))
