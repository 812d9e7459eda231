"""PVLF binary field container.

Layout (little-endian)::

    b"PVLF"  u32 version  u32 dim  u32 M  f64 L  u32 kind  <f64 samples...>

``kind`` is 0 for scalar and 1 for vector fields (components concatenated,
each row-major). Meridional fields use ``kind = 2`` with ``dim = 2`` and
``M = n_rho``, ``L = P``; the header is then extended by
``u32 N  u32 flags  u32 n_z  f64 Z`` (bit 0 of ``flags``: z-periodic, bit 1:
pressure present) followed by ``v_rho``, ``v_z`` and optionally ``p``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import GridSpec, ScalarField, VectorField

MAGIC = b"PVLF"
VERSION = 1
KIND_SCALAR, KIND_VECTOR, KIND_MERIDIONAL = 0, 1, 2

_HEAD = struct.Struct("<4sIIIdI")
_MERID = struct.Struct("<IIId")


class FormatError(ValueError):
    """Malformed PVLF data; the message names the offending header field."""


def _pack(dim: int, M: int, L: float, kind: int) -> bytes:
    return _HEAD.pack(MAGIC, VERSION, dim, M, L, kind)


def encode(field) -> bytes:
    """Serialize a scalar, vector or meridional field."""
    from .meridional import MeridionalField

    if isinstance(field, VectorField):
        g = field.grid
        body = np.concatenate([c.ravel() for c in field.components])
        return _pack(g.dim, g.M, g.L, KIND_VECTOR) + body.astype("<f8").tobytes()
    if isinstance(field, ScalarField):
        g = field.grid
        return _pack(g.dim, g.M, g.L, KIND_SCALAR) + field.samples.astype("<f8").tobytes()
    if isinstance(field, MeridionalField):
        mg = field.grid
        flags = int(mg.periodic_z) | (2 if field.p is not None else 0)
        arrays = [field.v_rho, field.v_z] + ([field.p] if field.p is not None else [])
        body = np.concatenate([a.ravel() for a in arrays]).astype("<f8").tobytes()
        head = _pack(2, mg.n_rho, mg.P, KIND_MERIDIONAL) + _MERID.pack(field.N, flags, mg.n_z, mg.Z)
        return head + body
    raise TypeError(f"cannot encode {type(field).__name__}")


def decode(data: bytes):
    """Inverse of :func:`encode`."""
    if len(data) < _HEAD.size:
        raise FormatError("header: file shorter than the fixed PVLF header")
    magic, version, dim, M, L, kind = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"magic: expected {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise FormatError(f"version: unsupported format version {version}")
    if kind not in (KIND_SCALAR, KIND_VECTOR, KIND_MERIDIONAL):
        raise FormatError(f"kind: unknown field kind {kind}")
    if not np.isfinite(L) or L <= 0:
        raise FormatError(f"L: half-width must be positive, found {L}")
    off = _HEAD.size
    if kind == KIND_MERIDIONAL:
        return _decode_meridional(data, dim, M, L, off)
    if dim not in (2, 3):
        raise FormatError(f"dim: expected 2 or 3, found {dim}")
    try:
        grid = GridSpec(dim, M, L)
    except ValueError as exc:
        raise FormatError(f"M: {exc}") from None
    ncomp = dim if kind == KIND_VECTOR else 1
    n = ncomp * M**dim
    body = data[off:]
    if len(body) != 8 * n:
        raise FormatError(f"samples: expected {8 * n} bytes for dim={dim}, M={M}, kind={kind}, found {len(body)}")
    arr = np.frombuffer(body, dtype="<f8").astype(float)
    if kind == KIND_SCALAR:
        return ScalarField(grid, arr.reshape(grid.shape))
    comps = arr.reshape((dim,) + grid.shape)
    return VectorField(grid, list(comps))


def _decode_meridional(data: bytes, dim: int, n_rho: int, P: float, off: int):
    from .meridional import MeridionalField, MeridionalGrid

    if dim != 2:
        raise FormatError(f"dim: meridional fields must have dim=2, found {dim}")
    if len(data) < off + _MERID.size:
        raise FormatError("extension: truncated meridional header")
    N, flags, n_z, Z = _MERID.unpack_from(data, off)
    off += _MERID.size
    if N < 3:
        raise FormatError(f"N: ambient dimension must be >= 3, found {N}")
    try:
        mg = MeridionalGrid(P=P, Z=Z, n_rho=n_rho, n_z=n_z, periodic_z=bool(flags & 1))
    except ValueError as exc:
        raise FormatError(f"extension: {exc}") from None
    narr = 3 if flags & 2 else 2
    n = narr * n_rho * n_z
    body = data[off:]
    if len(body) != 8 * n:
        raise FormatError(f"samples: expected {8 * n} bytes for meridional field, found {len(body)}")
    arr = np.frombuffer(body, dtype="<f8").astype(float).reshape(narr, n_rho, n_z)
    return MeridionalField(N, mg, arr[0], arr[1], arr[2] if narr == 3 else None)


def write(path, field) -> None:
    Path(path).write_bytes(encode(field))


def read(path):
    return decode(Path(path).read_bytes())
