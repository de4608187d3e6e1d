"""Binary container for maps, RF data, masks and ensembles.

Layout (all little-endian)::

    magic     4 bytes  b"USIR"
    version   u16      1
    kind      u16      1 image, 2 RF, 3 mask, 4 ensemble
    dims      u32 x 2  (kinds 1-3) or u32 x 3 (kind 4)
    payload   f64 x prod(dims), row-major
    crc32     u32      zlib CRC-32 of the payload bytes

Images and masks are ``(depth, width)``; RF data is ``(K, L)`` so column ``j``
is element ``j``'s trace; ensembles are ``(C, depth, width)``.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .grid import EchogenicityMap, ImageGrid, ReflectivityMap, RegionMask, RFChannelData

MAGIC = b"USIR"
FORMAT_VERSION = 1


class Kind(IntEnum):
    IMAGE = 1
    RF = 2
    MASK = 3
    ENSEMBLE = 4


class ContainerError(Exception):
    pass


class BadMagicError(ContainerError):
    pass


class ChecksumError(ContainerError):
    """CRC mismatch, which includes truncated files."""


class ShapeError(ContainerError):
    pass


class HeaderError(ContainerError):
    pass


@dataclass(frozen=True)
class Container:
    kind: Kind
    data: np.ndarray


def _ndims(kind: Kind) -> int:
    return 3 if kind == Kind.ENSEMBLE else 2


def encode(kind: int, data: np.ndarray) -> bytes:
    kind = Kind(kind)
    arr = np.asarray(data, dtype="<f8")
    if arr.ndim != _ndims(kind):
        raise ShapeError(f"kind {kind.name} needs {_ndims(kind)} dims, got array of shape {arr.shape}")
    if any(d >= 2**32 for d in arr.shape):
        raise ShapeError("dimension does not fit in u32")
    payload = np.ascontiguousarray(arr).tobytes()
    header = MAGIC + struct.pack("<HH", FORMAT_VERSION, int(kind)) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


def decode(blob: bytes) -> Container:
    if len(blob) < 8:
        if not MAGIC.startswith(blob[:4]):
            raise BadMagicError("not a USIR container")
        raise ChecksumError("file truncated inside the header")
    if blob[:4] != MAGIC:
        raise BadMagicError(f"bad magic {blob[:4]!r}")
    version, kind = struct.unpack_from("<HH", blob, 4)
    if version != FORMAT_VERSION:
        raise HeaderError(f"unsupported format version {version}")
    try:
        kind = Kind(kind)
    except ValueError:
        raise HeaderError(f"unknown container kind {kind}") from None
    nd = _ndims(kind)
    head = 8 + 4 * nd
    if len(blob) < head + 4:
        raise ChecksumError("file truncated inside the header")
    dims = struct.unpack_from(f"<{nd}I", blob, 8)
    payload = blob[head:-4]
    (crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise ChecksumError("payload CRC-32 mismatch")
    expected = 8 * int(np.prod(dims, dtype=np.int64))
    if len(payload) != expected:
        raise ShapeError(f"payload holds {len(payload)} bytes, dims {dims} need {expected}")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    return Container(kind, data)


def write_container(path: str | os.PathLike, kind: int, data: np.ndarray) -> None:
    blob = encode(kind, data)
    with open(path, "wb") as fh:
        fh.write(blob)


def read_container(path: str | os.PathLike) -> Container:
    with open(path, "rb") as fh:
        return decode(fh.read())


# typed helpers


def write_map(path, img: ReflectivityMap | EchogenicityMap) -> None:
    write_container(path, Kind.IMAGE, img.image())


def write_mask(path, mask: RegionMask) -> None:
    write_container(path, Kind.MASK, mask.member.reshape(mask.grid.shape).astype(float))


def write_rf(path, y: RFChannelData) -> None:
    write_container(path, Kind.RF, y.traces().T)


def write_ensemble(path, stack: np.ndarray, grid: ImageGrid) -> None:
    write_container(path, Kind.ENSEMBLE, np.asarray(stack).reshape(-1, *grid.shape))


def _expect(c: Container, kind: Kind) -> np.ndarray:
    if c.kind != kind:
        raise HeaderError(f"expected a {kind.name} container, found {c.kind.name}")
    return c.data


def _check_grid(data: np.ndarray, grid: ImageGrid) -> None:
    if data.shape[-2:] != grid.shape:
        raise ShapeError(f"container dims {data.shape[-2:]} do not match grid {grid.shape}")


def read_map(path, grid: ImageGrid) -> ReflectivityMap:
    data = _expect(read_container(path), Kind.IMAGE)
    _check_grid(data, grid)
    return ReflectivityMap(grid, data.reshape(-1))


def read_mask(path, grid: ImageGrid) -> RegionMask:
    data = _expect(read_container(path), Kind.MASK)
    _check_grid(data, grid)
    return RegionMask(grid, data.reshape(-1) != 0)


def read_rf(path, sampling_rate_hz: float) -> RFChannelData:
    data = _expect(read_container(path), Kind.RF)
    K, L = data.shape
    return RFChannelData(L, K, sampling_rate_hz, data.T.reshape(-1))


def read_ensemble(path, grid: ImageGrid) -> np.ndarray:
    data = _expect(read_container(path), Kind.ENSEMBLE)
    _check_grid(data, grid)
    return data.reshape(data.shape[0], -1)
