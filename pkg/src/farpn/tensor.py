"""Feature maps: a dense ``H x W x C`` grid with an image-to-feature stride.

Cell ``(row, col)`` sits at feature coordinate ``(x=col, y=row)``, which is image
position ``(col * stride, row * stride)``. Sampling outside the grid reads zeros.

On disk a map is stored in the FARP format::

    b"FARP" | u32 version=1 | u32 height | u32 width | u32 channels | f32 stride
    | height*width*channels little-endian f32, row-major, channel-fastest
"""
from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"FARP"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIf")
# 2**31 f32 values is 8 GiB, far past anything this library produces.
MAX_ELEMENTS = 2**31


class TensorFormatError(ValueError):
    pass


class BadMagicError(TensorFormatError):
    pass


class TruncatedError(TensorFormatError):
    pass


class DimensionOverflowError(TensorFormatError):
    pass


@dataclass(frozen=True, eq=False)
class FeatureMap:
    data: np.ndarray
    stride: float = 16.0

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"feature map data must be 3-D (H, W, C), got shape {self.data.shape}")
        if not self.stride > 0:
            raise ValueError("stride must be positive")
        if not np.issubdtype(self.data.dtype, np.floating):
            object.__setattr__(self, "data", self.data.astype(np.float64))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @classmethod
    def zeros(cls, height: int, width: int, channels: int, stride: float = 16.0, dtype=np.float64):
        return cls(np.zeros((height, width, channels), dtype=dtype), stride)

    def __eq__(self, other):
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return (
            self.stride == other.stride
            and self.data.shape == other.data.shape
            and self.data.dtype == other.data.dtype
            and self.data.tobytes() == other.data.tobytes()
        )

    __hash__ = None


def bilinear_sample(fmap: FeatureMap, x: float, y: float, channel: int) -> float:
    """Interpolate ``channel`` at feature coordinates ``(x, y)`` with zero padding."""
    if not 0 <= channel < fmap.channels:
        raise IndexError(f"channel {channel} out of range for {fmap.channels} channels")
    x0 = math.floor(x)
    y0 = math.floor(y)
    fx = x - x0
    fy = y - y0
    total = 0.0
    for yy, wy in ((y0, 1.0 - fy), (y0 + 1, fy)):
        if wy == 0.0 or not 0 <= yy < fmap.height:
            continue
        for xx, wx in ((x0, 1.0 - fx), (x0 + 1, fx)):
            if wx == 0.0 or not 0 <= xx < fmap.width:
                continue
            total += wy * wx * float(fmap.data[yy, xx, channel])
    return total


def write_tensor(fmap: FeatureMap, path) -> None:
    """Write ``fmap`` as FARP. Values are stored as f32."""
    data = np.ascontiguousarray(fmap.data, dtype="<f4")
    if not np.isfinite(data).all():
        raise ValueError("feature map contains non-finite values")
    header = _HEADER.pack(MAGIC, VERSION, fmap.height, fmap.width, fmap.channels, fmap.stride)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def parse_tensor(buf: bytes) -> FeatureMap:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError("bad magic")
    if len(buf) < _HEADER.size:
        raise TruncatedError("truncated header")
    _, version, height, width, channels, stride = _HEADER.unpack_from(buf)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    count = height * width * channels
    if count > MAX_ELEMENTS:
        raise DimensionOverflowError(f"dimension overflow: {height}x{width}x{channels}")
    if not (math.isfinite(stride) and stride > 0):
        raise TensorFormatError(f"invalid stride {stride}")
    payload = len(buf) - _HEADER.size
    if payload < 4 * count:
        raise TruncatedError(f"truncated payload: expected {4 * count} bytes, found {payload}")
    if payload > 4 * count:
        raise TensorFormatError(f"{payload - 4 * count} trailing bytes after payload")
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=_HEADER.size)
    return FeatureMap(data.astype(np.float32).reshape(height, width, channels), float(stride))


def read_tensor(path: str | os.PathLike) -> FeatureMap:
    with open(path, "rb") as fh:
        return parse_tensor(fh.read())
