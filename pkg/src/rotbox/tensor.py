"""Dense (C, H, W) float32 tensors: file format and the few ops the pyramid needs.

File format ("RBT1"): 4 magic bytes ``RBT1``, one u8 rank, ``rank`` u32
little-endian dims, then float32 little-endian values in row-major order.
All stored values must be finite.

``conv2d`` is zero-padded same-size cross-correlation with stride 1 (kernel
weights are not flipped).  Arithmetic is carried out in float64 and stored
back as float32.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError, ShapeError, ValidationError

MAGIC = b"RBT1"
MAX_RANK = 8


def write_tensor(path, array) -> None:
    arr = np.asarray(array)
    if arr.ndim == 0 or arr.ndim > MAX_RANK:
        raise ShapeError(f"tensor rank {arr.ndim} outside 1..{MAX_RANK}")
    if not np.isfinite(arr).all():
        raise ValidationError("refusing to write non-finite tensor values")
    data = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(data.tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 5:
        raise FormatError(f"{path}: truncated header")
    rank = blob[4]
    if rank == 0 or rank > MAX_RANK:
        raise FormatError(f"{path}: rank {rank} outside 1..{MAX_RANK}")
    header_end = 5 + 4 * rank
    if len(blob) < header_end:
        raise FormatError(f"{path}: truncated dims")
    dims = struct.unpack(f"<{rank}I", blob[5:header_end])
    count = 1
    for d in dims:
        count *= d
    expected = header_end + 4 * count
    if len(blob) != expected:
        raise FormatError(f"{path}: payload is {len(blob) - header_end} bytes, expected {4 * count}")
    arr = np.frombuffer(blob, dtype="<f4", offset=header_end).reshape(dims)
    if not np.isfinite(arr).all():
        raise FormatError(f"{path}: non-finite tensor values")
    return arr.astype(np.float32)


def _as_chw(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 3:
        raise ShapeError(f"expected (C, H, W) tensor, got shape {arr.shape}")
    return arr


def conv2d(x, kernel, bias=None) -> np.ndarray:
    """Same-size stride-1 cross-correlation of (C,H,W) by (Cout,Cin,kh,kw)."""
    x = _as_chw(x)
    k = np.asarray(kernel)
    if k.ndim != 4:
        raise ShapeError(f"expected (Cout, Cin, kh, kw) kernel, got shape {k.shape}")
    cin, h, w = x.shape
    cout, kcin, kh, kw = k.shape
    if kcin != cin:
        raise ShapeError(f"kernel expects {kcin} input channels, feature map has {cin}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"same-size conv needs odd kernel sides, got {kh}x{kw}")
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (cout,):
            raise ShapeError(f"bias shape {bias.shape} != ({cout},)")
    xp = np.pad(x.astype(np.float64), ((0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    cols = win.transpose(1, 2, 0, 3, 4).reshape(h * w, cin * kh * kw)
    kmat = k.astype(np.float64).reshape(cout, cin * kh * kw)
    out = cols @ kmat.T
    if bias is not None:
        out = out + bias[None, :]
    return out.T.reshape(cout, h, w).astype(np.float32)


def upsample_nearest(x, factor: int) -> np.ndarray:
    """Nearest-neighbor spatial upsampling by an integer factor."""
    x = _as_chw(x)
    factor = int(factor)
    if factor < 1:
        raise ValidationError(f"upsample factor {factor} must be >= 1")
    if factor == 1:
        return x.astype(np.float32)
    return np.repeat(np.repeat(x, factor, axis=1), factor, axis=2).astype(np.float32)


def max_downsample2(x) -> np.ndarray:
    """2x2 stride-2 max pooling; odd trailing rows/cols are edge-padded."""
    x = _as_chw(x)
    c, h, w = x.shape
    if h % 2 or w % 2:
        x = np.pad(x, ((0, 0), (0, h % 2), (0, w % 2)), mode="edge")
        h, w = x.shape[1], x.shape[2]
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4)).astype(np.float32)
