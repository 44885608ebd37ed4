"""Reading and writing grids.

Images come in as binary PGM (P5) or grayscale PNG, 8 or 16 bit, and are
normalised to ``[0, 1]`` by the format's maximum value.  Maps go out as

``raw_f32``
    8-byte header (height, width as little-endian uint32) followed by
    row-major little-endian float32 samples.
``png16``
    16-bit grayscale PNG, ``round(v * 65535)``.
``csv``
    one line per grid row, comma separated, ``repr`` precision.
"""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .grid import INTENSITY, UNCONSTRAINED, GridError, ImageGrid, values

IMAGE_FORMATS = ("pgm", "png")
MAP_FORMATS = ("raw_f32", "png16", "csv")

_RAW_HEADER = struct.Struct("<II")
_PGM_HEADER = re.compile(rb"\AP5(?:\s+|#[^\n]*\n)+")
_PGM_TOKEN = re.compile(rb"(\d+)(?:\s|#[^\n]*\n)")


class ImageFormatError(ValueError):
    """The file exists but does not hold a supported grayscale image."""


def format_from_suffix(path) -> str:
    suffix = Path(path).suffix.lower()
    return {
        ".pgm": "pgm",
        ".png": "png",
        ".raw": "raw_f32",
        ".f32": "raw_f32",
        ".csv": "csv",
    }.get(suffix, "")


def _read_pgm(blob: bytes) -> tuple[np.ndarray, int]:
    m = _PGM_HEADER.match(blob)
    if not m:
        raise ImageFormatError("not a binary (P5) PGM file")
    pos = m.end()
    fields = []
    while len(fields) < 3:
        # header comments may sit between any two tokens
        while blob[pos:pos + 1] == b"#":
            pos = blob.index(b"\n", pos) + 1
        while blob[pos:pos + 1].isspace():
            pos += 1
        tok = _PGM_TOKEN.match(blob, pos)
        if not tok:
            raise ImageFormatError("truncated PGM header")
        fields.append(int(tok.group(1)))
        pos = tok.end()
    width, height, maxval = fields
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"PGM maxval {maxval} out of range")
    dtype = ">u1" if maxval < 256 else ">u2"
    count = width * height
    if len(blob) - pos < count * np.dtype(dtype).itemsize:
        raise ImageFormatError("truncated PGM pixel data")
    raw = np.frombuffer(blob, dtype=dtype, count=count, offset=pos)
    return raw.reshape(height, width), maxval


def _read_png(path: Path) -> tuple[np.ndarray, int]:
    with Image.open(path) as im:
        if im.format != "PNG":
            raise ImageFormatError(f"{path} is not a PNG file")
        mode = im.mode
        if mode == "L":
            return np.asarray(im), 255
        if mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im)
            if arr.dtype.itemsize > 2 and arr.size and (arr.min() < 0 or arr.max() > 65535):
                raise ImageFormatError(f"{path}: samples exceed 16 bits")
            return arr, 65535
    raise ImageFormatError(f"{path}: unsupported PNG mode {mode!r}; need 8/16-bit grayscale")


def load_image(path, format: str | None = None) -> ImageGrid:
    """Load a grayscale PGM or PNG as an intensity grid in ``[0, 1]``.

    ``format`` defaults to the file suffix.  Raises :class:`OSError` when the
    file cannot be read and :class:`ImageFormatError` / :class:`GridError`
    when it decodes to something other than a >= 2x2 grayscale image.
    """
    path = Path(path)
    fmt = format or format_from_suffix(path)
    if fmt == "pgm":
        raw, maxval = _read_pgm(path.read_bytes())
    elif fmt == "png":
        raw, maxval = _read_png(path)
    else:
        raise ImageFormatError(f"unsupported image format {fmt!r} for {path}")
    return ImageGrid(np.asarray(raw, dtype=np.float64) / maxval, INTENSITY)


def save_map(grid, path, format: str | None = None) -> None:
    """Write ``grid`` as ``raw_f32``, ``png16`` or ``csv`` (default: by suffix)."""
    path = Path(path)
    fmt = format or {"raw_f32": "raw_f32", "png": "png16", "csv": "csv"}.get(
        format_from_suffix(path), ""
    )
    arr = values(grid)
    if fmt == "raw_f32":
        h, w = arr.shape
        with open(path, "wb") as fh:
            fh.write(_RAW_HEADER.pack(h, w))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    elif fmt == "png16":
        if arr.min() < 0 or arr.max() > 1:
            raise GridError("png16 output needs samples in [0, 1]")
        q = np.round(arr * 65535.0).astype(np.uint16)
        Image.fromarray(q).save(path, format="PNG")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in arr:
                fh.write(",".join(repr(float(v)) for v in row))
                fh.write("\n")
    else:
        raise ValueError(f"unsupported map format {fmt!r} for {path}")


def read_raw_f32(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _RAW_HEADER.size:
        raise ImageFormatError(f"{path}: truncated raw_f32 header")
    h, w = _RAW_HEADER.unpack_from(blob)
    body = blob[_RAW_HEADER.size:]
    if len(body) != 4 * h * w:
        raise ImageFormatError(
            f"{path}: header says {h}x{w} but body holds {len(body) // 4} samples"
        )
    return np.frombuffer(body, dtype="<f4").reshape(h, w)


def load_map(path, value_domain: str = UNCONSTRAINED, format: str | None = None) -> ImageGrid:
    """Load any supported grid file: ``raw_f32``, ``csv``, or a PGM/PNG image."""
    path = Path(path)
    fmt = format or format_from_suffix(path)
    if fmt == "raw_f32":
        arr = read_raw_f32(path)
    elif fmt == "csv":
        try:
            arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise ImageFormatError(f"{path}: {exc}") from None
    elif fmt in IMAGE_FORMATS:
        return load_image(path, fmt).with_domain(value_domain)
    else:
        raise ImageFormatError(f"cannot infer grid format of {path}")
    return ImageGrid(arr, value_domain)
