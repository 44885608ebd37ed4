"""Grid containers shared by every stage of the pipeline.

An :class:`ImageGrid` is an immutable row-major 2-D array of float64 samples
tagged with the value domain it lives in.  Images, confidence maps and masks
all travel as grids; a :class:`ProbMask` bundles the needle and
reverberation probability grids that accompany an image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

INTENSITY = "intensity"
CONFIDENCE = "confidence"
PROBABILITY = "probability"
UNCONSTRAINED = "unconstrained"

VALUE_DOMAINS = (INTENSITY, CONFIDENCE, PROBABILITY, UNCONSTRAINED)


class GridError(ValueError):
    """Raised for malformed grids: bad shape, non-finite or out-of-domain samples."""


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """Immutable 2-D grid of scalar samples.

    Parameters
    ----------
    data : array_like
        Samples, shape ``(height, width)``.  Copied to a read-only C-ordered
        float64 array.
    value_domain : str
        One of ``intensity``, ``confidence``, ``probability`` (all bounded to
        ``[0, 1]``) or ``unconstrained``.
    """

    data: np.ndarray
    value_domain: str = UNCONSTRAINED

    def __post_init__(self):
        if self.value_domain not in VALUE_DOMAINS:
            raise GridError(f"unknown value domain {self.value_domain!r}")
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2:
            raise GridError(f"grid must be 2-D, got shape {arr.shape}")
        h, w = arr.shape
        if h < 2 or w < 2:
            raise GridError(f"grid must be at least 2x2, got {h}x{w}")
        if not np.all(np.isfinite(arr)):
            raise GridError("grid contains NaN or infinite samples")
        if self.value_domain != UNCONSTRAINED and (arr.min() < 0.0 or arr.max() > 1.0):
            raise GridError(
                f"{self.value_domain} samples must lie in [0, 1], "
                f"got [{arr.min():.6g}, {arr.max():.6g}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def with_domain(self, value_domain: str) -> "ImageGrid":
        return ImageGrid(self.data, value_domain)

    def __repr__(self):
        return f"ImageGrid({self.height}x{self.width}, {self.value_domain})"


GridLike = Union[ImageGrid, np.ndarray]


def values(grid: GridLike) -> np.ndarray:
    """Return the float64 sample array behind ``grid`` without copying when possible."""
    if isinstance(grid, ImageGrid):
        return grid.data
    arr = np.asarray(grid, dtype=np.float64)
    if arr.ndim != 2:
        raise GridError(f"expected a 2-D grid, got shape {arr.shape}")
    return arr


def clipped(arr: np.ndarray, value_domain: str) -> ImageGrid:
    """Wrap ``arr`` as a bounded grid, absorbing round-off just outside ``[0, 1]``."""
    return ImageGrid(np.clip(arr, 0.0, 1.0), value_domain)


@dataclass(frozen=True, eq=False)
class ProbMask:
    """Needle and reverberation probability grids for one image.

    A pixel may be claimed by at most one class: where both grids are nonzero
    the larger probability is kept and the other is zeroed (ties go to the
    needle).
    """

    needle: ImageGrid
    reverb: ImageGrid

    def __post_init__(self):
        needle = values(self.needle)
        reverb = values(self.reverb)
        if needle.shape != reverb.shape:
            raise GridError(
                f"needle mask {needle.shape} and reverb mask {reverb.shape} differ in shape"
            )
        both = (needle > 0) & (reverb > 0)
        if both.any():
            keep_needle = needle >= reverb
            needle = np.where(both & ~keep_needle, 0.0, needle)
            reverb = np.where(both & keep_needle, 0.0, reverb)
        object.__setattr__(self, "needle", ImageGrid(needle, PROBABILITY))
        object.__setattr__(self, "reverb", ImageGrid(reverb, PROBABILITY))

    @classmethod
    def empty(cls, shape: tuple[int, int]) -> "ProbMask":
        return cls(np.zeros(shape), np.zeros(shape))

    @property
    def shape(self) -> tuple[int, int]:
        return self.needle.shape

    def check_shape(self, shape: tuple[int, int]) -> None:
        if tuple(shape) != self.shape:
            raise GridError(f"mask shape {self.shape} does not match image shape {tuple(shape)}")

    def needle_pixels(self) -> np.ndarray:
        return self.needle.data > 0.5

    def reverb_pixels(self) -> np.ndarray:
        return self.reverb.data > 0.5
