"""Structural confidence against a structure-free reference.

A reference map ``R`` is the confidence of an empty phantom acquired with
the same system settings; its per-row maxima bound how much confidence any
real image can hold at each depth.  Propagating an image while capping
every row at that bound gives the adjusted map ``C'``, and the ratio
``C' / R`` separates true boundaries from shadows and artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .config import ConfidenceConfig
from .confidence import edge_weights, make_stencil, propagate, propagate_rows, transfer_matrix
from .grid import CONFIDENCE, GridError, ImageGrid, ProbMask, clipped, values


@dataclass(frozen=True, eq=False)
class ReferenceMap:
    map: ImageGrid
    row_max: np.ndarray

    def __post_init__(self):
        rm = np.array(self.row_max, dtype=np.float64)
        if rm.shape != (self.map.height,):
            raise GridError(f"row_max has shape {rm.shape}, expected ({self.map.height},)")
        rm.setflags(write=False)
        object.__setattr__(self, "row_max", rm)

    @classmethod
    def from_map(cls, conf) -> "ReferenceMap":
        grid = conf if isinstance(conf, ImageGrid) else ImageGrid(conf, CONFIDENCE)
        return cls(grid, grid.data.max(axis=1))

    @property
    def height(self) -> int:
        return self.map.height

    def check_height(self, h: int) -> None:
        if h != self.height:
            raise GridError(f"image height {h} does not match reference height {self.height}")


def build_reference(phantom, cfg: ConfidenceConfig = ConfidenceConfig()) -> ReferenceMap:
    """Reference map of a structure-free phantom image."""
    return ReferenceMap.from_map(propagate(phantom, cfg))


def mean_frame(frames: Sequence) -> ImageGrid:
    """Average several phantom frames of equal shape into one image."""
    stack = np.stack([values(f) for f in frames])
    return ImageGrid(stack.mean(axis=0), "intensity")


def propagate_truncated(image, ref: ReferenceMap, cfg: ConfidenceConfig = ConfidenceConfig(),
                        mask: Optional[ProbMask] = None) -> ImageGrid:
    """Confidence propagation capped row by row at the reference's row maxima."""
    img = values(image)
    ref.check_height(img.shape[0])
    w = edge_weights(img, cfg, mask)
    T = transfer_matrix(w, make_stencil(cfg.kappa, cfg.sigma))
    conf = propagate_rows(T, np.ones(img.shape[1]), ceiling=ref.row_max)
    return clipped(conf, CONFIDENCE)


def structural_map(adjusted, ref: ReferenceMap) -> ImageGrid:
    """Pointwise ratio ``C' / R`` clamped to ``[0, 1]`` (1 where ``R`` underflowed to 0)."""
    c = values(adjusted)
    r = ref.map.data
    if c.shape != r.shape:
        raise GridError(f"adjusted map {c.shape} and reference {r.shape} differ in shape")
    ratio = np.divide(c, r, out=np.ones_like(c), where=r > 0)
    return ImageGrid(np.clip(ratio, 0.0, 1.0), CONFIDENCE)


def save_reference(ref: ReferenceMap, path) -> None:
    """Persist as ``raw_f32``: the map with ``row_max`` appended as a last column."""
    grid = np.column_stack([ref.map.data, ref.row_max])
    io.save_map(grid, path, "raw_f32")


def load_reference(path) -> ReferenceMap:
    arr = io.read_raw_f32(Path(path)).astype(np.float64)
    return ReferenceMap(ImageGrid(arr[:, :-1], CONFIDENCE), arr[:, -1])
