"""Needle and reverberation handling.

Needles attenuate far more than tissue, so the boundary pixels of a needle
get the largest relative gradient the image can produce and its interior a
neutral one.  Reverberation pixels are echoes rather than tissue: they are
neutral for attenuation and have their confidence suppressed at the end.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .confidence import RelativeGradientField
from .grid import CONFIDENCE, PROBABILITY, ImageGrid, ProbMask, clipped, values

_CROSS = ndimage.generate_binary_structure(2, 1)


def needle_edge_map(mask: ProbMask) -> ImageGrid:
    """Needle pixels with at least one 4-neighbour outside the needle.

    Pixels beyond the image border count as outside, so a needle touching
    the border is bounded there too.
    """
    needle = mask.needle_pixels()
    interior = ndimage.binary_erosion(needle, structure=_CROSS, border_value=0)
    return ImageGrid((needle & ~interior).astype(np.float64), PROBABILITY)


def override_gradients(g: RelativeGradientField, image, mask: ProbMask, edges,
                       eps: float = 1e-6) -> RelativeGradientField:
    """Replace relative gradients leaving needle and reverberation pixels.

    Needle boundary pixels get ``g_m / mean_i`` in every direction, with
    ``g_m`` the largest vertical gradient in the image and ``mean_i`` the
    plain mean vertical gradient of row pair ``i`` (floored at ``eps``).
    Other needle pixels and reverberation pixels get 1.
    """
    img = values(image)
    mask.check_shape(img.shape)
    needle = mask.needle_pixels()[:-1]
    reverb = mask.reverb_pixels()[:-1]
    edge = values(edges)[:-1] >= 0.5
    if not (needle.any() or reverb.any()):
        return g
    vert = np.abs(img[1:] - img[:-1])
    g_max = vert.max()
    row_mean = np.maximum(vert.mean(axis=1), eps)
    out = g.values.copy()
    out[(needle & ~edge) | reverb] = 1.0
    rows, cols = np.nonzero(needle & edge)
    out[rows, cols, :] = (g_max / row_mean[rows])[:, None]
    return RelativeGradientField(g.kappa, out)


def suppress_artifacts(conf, mask: ProbMask) -> ImageGrid:
    """Final map ``C * (1 - Seg)`` with ``Seg`` the reverberation probability."""
    c = values(conf)
    mask.check_shape(c.shape)
    return clipped(c * (1.0 - mask.reverb.data), CONFIDENCE)
