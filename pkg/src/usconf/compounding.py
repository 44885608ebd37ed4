"""Confidence-weighted fusion of two co-registered views."""

from __future__ import annotations

import numpy as np

from .grid import INTENSITY, GridError, clipped, values


def fuse(img_a, conf_a, img_b, conf_b, eps: float = 1e-9):
    """Per-pixel convex combination of two views weighted by their confidence.

    ``(ca * a + cb * b) / (ca + cb)``, falling back to the plain average
    where both confidences sum to less than ``eps``.
    """
    a, ca, b, cb = (values(x) for x in (img_a, conf_a, img_b, conf_b))
    if not (a.shape == ca.shape == b.shape == cb.shape):
        raise GridError(
            f"fuse needs equal shapes, got {a.shape}, {ca.shape}, {b.shape}, {cb.shape}"
        )
    total = ca + cb
    weighted = np.divide(ca * a + cb * b, total, out=np.zeros_like(a), where=total >= eps)
    out = np.where(total >= eps, weighted, 0.5 * (a + b))
    # keep the convex-combination bounds exact under round-off
    out = np.clip(out, np.minimum(a, b), np.maximum(a, b))
    return clipped(out, INTENSITY)
