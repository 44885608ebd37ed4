"""Row-by-row confidence propagation through a directed acyclic graph.

Every pixel of row ``i`` feeds the pixels of row ``i + 1`` that lie within
``kappa`` columns of it.  The edge from ``(i, j)`` to ``(i + 1, j + d)``
carries the weight

    w(i, j, d) = exp(-gamma * g(i, j, d)**beta * exp(-alpha * (i + 1) / h))

where ``g`` is the image gradient along the edge divided by the mean
gradient of the row pair in the same direction.  A pixel's confidence is the
stencil-weighted sum of the confidences upstream of it, each multiplied by
the weight of the edge that reaches it:

    C(i + 1, j) = sum_k psi(k) * w(i, j + k, -k) * C(i, j + k),   C(0, .) = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import ndtr

from .config import AS_PRINTED, CONSISTENT, ConfidenceConfig, ConfigError
from .grid import CONFIDENCE, ImageGrid, ProbMask, clipped, values


@dataclass(frozen=True)
class StencilWeights:
    """Lateral diffraction stencil; ``weights[k + kappa]`` is psi(k)."""

    kappa: int
    weights: np.ndarray

    def __getitem__(self, k: int) -> float:
        if abs(k) > self.kappa:
            raise IndexError(k)
        return float(self.weights[k + self.kappa])


def make_stencil(kappa: int, sigma: float) -> StencilWeights:
    """Discretised normal stencil whose tails are folded into the outermost taps."""
    if int(kappa) != kappa or kappa < 0:
        raise ConfigError(f"kappa must be an integer >= 0, got {kappa}")
    if not sigma > 0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")
    kappa = int(kappa)
    if kappa == 0:
        return StencilWeights(0, np.ones(1))
    k = np.arange(-kappa + 1, kappa)
    inner = ndtr((k + 0.5) / sigma) - ndtr((k - 0.5) / sigma)
    tail = (1.0 - inner.sum()) / 2.0
    w = np.concatenate(([tail], inner, [tail]))
    return StencilWeights(kappa, w)


@dataclass(frozen=True)
class RelativeGradientField:
    """Per-edge relative gradients.

    ``values[i, j, d + kappa]`` belongs to the edge from ``(i, j)`` to
    ``(i + 1, j + d)``; its shape is ``(h - 1, a, 2 * kappa + 1)``.  Entries
    whose target column falls outside the image do not correspond to an edge
    and hold the neutral value 1.
    """

    kappa: int
    values: np.ndarray

    @property
    def height(self) -> int:
        """Height of the image the field was computed from."""
        return self.values.shape[0] + 1

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _column_span(width: int, d: int) -> tuple[int, int]:
    """Source columns ``[lo, hi)`` whose direction-``d`` target stays in the image."""
    return max(0, -d), min(width, width - d)


def relative_gradient(image, kappa: int, exclude: Optional[ProbMask] = None,
                      eps: float = 1e-6) -> RelativeGradientField:
    """Edge gradients normalised by their row pair's mean gradient.

    For direction ``d`` the mean runs over every source column ``k`` whose
    target ``k + d`` is inside the image.  With ``exclude``, pairs touching a
    reverberation pixel (probability > 0.5) are left out of the mean.  A
    slice whose mean is below ``eps`` (or that has nothing left to average)
    is set to 1 throughout.
    """
    img = values(image)
    h, a = img.shape
    if 2 * kappa + 1 > a:
        raise ConfigError(f"stencil width {2 * kappa + 1} exceeds image width {a}")
    if exclude is not None:
        exclude.check_shape(img.shape)
        keep = (~exclude.reverb_pixels()).astype(np.float64)
    else:
        keep = np.ones_like(img)
    top, bottom = img[:-1], img[1:]
    keep_top, keep_bottom = keep[:-1], keep[1:]
    g = np.ones((h - 1, a, 2 * kappa + 1))
    for d in range(-kappa, kappa + 1):
        lo, hi = _column_span(a, d)
        diff = np.abs(bottom[:, lo + d:hi + d] - top[:, lo:hi])
        pair = keep_top[:, lo:hi] * keep_bottom[:, lo + d:hi + d]
        count = pair.sum(axis=1)
        total = (diff * pair).sum(axis=1)
        mean = np.divide(total, count, out=np.zeros(h - 1), where=count > 0)
        ok = mean >= eps
        rel = np.ones_like(diff)
        np.divide(diff, mean[:, None], out=rel, where=ok[:, None])
        g[:, lo:hi, d + kappa] = rel
    return RelativeGradientField(kappa, g)


def beer_lambert_adjust(g: RelativeGradientField, alpha: float, beta: float,
                        h: Optional[int] = None) -> RelativeGradientField:
    """Scale ``g**beta`` on row ``i`` by ``exp(-alpha * (i + 1) / h)``."""
    if not (alpha > 0 and beta > 0):
        raise ConfigError(f"alpha and beta must be positive, got {alpha}, {beta}")
    h = g.height if h is None else h
    depth = np.exp(-alpha * np.arange(1, g.values.shape[0] + 1) / h)
    adj = np.power(g.values, beta) * depth[:, None, None]
    return RelativeGradientField(g.kappa, adj)


def gamma_coefficient(alpha: float, h: int, xi: float, sign: str = AS_PRINTED) -> float:
    """Attenuation scale chosen so a homogeneous image decays to ``xi``.

    ``as_printed`` normalises by ``sum_{i=1..h} exp(+alpha i / h)``.
    ``consistent`` normalises by ``sum_{i=1..h-1} exp(-alpha i / h)``, the
    depth factors of the ``h - 1`` edges a homogeneous image actually
    traverses, so its bottom row lands on ``xi`` exactly.
    """
    if not 0 < xi < 1:
        raise ConfigError(f"xi must be in (0, 1), got {xi}")
    if h < 2:
        raise ConfigError(f"h must be >= 2, got {h}")
    if sign == AS_PRINTED:
        norm = np.exp(alpha * np.arange(1, h + 1) / h).sum()
    elif sign == CONSISTENT:
        norm = np.exp(-alpha * np.arange(1, h) / h).sum()
    else:
        raise ConfigError(f"unknown calibration sign {sign!r}")
    return -math.log(xi) / float(norm)


def edge_weight(g_adj, gamma: float):
    """``exp(-gamma * g_adj)``; accepts scalars or arrays."""
    return np.exp(-gamma * np.asarray(g_adj, dtype=np.float64))


def transfer_matrix(weights: np.ndarray, stencil: StencilWeights) -> np.ndarray:
    """Fold stencil and edge weights into per-target tap coefficients.

    Returns ``T`` of shape ``(h - 1, a, 2 kappa + 1)`` with
    ``T[i, j, k + kappa] = psi(k) * w(i, j + k, -k) / norm(j)``, zero where
    ``j + k`` is outside the image.  ``norm(j)`` renormalises the surviving
    taps of border columns to sum to one.
    """
    kappa = stencil.kappa
    rows, a, _ = weights.shape
    psi = stencil.weights
    valid = np.zeros((a, 2 * kappa + 1))
    T = np.zeros_like(weights)
    for k in range(-kappa, kappa + 1):
        lo, hi = _column_span(a, k)  # targets j with source j + k in range
        valid[lo:hi, k + kappa] = psi[k + kappa]
        T[:, lo:hi, k + kappa] = psi[k + kappa] * weights[:, lo + k:hi + k, -k + kappa]
    T /= valid.sum(axis=1)[None, :, None]
    return T


def propagate_rows(T: np.ndarray, top: np.ndarray,
                   ceiling: Optional[np.ndarray] = None) -> np.ndarray:
    """Run the depth recursion from a given first row.

    ``ceiling[i]``, when given, caps every value of row ``i`` before it is
    propagated further down.
    """
    rows, a, taps = T.shape
    kappa = taps // 2
    out = np.empty((rows + 1, a))
    row = np.array(top, dtype=np.float64)
    if ceiling is not None:
        row = np.minimum(row, ceiling[0])
    out[0] = row
    padded = np.zeros(a + 2 * kappa)
    windows = sliding_window_view(padded, taps)
    for i in range(rows):
        padded[kappa:kappa + a] = row
        row = np.einsum("jk,jk->j", T[i], windows)
        if ceiling is not None:
            np.minimum(row, ceiling[i + 1], out=row)
        out[i + 1] = row
    return out


def edge_weights(image, cfg: ConfidenceConfig, mask: Optional[ProbMask] = None) -> np.ndarray:
    """Edge weights ``w(i, j, d)`` for ``image``, artifact overrides included."""
    from .artifacts import needle_edge_map, override_gradients

    img = values(image)
    cfg.check_width(img.shape[1])
    if mask is not None:
        mask.check_shape(img.shape)
    g = relative_gradient(img, cfg.kappa, mask, cfg.epsilon_mean)
    if mask is not None:
        g = override_gradients(g, img, mask, needle_edge_map(mask), cfg.epsilon_mean)
    adj = beer_lambert_adjust(g, cfg.alpha, cfg.beta, img.shape[0])
    gamma = gamma_coefficient(cfg.alpha, img.shape[0], cfg.xi, cfg.calibration_sign)
    return edge_weight(adj.values, gamma)


def propagate(image, cfg: ConfidenceConfig = ConfidenceConfig(),
              mask: Optional[ProbMask] = None) -> ImageGrid:
    """Intensity confidence map of ``image`` (no denoising, no suppression)."""
    w = edge_weights(image, cfg, mask)
    T = transfer_matrix(w, make_stencil(cfg.kappa, cfg.sigma))
    conf = propagate_rows(T, np.ones(w.shape[1]))
    return clipped(conf, CONFIDENCE)


def homogeneous_bottom(h: int, cfg: ConfidenceConfig) -> float:
    """Closed-form bottom-row confidence of a perfectly homogeneous image."""
    gamma = gamma_coefficient(cfg.alpha, h, cfg.xi, cfg.calibration_sign)
    return math.exp(-gamma * sum(math.exp(-cfg.alpha * i / h) for i in range(1, h)))

