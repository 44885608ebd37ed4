"""End-to-end chains: denoise, propagate, suppress, compare with a reference."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

from .artifacts import suppress_artifacts
from .config import ConfidenceConfig
from .confidence import propagate
from .denoise import denoise as denoise_image
from .evaluation import DEFAULT_CLOSENESS, DEFAULT_MARGIN, EvalReport, PatchSpec, check_orderings
from .grid import ImageGrid, ProbMask
from .phantom import PhantomSpec, generate
from .structural import ReferenceMap, build_reference, propagate_truncated, structural_map


def prepare(image, cfg: ConfidenceConfig, denoise: bool = True) -> ImageGrid:
    return denoise_image(image, cfg.denoise) if denoise else image


def intensity_confidence(image, cfg: ConfidenceConfig = ConfidenceConfig(),
                         mask: Optional[ProbMask] = None, denoise: bool = True) -> ImageGrid:
    """Final intensity confidence, artifact-suppressed when a mask is given."""
    conf = propagate(prepare(image, cfg, denoise), cfg, mask)
    return suppress_artifacts(conf, mask) if mask is not None else conf


def reference(phantom, cfg: ConfidenceConfig = ConfidenceConfig(),
              denoise: bool = True) -> ReferenceMap:
    return build_reference(prepare(phantom, cfg, denoise), cfg)


def structural_confidence(image, ref: ReferenceMap, cfg: ConfidenceConfig = ConfidenceConfig(),
                          mask: Optional[ProbMask] = None, denoise: bool = True) -> ImageGrid:
    adjusted = propagate_truncated(prepare(image, cfg, denoise), ref, cfg, mask)
    return structural_map(adjusted, ref)


@dataclass
class PhantomRun:
    image: ImageGrid
    mask: ProbMask
    patches: List[PatchSpec]
    intensity: ImageGrid
    structural: ImageGrid
    reference: ReferenceMap
    report: EvalReport


def run_phantom(spec: PhantomSpec, cfg: ConfidenceConfig = ConfidenceConfig(),
                use_masks: bool = False, margin: float = DEFAULT_MARGIN,
                closeness: float = DEFAULT_CLOSENESS) -> PhantomRun:
    """Full pipeline on a synthetic phantom, scored on its own patches.

    The reference comes from the same medium without structures and with an
    independent speckle draw.  Masks are ground truth from the generator and
    only used when ``use_masks`` is set.
    """
    image, mask, patches = generate(spec)
    empty, _, _ = generate(spec.empty())
    ref = reference(empty, cfg)
    m = mask if use_masks else None
    denoised = prepare(image, cfg)
    intensity = propagate(denoised, cfg, m)
    if m is not None:
        intensity = suppress_artifacts(intensity, m)
    structural = structural_map(propagate_truncated(denoised, ref, cfg, m), ref)
    report = check_orderings(intensity, structural, patches, margin, closeness)
    return PhantomRun(image, mask, patches, intensity, structural, ref, report)
