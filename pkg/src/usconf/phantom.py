"""Deterministic synthetic B-mode phantoms with ground-truth masks and patches.

A phantom spec is a small text file::

    # comments start with '#'
    height = 128
    width = 128
    background = 0.5
    speckle_std = 0.13
    seed = 7
    reflector row=40 cols=44:84 intensity=0.95 drop=0.3 thickness=3
    vessel center=80,64 radii=10,16 wall=0.9 lumen=0.05 thickness=2
    needle row=30 cols=40:88 intensity=1.0 period=10 count=4 decay=0.8 drop=0.4 thickness=2
    detach cols=0:12

Header lines are ``key = value``; element lines start with the element kind
followed by ``name=value`` fields.  ``cols`` ranges are half-open
``start:stop``; ``thickness`` (rows) and the needle's ``drop`` are optional.

Rendering order: background, shadows below reflectors and needles
(multiplied by ``drop``), vessels, reflector bands, needles and their
reverberation copies every ``period`` rows with intensity decaying by
``decay`` per copy, detached columns, then multiplicative speckle
``I * (1 + speckle_std * n)`` clipped to ``[0, 1]``.  ``n`` is white
unit-variance normal noise, or, with ``speckle_corr = s > 0``, the same noise
smoothed by a Gaussian of ``s`` pixels and rescaled to unit variance, which
mimics speckle grains larger than one pixel.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from scipy import ndimage

from .evaluation import REVERBERATION, SHADOW, PatchSpec
from .grid import INTENSITY, ImageGrid, ProbMask

DETACHED_LEVEL = 0.02
PATCH_SIZE = 8
PATCH_WIDE = 16
PATCH_GAP = 3
ABOVE_GAP = 8

BUNDLED_SPECS = ("shadow-demo", "reverb-demo")


class PhantomSpecError(ValueError):
    """Malformed or out-of-bounds phantom description."""


@dataclass(frozen=True)
class Reflector:
    row: int
    cols: Tuple[int, int]
    intensity: float
    drop: float
    thickness: int = 3


@dataclass(frozen=True)
class Vessel:
    center: Tuple[int, int]
    radii: Tuple[int, int]
    wall: float
    lumen: float
    thickness: int = 2


@dataclass(frozen=True)
class Needle:
    row: int
    cols: Tuple[int, int]
    intensity: float
    period: int
    count: int
    decay: float
    drop: float = 0.5
    thickness: int = 2


@dataclass(frozen=True)
class Detach:
    cols: Tuple[int, int]


Element = Union[Reflector, Vessel, Needle, Detach]
_ELEMENTS = {"reflector": Reflector, "vessel": Vessel, "needle": Needle, "detach": Detach}


@dataclass(frozen=True)
class PhantomSpec:
    height: int
    width: int
    background: float = 0.5
    speckle_std: float = 0.0
    seed: int = 0
    speckle_corr: float = 0.0
    elements: Tuple[Element, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        h, w = self.height, self.width
        if h < 2 or w < 2:
            raise PhantomSpecError(f"phantom must be at least 2x2, got {h}x{w}")
        if not 0 <= self.background <= 1:
            raise PhantomSpecError(f"background {self.background} outside [0, 1]")
        if self.speckle_std < 0:
            raise PhantomSpecError(f"speckle_std must be >= 0, got {self.speckle_std}")
        if self.speckle_corr < 0:
            raise PhantomSpecError(f"speckle_corr must be >= 0, got {self.speckle_corr}")
        for el in self.elements:
            _validate_element(el, h, w)

    def empty(self, seed_offset: int = 1) -> "PhantomSpec":
        """Same medium without any structure, on an independent noise stream."""
        return dataclasses.replace(self, elements=(), seed=self.seed + seed_offset)


def _in_unit(el, *names):
    for n in names:
        v = getattr(el, n)
        if not 0 <= v <= 1:
            raise PhantomSpecError(f"{type(el).__name__.lower()} {n}={v} outside [0, 1]")


def _check_cols(cols, w, what):
    c0, c1 = cols
    if not 0 <= c0 < c1 <= w:
        raise PhantomSpecError(f"{what} cols {c0}:{c1} outside image width {w}")


def _validate_element(el, h, w):
    if isinstance(el, Reflector):
        _check_cols(el.cols, w, "reflector")
        _in_unit(el, "intensity", "drop")
        if el.thickness < 1 or not 0 <= el.row or el.row + el.thickness > h:
            raise PhantomSpecError(f"reflector rows {el.row}+{el.thickness} outside height {h}")
    elif isinstance(el, Needle):
        _check_cols(el.cols, w, "needle")
        _in_unit(el, "intensity", "drop", "decay")
        if el.thickness < 1 or not 0 <= el.row or el.row + el.thickness > h:
            raise PhantomSpecError(f"needle rows {el.row}+{el.thickness} outside height {h}")
        if el.period < 1 or el.count < 0:
            raise PhantomSpecError("needle period must be >= 1 and count >= 0")
        if el.row + el.count * el.period + el.thickness > h:
            raise PhantomSpecError("needle reverberation train runs past the bottom of the image")
    elif isinstance(el, Vessel):
        _in_unit(el, "wall", "lumen")
        (cr, cc), (rr, rc) = el.center, el.radii
        if rr < 1 or rc < 1 or el.thickness < 1:
            raise PhantomSpecError("vessel radii and thickness must be >= 1")
        if cr - rr < 0 or cr + rr >= h or cc - rc < 0 or cc + rc >= w:
            raise PhantomSpecError(f"vessel at {el.center} with radii {el.radii} leaves the image")
    elif isinstance(el, Detach):
        _check_cols(el.cols, w, "detach")
    else:
        raise PhantomSpecError(f"unknown element {el!r}")


# -- text format -----------------------------------------------------------

_HEADER = {
    "height": int,
    "width": int,
    "background": float,
    "speckle_std": float,
    "seed": int,
    "speckle_corr": float,
}


def _parse_field(kind: str, name: str, raw: str):
    if name == "cols":
        a, sep, b = raw.partition(":")
        if not sep:
            raise PhantomSpecError(f"{kind} cols must be start:stop, got {raw!r}")
        return int(a), int(b)
    if name in ("center", "radii"):
        parts = raw.split(",")
        if len(parts) != 2:
            raise PhantomSpecError(f"{kind} {name} must be two comma-separated integers")
        return int(parts[0]), int(parts[1])
    if name in ("row", "period", "count", "thickness"):
        return int(raw)
    return float(raw)


def parse_spec(text: str) -> PhantomSpec:
    header, elements = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if "=" in line and line.split("=", 1)[0].strip() in _HEADER:
                key, raw = (s.strip() for s in line.split("=", 1))
                header[key] = _HEADER[key](raw)
                continue
            kind, *fields = line.split()
            if kind not in _ELEMENTS:
                raise PhantomSpecError(f"unknown element or key {kind!r}")
            cls = _ELEMENTS[kind]
            known = {f.name for f in dataclasses.fields(cls)}
            kwargs = {}
            for item in fields:
                name, sep, raw = item.partition("=")
                if not sep or name not in known:
                    raise PhantomSpecError(f"bad {kind} field {item!r}")
                kwargs[name] = _parse_field(kind, name, raw)
            elements.append(cls(**kwargs))
        except PhantomSpecError as exc:
            raise PhantomSpecError(f"line {lineno}: {exc}") from None
        except (TypeError, ValueError) as exc:
            raise PhantomSpecError(f"line {lineno}: {exc}") from None
    missing = {"height", "width"} - header.keys()
    if missing:
        raise PhantomSpecError(f"missing header keys: {', '.join(sorted(missing))}")
    return PhantomSpec(elements=tuple(elements), **header)


def format_spec(spec: PhantomSpec) -> str:
    lines = [f"{k} = {getattr(spec, k)}" for k in _HEADER]
    names = {v: k for k, v in _ELEMENTS.items()}
    for el in spec.elements:
        parts = [names[type(el)]]
        for f in dataclasses.fields(el):
            v = getattr(el, f.name)
            if f.name == "cols":
                v = f"{v[0]}:{v[1]}"
            elif isinstance(v, tuple):
                v = f"{v[0]},{v[1]}"
            parts.append(f"{f.name}={v}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def load_spec(name_or_path) -> PhantomSpec:
    """Read a spec file, or one of the bundled specs by name."""
    name = str(name_or_path)
    stem = name[:-5] if name.endswith(".spec") else name
    if stem in BUNDLED_SPECS and not Path(name).exists():
        text = resources.files("usconf").joinpath("data", f"{stem}.spec").read_text("utf-8")
    else:
        text = Path(name).read_text(encoding="utf-8")
    return parse_spec(text)


# -- rendering -------------------------------------------------------------

def _centered(c0: int, c1: int, size: int) -> Tuple[int, int]:
    size = max(1, min(size, c1 - c0))
    mid = (c0 + c1) // 2
    start = mid - size // 2
    return start, start + size


def _lateral(c0: int, c1: int, width: int, size: int):
    """Columns for a patch beside ``[c0, c1)``, centred in the wider free side."""
    left, right = c0, width - c1
    if max(left, right) < size:
        return None
    if right >= left:
        return _centered(c1, width, size)
    return _centered(0, c0, size)


def _patches_for(el, h: int, w: int) -> List[PatchSpec]:
    c0, c1 = el.cols
    pc0, pc1 = _centered(c0, c1, PATCH_SIZE)
    ac0, ac1 = _centered(c0, c1, PATCH_WIDE)
    top = el.row - ABOVE_GAP
    if isinstance(el, Needle):
        kind = REVERBERATION
        if el.count == 0:
            return []
        b0 = el.row + el.period
        b1 = el.row + el.count * el.period + el.thickness
    else:
        kind = SHADOW
        b0 = el.row + el.thickness + PATCH_GAP
        b1 = min(h, b0 + PATCH_SIZE)
    if top - PATCH_SIZE < 0 or b1 <= b0 or b1 > h:
        return []
    side = _lateral(c0, c1, w, PATCH_WIDE)
    if side is None:
        return []
    return [
        PatchSpec("A", kind, (top - PATCH_SIZE, ac0, top, ac1)),
        PatchSpec("B", kind, (b0, pc0, b1, pc1)),
        PatchSpec("C", kind, (b0, side[0], b1, side[1])),
    ]


def render(spec: PhantomSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Noise-free image plus needle and reverberation masks."""
    h, w = spec.height, spec.width
    img = np.full((h, w), spec.background, dtype=np.float64)
    needle = np.zeros((h, w))
    reverb = np.zeros((h, w))

    for el in spec.elements:
        if isinstance(el, (Reflector, Needle)):
            c0, c1 = el.cols
            img[el.row + el.thickness:, c0:c1] *= el.drop

    rows, cols = np.mgrid[0:h, 0:w]
    for el in spec.elements:
        if isinstance(el, Vessel):
            (cr, cc), (rr, rc) = el.center, el.radii
            outer = ((rows - cr) / rr) ** 2 + ((cols - cc) / rc) ** 2 <= 1.0
            ir, ic = max(rr - el.thickness, 0.5), max(rc - el.thickness, 0.5)
            inner = ((rows - cr) / ir) ** 2 + ((cols - cc) / ic) ** 2 <= 1.0
            img[outer] = el.wall
            img[inner] = el.lumen

    for el in spec.elements:
        if isinstance(el, Reflector):
            c0, c1 = el.cols
            img[el.row:el.row + el.thickness, c0:c1] = el.intensity

    for el in spec.elements:
        if isinstance(el, Needle):
            c0, c1 = el.cols
            band = slice(el.row, el.row + el.thickness)
            img[band, c0:c1] = el.intensity
            needle[band, c0:c1] = 1.0
            for m in range(1, el.count + 1):
                r = el.row + m * el.period
                echo = slice(r, r + el.thickness)
                img[echo, c0:c1] = el.intensity * el.decay**m
                reverb[echo, c0:c1] = 1.0
                needle[echo, c0:c1] = 0.0

    for el in spec.elements:
        if isinstance(el, Detach):
            c0, c1 = el.cols
            img[:, c0:c1] = DETACHED_LEVEL
            needle[:, c0:c1] = 0.0
            reverb[:, c0:c1] = 0.0
    return img, needle, reverb


def speckle_field(shape, seed: int, corr: float = 0.0) -> np.ndarray:
    """Unit-variance normal noise, Gaussian-correlated over ``corr`` pixels when > 0."""
    n = np.random.default_rng(seed).standard_normal(shape)
    if corr > 0:
        n = ndimage.gaussian_filter(n, corr, mode="wrap")
        n /= n.std()
    return n


def generate(spec: PhantomSpec) -> Tuple[ImageGrid, ProbMask, List[PatchSpec]]:
    """Render ``spec`` with seeded speckle; returns image, masks and A/B/C patches."""
    clean, needle, reverb = render(spec)
    if spec.speckle_std > 0:
        clean = clean * (1.0 + spec.speckle_std * speckle_field(clean.shape, spec.seed,
                                                                spec.speckle_corr))
    img = ImageGrid(np.clip(clean, 0.0, 1.0), INTENSITY)
    patches = []
    for el in spec.elements:
        if isinstance(el, (Reflector, Needle)):
            patches.extend(_patches_for(el, spec.height, spec.width))
    return img, ProbMask(needle, reverb), patches
