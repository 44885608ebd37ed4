"""Tunable parameters and the plain-text ``key = value`` config format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

AS_PRINTED = "as_printed"
CONSISTENT = "consistent"
CALIBRATION_SIGNS = (AS_PRINTED, CONSISTENT)

Rect = Tuple[int, int, int, int]


class ConfigError(ValueError):
    """Raised for out-of-range parameters and malformed config files."""


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class DenoiseConfig:
    """Speckle-reducing diffusion settings.

    ``q0_region`` is either ``None`` (pick the 11x11 window of least ICOV
    variance automatically) or a ``(row0, col0, row1, col1)`` half-open
    rectangle over a homogeneous part of the image.  Canny thresholds are
    fractions of the maximum gradient magnitude.
    """

    iterations: int = 20
    time_step: float = 0.1
    q0_region: Optional[Rect] = None
    q0_decay_rho: float = 0.05
    canny_low: float = 0.1
    canny_high: float = 0.25
    canny_sigma: float = 1.4
    c_canny: float = 0.3
    histogram_bins: int = 256

    def __post_init__(self):
        _check(int(self.iterations) == self.iterations and self.iterations >= 0,
               f"iterations must be an integer >= 0, got {self.iterations}")
        _check(0 < self.time_step <= 0.25, f"time_step must be in (0, 0.25], got {self.time_step}")
        _check(self.q0_decay_rho >= 0, f"q0_decay_rho must be >= 0, got {self.q0_decay_rho}")
        _check(0 <= self.canny_low <= 1 and 0 <= self.canny_high <= 1,
               "canny thresholds must lie in [0, 1]")
        _check(self.canny_low <= self.canny_high,
               f"canny_low ({self.canny_low}) exceeds canny_high ({self.canny_high})")
        _check(self.canny_sigma > 0, f"canny_sigma must be > 0, got {self.canny_sigma}")
        _check(0 < self.c_canny <= 1, f"c_canny must be in (0, 1], got {self.c_canny}")
        _check(int(self.histogram_bins) == self.histogram_bins and self.histogram_bins >= 2,
               f"histogram_bins must be an integer >= 2, got {self.histogram_bins}")
        if self.q0_region is not None:
            _check(len(self.q0_region) == 4, "q0_region needs four integers row0,col0,row1,col1")
            r0, c0, r1, c1 = self.q0_region
            _check(r1 > r0 and c1 > c0, f"q0_region {self.q0_region} is empty")


@dataclass(frozen=True)
class ConfidenceConfig:
    """Parameters of the confidence propagation.

    ``xi`` is the confidence a completely homogeneous image should reach on
    its bottom row; ``calibration_sign`` picks whether the normalising sum of
    the attenuation coefficient uses the growing exponential (``as_printed``)
    or the decaying one that makes that calibration exact (``consistent``).
    ``beta`` defaults to 2 so that single strong reflectors cast a clear
    shadow; see the README for why.
    """

    alpha: float = 2.0
    beta: float = 2.0
    kappa: int = 2
    sigma: float = 1.0
    xi: float = 0.1
    calibration_sign: str = AS_PRINTED
    epsilon_mean: float = 1e-6
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)

    def __post_init__(self):
        _check(self.alpha > 0, f"alpha must be > 0, got {self.alpha}")
        _check(self.beta > 0, f"beta must be > 0, got {self.beta}")
        _check(int(self.kappa) == self.kappa and self.kappa >= 0,
               f"kappa must be an integer >= 0, got {self.kappa}")
        _check(self.sigma > 0, f"sigma must be > 0, got {self.sigma}")
        _check(0 < self.xi < 1, f"xi must be in (0, 1), got {self.xi}")
        _check(self.calibration_sign in CALIBRATION_SIGNS,
               f"calibration_sign must be one of {CALIBRATION_SIGNS}, got {self.calibration_sign!r}")
        _check(self.epsilon_mean > 0, f"epsilon_mean must be > 0, got {self.epsilon_mean}")

    def check_width(self, width: int) -> None:
        if 2 * self.kappa + 1 > width:
            raise ConfigError(
                f"stencil width {2 * self.kappa + 1} exceeds image width {width}"
            )

    def replace(self, **changes) -> "ConfidenceConfig":
        return dataclasses.replace(self, **changes)


_CONF_FIELDS = {f.name: f for f in dataclasses.fields(ConfidenceConfig) if f.name != "denoise"}
_DENOISE_FIELDS = {f.name: f for f in dataclasses.fields(DenoiseConfig)}


def _parse_value(key: str, raw: str):
    if key == "q0_region":
        if raw.lower() == "auto":
            return None
        parts = [p.strip() for p in raw.split(",")]
        try:
            return tuple(int(p) for p in parts)
        except ValueError:
            raise ConfigError(f"q0_region must be 'auto' or row0,col0,row1,col1, got {raw!r}") from None
    if key == "calibration_sign":
        return raw
    typ = (_CONF_FIELDS.get(key) or _DENOISE_FIELDS[key]).type
    try:
        if typ == "int":
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ}") from None


def parse_config(text: str) -> ConfidenceConfig:
    """Parse ``key = value`` lines into a :class:`ConfidenceConfig`.

    Keys are the field names of :class:`ConfidenceConfig` and
    :class:`DenoiseConfig` in one flat namespace.  Blank lines and ``#``
    comments are ignored; unknown or repeated keys are errors.
    """
    conf, den = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in _CONF_FIELDS:
            target = conf
        elif key in _DENOISE_FIELDS:
            target = den
        else:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in target:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        target[key] = _parse_value(key, raw)
    return ConfidenceConfig(**conf, denoise=DenoiseConfig(**den))


def load_config(path) -> ConfidenceConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(cfg: ConfidenceConfig) -> str:
    """Inverse of :func:`parse_config`."""
    lines = []
    for name in _CONF_FIELDS:
        lines.append(f"{name} = {getattr(cfg, name)}")
    for name in _DENOISE_FIELDS:
        val = getattr(cfg.denoise, name)
        if name == "q0_region":
            val = "auto" if val is None else ",".join(str(v) for v in val)
        lines.append(f"{name} = {val}")
    return "\n".join(lines) + "\n"
