"""Patch-median evaluation of intensity and structural confidence maps.

Patches come in triples per artifact kind: ``A`` above the structure that
casts the artifact, ``B`` inside the shadow or reverberation, ``C`` beside
``B`` on the same rows.  A good pair of maps orders intensity confidence as
``A > C > B`` and gives ``B`` a structural confidence well below ``A`` and
``C``, which should themselves agree.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .grid import values

SHADOW = "shadow"
REVERBERATION = "reverberation"
KINDS = (REVERBERATION, SHADOW)
ROLES = ("A", "B", "C")

DEFAULT_MARGIN = 0.2
DEFAULT_CLOSENESS = 0.15

PATCH_COLUMNS = ("role", "kind", "row0", "col0", "row1", "col1")
REPORT_COLUMNS = ("triple", "kind", "predicate", "A", "C", "B", "threshold", "passed")


class PatchError(ValueError):
    """Bad patch geometry or an incomplete A/B/C triple."""


@dataclass(frozen=True)
class PatchSpec:
    role: str
    kind: str
    rect: Tuple[int, int, int, int]  # row0, col0, row1, col1 (half-open)

    def __post_init__(self):
        if self.role not in ROLES:
            raise PatchError(f"patch role must be one of {ROLES}, got {self.role!r}")
        if self.kind not in KINDS:
            raise PatchError(f"patch kind must be one of {KINDS}, got {self.kind!r}")
        rect = tuple(int(v) for v in self.rect)
        if len(rect) != 4:
            raise PatchError(f"patch rect needs 4 integers, got {self.rect!r}")
        object.__setattr__(self, "rect", rect)

    def rows(self) -> Tuple[int, int]:
        return self.rect[0], self.rect[2]

    def samples(self, grid) -> np.ndarray:
        arr = values(grid)
        r0, c0, r1, c1 = self.rect
        h, w = arr.shape
        if not (0 <= r0 < r1 <= h and 0 <= c0 < c1 <= w):
            raise PatchError(f"patch {self.rect} is empty or outside the {h}x{w} map")
        return arr[r0:r1, c0:c1]


def patch_median(grid, patch: PatchSpec) -> float:
    return float(np.median(patch.samples(grid)))


def group_triples(patches: Iterable[PatchSpec]) -> List[Dict[str, PatchSpec]]:
    """Pair up the n-th A, B and C patch of each kind, in file order."""
    by_kind: Dict[str, Dict[str, List[PatchSpec]]] = {}
    for p in patches:
        by_kind.setdefault(p.kind, {r: [] for r in ROLES})[p.role].append(p)
    triples = []
    for kind in sorted(by_kind):
        roles = by_kind[kind]
        counts = {r: len(v) for r, v in roles.items()}
        if len(set(counts.values())) != 1:
            raise PatchError(f"incomplete {kind} triple(s): role counts {counts}")
        for a, b, c in zip(roles["A"], roles["B"], roles["C"]):
            if b.rows() != c.rows():
                raise PatchError(f"{kind} patches B {b.rect} and C {c.rect} cover different rows")
            triples.append({"A": a, "B": b, "C": c})
    if not triples:
        raise PatchError("no complete A/B/C triple among the patches")
    return triples


@dataclass(frozen=True)
class PredicateResult:
    triple: int
    kind: str
    predicate: str
    a: float
    c: float
    b: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class EvalReport:
    results: Tuple[PredicateResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> List[PredicateResult]:
        return [r for r in self.results if not r.passed]

    def to_rows(self) -> List[List[str]]:
        return [
            [str(r.triple), r.kind, r.predicate, f"{r.a:.6f}", f"{r.c:.6f}", f"{r.b:.6f}",
             f"{r.threshold:g}", "pass" if r.passed else "fail"]
            for r in self.results
        ]

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            writer.writerows(self.to_rows())


def check_orderings(intensity, structural, patches: Sequence[PatchSpec],
                    margin: float = DEFAULT_MARGIN,
                    closeness: float = DEFAULT_CLOSENESS) -> EvalReport:
    results = []
    for n, triple in enumerate(group_triples(patches)):
        kind = triple["A"].kind
        ci = {r: patch_median(intensity, p) for r, p in triple.items()}
        cs = {r: patch_median(structural, p) for r, p in triple.items()}
        results.append(PredicateResult(
            n, kind, "intensity_order", ci["A"], ci["C"], ci["B"], 0.0,
            ci["A"] > ci["C"] > ci["B"]))
        results.append(PredicateResult(
            n, kind, "structural_gap", cs["A"], cs["C"], cs["B"], margin,
            cs["B"] + margin <= min(cs["A"], cs["C"])))
        results.append(PredicateResult(
            n, kind, "structural_close", cs["A"], cs["C"], cs["B"], closeness,
            abs(cs["A"] - cs["C"]) <= closeness))
    return EvalReport(tuple(results))


def read_patches(path) -> List[PatchSpec]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(PATCH_COLUMNS) - set(reader.fieldnames):
            raise PatchError(f"{path}: patch file needs columns {', '.join(PATCH_COLUMNS)}")
        patches = []
        for row in reader:
            try:
                rect = tuple(int(row[k]) for k in ("row0", "col0", "row1", "col1"))
            except ValueError as exc:
                raise PatchError(f"{path}: {exc}") from None
            patches.append(PatchSpec(row["role"].strip(), row["kind"].strip(), rect))
    return patches


def write_patches(patches: Iterable[PatchSpec], path) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PATCH_COLUMNS)
        for p in patches:
            writer.writerow([p.role, p.kind, *p.rect])
