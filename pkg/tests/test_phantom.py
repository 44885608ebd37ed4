import numpy as np
import pytest

from usconf.evaluation import REVERBERATION, SHADOW, group_triples
from usconf.phantom import (
    DETACHED_LEVEL,
    Detach,
    Needle,
    PhantomSpec,
    PhantomSpecError,
    Reflector,
    Vessel,
    format_spec,
    generate,
    load_spec,
    parse_spec,
    render,
)

TEXT = """
# two structures
height = 96
width = 80
background = 0.5
speckle_std = 0.1
seed = 3
reflector row=30 cols=10:30 intensity=0.9 drop=0.3
needle row=20 cols=50:70 intensity=1.0 period=8 count=3 decay=0.5 thickness=2
vessel center=70,40 radii=8,12 wall=0.8 lumen=0.05
detach cols=0:4
"""


def test_empty_spec_is_constant():
    img, mask, patches = generate(PhantomSpec(20, 30, background=0.4))
    assert np.all(img.data == 0.4)
    assert not mask.needle.data.any() and not mask.reverb.data.any()
    assert patches == []


def test_reflector_shadow_multiplies_background():
    spec = PhantomSpec(40, 30, background=0.5,
                       elements=(Reflector(row=10, cols=(5, 15), intensity=0.9, drop=0.3),))
    clean, _, _ = render(spec)
    assert np.all(clean[10:13, 5:15] == 0.9)
    assert np.allclose(clean[13:, 5:15], 0.15)
    assert np.all(clean[:, 15:] == 0.5)


def test_needle_masks_cover_geometry():
    el = Needle(row=10, cols=(4, 12), intensity=1.0, period=6, count=3, decay=0.5, thickness=2)
    clean, needle, reverb = render(PhantomSpec(40, 20, background=0.4, elements=(el,)))
    assert np.array_equal(needle == 1, clean == 1.0)
    assert reverb.sum() == 3 * 2 * 8
    for m in (1, 2, 3):
        r = 10 + 6 * m
        assert np.all(reverb[r:r + 2, 4:12] == 1)
        assert np.allclose(clean[r:r + 2, 4:12], 0.5 ** m)


def test_detach_columns():
    clean, _, _ = render(PhantomSpec(10, 10, elements=(Detach(cols=(0, 3)),)))
    assert np.all(clean[:, :3] == DETACHED_LEVEL)


def test_seed_determinism_and_independence():
    spec = parse_spec(TEXT)
    a, b = generate(spec)[0].data, generate(spec)[0].data
    assert np.array_equal(a, b)
    assert not np.array_equal(a, generate(spec.empty())[0].data)


def test_text_round_trip():
    spec = parse_spec(TEXT)
    assert parse_spec(format_spec(spec)) == spec
    assert isinstance(spec.elements[2], Vessel)


def test_patches_form_triples_with_shared_rows():
    _, _, patches = generate(parse_spec(TEXT))
    triples = group_triples(patches)
    assert sorted(t["A"].kind for t in triples) == [REVERBERATION, SHADOW]
    for t in triples:
        assert t["B"].rows() == t["C"].rows()
        assert t["A"].rect[2] <= t["B"].rect[0]


@pytest.mark.parametrize("line", [
    "reflector row=30 cols=10:90 intensity=0.9 drop=0.3",
    "reflector row=30 cols=10:20 intensity=1.9 drop=0.3",
    "needle row=80 cols=1:5 intensity=1 period=10 count=3 decay=0.5",
    "vessel center=5,5 radii=8,8 wall=0.8 lumen=0.1",
    "blob row=3",
    "reflector row=3 cols=1-4 intensity=1 drop=0.2",
    "reflector row=3 cols=1:4 intensity=1 drop=0.2 colour=red",
])
def test_invalid_elements(line):
    with pytest.raises(PhantomSpecError):
        parse_spec(f"height = 90\nwidth = 80\n{line}\n")


def test_missing_header():
    with pytest.raises(PhantomSpecError, match="height"):
        parse_spec("width = 10\n")


@pytest.mark.parametrize("name", ["shadow-demo", "reverb-demo"])
def test_bundled_specs_load(name):
    spec = load_spec(name)
    assert (spec.height, spec.width) == (128, 256)
    assert len(group_triples(generate(spec)[2])) == 1


def test_correlated_speckle_keeps_unit_variance():
    spec = PhantomSpec(64, 64, background=0.5, speckle_std=0.1, seed=1, speckle_corr=1.5)
    img = generate(spec)[0].data
    assert img.std() == pytest.approx(0.05, rel=0.15)
