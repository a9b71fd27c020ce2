import numpy as np
import pytest

from emotionforge import augment
from emotionforge.errors import InvalidSpecError
from emotionforge.rng import Prng


def sample_image(seed=0, h=20, w=20):
    return (Prng(seed).uniform(h * w).reshape(h, w) * 256).astype(np.uint8)


def test_default_spec_contents():
    spec = augment.default_spec()
    assert len(spec.brightness_factors) == 7
    assert 1.0 in spec.brightness_factors
    assert len(spec.blur_kinds) == 4
    assert "none" in spec.blur_kinds


def test_28_variants():
    out = augment.variants(sample_image(), augment.default_spec())
    assert len(out) == 28


def test_identity_variant_bit_exact():
    img = sample_image(1)
    out = dict(augment.variants(img, augment.default_spec()))
    assert (out["b1.00__none"] == img).all()


def test_order_brightness_major():
    out = augment.variants(sample_image(2), augment.default_spec())
    tags = [t for t, _ in out]
    expected = [f"b{f:.2f}__{k}"
                for f in (0.55, 0.70, 0.85, 1.00, 1.15, 1.30, 1.45)
                for k in ("none", "gaussian", "average", "median")]
    assert tags == expected


def test_deterministic():
    img = sample_image(3)
    a = augment.variants(img, augment.default_spec())
    b = augment.variants(img, augment.default_spec())
    assert all(ta == tb and (ia == ib).all() for (ta, ia), (tb, ib) in zip(a, b))


def test_monotone_mean_brightness_per_kind():
    img = sample_image(4)
    out = augment.variants(img, augment.default_spec())
    for kind in ("none", "gaussian", "average", "median"):
        means = [im.mean() for tag, im in out if tag.endswith(f"__{kind}")]
        assert all(m1 <= m2 + 1e-12 for m1, m2 in zip(means, means[1:]))


def test_scaling_law():
    spec = augment.default_spec()
    per_image = len(spec.brightness_factors) * len(spec.blur_kinds)
    assert per_image == 28
    assert 41029 * per_image == 1148812


@pytest.mark.parametrize("spec", [
    augment.AugmentSpec(brightness_factors=(0.5, 1.0, 1.5)),
    augment.AugmentSpec(blur_kinds=("none", "gaussian")),
    augment.AugmentSpec(brightness_factors=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)),
    augment.AugmentSpec(blur_kinds=("gaussian", "average", "median", "gaussian")),
    augment.AugmentSpec(brightness_factors=(-1.0, 0.2, 0.3, 0.4, 0.5, 0.6, 1.0)),
    augment.AugmentSpec(blur_kinds=("none", "gaussian", "average", "box")),
])
def test_invalid_specs(spec):
    with pytest.raises(InvalidSpecError):
        augment.variants(sample_image(), spec)
