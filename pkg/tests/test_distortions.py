import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advinfo.distortions import (
    grid_fits,
    inverse_permutation,
    patch_shuffle,
    patch_shuffle_batch,
    saturate,
    shuffle_patches,
)

unit = arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=st.floats(0, 1))


def test_saturation_hand_value():
    # 0.5 + 0.5 * 0.2 ** (2 / 1024)
    assert float(saturate(np.array(0.6), 1024)) == pytest.approx(0.998431, abs=1e-6)


def test_saturation_fixed_points():
    np.testing.assert_array_equal(saturate(np.array([0.0, 0.5, 1.0]), 8), [0.0, 0.5, 1.0])


@given(unit)
def test_saturation_p2_bit_exact(v):
    out = saturate(v, 2)
    assert out.dtype == v.dtype and out.tobytes() == v.tobytes()


@given(unit, st.sampled_from([4, 8, 16, 64, 1024]))
def test_saturation_antisymmetry(v, p):
    np.testing.assert_allclose(saturate(1 - v, p), 1 - saturate(v, p), rtol=0, atol=1e-12)


@given(unit, st.sampled_from([8, 16, 64]))
def test_saturation_pushes_away_from_grey(v, p):
    assert (np.abs(saturate(v, p) - 0.5) >= np.abs(v - 0.5) - 1e-15).all()


def test_saturation_validation():
    with pytest.raises(ValueError):
        saturate(np.array([0.5]), 1)
    with pytest.raises(ValueError):
        saturate(np.array([1.5]), 8)


def test_float32_preserved():
    assert saturate(np.full((2, 2), 0.3, np.float32), 8).dtype == np.float32


def test_shuffle_hand_example():
    img = np.arange(16.0).reshape(4, 4)
    # swap the two top patches of a 2x2 grid
    out = shuffle_patches(img, 2, [1, 0, 2, 3])
    np.testing.assert_array_equal(out[:2, :2], img[:2, 2:])
    np.testing.assert_array_equal(out[:2, 2:], img[:2, :2])
    np.testing.assert_array_equal(out[2:], img[2:])


def test_identity_permutation_and_k0_bit_exact(rng):
    img = rng.uniform(size=(1, 28, 28))
    assert shuffle_patches(img, 4, np.arange(16)).tobytes() == img.tobytes()
    out, perm = patch_shuffle(img, 0, rng)
    assert perm is None and out.tobytes() == img.tobytes()
    outs, perms = patch_shuffle_batch(img[None], 0, rng)
    assert perms is None and outs.tobytes() == img[None].tobytes()


@settings(deadline=None)
@given(st.sampled_from([2, 4, 7]), st.integers(0, 2**31))
def test_shuffle_preserves_multiset_and_inverts(k, seed):
    rng = np.random.default_rng(seed)
    img = rng.uniform(size=(2, 28, 28))
    out, perm = patch_shuffle(img, k, rng)
    np.testing.assert_array_equal(np.sort(out, axis=None), np.sort(img, axis=None))
    np.testing.assert_array_equal(shuffle_patches(out, k, inverse_permutation(perm)), img)


def test_batch_uses_one_permutation_per_image(rng):
    imgs = rng.uniform(size=(5, 1, 8, 8))
    out, perms = patch_shuffle_batch(imgs, 2, rng)
    assert perms.shape == (5, 4)
    for i in range(5):
        np.testing.assert_array_equal(out[i], shuffle_patches(imgs[i], 2, perms[i]))


def test_grid_validation():
    assert grid_fits((1, 28, 28), 4) and grid_fits((1, 28, 28), 0)
    assert not grid_fits((1, 28, 28), 8)
    with pytest.raises(ValueError):
        shuffle_patches(np.zeros((28, 28)), 8, np.arange(64))
    with pytest.raises(ValueError):
        shuffle_patches(np.zeros((4, 4)), 2, [0, 0, 1, 2])
    with pytest.raises(ValueError):
        shuffle_patches(np.zeros((4, 4)), 1, [0])
