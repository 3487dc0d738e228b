import numpy as np
import pytest

from reference_impls import conv_direct, conv_pixel_loop, lbp_loop
from tofcorner import filters
from tofcorner.errors import BadKernelSize


def test_laplacian_kernel_3_is_five_point():
    assert np.array_equal(
        filters.laplacian_kernel(3),
        np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=float),
    )


def test_laplacian_constant_zero():
    img = np.full((20, 20), 3.7)
    for k in (3, 5, 7):
        assert np.allclose(filters.laplacian(img, k), 0.0, atol=1e-12)


def test_laplacian_annihilates_ramp_interior():
    img = np.tile(np.arange(24, dtype=float), (24, 1))
    for k in (3, 5, 7):
        out = filters.laplacian(img, k)[4:-4, 4:-4]
        assert np.allclose(out, 0.0, atol=1e-9)


def test_laplacian_bad_kernel_size():
    with pytest.raises(BadKernelSize):
        filters.laplacian(np.zeros((8, 8)), 4)
    with pytest.raises(BadKernelSize):
        filters.laplacian(np.zeros((8, 8)), 9)


def test_laplacian_matches_direct_convolution():
    rng = np.random.default_rng(0)
    img = rng.normal(size=(16, 16))
    for k in (3, 5, 7):
        ref = conv_direct(img, filters.laplacian_kernel(k))
        assert np.allclose(filters.laplacian(img, k), ref, atol=1e-6)


def test_pixel_loop_oracle_agrees_with_tap_oracle():
    # cross-check the two reference convolutions against each other
    rng = np.random.default_rng(5)
    img = rng.normal(size=(10, 10))
    k = filters.laplacian_kernel(5)
    assert np.allclose(conv_pixel_loop(img, k), conv_direct(img, k), atol=1e-12)
    assert np.allclose(filters.laplacian(img, 5), conv_pixel_loop(img, k), atol=1e-6)


def test_canny_constant_zero():
    for k in (3, 5, 7):
        assert np.array_equal(filters.canny(np.full((16, 16), 2.5), k),
                              np.zeros((16, 16)))


def test_canny_step_edge_single_column():
    img = np.zeros((32, 32))
    img[:, 16:] = 1.0
    out = filters.canny(img, 3)
    cols = np.flatnonzero(out.any(axis=0))
    assert cols.size == 1
    assert np.all(out[:, cols[0]] == 1.0)


def test_canny_binary_output():
    rng = np.random.default_rng(1)
    for k in (3, 5, 7):
        out = filters.canny(rng.normal(size=(24, 24)), k)
        assert set(np.unique(out)) <= {0.0, 1.0}


def test_canny_bad_aperture():
    with pytest.raises(BadKernelSize):
        filters.canny(np.zeros((8, 8)), 2)


def test_gabor_zero_dc():
    for a in filters.GABOR_ORIENTATIONS:
        k = filters.gabor_kernel(a)
        assert k.shape == (13, 13)
        assert abs(k.sum()) < 1e-12
    img = np.full((20, 20), 4.2)
    for b in filters.gabor_bank(img):
        assert np.allclose(b, 0.0, atol=1e-6)


def test_gabor_orientation_selectivity():
    xs = np.arange(40, dtype=float)
    grating = np.sin(2.0 * np.pi * xs / filters.GABOR_WAVELENGTH)[None, :] * np.ones((40, 1))
    bank = filters.gabor_bank(grating)
    energy = [float((b**2).sum()) for b in bank]
    assert energy[0] > energy[3]
    assert energy[0] > energy[1]
    assert energy[0] > energy[2]


def test_gabor_matches_direct_convolution():
    rng = np.random.default_rng(2)
    img = rng.normal(size=(20, 20))
    for a, out in zip(filters.GABOR_ORIENTATIONS, filters.gabor_bank(img)):
        ref = conv_direct(img, filters.gabor_kernel(a))
        assert np.allclose(out, ref, atol=1e-6)


def test_gradients_on_ramp():
    img = np.tile(np.arange(24, dtype=float), (24, 1))  # i(x, y) = x
    gx, gy, gxy, mag, ang = filters.gradients(img)
    interior = np.s_[3:-3, 3:-3]
    assert np.all(gx[interior] > 0.0)
    assert np.allclose(gx[interior], gx[3, 3])
    assert np.allclose(gy[interior], 0.0, atol=1e-12)
    assert np.allclose(ang[interior], 0.0, atol=1e-12)


def test_gradients_constant_image():
    gx, gy, gxy, mag, ang = filters.gradients(np.full((12, 12), 1.5))
    assert np.allclose(mag, 0.0, atol=1e-12)
    assert np.array_equal(ang, np.zeros((12, 12)))  # atan2(0, 0) == 0


def test_gradient_magnitude_identity():
    rng = np.random.default_rng(3)
    gx, gy, _, mag, _ = filters.gradients(rng.normal(size=(16, 16)))
    assert np.allclose(mag**2, gx**2 + gy**2, atol=1e-9)


def test_gradients_match_direct_convolution():
    rng = np.random.default_rng(4)
    img = rng.normal(size=(16, 16))
    gx, gy, gxy, _, _ = filters.gradients(img)
    sx = filters.sobel_kernel(1)
    sy = filters.sobel_kernel(0)
    assert np.allclose(gx, conv_direct(img, sx), atol=1e-6)
    assert np.allclose(gy, conv_direct(img, sy), atol=1e-6)
    # cross derivative is sequential: Sobel-x then Sobel-y
    assert np.allclose(gxy, conv_direct(conv_direct(img, sx), sy), atol=1e-6)


def test_lbp_constant_all_255():
    assert np.array_equal(filters.lbp(np.full((9, 9), 2.0)), np.full((9, 9), 255.0))


def test_lbp_peak_is_zero():
    img = np.zeros((5, 5))
    img[2, 2] = 5.0
    assert filters.lbp(img)[2, 2] == 0.0


def test_lbp_matches_loop_oracle_exactly():
    rng = np.random.default_rng(5)
    for _ in range(20):
        img = rng.normal(size=(10, 10))
        assert np.array_equal(filters.lbp(img), lbp_loop(img))


def test_lbp_bit_order_east_first():
    # east neighbour larger than centre sets only bit 0
    img = np.zeros((3, 3))
    img[1, 2] = 1.0
    img[1, 1] = 0.5
    code = filters.lbp(img)[1, 1]
    assert int(code) & 1 == 1


def test_translation_equivariance_interior():
    rng = np.random.default_rng(6)
    base = rng.normal(size=(24, 24))
    shifted = np.roll(base, (1, 0), axis=(0, 1))
    ops = [lambda im: filters.laplacian(im, 5),
           lambda im: filters.gabor_bank(im)[1],
           lambda im: filters.gradients(im)[3],
           filters.lbp]
    # margin must clear the 13x13 gabor footprint around np.roll's wrap seam
    for op in ops:
        a = op(base)
        b = op(shifted)
        assert np.allclose(np.roll(a, (1, 0), axis=(0, 1))[8:-8, 8:-8],
                           b[8:-8, 8:-8], atol=1e-9)


def test_output_dims_preserved():
    rng = np.random.default_rng(7)
    img = rng.normal(size=(17, 23))
    assert filters.laplacian(img, 7).shape == img.shape
    assert filters.canny(img, 5).shape == img.shape
    for b in filters.gabor_bank(img):
        assert b.shape == img.shape
    for g in filters.gradients(img):
        assert g.shape == img.shape
    assert filters.lbp(img).shape == img.shape
