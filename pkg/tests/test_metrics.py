import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csdecon.errors import SizeError
from csdecon.metrics import RegionSpec, cnr, psnr, ssim_global


# oracles

def test_ssim_hand_computed_4x4():
    x = np.arange(16, dtype=float).reshape(4, 4) / 15
    y = x**2
    mx, my = x.mean(), y.mean()
    vx, vy = ((x - mx) ** 2).mean(), ((y - my) ** 2).mean()
    cov = ((x - mx) * (y - my)).mean()
    c1, c2 = 0.01**2, 0.03**2
    expected = (2 * mx * my + c1) * (2 * cov + c2) / ((mx**2 + my**2 + c1) * (vx + vy + c2))
    assert ssim_global(x, y) == pytest.approx(expected, rel=1e-14)


def test_psnr_constant_offset():
    x = np.zeros((8, 8))
    x[0, 0] = 1.0
    c = 0.05
    assert psnr(x, x + c) == pytest.approx(10 * np.log10(1 / c**2), rel=1e-12)


def test_cnr_plugin_statistic():
    rng = np.random.default_rng(3)
    img = np.zeros((200, 400))
    img[:, :200] = rng.normal(2.0, 1.0, (200, 200))
    img[:, 200:] = rng.normal(0.0, 1.0, (200, 200))
    value = cnr(img, RegionSpec(0, 0, 200, 200), RegionSpec(0, 200, 200, 200), envelope=False)
    assert value == pytest.approx(2 / np.sqrt(2), abs=0.03)


# PSNR

def test_psnr_identical_and_errors():
    x = np.random.default_rng(0).random((8, 8))
    assert psnr(x, x) == float("inf")
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.ones((4, 4)))
    with pytest.raises(SizeError):
        psnr(np.ones((4, 4)), np.ones((4, 5)))


def test_psnr_independent_of_pixel_count():
    small = np.zeros((8, 8))
    small[0, 0] = 1.0
    big = np.zeros((16, 16))
    big[0, 0] = 1.0
    assert psnr(small, small + 0.1) == pytest.approx(psnr(big, big + 0.1), rel=1e-12)


def test_psnr_decreases_with_added_noise():
    rng = np.random.default_rng(1)
    x = rng.random((32, 32))
    x_hat = x + 0.01 * rng.standard_normal(x.shape)
    base = psnr(x, x_hat)
    for _ in range(20):
        assert psnr(x, x_hat + 0.01 * rng.standard_normal(x.shape)) < base


# SSIM

def test_ssim_identity_and_anticorrelation():
    x = np.random.default_rng(2).standard_normal((16, 16))
    x -= x.mean()
    assert ssim_global(x, x) == 1.0
    assert ssim_global(x, -x) < 0


@settings(max_examples=30, deadline=None)
@given(shift=st.floats(-50, 50), seed=st.integers(0, 2**31))
def test_ssim_shift_invariance(shift, seed):
    rng = np.random.default_rng(seed)
    # variances far above c1 and a large mean so luminance stays near 1
    x = 100 + 10 * rng.standard_normal((16, 16))
    y = x + 3 * rng.standard_normal((16, 16))
    a = ssim_global(x, y)
    b = ssim_global(x + shift, y + shift)
    # only the luminance term depends on the shift
    lum = lambda u, v: (2 * u.mean() * v.mean() + 1e-4) / (u.mean() ** 2 + v.mean() ** 2 + 1e-4)
    assert b / lum(x + shift, y + shift) == pytest.approx(a / lum(x, y), rel=1e-12)
    assert abs(a - b) < 0.05


# CNR

def test_cnr_constant_regions_undefined():
    img = np.zeros((10, 10))
    img[:, :5] = 1.0
    img[:, 5:] = 2.0
    with pytest.raises(ValueError):
        cnr(img, RegionSpec(0, 0, 10, 5), RegionSpec(0, 5, 10, 5))


def test_cnr_identical_distributions_near_zero():
    img = np.random.default_rng(4).standard_normal((200, 400))
    assert cnr(img, RegionSpec(0, 0, 200, 200), RegionSpec(0, 200, 200, 200)) < 0.03


@settings(max_examples=25, deadline=None)
@given(scale=st.floats(1e-3, 1e3), seed=st.integers(0, 2**31))
def test_cnr_scale_invariance(scale, seed):
    img = np.random.default_rng(seed).standard_normal((20, 20))
    r1, r2 = RegionSpec(0, 0, 10, 20), RegionSpec(10, 0, 10, 20)
    for envelope in (True, False):
        assert cnr(scale * img, r1, r2, envelope) == pytest.approx(cnr(img, r1, r2, envelope), rel=1e-9)


def test_region_validation():
    img = np.ones((10, 10))
    with pytest.raises(ValueError):
        cnr(img, RegionSpec(0, 0, 5, 5), RegionSpec(4, 4, 3, 3))
    with pytest.raises(ValueError):
        cnr(img, RegionSpec(0, 0, 5, 5), RegionSpec(8, 8, 5, 5))
    with pytest.raises(ValueError):
        RegionSpec(0, 0, 1, 1).check((10, 10))
