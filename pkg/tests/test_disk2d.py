import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelbench.disk2d import (
    MIN_CONTRAST,
    DegradeConfig,
    DiskParams,
    center_range,
    degrade2d,
    gaussian_blur,
    gaussian_kernel,
    generate_dataset2d,
    make_sample,
    pixel_coords,
    radius_range,
    read_image,
    render,
    sample_disk_params,
    sample_foreground,
    scale_center,
    scale_radius,
    write_dataset2d,
)
from modelbench.errors import DomainError
from modelbench.streams import stream


def test_coordinates():
    x, y = pixel_coords(5)
    assert x[0, 0] == -2 and y[0, 0] == 2
    assert x[2, 2] == 0 and y[2, 2] == 0
    assert x[4, 4] == 2 and y[4, 4] == -2


def test_ranges_at_default_size():
    assert radius_range(201) == pytest.approx((10.0, 40.0))
    assert center_range(201) == pytest.approx((-50.0, 50.0))


def test_parameter_draws():
    rng = stream(0, "draws")
    draws = [sample_disk_params(201, rng) for _ in range(100_000)]
    r = np.array([d.r for d in draws])
    c = np.array([d.c for d in draws])
    f = np.array([d.f for d in draws])
    b = np.array([d.b for d in draws])
    assert r.min() >= 10 and r.max() <= 40
    assert np.abs(c).max() <= 50
    assert np.all(np.abs(f - b) > MIN_CONTRAST)
    assert np.all((f >= 0) & (f <= 1) & (b >= 0) & (b <= 1))


def test_foreground_at_zero_background():
    u = stream(1, "u").uniform(size=100_000)
    f = np.array([sample_foreground(0.0, q) for q in u])
    assert f.min() > MIN_CONTRAST and f.max() <= 1.0
    # uniform on (delta, 1]
    assert f.mean() == pytest.approx((1 + MIN_CONTRAST) / 2, abs=0.005)


def test_foreground_mid_background():
    b = 0.5
    f = np.array([sample_foreground(b, q) for q in np.linspace(0, 1, 10_001)])
    assert np.all(np.abs(f - b) >= MIN_CONTRAST)
    lo_mass = np.mean(f < b)
    assert lo_mass == pytest.approx(0.5, abs=1e-3)
    with pytest.raises(DomainError):
        sample_foreground(0.5, 0.3, delta=0.6)


def test_bad_size():
    with pytest.raises(DomainError):
        sample_disk_params(200, np.random.default_rng(0))


def test_render_inclusive_boundary():
    p = DiskParams(10.0, 0.0, 0.0, 0.9, 0.1)
    img = render(p, 201)
    assert img[100, 100] == 0.9
    assert img[100, 110] == 0.9  # x = 10
    assert img[100, 111] == 0.1
    assert img[0, 0] == 0.1


@pytest.mark.parametrize("r", [10, 25, 40])
def test_render_area(r):
    img = render(DiskParams(float(r), 0.0, 0.0, 1.0, 0.0), 201)
    assert abs(img.sum() - math.pi * r * r) <= 4 * r


def test_render_orientation():
    img = render(DiskParams(5.0, 30.0, 20.0, 1.0, 0.0), 201)
    rows, cols = np.nonzero(img)
    assert cols.mean() == pytest.approx(130.0) and rows.mean() == pytest.approx(80.0)


def test_two_values_clean():
    p = sample_disk_params(201, stream(2, "x"))
    assert len(np.unique(render(p, 201))) == 2


@given(st.floats(1, 30), st.floats(1, 30), st.floats(-20, 20), st.floats(-20, 20))
@settings(max_examples=40, deadline=None)
def test_monotone_in_radius(r1, r2, cx, cy):
    lo, hi = sorted((r1, r2))
    a = render(DiskParams(lo, cx, cy, 0.8, 0.2), 101)
    b = render(DiskParams(hi, cx, cy, 0.8, 0.2), 101)
    assert np.all(b >= a)


def test_kernel():
    k = gaussian_kernel(2.0)
    assert len(k) == 13 and k.sum() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_array_equal(k, k[::-1])
    assert len(gaussian_kernel(1.2)) == 9


def test_degrade_identity_and_constant():
    img = render(sample_disk_params(51, stream(3, "x")), 51)
    np.testing.assert_array_equal(degrade2d(img, DegradeConfig(0, 0), np.random.default_rng(0)), img)
    const = np.full((51, 51), 0.37)
    for s in (0.5, 2.0, 7.0):
        out = degrade2d(const, DegradeConfig(s, 0), np.random.default_rng(0))
        assert np.abs(out - 0.37).max() < 1e-10


def test_blur_oracle_interior():
    # direct 2-D sum away from the border
    rng = np.random.default_rng(0)
    img = rng.uniform(size=(31, 31))
    k = gaussian_kernel(1.5)
    h = len(k) // 2
    out = gaussian_blur(img, 1.5)
    i, j = 15, 12
    patch = img[i - h:i + h + 1, j - h:j + h + 1]
    assert out[i, j] == pytest.approx(float(k @ patch @ k), abs=1e-13)


def test_blur_replicates_border():
    img = np.zeros((21, 21))
    img[:, 0] = 1.0
    out = gaussian_blur(img, 2.0)
    # the left column sees itself replicated outward
    k = gaussian_kernel(2.0)
    assert out[10, 0] == pytest.approx(k[: len(k) // 2 + 1].sum())


def test_noise_variance():
    img = np.full((100, 100), 0.5)
    cfg = DegradeConfig(2.0, 0.1)
    out = degrade2d(img, cfg, stream(4, "n"))
    assert np.var(out - gaussian_blur(img, 2.0)) == pytest.approx(0.01, abs=0.001)
    assert len(np.unique(out)) > 2


def test_negative_config():
    with pytest.raises(DomainError):
        DegradeConfig(-1.0, 0.1)


def test_sampling_deterministic():
    a = make_sample(7, 3, 101, DegradeConfig())
    b = make_sample(7, 3, 101, DegradeConfig())
    assert a[0] == b[0] and a[1].tobytes() == b[1].tobytes()
    ds = generate_dataset2d(5, 101, DegradeConfig(), 7)
    assert ds[3][1].tobytes() == a[1].tobytes()
    assert make_sample(8, 3, 101, DegradeConfig())[0] != a[0]


def test_scaling():
    assert scale_radius(25, 201) == pytest.approx(0.0)
    assert scale_radius(10, 201) == pytest.approx(-0.6)
    assert scale_radius(40, 201) == pytest.approx(0.6)
    np.testing.assert_allclose(scale_center((50, -50), 201), [0.5, -0.5])


def test_dataset_files(tmp_path):
    samples = generate_dataset2d(3, 51, DegradeConfig(), 0)
    write_dataset2d(tmp_path, samples, 51, DegradeConfig(), 0)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["n"] == 3 and manifest["dim"] == 51
    for (params, img), entry in zip(samples, manifest["samples"]):
        np.testing.assert_array_equal(read_image(tmp_path / entry["image"]), img)
        assert DiskParams(**json.loads((tmp_path / entry["params"]).read_text())) == params
    (tmp_path / "bad.f64").write_bytes(b"\0" * 8 * 7)
    with pytest.raises(DomainError):
        read_image(tmp_path / "bad.f64")
