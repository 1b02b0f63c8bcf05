"""Random disk images and their blur + noise degradation.

Pixel (row, col) of a D x D raster sits at ``x = col - (D-1)/2`` and
``y = (D-1)/2 - row``: x grows to the right, y grows upward, and the centre
pixel is the origin.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from modelbench.errors import DomainError
from modelbench.streams import stream

EPS_R = 0.4
EPS_C = 0.5
MIN_CONTRAST = 50 / 255
DEFAULT_DIM = 201
# not given for the 2-D experiment; chosen to look like typical examples
DEFAULT_SIGMA_B = 2.0
DEFAULT_SIGMA_N = 0.1


@dataclass(frozen=True)
class DiskParams:
    r: float
    cx: float
    cy: float
    f: float
    b: float

    @property
    def c(self) -> tuple[float, float]:
        return (self.cx, self.cy)


@dataclass(frozen=True)
class DegradeConfig:
    sigma_b: float = DEFAULT_SIGMA_B
    sigma_n: float = DEFAULT_SIGMA_N

    def __post_init__(self):
        if self.sigma_b < 0 or self.sigma_n < 0:
            raise DomainError("sigma_b and sigma_n must be nonnegative")


def pixel_coords(D: int) -> tuple[np.ndarray, np.ndarray]:
    h = (D - 1) / 2
    col = np.arange(D, dtype=np.float64)
    x = np.broadcast_to(col[None, :] - h, (D, D))
    y = np.broadcast_to(h - col[:, None], (D, D))
    return x, y


def radius_range(D: int) -> tuple[float, float]:
    q = (D - 1) / 4
    return EPS_R / 2 * q, (1 - EPS_R / 2) * q


def center_range(D: int) -> tuple[float, float]:
    h = (D - 1) / 2
    return (D - 1) * EPS_C / 2 - h, (D - 1) * (1 - EPS_C / 2) - h


def sample_foreground(b: float, u: float, delta: float = MIN_CONTRAST) -> float:
    """Inverse CDF of U([0, b - delta) U (b + delta, 1]) at quantile ``u``."""
    low = max(0.0, b - delta)
    high = max(0.0, 1.0 - (b + delta))
    total = low + high
    if total <= 0:
        raise DomainError(f"no admissible foreground for b={b}, delta={delta}")
    t = u * total
    if t < low or high <= 0:
        f, away = min(t, low), -math.inf
    else:
        f, away = b + delta + (t - low), math.inf
    # open endpoints: step off b +- delta when rounding lands on it
    while abs(f - b) <= delta:
        f = math.nextafter(f, away)
    return f


def sample_disk_params(D: int, rng: np.random.Generator) -> DiskParams:
    if D < 3 or D % 2 == 0:
        raise DomainError(f"D must be odd and >= 3, got {D}")
    r = rng.uniform(*radius_range(D))
    cx, cy = rng.uniform(*center_range(D), size=2)
    b = rng.uniform(0.0, 1.0)
    f = sample_foreground(b, rng.uniform(0.0, 1.0))
    return DiskParams(float(r), float(cx), float(cy), float(f), float(b))


def render(params: DiskParams, D: int) -> np.ndarray:
    x, y = pixel_coords(D)
    inside = (x - params.cx) ** 2 + (y - params.cy) ** 2 <= params.r**2
    return np.where(inside, params.f, params.b)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled Gaussian on ceil(3 sigma) taps per side, normalized to unit sum."""
    if sigma <= 0:
        return np.ones(1)
    half = int(math.ceil(3 * sigma))
    t = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(t**2) / (2 * sigma**2))
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable blur with replicated borders."""
    img = np.asarray(img, dtype=np.float64)
    if sigma <= 0:
        return img.copy()
    k = gaussian_kernel(sigma)
    out = correlate1d(img, k, axis=0, mode="nearest")
    return correlate1d(out, k, axis=1, mode="nearest")


def degrade2d(img: np.ndarray, cfg: DegradeConfig, rng: np.random.Generator) -> np.ndarray:
    """Blur then add i.i.d. N(0, sigma_n^2) noise; values are not clipped."""
    out = gaussian_blur(img, cfg.sigma_b)
    if cfg.sigma_n > 0:
        out = out + cfg.sigma_n * rng.standard_normal(out.shape)
    return out


def scale_radius(r, D: int):
    return 8 / (D - 1) * (r - (D - 1) / 8)


def scale_center(c, D: int):
    return 2 / (D - 1) * np.asarray(c)


def make_sample(seed: int, index: int, D: int, cfg: DegradeConfig, tag: str = "disk") -> tuple[DiskParams, np.ndarray]:
    """Sample ``index`` of a dataset; its own stream makes it independently reproducible."""
    rng = stream(seed, tag, index)
    params = sample_disk_params(D, rng)
    return params, degrade2d(render(params, D), cfg, rng)


def generate_dataset2d(n: int, D: int, cfg: DegradeConfig, seed: int, tag: str = "disk"):
    if n < 1:
        raise DomainError(f"dataset size must be >= 1, got {n}")
    return [make_sample(seed, i, D, cfg, tag) for i in range(n)]


# -- files ---------------------------------------------------------------------
# One ``<stem>.f64`` (row-major little-endian float64 raster) and one
# ``<stem>.json`` sidecar per sample, plus ``manifest.json``.

def write_image(path, img: np.ndarray) -> None:
    Path(path).write_bytes(np.ascontiguousarray(img, dtype="<f8").tobytes())


def read_image(path) -> np.ndarray:
    data = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    D = int(round(math.sqrt(data.size)))
    if D * D != data.size:
        raise DomainError(f"{path}: {data.size} floats is not a square raster")
    return data.reshape(D, D).astype(np.float64)


def write_dataset2d(directory, samples, D: int, cfg: DegradeConfig, seed: int) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (params, img) in enumerate(samples):
        stem = f"disk_{i:06d}"
        write_image(out / f"{stem}.f64", img)
        (out / f"{stem}.json").write_text(json.dumps(asdict(params), indent=2) + "\n")
        entries.append({"image": f"{stem}.f64", "params": f"{stem}.json"})
    manifest = {
        "dim": D, "n": len(entries), "seed": seed,
        "sigma_b": cfg.sigma_b, "sigma_n": cfg.sigma_n, "samples": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path
