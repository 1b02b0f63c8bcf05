"""Pointflow potential fields V+ and V- of an image."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from modelbench.disk2d import gaussian_blur
from modelbench.pointflow import _backend


@dataclass(frozen=True)
class PointflowConfig:
    sigma_pf: float = 5.0  # pre-blur before differentiating
    dt: float = 50.0  # Euler step
    tau_l: float = 0.9  # loop closure, squared pixels
    tau_s: float = 1e-6  # stuck when |V|^2 <= tau_s
    tau_len: float = 0.001  # minimum polyline length, pixels
    n_iter: int = 1000
    n_points: int = 200

    def __post_init__(self):
        if min(self.sigma_pf, self.dt, self.tau_l, self.tau_s, self.tau_len) <= 0 or min(self.n_iter, self.n_points) < 1:
            raise ValueError("all pointflow parameters must be positive")


def central_gradient(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(d/dx, d/dy) in image coordinates (y up) with replicated borders."""
    p = np.pad(img, 1, mode="edge")
    d_col = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
    d_row = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
    return d_col, -d_row


@dataclass
class FlowField:
    """Vector field sampled at pixel centres; ``vx``/``vy`` indexed [row, col]."""

    vx: np.ndarray
    vy: np.ndarray
    _prepared: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vx = np.ascontiguousarray(self.vx, dtype=np.float64)
        self.vy = np.ascontiguousarray(self.vy, dtype=np.float64)
        if self.vx.shape != self.vy.shape or self.vx.ndim != 2 or self.vx.shape[0] != self.vx.shape[1]:
            raise ValueError("field components must be equal square grids")

    @property
    def D(self) -> int:
        return self.vx.shape[0]

    def prepared(self, backend: str):
        if backend not in self._prepared:
            k = _backend.load(backend)
            self._prepared[backend] = (k.prepare(self.vx), k.prepare(self.vy))
        return self._prepared[backend]

    def sample(self, x: float, y: float, backend: str | None = None) -> tuple[float, float]:
        """Bilinear value at (x, y); queries outside the grid clamp to the border."""
        backend = backend or _backend.BACKEND
        gx, gy = self.prepared(backend)
        return _backend.load(backend).sample_kernel(gx, gy, float(x), float(y))


def compute_fields(img: np.ndarray, cfg: PointflowConfig = PointflowConfig()) -> tuple[FlowField, FlowField]:
    """(V+, V-) with V+- = (V_a +- V_r) / 2.

    V_a is the gradient of the blurred image's gradient magnitude and V_r the
    blurred gradient rotated by +90 degrees, (g_x, g_y) -> (-g_y, g_x).
    """
    Ib = gaussian_blur(np.asarray(img, dtype=np.float64), cfg.sigma_pf)
    gx, gy = central_gradient(Ib)
    ax, ay = central_gradient(np.hypot(gx, gy))  # edge attraction
    rx, ry = -gy, gx  # gradient rotated by +90 degrees
    return FlowField(0.5 * (ax + rx), 0.5 * (ay + ry)), FlowField(0.5 * (ax - rx), 0.5 * (ay - ry))
