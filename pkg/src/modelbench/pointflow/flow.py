"""Point trajectories, contour integration and disk estimation."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from modelbench.errors import DegenerateGeometryError, DomainError, EstimationFailure
from modelbench.pointflow import _backend
from modelbench.pointflow.fields import FlowField, PointflowConfig, compute_fields


class Termination(enum.IntEnum):
    LOOP = 0
    OUT_OF_DOMAIN = 1
    STUCK = 2
    MAX_ITER = 3


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray  # (n, 2) subpixel (x, y)
    termination: Termination
    loop_start: int | None = None

    def __post_init__(self):
        if len(self.points) < 1:
            raise ValueError("a trajectory holds at least its start point")
        if (self.loop_start is not None) != (self.termination is Termination.LOOP):
            raise ValueError("loop_start is set exactly for looped trajectories")

    @property
    def length(self) -> float:
        return polyline_length(self.points, closed=False)

    @property
    def end(self) -> tuple[float, float]:
        return float(self.points[-1, 0]), float(self.points[-1, 1])

    def loop(self) -> np.ndarray:
        return self.points[self.loop_start :]


@dataclass(frozen=True)
class Contour:
    points: np.ndarray  # closed polyline, last point joins the first

    @property
    def length(self) -> float:
        return polyline_length(self.points, closed=True)


def polyline_length(points: np.ndarray, closed: bool) -> float:
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    if closed:
        pts = np.vstack([pts, pts[:1]])
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


def flow(start, field: FlowField, cfg: PointflowConfig = PointflowConfig(), backend: str | None = None) -> Trajectory:
    """Forward Euler ``P <- P + dt V(P)`` until loop, exit, stall or ``n_iter`` steps.

    A loop closes when the newest point comes within squared distance tau_l
    of an earlier point j while some point strictly between them is at
    squared distance >= tau_l from both; j is the loop start (earliest wins).
    """
    backend = backend or _backend.BACKEND
    x0, y0 = float(start[0]), float(start[1])
    h = 0.5 * (field.D - 1)
    if not (abs(x0) <= h and abs(y0) <= h):
        raise DomainError(f"start point ({x0}, {y0}) outside [-{h}, {h}]^2")
    gx, gy = field.prepared(backend)
    n = cfg.n_iter + 1
    xs, ys = np.empty(n), np.empty(n)
    far = np.empty(n, dtype=np.int64)
    count, code, loop_start = _backend.load(backend).flow_kernel(
        gx, gy, x0, y0, float(cfg.dt), float(cfg.tau_l), float(cfg.tau_s), int(cfg.n_iter), xs, ys, far
    )
    pts = np.column_stack([xs[:count], ys[:count]])
    code = Termination(code)
    return Trajectory(pts, code, int(loop_start) if code is Termination.LOOP else None)


def _closed_contour(traj: Trajectory, cfg: PointflowConfig) -> Contour | None:
    if traj.termination is not Termination.LOOP:
        return None
    loop = traj.loop()
    if len(loop) < 3 or polyline_length(loop, closed=True) <= cfg.tau_len:
        return None
    return Contour(loop.copy())


def contour_from_seed(start, v_plus: FlowField, v_minus: FlowField, cfg: PointflowConfig,
                      backend: str | None = None) -> Contour | None:
    """One pass of the per-seed contour rule; None when the seed is discarded."""
    traj = flow(start, v_plus, cfg, backend)
    if traj.length < cfg.tau_len:
        return None
    if traj.termination is Termination.LOOP:
        return _closed_contour(flow(traj.end, v_plus, cfg, backend), cfg)
    if traj.termination is Termination.OUT_OF_DOMAIN:
        back = flow(traj.end, v_minus, cfg, backend)
        if back.termination is Termination.LOOP and back.length >= cfg.tau_len:
            return _closed_contour(flow(back.end, v_minus, cfg, backend), cfg)
    return None


def seed_points(D: int, n: int, rng: np.random.Generator) -> np.ndarray:
    h = 0.5 * (D - 1)
    return rng.uniform(-h, h, size=(n, 2))


def integrate_contours(img: np.ndarray, cfg: PointflowConfig = PointflowConfig(),
                       rng: np.random.Generator | None = None, backend: str | None = None) -> list[Contour]:
    """Flow ``cfg.n_points`` uniform seeds and keep the contours of the ones that loop."""
    if rng is None:
        raise DomainError("integrate_contours needs an explicit random stream")
    img = np.asarray(img, dtype=np.float64)
    v_plus, v_minus = compute_fields(img, cfg)
    contours = []
    for start in seed_points(img.shape[0], cfg.n_points, rng):
        c = contour_from_seed(start, v_plus, v_minus, cfg, backend)
        if c is not None:
            contours.append(c)
    return contours


# -- geometry -------------------------------------------------------------------

def estimate_radius(contours) -> float:
    """Mean closed-contour length divided by 2 pi."""
    if not contours:
        raise EstimationFailure("no contour to measure")
    return float(np.mean([c.length for c in contours]) / (2 * math.pi))


def fit_circle_ls(points) -> tuple[tuple[float, float], float]:
    """Least squares on ``t1 x + t2 y + t3 = x^2 + y^2``; returns ((t1/2, t2/2), t3).

    Solved by QR on mean-centred coordinates, which spans the same column
    space and therefore yields the same circle.
    """
    pts = np.asarray(getattr(points, "points", points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DegenerateGeometryError("need at least 3 points")
    mean = pts.mean(axis=0)
    q = pts - mean
    A = np.column_stack([q, np.ones(len(q))])
    B = np.sum(q * q, axis=1)
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    scale = max(float(np.max(np.abs(q))), 1.0)
    if diag.min() <= 1e-9 * scale * max(diag.max(), 1.0):
        raise DegenerateGeometryError("points are collinear or coincident")
    theta = np.linalg.solve(R, Q.T @ B)
    c_local = 0.5 * theta[:2]
    r2 = theta[2] + c_local @ c_local
    cx, cy = c_local + mean
    return (float(cx), float(cy)), float(r2 - cx * cx - cy * cy)


def radius_from_theta3(center, theta3: float) -> float:
    """Radius implied by the fit constant. Diagnostic only; estimates use arc length."""
    cx, cy = center
    return math.sqrt(max(theta3 + cx * cx + cy * cy, 0.0))


def estimate_center(contours) -> tuple[float, float]:
    centers = []
    for c in contours:
        try:
            centers.append(fit_circle_ls(c.points)[0])
        except DegenerateGeometryError:
            continue
    if not centers:
        raise EstimationFailure("no fittable contour")
    cx, cy = np.mean(centers, axis=0)
    return float(cx), float(cy)


@dataclass(frozen=True)
class DiskEstimate:
    r_hat: float
    c_hat: tuple[float, float]
    n_contours: int


def estimate_disk(img: np.ndarray, cfg: PointflowConfig = PointflowConfig(),
                  rng: np.random.Generator | None = None, backend: str | None = None) -> DiskEstimate:
    contours = integrate_contours(img, cfg, rng, backend)
    return DiskEstimate(estimate_radius(contours), estimate_center(contours), len(contours))
