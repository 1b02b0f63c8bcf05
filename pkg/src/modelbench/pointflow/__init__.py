"""Learning-free subpixel contour integration for disk images.

The inner Euler loop runs in a compiled extension (``_flowcore``) when it is
built and in an equivalent pure-Python kernel (``_flowpy``) otherwise; see
:data:`BACKEND`.
"""
from modelbench.pointflow._backend import BACKEND, available
from modelbench.pointflow.fields import FlowField, PointflowConfig, compute_fields
from modelbench.pointflow.flow import (
    Contour,
    DiskEstimate,
    Termination,
    Trajectory,
    estimate_center,
    estimate_disk,
    estimate_radius,
    fit_circle_ls,
    flow,
    integrate_contours,
    polyline_length,
    radius_from_theta3,
)

__all__ = [
    "BACKEND", "available", "FlowField", "PointflowConfig", "compute_fields", "Contour",
    "DiskEstimate", "Termination", "Trajectory", "estimate_center", "estimate_disk",
    "estimate_radius", "fit_circle_ls", "flow", "integrate_contours", "polyline_length",
    "radius_from_theta3",
]
