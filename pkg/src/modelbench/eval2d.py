"""Pointflow scores over random degraded disk datasets."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from modelbench.disk2d import DEFAULT_DIM, DegradeConfig, make_sample
from modelbench.errors import EstimationFailure
from modelbench.pointflow import PointflowConfig, estimate_disk
from modelbench.streams import stream

NETWORK_COLUMNS = ("Alexnet", "VGG", "Resnet")


@dataclass
class Eval2DReport:
    n_images: int
    n_failures: int
    mse_joint: float | None
    mse_r: float | None
    mse_c: float | None
    sigma_b: float
    sigma_n: float
    pointflow: dict = field(default_factory=dict)
    seed: int = 0
    dim: int = DEFAULT_DIM

    @property
    def failure_rate(self) -> float:
        return self.n_failures / self.n_images

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> Eval2DReport:
        return cls(**json.loads(text))


def _evaluate_one(i: int, seed: int, D: int, degrade_cfg: DegradeConfig, pf_cfg: PointflowConfig):
    params, img = make_sample(seed, i, D, degrade_cfg)
    try:
        est = estimate_disk(img, pf_cfg, stream(seed, "pointflow", i))
    except EstimationFailure:
        return None
    return (est.r_hat - params.r, est.c_hat[0] - params.cx, est.c_hat[1] - params.cy)


def evaluate_pointflow(n: int, D: int = DEFAULT_DIM, degrade_cfg: DegradeConfig = DegradeConfig(),
                       pf_cfg: PointflowConfig = PointflowConfig(), seed: int = 0, jobs: int = 1) -> Eval2DReport:
    """Estimate (r, c) on ``n`` fresh images; failures are counted, not scored."""
    if n < 1:
        raise ValueError("need at least one image")
    args = [(i, seed, D, degrade_cfg, pf_cfg) for i in range(n)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_evaluate_one, *zip(*args), chunksize=16))
    else:
        results = [_evaluate_one(*a) for a in args]
    errors = np.array([e for e in results if e is not None]).reshape(-1, 3)
    failures = n - len(errors)
    if len(errors):
        sq = errors**2
        mse_r = float(np.mean(sq[:, 0]))
        mse_c = float(np.mean(sq[:, 1] + sq[:, 2]))
        mse_joint = float(np.mean(sq.sum(axis=1)))
    else:
        mse_r = mse_c = mse_joint = None
    return Eval2DReport(n, failures, mse_joint, mse_r, mse_c, degrade_cfg.sigma_b, degrade_cfg.sigma_n,
                        asdict(pf_cfg), seed, D)


def _cell(value) -> str:
    return "fail" if value is None else repr(float(value))


def emit_table2(report: Eval2DReport) -> tuple[str, str]:
    """Pointflow column as CSV and text; network columns are marked unimplemented."""
    rows = [("(r,c)", report.mse_joint), ("r", report.mse_r), ("c", report.mse_c)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "Pointflow", *NETWORK_COLUMNS, "n_images", "n_failures"])
    for name, value in rows:
        w.writerow([name, _cell(value), *["not implemented"] * len(NETWORK_COLUMNS),
                    report.n_images, report.n_failures])
    lines = [f"{'':8}{'Pointflow':>12}" + "".join(f"{c:>18}" for c in NETWORK_COLUMNS)]
    for name, value in rows:
        cell = "fail" if value is None else f"{value:.3f}"
        lines.append(f"{name:8}{cell:>12}" + "".join(f"{'not implemented':>18}" for _ in NETWORK_COLUMNS))
    lines.append(f"images: {report.n_images}, failures: {report.n_failures} "
                 f"({100 * report.failure_rate:.1f}%), sigma_b={report.sigma_b}, sigma_n={report.sigma_n}")
    return buf.getvalue(), "\n".join(lines) + "\n"


def parse_table2(csv_text: str) -> dict[str, float | None]:
    out = {}
    for row in csv.DictReader(io.StringIO(csv_text)):
        cell = row["Pointflow"]
        out[row["metric"]] = None if cell == "fail" else float(cell)
    return out

