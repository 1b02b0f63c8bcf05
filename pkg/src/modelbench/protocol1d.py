"""Learning-rate sweep, median-of-best-r selection, scoring and score-table reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from modelbench import tinynet
from modelbench.errors import DomainError, OptimalityViolation
from modelbench.signal1d import DEFAULT_DIM, DEFAULT_RHO, DEFAULT_SIGMA_N, SignalModel1D, generate_dataset, make_blur
from modelbench.streams import stream
from modelbench.wiener import analytic_ese, squared_errors, standard_error

log = logging.getLogger(__name__)

DEFAULT_ETAS = (0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1)
FULL_NS = (10, 100, 1000, 10000, 100000)
OPTIMALITY_SLACK = 3.0  # standard errors


@dataclass
class SweepConfig:
    depths: list[int]
    Ns: list[int]
    etas: list[float]
    N_r: int
    r: int
    N_t: int
    N_v: int
    epochs: int = 50
    batch_size: int = 10
    master_seed: int = 0
    kernel_support: int | None = None
    rho: float = DEFAULT_RHO
    dim: int = DEFAULT_DIM
    sigma_n: float = DEFAULT_SIGMA_N
    normalize_blur: bool = True
    jobs: int = 1

    def __post_init__(self):
        if not 1 <= self.r <= self.N_r:
            raise DomainError(f"need 1 <= r <= N_r, got r={self.r}, N_r={self.N_r}")
        counts = [self.N_t, self.N_v, self.epochs, self.batch_size, *self.Ns]
        if min(counts) < 1 or not self.etas or not self.depths:
            raise DomainError("all counts must be >= 1 and depths/etas nonempty")

    def model(self) -> SignalModel1D:
        return SignalModel1D(self.dim, self.rho, make_blur(self.dim, self.normalize_blur), self.sigma_n)

    @classmethod
    def from_json(cls, path) -> SweepConfig:
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def full_scale(cls, **overrides) -> SweepConfig:
        cfg = dict(depths=[0, 1, 2, 3], Ns=list(FULL_NS), etas=list(DEFAULT_ETAS),
                   N_r=50, r=10, N_t=100_000, N_v=100_000)
        cfg.update(overrides)
        return cls(**cfg)

    @classmethod
    def desk(cls, **overrides) -> SweepConfig:
        cfg = dict(depths=[0, 1], Ns=[100, 1000, 10000], etas=list(DEFAULT_ETAS),
                   N_r=10, r=3, N_t=10_000, N_v=10_000)
        cfg.update(overrides)
        return cls(**cfg)


@dataclass(frozen=True)
class RunRecord:
    depth: int
    N: int
    eta: float
    run_index: int
    val_mse: float
    test_mse: float
    test_se: float
    selected: bool = False

    @property
    def key(self):
        return (self.depth, self.N, self.eta, self.run_index)


def _finite_or_inf(x: float) -> float:
    return float(x) if math.isfinite(x) else math.inf


def _evaluate(net, ds):
    with np.errstate(over="ignore", invalid="ignore"):
        err = squared_errors(net, ds)
    mse = _finite_or_inf(float(np.mean(err)))
    se = standard_error(err) if math.isfinite(mse) else math.inf
    return mse, se


def _run_group(cfg: SweepConfig, depth: int, N: int, val, test) -> list[RunRecord]:
    model = cfg.model()
    seed = cfg.master_seed
    runs = range(cfg.N_r)
    trains = [generate_dataset(model, N, seed, "train", N, i) for i in runs]
    nets = [
        tinynet.init_network(depth, cfg.dim, stream(seed, "init", depth, N, i), cfg.kernel_support)
        for i in runs
        for _ in cfg.etas
    ]
    params = tinynet.stack(nets)
    rngs = [stream(seed, "shuffle", depth, N, i) for i in runs]
    etas = np.asarray(cfg.etas, dtype=np.float64)
    params = tinynet.train_stack(params, trains, etas, rngs, cfg.epochs, cfg.batch_size, cfg.kernel_support)
    out = []
    for i in runs:
        for e, eta in enumerate(cfg.etas):
            net = tinynet.unstack(params, i * len(cfg.etas) + e, cfg.kernel_support)
            val_mse, _ = _evaluate(net, val)
            test_mse, test_se = _evaluate(net, test)
            out.append(RunRecord(depth, N, float(eta), i, val_mse, test_mse, test_se))
    log.info("depth=%d N=%d done", depth, N)
    return out


def run_sweep(cfg: SweepConfig, check_optimality: bool = True) -> list[RunRecord]:
    """Train N_r networks per (depth, N, eta) and score them on shared val/test sets.

    Runs with the same (depth, N, run_index) share their training set,
    initialization and batch order across learning rates. Raises
    :class:`OptimalityViolation` if any network beats the Wiener error by more
    than three standard errors of its test estimate.
    """
    model = cfg.model()
    val = generate_dataset(model, cfg.N_v, cfg.master_seed, "val")
    test = generate_dataset(model, cfg.N_t, cfg.master_seed, "test")
    groups = [(d, n) for d in cfg.depths for n in cfg.Ns]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            futures = [pool.submit(_run_group, cfg, d, n, val, test) for d, n in groups]
            records = [rec for f in futures for rec in f.result()]
    else:
        records = [rec for d, n in groups for rec in _run_group(cfg, d, n, val, test)]
    records.sort(key=lambda rec: rec.key)
    if check_optimality:
        violations = optimality_violations(records, analytic_ese(model))
        if violations:
            raise OptimalityViolation(f"{len(violations)} run(s) beat the Wiener bound, first: {violations[0]}")
    return records


def optimality_violations(records, ese: float, slack: float = OPTIMALITY_SLACK) -> list[RunRecord]:
    return [rec for rec in records if rec.test_mse < ese - slack * rec.test_se]


# -- selection and scoring ----------------------------------------------------

def _median(values) -> float:
    # even counts average the two middle values
    return float(np.median(np.asarray(values, dtype=np.float64)))


def best_runs(records, depth: int, N: int, eta: float, r: int) -> list[RunRecord]:
    pool = [rec for rec in records if rec.depth == depth and rec.N == N and rec.eta == eta]
    if len(pool) < r:
        raise DomainError(f"need {r} runs for depth={depth} N={N} eta={eta}, have {len(pool)}")
    return sorted(pool, key=lambda rec: (rec.val_mse, rec.run_index))[:r]


def select_learning_rate(records, depth: int, N: int, r: int) -> float:
    """argmin over eta of the median validation MSE of its r best runs (ties -> smaller eta)."""
    etas = sorted({rec.eta for rec in records if rec.depth == depth and rec.N == N})
    if not etas:
        raise DomainError(f"no runs for depth={depth} N={N}")
    medians = [(_median([b.val_mse for b in best_runs(records, depth, N, eta, r)]), eta) for eta in etas]
    return min(medians)[1]


def score(records, depth: int, N: int, r: int, eta: float | None = None) -> float:
    if eta is None:
        eta = select_learning_rate(records, depth, N, r)
    return _median([b.test_mse for b in best_runs(records, depth, N, eta, r)])


@dataclass(frozen=True)
class Score:
    depth: int
    N: int
    eta: float
    score: float
    std: float
    run_indices: tuple[int, ...]


def summarize(records, r: int) -> tuple[list[Score], list[RunRecord]]:
    """Scores per (depth, N) plus the records with ``selected`` flags set."""
    scores, chosen = [], set()
    for depth, N in sorted({(rec.depth, rec.N) for rec in records}):
        eta = select_learning_rate(records, depth, N, r)
        picked = best_runs(records, depth, N, eta, r)
        tests = [p.test_mse for p in picked]
        std = float(np.std(tests)) if all(map(math.isfinite, tests)) else math.inf
        scores.append(Score(depth, N, eta, _median(tests), std, tuple(p.run_index for p in picked)))
        chosen.update(p.key for p in picked)
    flagged = [replace(rec, selected=rec.key in chosen) for rec in records]
    return scores, flagged


# -- record table ---------------------------------------------------------------

RECORD_COLUMNS = [f.name for f in fields(RunRecord)]


def write_records(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for rec in records:
            row = asdict(rec)
            w.writerow([repr(row[c]) if isinstance(row[c], float) else int(row[c]) for c in RECORD_COLUMNS])


def read_records(path) -> list[RunRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(RunRecord(
                int(row["depth"]), int(row["N"]), float(row["eta"]), int(row["run_index"]),
                float(row["val_mse"]), float(row["test_mse"]), float(row["test_se"]),
                bool(int(row["selected"])),
            ))
    return out


# -- reports ----------------------------------------------------------------------

def method_name(depth: int) -> str:
    return "Linear (k=0)" if depth == 0 else f"CNN (k={depth})"


def _depth_of(method: str) -> int:
    return int(method.rsplit("=", 1)[1].rstrip(")"))


def emit_table(scores: dict[tuple[int, int], float], wiener_ese: float | None) -> tuple[str, str]:
    """CSV (method, N, score) and an aligned text table with one column per N."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "N", "score"])
    if wiener_ese is not None:
        w.writerow(["Wiener", 0, repr(float(wiener_ese))])
    for (depth, N), value in sorted(scores.items()):
        w.writerow([method_name(depth), N, repr(float(value))])

    Ns = sorted({N for _, N in scores})
    cols = ([0] if wiener_ese is not None else []) + Ns
    lines = ["N".ljust(14) + "".join(f"{n:>10}" for n in cols)]
    if wiener_ese is not None:
        lines.append("Wiener".ljust(14) + f"{wiener_ese:>10.3f}" + "".join(f"{'---':>10}" for _ in Ns))
    for depth in sorted({d for d, _ in scores}):
        cells = [f"{'---':>10}"] if wiener_ese is not None else []
        cells += [f"{scores[(depth, n)]:>10.3f}" if (depth, n) in scores else f"{'':>10}" for n in Ns]
        lines.append(method_name(depth).ljust(14) + "".join(cells))
    return buf.getvalue(), "\n".join(lines) + "\n"


def parse_table(csv_text: str) -> tuple[dict[tuple[int, int], float], float | None]:
    scores, wiener = {}, None
    for row in csv.DictReader(io.StringIO(csv_text)):
        if row["method"] == "Wiener":
            wiener = float(row["score"])
        else:
            scores[(_depth_of(row["method"]), int(row["N"]))] = float(row["score"])
    return scores, wiener


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def emit_learning_curve(scores: list[Score], wiener_ese: float, width: int = 640, height: int = 420) -> str:
    """Log-x SVG of score vs N per depth, std error bars, Wiener reference line."""
    left, right, top, bottom = 70, 20, 20, 50
    pw, ph = width - left - right, height - top - bottom
    finite = [s for s in scores if math.isfinite(s.score)]
    Ns = [s.N for s in finite] or [1]
    lo_x, hi_x = math.log10(min(Ns)), math.log10(max(Ns))
    if hi_x == lo_x:
        lo_x, hi_x = lo_x - 0.5, hi_x + 0.5
    highs = [s.score + (s.std if math.isfinite(s.std) else 0.0) for s in finite]
    lows = [s.score - (s.std if math.isfinite(s.std) else 0.0) for s in finite]
    y_lo = min([wiener_ese, *lows])
    y_hi = max([wiener_ese, *highs])
    pad = 0.05 * (y_hi - y_lo or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(n):
        return left + (math.log10(n) - lo_x) / (hi_x - lo_x) * pw

    def py(v):
        return top + (y_hi - v) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
        f'<line class="wiener" x1="{left}" y1="{py(wiener_ese):.3f}" x2="{left + pw}" y2="{py(wiener_ese):.3f}" '
        f'stroke="#000" stroke-dasharray="6,4"/>',
        f'<text x="{left + pw - 4}" y="{py(wiener_ese) - 4:.3f}" text-anchor="end" font-size="11">Wiener {wiener_ese:.3f}</text>',
    ]
    for n in sorted(set(Ns)):
        out.append(f'<text x="{px(n):.3f}" y="{top + ph + 16}" text-anchor="middle" font-size="11">{n}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle" font-size="12">N (training samples)</text>')
    for i in range(5):
        v = y_lo + (y_hi - y_lo) * i / 4
        out.append(f'<text x="{left - 6}" y="{py(v) + 4:.3f}" text-anchor="end" font-size="11">{v:.3f}</text>')
    for depth in sorted({s.depth for s in finite}):
        color = _PALETTE[depth % len(_PALETTE)]
        pts = sorted((s for s in finite if s.depth == depth), key=lambda s: s.N)
        path = " ".join(f"{px(s.N):.3f},{py(s.score):.3f}" for s in pts)
        out.append(f'<polyline class="curve" data-depth="{depth}" points="{path}" fill="none" stroke="{color}"/>')
        for s in pts:
            if math.isfinite(s.std):
                out.append(f'<line class="errorbar" x1="{px(s.N):.3f}" y1="{py(s.score - s.std):.3f}" '
                           f'x2="{px(s.N):.3f}" y2="{py(s.score + s.std):.3f}" stroke="{color}"/>')
            out.append(f'<circle class="point" data-depth="{depth}" data-n="{s.N}" data-score="{s.score!r}" '
                       f'cx="{px(s.N):.3f}" cy="{py(s.score):.3f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{left + 8}" y="{top + 16 + 14 * depth}" font-size="11" fill="{color}">'
                   f'{method_name(depth)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
