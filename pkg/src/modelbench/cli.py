"""Command line entry point: ``modelbench <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from modelbench import disk2d, eval2d, protocol1d, signal1d, tinynet, wiener
from modelbench.errors import EstimationFailure
from modelbench.pointflow import PointflowConfig, integrate_contours
from modelbench.pointflow.flow import estimate_center, estimate_radius
from modelbench.streams import stream


def _dump(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float, default=signal1d.DEFAULT_RHO)
    p.add_argument("--dim", type=int, default=signal1d.DEFAULT_DIM)
    p.add_argument("--sigma-n", type=float, default=signal1d.DEFAULT_SIGMA_N,
                   help="noise standard deviation (default sqrt(0.1))")
    p.add_argument("--unnormalized-blur", action="store_true",
                   help="use blur taps 1, 1, 1 instead of 1/3 each")


def _model(args) -> signal1d.SignalModel1D:
    H = signal1d.make_blur(args.dim, normalize=not args.unnormalized_blur)
    return signal1d.SignalModel1D(args.dim, args.rho, H, args.sigma_n)


def _pf_config(path: str | None) -> PointflowConfig:
    return PointflowConfig(**json.loads(Path(path).read_text())) if path else PointflowConfig()


def cmd_gen1d(args) -> None:
    ds = signal1d.generate_dataset(_model(args), args.n, args.seed, "dataset")
    signal1d.write_dataset(args.out, ds)


def cmd_wiener(args) -> None:
    model = _model(args)
    filt = wiener.build_wiener(model)
    result = {"analytic_ese": wiener.analytic_ese(model)}
    if args.empirical:
        ds = signal1d.generate_dataset(model, args.empirical, args.seed, "test")
        errs = wiener.squared_errors(filt, ds)
        result.update(empirical_mse=float(errs.mean()), standard_error=wiener.standard_error(errs),
                      n=args.empirical)
    _dump(result, args.out)


def cmd_train1d(args) -> None:
    model = _model(args)
    seed = args.seed
    train_set = signal1d.generate_dataset(model, args.n, seed, "train", args.n, 0)
    val = signal1d.generate_dataset(model, args.n_val, seed, "val")
    test = signal1d.generate_dataset(model, args.n_test, seed, "test")
    net = tinynet.init_network(args.depth, args.dim, stream(seed, "init", args.depth, args.n, 0), args.kernel_support)
    net = tinynet.train(net, train_set, args.epochs, args.batch, tinynet.Optimizer(args.lr),
                        stream(seed, "shuffle", args.depth, args.n, 0))
    params_path = args.params_out or f"tinynet_k{args.depth}_n{args.n}_seed{seed}.bin"
    tinynet.save_params(params_path, net)
    _dump({
        "train_mse": wiener.empirical_mse(net, train_set),
        "val_mse": wiener.empirical_mse(net, val),
        "test_mse": wiener.empirical_mse(net, test),
        "params_path": str(params_path),
    }, args.out)


def cmd_sweep1d(args) -> None:
    cfg = protocol1d.SweepConfig.from_json(args.config)
    if args.jobs:
        cfg.jobs = args.jobs
    records = protocol1d.run_sweep(cfg)
    _, records = protocol1d.summarize(records, cfg.r)
    protocol1d.write_records(records, args.out)


def _scores(args):
    records = protocol1d.read_records(args.records)
    scores, _ = protocol1d.summarize(records, args.r)
    return scores, wiener.analytic_ese(_model(args))


def cmd_table1(args) -> None:
    scores, ese = _scores(args)
    csv_text, table = protocol1d.emit_table({(s.depth, s.N): s.score for s in scores}, ese)
    Path(args.out).write_text(csv_text)
    sys.stdout.write(table)


def cmd_plot1d(args) -> None:
    scores, ese = _scores(args)
    Path(args.out).write_text(protocol1d.emit_learning_curve(scores, ese))


def cmd_gen2d(args) -> None:
    cfg = disk2d.DegradeConfig(args.sigma_b, args.sigma_n)
    samples = disk2d.generate_dataset2d(args.n, args.dim, cfg, args.seed)
    disk2d.write_dataset2d(args.out, samples, args.dim, cfg, args.seed)


def cmd_pointflow(args) -> None:
    img = disk2d.read_image(args.image)
    contours = integrate_contours(img, _pf_config(args.config), stream(args.seed, "pointflow"))
    _dump({
        "image": str(args.image),
        "contours": [{"length": c.length, "termination": "loop", "points": c.points.tolist()} for c in contours],
    }, args.out)


def cmd_pointflow_estimate(args) -> None:
    img = disk2d.read_image(args.image)
    contours = integrate_contours(img, _pf_config(args.config), stream(args.seed, "pointflow"))
    out = {"n_contours": len(contours), "failed": False, "r_hat": None, "c_hat": None}
    try:
        out["r_hat"] = estimate_radius(contours)
        out["c_hat"] = list(estimate_center(contours))
    except EstimationFailure:
        out["failed"] = True
    _dump(out, args.out)


def cmd_eval2d(args) -> None:
    report = eval2d.evaluate_pointflow(args.n, args.dim, disk2d.DegradeConfig(args.sigma_b, args.sigma_n),
                                       _pf_config(args.config), args.seed, args.jobs)
    Path(args.out).write_text(report.to_json())
    csv_text, table = eval2d.emit_table2(report)
    if args.table:
        Path(args.table).write_text(csv_text)
    sys.stdout.write(table)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelbench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen1d", help="write an MVD1 dataset of 1-D signal pairs")
    _model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen1d)

    p = sub.add_parser("wiener", help="Wiener filter error, analytic and optionally Monte-Carlo")
    _model_args(p)
    p.add_argument("--empirical", type=int, default=0, metavar="N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_wiener)

    p = sub.add_parser("train1d", help="train one network")
    _model_args(p)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--n-val", type=int, default=10_000)
    p.add_argument("--n-test", type=int, default=10_000)
    p.add_argument("--kernel-support", type=int, default=None)
    p.add_argument("--params-out")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train1d)

    p = sub.add_parser("sweep1d", help="learning-rate sweep, writes the run-record CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=cmd_sweep1d)

    for name, func, what in (("table1", cmd_table1, "score table"), ("plot1d", cmd_plot1d, "learning-curve SVG")):
        p = sub.add_parser(name, help=f"{what} from run records")
        _model_args(p)
        p.add_argument("--records", required=True)
        p.add_argument("--r", type=int, default=3)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("gen2d", help="write degraded disk images")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=disk2d.DEFAULT_DIM)
    p.add_argument("--sigma-b", type=float, default=disk2d.DEFAULT_SIGMA_B)
    p.add_argument("--sigma-n", type=float, default=disk2d.DEFAULT_SIGMA_N)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen2d)

    for name, func in (("pointflow", cmd_pointflow), ("pointflow-estimate", cmd_pointflow_estimate)):
        p = sub.add_parser(name, help="contours of one image" if name == "pointflow" else "disk estimate")
        p.add_argument("--image", required=True)
        p.add_argument("--config")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=name == "pointflow")
        p.set_defaults(func=func)

    p = sub.add_parser("eval2d", help="Pointflow scores on random degraded disks")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--dim", type=int, default=disk2d.DEFAULT_DIM)
    p.add_argument("--sigma-b", type=float, default=disk2d.DEFAULT_SIGMA_B)
    p.add_argument("--sigma-n", type=float, default=disk2d.DEFAULT_SIGMA_N)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--table")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval2d)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
