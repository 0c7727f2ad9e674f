"""
Command-line front end.

    vsspr learn    [--config PATH | --preset NAME] [--out DIR] [--seed N] [--jobs N] [--svg]
    vsspr ser      ... [--snr 10,12,14] [--orders 16,256]
    vsspr scatter  ... [--algorithm NAME] [--span START:STOP]
    vsspr validate [--projection-eps EPS] [--full] [--out DIR]

Exit codes: 0 success, 1 validation or numeric failure, 2 configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, RunConfig, config_from_dict, parse_config
from .equalizer import (
    average_learning_curve,
    convergence_iteration,
    run_equalizer_batch,
    run_learning_experiment,
    run_ser_sweep,
    scatter_capture,
    steady_state_db,
)
from .errors import ConfigurationError, NumericError, ParameterError
from .svg import line_chart, scatter_chart
from .validation import run_validation

log = logging.getLogger("vsspr")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def fmt_number(v) -> str:
    """Fixed CSV number format: 17 significant digits."""
    return format(float(v), ".17g")


def _write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(r) for r in rows)
    return "\n".join(lines) + "\n"


def _order_name(order: int) -> str:
    return "QPSK" if order == 4 else f"{order}QAM"


def learning_curve_csv(run: RunConfig, traces) -> tuple:
    """CSV text plus per-algorithm (curve_db, steady_db, steady_se, convergence)."""
    cfg = run.experiment
    labels = list(traces)
    summary = {}
    columns = []
    for label in labels:
        sq, _ = traces[label]
        curve = average_learning_curve(sq, valid_from=cfg.delta).mse_db
        ss, se = steady_state_db(sq, window=min(500, cfg.length - cfg.delta))
        summary[label] = (curve, ss, se, convergence_iteration(curve, ss, start=cfg.delta))
        columns.append(curve)
    rows = (
        [str(n)] + [fmt_number(col[n]) for col in columns]
        for n in range(cfg.length)
    )
    return _csv(["iteration"] + labels, rows), summary


def ser_csv(curves, snr, orders, labels) -> str:
    header = ["snr_db"] + [f"{label}_{_order_name(o)}" for o in orders for label in labels]
    rows = []
    for i, s in enumerate(snr):
        rows.append([fmt_number(s)] + [fmt_number(curves[(o, label)].ser[i]) for o in orders for label in labels])
    return _csv(header, rows)


def scatter_csv(groups) -> str:
    rows = []
    for kind, pts in groups.items():
        rows.extend([kind, fmt_number(z.real), fmt_number(z.imag)] for z in pts)
    return _csv(["kind", "re", "im"], rows)


def _manifest(command, run: RunConfig, outputs, started, extra=None) -> str:
    doc = {
        "artifact": "vsspr",
        "version": __version__,
        "command": command,
        "base_seed": run.experiment.base_seed,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "outputs": sorted(str(p) for p in outputs),
        "config": run.normalized,
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigurationError("use either --config or --preset, not both")
    run = parse_config(path=args.config, preset=args.preset)
    raw = copy.deepcopy(run.normalized)
    if args.seed is not None:
        raw["experiment"]["seed"] = args.seed
    if getattr(args, "svg", False):
        raw["output"]["svg"] = True
    if getattr(args, "snr", None):
        raw["ser"]["snr_db"] = _float_list(args.snr, "--snr")
    if getattr(args, "orders", None):
        raw["ser"]["dd_orders"] = [int(v) for v in _float_list(args.orders, "--orders")]
    if getattr(args, "algorithm", None):
        raw["scatter"]["algorithm"] = args.algorithm
    if getattr(args, "span", None):
        try:
            start, stop = (int(v) for v in args.span.split(":"))
        except ValueError:
            raise ConfigurationError(f"--span: expected START:STOP, got {args.span!r}") from None
        raw["scatter"]["start"], raw["scatter"]["stop"] = start, stop
    return config_from_dict(raw)


def _float_list(text, flag):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def cmd_learn(args) -> int:
    run = _load(args)
    started = datetime.now(timezone.utc).isoformat()
    out = Path(args.out)
    traces = run_learning_experiment(run.experiment, jobs=args.jobs)
    text, summary = learning_curve_csv(run, traces)
    outputs = [out / "learning_curve.csv"]
    _write_atomic(outputs[0], text)
    for label, (_, ss, se, conv) in summary.items():
        mu = traces[label][1]
        print(f"{label:>8}: steady state {ss:.2f} dB (se {se:.3f}), within 3 dB at iteration {conv}, "
              f"mu in [{mu.min():.4g}, {mu.max():.4g}]")
    if run.svg:
        cfg = run.experiment
        svg = line_chart(
            np.arange(cfg.length), {k: v[0] for k, v in summary.items()},
            title=f"Learning curves ({cfg.realizations} realizations)",
            xlabel="iteration", ylabel="MSE (dB)", vlines=(cfg.n_train,),
        )
        outputs.append(out / "learning_curve.svg")
        _write_atomic(outputs[-1], svg)
    _write_atomic(out / "manifest-learn.json", _manifest("learn", run, outputs, started))
    return EXIT_OK


def cmd_ser(args) -> int:
    run = _load(args)
    started = datetime.now(timezone.utc).isoformat()
    out = Path(args.out)
    cfg = run.experiment
    curves = run_ser_sweep(cfg, run.ser_snr_db, dd_orders=run.ser_dd_orders, jobs=args.jobs)
    snr = np.sort(np.asarray(run.ser_snr_db))
    labels = [a.label for a in cfg.algorithms]
    outputs = [out / "ser.csv"]
    _write_atomic(outputs[0], ser_csv(curves, snr, run.ser_dd_orders, labels))
    for (order, label), c in curves.items():
        print(f"{_order_name(order):>7} {label:>8}: " + " ".join(f"{s:g}dB:{v:.4g}" for s, v in zip(snr, c.ser)))
    if run.svg:
        for order in run.ser_dd_orders:
            svg = line_chart(
                snr, {label: curves[(order, label)].ser for label in labels},
                title=f"SER, {_order_name(order)} decision-directed", xlabel="SNR (dB)",
                ylabel="SER", logy=True,
            )
            outputs.append(out / f"ser_{_order_name(order)}.svg")
            _write_atomic(outputs[-1], svg)
    _write_atomic(out / "manifest-ser.json", _manifest("ser", run, outputs, started))
    return EXIT_OK


def cmd_scatter(args) -> int:
    run = _load(args)
    started = datetime.now(timezone.utc).isoformat()
    out = Path(args.out)
    cfg = run.experiment
    spec = cfg.algorithm(run.scatter_algorithm)
    start = run.scatter_start if run.scatter_start is not None else max(cfg.length - 1000, 0)
    stop = run.scatter_stop if run.scatter_stop is not None else cfg.length
    if not 0 <= start <= stop <= cfg.length:
        raise ConfigurationError(f"scatter span [{start}, {stop}) outside [0, {cfg.length}]")
    trace = run_equalizer_batch(cfg, spec, [0]).realization(0)
    groups = {
        "tx": trace.transmitted[start:stop],
        "rx": scatter_capture(trace, "pre", start, stop),
        "eq": scatter_capture(trace, "post", start, stop),
    }
    outputs = [out / "scatter.csv"]
    _write_atomic(outputs[0], scatter_csv(groups))
    if run.svg:
        for kind in ("rx", "eq"):
            outputs.append(out / f"scatter_{kind}.svg")
            _write_atomic(outputs[-1], scatter_chart({kind: groups[kind]}, title=f"{spec.label}: {kind}"))
    _write_atomic(out / "manifest-scatter.json", _manifest("scatter", run, outputs, started))
    print(f"{spec.label}: wrote {3 * (stop - start)} points for iterations [{start}, {stop})")
    return EXIT_OK


def cmd_validate(args) -> int:
    results = run_validation(projection_eps=args.projection_eps, quick=not args.full)
    report = {
        "passed": all(r.passed for r in results),
        "groups": [{"name": r.name, "passed": r.passed, "details": r.details} for r in results],
    }
    text = json.dumps(report, indent=2, default=float) + "\n"
    sys.stdout.write(text)
    if args.out:
        _write_atomic(Path(args.out) / "validate.json", text)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config, or a manifest JSON to replay")
    common.add_argument("--preset", choices=PRESETS)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="override the base seed")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    common.add_argument("--svg", action="store_true", help="also write SVG charts")

    parser = argparse.ArgumentParser(prog="vsspr", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"vsspr {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", parents=[common], help="averaged learning curves")
    p.set_defaults(func=cmd_learn)
    p = sub.add_parser("ser", parents=[common], help="SER versus SNR sweep")
    p.add_argument("--snr", help="comma-separated SNR points in dB")
    p.add_argument("--orders", help="comma-separated decision-directed constellation orders")
    p.set_defaults(func=cmd_ser)
    p = sub.add_parser("scatter", parents=[common], help="scatter diagram samples")
    p.add_argument("--algorithm", help="algorithm name from the config")
    p.add_argument("--span", help="iteration span START:STOP")
    p.set_defaults(func=cmd_scatter)
    p = sub.add_parser("validate", help="run the invariant suites")
    p.add_argument("--projection-eps", type=float, default=1e-12)
    p.add_argument("--full", action="store_true", help="larger ensembles")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
