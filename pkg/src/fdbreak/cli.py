"""Command-line interface: ``detect``, ``jump``, ``simulate`` and ``knots``.

Input is a long-format CSV with header ``curve,x,y``; curve ids must be
integers and give the time order. Reports are JSON with sorted keys, so a
rerun with the same inputs and seed is byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from dataclasses import replace

import numpy as np

from .dataset import FunctionalDataset
from .errors import FdbreakError, IngestionError, NumericalError, ValidationError
from .inference import WIDTH_RULES, PipelineConfig, analyze, estimate_jump
from .lrcov import SIGMA2_ESTIMATORS
from .meanfit import bic_trace
from .simgen import CSV_HEADER, JUMP_TYPES, SCHEMES, SCORE_DISTS, SimConfig, mc_study, summary_rows

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
HEADER = ("curve", "x", "y")


def _num(text: str, what: str, lineno: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise IngestionError(f"{what} value {text!r} is not a number", lineno) from None
    if not math.isfinite(v):
        raise IngestionError(f"{what} value {text!r} is not finite", lineno)
    return v


def ingest_csv(path: str, rescale_x: bool = False) -> tuple[FunctionalDataset, dict | None]:
    """Read ``curve,x,y`` rows into a dataset ordered by curve id.

    With ``rescale_x`` the locations are mapped affinely onto [0, 1]; the map
    ``x_new = (x - offset) / scale`` is returned alongside the data.
    Rows of one curve keep their file order.
    """
    rows: dict[int, list[tuple[float, float, int]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or tuple(c.strip() for c in head) != HEADER:
            raise IngestionError(f"expected header 'curve,x,y', got {','.join(head or [])!r}", 1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 3:
                raise IngestionError(f"expected 3 fields, got {len(rec)}", lineno)
            cid_text, x_text, y_text = (c.strip() for c in rec)
            try:
                cid = int(cid_text)
            except ValueError:
                raise IngestionError(f"curve id {cid_text!r} is not an integer", lineno) from None
            if not x_text or not y_text:
                raise IngestionError(f"curve {cid} has an empty location or value", lineno)
            rows.setdefault(cid, []).append((_num(x_text, "x", lineno), _num(y_text, "y", lineno), lineno))
    if not rows:
        raise IngestionError("no data rows", 2)
    ordered = [rows[c] for c in sorted(rows)]
    x = np.array([r[0] for pts in ordered for r in pts])
    y = np.array([r[1] for pts in ordered for r in pts])
    xmap = None
    if rescale_x:
        lo, hi = float(x.min()), float(x.max())
        if not hi > lo:
            raise IngestionError("cannot rescale x: all locations are equal")
        xmap = {"offset": lo, "scale": hi - lo}
        x = np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    else:
        bad = np.nonzero((x < 0.0) | (x > 1.0))[0]
        if len(bad):
            lineno = [r[2] for pts in ordered for r in pts][bad[0]]
            raise IngestionError(f"x = {x[bad[0]]!r} lies outside [0, 1]; pass --rescale-x to map it", lineno)
    offsets = np.concatenate([[0], np.cumsum([len(p) for p in ordered])])
    return FunctionalDataset(x, y, offsets), xmap


def write_csv(data: FunctionalDataset, path_or_buf) -> None:
    """Write ``data`` in the ingestion format, with round-trip float text."""
    own = isinstance(path_or_buf, str)
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for i, (x, y) in enumerate(data.curves()):
            for a, b in zip(x.tolist(), y.tolist()):
                w.writerow((i, repr(a), repr(b)))
    finally:
        if own:
            fh.close()


def _int_or(word: str):
    def parse(text: str):
        if text == word:
            return text
        try:
            return int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer or {word!r}, got {text!r}") from None

    return parse


def _pipeline_args(p: argparse.ArgumentParser, draws_default: int = 2000):
    g = p.add_argument_group("pipeline")
    g.add_argument("--p", type=int, default=4, help="spline order (4 = cubic)")
    g.add_argument("--j-n", type=_int_or("bic"), default="bic", help="interior knots, or 'bic'")
    g.add_argument("--epsilon", type=float, default=0.1, help="boundary trimming of t")
    g.add_argument("--alpha", type=float, default=0.05)
    g.add_argument("--mc-draws", type=int, default=draws_default, help="simulated suprema per quantile")
    g.add_argument("--lag", type=_int_or("auto"), default="auto", help="lag window L, or 'auto'")
    g.add_argument("--lag-rule", choices=("n15", "loglog"), default="n15")
    g.add_argument("--xgrid-size", type=int, default=401, help="odd number of x grid points")
    g.add_argument("--width-rule", choices=WIDTH_RULES, default="theorem4")
    g.add_argument("--sigma2-estimator", choices=SIGMA2_ESTIMATORS, default="general")
    g.add_argument("--seed", type=int, default=0)


def _data_args(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, help="CSV with header curve,x,y")
    p.add_argument("--rescale-x", action="store_true", help="map x affinely onto [0, 1]")
    p.add_argument("--output", help="output file (default: stdout)")


def _config(args) -> PipelineConfig:
    return PipelineConfig(
        p=args.p,
        j_n=args.j_n,
        epsilon=args.epsilon,
        alpha=args.alpha,
        mc_draws=args.mc_draws,
        lag=args.lag,
        lag_rule=args.lag_rule,
        xgrid_size=args.xgrid_size,
        width_rule=args.width_rule,
        sigma2_estimator=args.sigma2_estimator,
        seed=args.seed,
    )


def _resolved(args, cfg: PipelineConfig) -> dict:
    return dict(cfg.to_dict(), input_path=args.input, rescale_x=args.rescale_x)


def _dump_json(obj, path: str | None):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    _emit(text, path)


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def cmd_detect(args) -> int:
    cfg = _config(args)
    data, xmap = ingest_csv(args.input, args.rescale_x)
    report = analyze(data, cfg).report
    _dump_json({"config": _resolved(args, cfg), "x_map": xmap, "report": report.to_dict()}, args.output)
    return EXIT_OK


def cmd_jump(args) -> int:
    cfg = _config(args)
    data, xmap = ingest_csv(args.input, args.rescale_x)
    band = estimate_jump(data, k_hat=args.k, config=cfg)
    out = {"config": dict(_resolved(args, cfg), k=args.k), "x_map": xmap, "band": band.to_dict()}
    _dump_json(out, args.output)
    if args.csv:
        rows = zip(band.xgrid.tolist(), band.delta_hat.tolist(), band.lower.tolist(), band.upper.tolist())
        _emit(_csv_text(("x", "delta_hat", "lower", "upper"), rows), args.csv)
    return EXIT_OK


def cmd_knots(args) -> int:
    cfg = _config(args)
    data, _ = ingest_csv(args.input, args.rescale_x)
    rows = bic_trace(data, cfg.p, cfg.epsilon, cfg.xgrid_size)
    best = min(rows, key=lambda r: (r.bic, r.interior_knots)).interior_knots
    table = [(r.interior_knots, r.k_hat, r.mse, r.bic, int(r.interior_knots == best)) for r in rows]
    _emit(_csv_text(("interior_knots", "k_hat", "mse", "bic", "selected"), table), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    pipe = _config(args)
    rows = []
    for setting, jump, a, n, dist in itertools.product(args.setting, args.jump, args.a, args.n, args.dist):
        cfg = SimConfig(n=n, sampling_scheme=setting, jump_type=jump, a=a, score_dist=dist, seed=args.seed)
        summary = mc_study(cfg, args.reps, replace(pipe, seed=args.seed), workers=args.workers)
        rows.extend(summary_rows(cfg, summary))
    _emit(_csv_text(CSV_HEADER + ("reps",), [r + (args.reps,) for r in rows]), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdbreak", description="Mean-break tests for sparsely to densely observed functional time series.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="test for a break and locate it (JSON report)")
    _data_args(p)
    _pipeline_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("jump", help="jump estimate with a simultaneous band (JSON, optional CSV)")
    _data_args(p)
    p.add_argument("--k", type=int, help="curves before the break (default: the L2 locator)")
    p.add_argument("--csv", help="write x,delta_hat,lower,upper here")
    _pipeline_args(p)
    p.set_defaults(func=cmd_jump)

    p = sub.add_parser("knots", help="BIC trace over the knot search range (CSV)")
    _data_args(p)
    _pipeline_args(p)
    p.set_defaults(func=cmd_knots)

    p = sub.add_parser("simulate", help="Monte Carlo size/power/coverage study (CSV)")
    p.add_argument("--setting", type=int, nargs="+", default=[1], choices=SCHEMES)
    p.add_argument("--jump", nargs="+", default=["i"], choices=JUMP_TYPES)
    p.add_argument("--a", type=float, nargs="+", default=[0.0])
    p.add_argument("--n", type=int, nargs="+", default=[200])
    p.add_argument("--dist", nargs="+", default=["normal"], choices=SCORE_DISTS)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--workers", type=int, help="worker processes (default: $FDBREAK_WORKERS or CPU count)")
    p.add_argument("--output", help="output file (default: stdout)")
    _pipeline_args(p, draws_default=500)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as err:
        print(f"fdbreak: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, OSError) as err:
        print(f"fdbreak: {err}", file=sys.stderr)
        return EXIT_USAGE
    except FdbreakError as err:
        print(f"fdbreak: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
