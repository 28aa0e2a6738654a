"""Command-line front end.

    npptf [--config FILE] [--set KEY=VALUE ...] point --distance-km D
    npptf sweep --from 0 --to 500 --step 10 [--optimize-mu] [--output rates.csv] [--figure rates.png]
    npptf loss-limit [--mode improved] [--resolution 0.25]
    npptf ingest-check --gains measured.csv

Errors go to stderr as one JSON object with a stable ``error`` code; the
exit status identifies the error class (see ``EXIT_CODES``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .channel import GainTable, build_gain_table
from .config import parse_config
from .crossterm import class_intervals, pair_tail_slack
from .decoy import bound_yields
from .errors import ConfigError, DataIntegrityError, NpptfError
from .keyrate import evaluate_point, max_tolerable_loss, optimize_mu, sweep

CSV_HEADER = ["distance_km", "loss_db", "mode", "mu", "q_code", "e_code", "i_ae_upper", "skr",
              "plob_bound"]

EXIT_CODES = {
    "config_error": 2,
    "domain_error": 3,
    "data_integrity_error": 4,
    "estimation_error": 5,
    "solver_error": 6,
    "structural_error": 7,
    "internal_error": 70,
}


def fmt(value):
    """17 significant digits; inf/nan spelled out."""
    if isinstance(value, str):
        return value
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else fmt(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _plob_fix(cfg, p):
    if cfg.plob_with_detector and math.isfinite(p.plob_bound):
        eta = 10.0 ** (-cfg.channel.loss_coeff * p.distance_km / 10.0) * cfg.channel.det_eff
        return replace(p, plob_bound=-math.log1p(-eta) / math.log(2.0))
    return p


def _load_gains(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read gain table {path}: {exc.strerror}") from exc
    return GainTable.from_csv(text)


def _intensities_for(cfg, gains):
    ic = cfg.intensities
    if gains is not None and gains.mu != ic.mu:
        ic = ic.with_mu(gains.mu)
    if gains is not None and not gains.covers(ic.i1, ic.i2):
        raise DataIntegrityError("gain table does not cover every intensity pair of I1 x I1 and "
                                 "I2 x I2", module="cli")
    return ic


def point_report(p):
    out = {k: v for k, v in asdict(p).items() if k != "detail"}
    out.update(p.detail)
    return out


def write_csv(rows, stream):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([fmt(r.distance_km), fmt(r.total_loss_db), r.mode, fmt(r.mu), fmt(r.q_code),
                    fmt(r.e_code), fmt(r.i_ae_upper), fmt(r.skr), fmt(r.plob_bound)])


def cmd_point(cfg, args, out):
    gains_path = args.gains or cfg.gains_file
    gains = _load_gains(gains_path) if gains_path else None
    ic = _intensities_for(cfg, gains)
    if args.mu is not None:
        if gains is not None:
            raise ConfigError("--mu conflicts with a supplied gain table (it fixes the code intensity)")
        ic = ic.with_mu(args.mu)
    modes = [args.mode] if args.mode else list(cfg.modes)
    kw = cfg.pipeline_kwargs()
    points = []
    for mode in modes:
        if (args.optimize_mu or cfg.optimize_mu) and gains is None:
            _, p = optimize_mu(cfg.channel, ic, args.distance_km, mode, cfg.mu_grid, **kw)
        else:
            p = evaluate_point(cfg.channel, ic, args.distance_km, mode, gains=gains, **kw)
        points.append(point_report(_plob_fix(cfg, p)))
    report = {"distance_km": args.distance_km, "leakage_tol": cfg.leakage_tol, "points": points}
    text = json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n"
    _emit(text, args.output, out)
    return 0


def _distances(start, stop, step):
    if not step > 0 or stop < start:
        raise ConfigError("sweep needs --step > 0 and --to >= --from")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def cmd_sweep(cfg, args, out, err):
    distances = _distances(args.start, args.stop, args.step)
    modes = [args.mode] if args.mode else list(cfg.modes)
    rows = sweep(cfg.channel, cfg.intensities, distances, modes,
                 optimize=args.optimize_mu or cfg.optimize_mu, grid=cfg.mu_grid,
                 **cfg.pipeline_kwargs())
    rows = [_plob_fix(cfg, r) for r in rows]
    for r in rows:
        if r.error:
            err.write(json.dumps({"distance_km": r.distance_km, "mode": r.mode, "error": r.error}) + "\n")
    buf = io.StringIO()
    write_csv(rows, buf)
    _emit(buf.getvalue(), args.output, out)
    if args.figure:
        from .plotting import plot_mu_vs_distance, plot_rate_vs_distance

        plot_rate_vs_distance(rows, args.figure)
        if args.optimize_mu or cfg.optimize_mu:
            stem = Path(args.figure)
            plot_mu_vs_distance(rows, stem.with_name(stem.stem + "_mu" + stem.suffix))
    return 0


def cmd_loss_limit(cfg, args, out):
    loss, p = max_tolerable_loss(cfg.channel, cfg.intensities, args.mode, args.resolution,
                                 max_loss_db=args.max_loss, grid=cfg.mu_grid, **cfg.pipeline_kwargs())
    if args.json:
        report = {"mode": args.mode, "loss_db": loss, "resolution_db": args.resolution,
                  "no_key": p is None, "mu": None if p is None else p.mu,
                  "skr": 0.0 if p is None else p.skr}
        _emit(json.dumps(_json_safe(report), sort_keys=True) + "\n", None, out)
    else:
        out.write(fmt(loss) + "\n")
    return 0


def cmd_ingest_check(cfg, args, out):
    gains = _load_gains(args.gains)
    ic = _intensities_for(cfg, gains)
    yields = bound_yields(gains, ic, cfg.yield_cutoff, lp_tol=cfg.lp_tol)
    pairs = []
    for w1 in ic.i2:
        for w2 in ic.i2:
            diff = gains.d2(w1, w2) - gains.d1(w1, w2)
            slack = pair_tail_slack(w1, w2, cfg.pair_cutoff, yields)
            allowed = slack + args.rel_tol * gains.d1(w1, w2)
            pairs.append({"omega1": w1, "omega2": w2, "d2_minus_d1": diff, "slack": slack,
                          "honest_consistent": abs(diff) <= allowed})
    bad = [p for p in pairs if not p["honest_consistent"]]
    if bad and not args.allow_cross_terms:
        p = bad[0]
        raise DataIntegrityError(
            f"phase-locked and phase-randomized gains differ by {p['d2_minus_d1']:.6e} at "
            f"({p['omega1']}, {p['omega2']}), beyond the truncation slack {p['slack']:.3e}",
            module="cli", pair=(p["omega1"], p["omega2"]))
    ci = class_intervals(gains, yields, ic, cfg.pair_cutoff, lp_tol=cfg.lp_tol)
    report = {"status": "ok", "provenance": gains.provenance, "mu": ic.mu,
              "yield_lp": "feasible", "crossterm_lp": "feasible", "pairs": pairs,
              "omega": ci.omega, "phi": ci.phi}
    _emit(json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n", None, out)
    return 0


def cmd_gains(cfg, args, out):
    gains = build_gain_table(cfg.channel, cfg.intensities, args.distance_km)
    _emit(gains.to_csv(), args.output, out)
    return 0


def _emit(text, path, out):
    if path:
        Path(path).write_text(text)
    else:
        out.write(text)


def build_parser():
    p = argparse.ArgumentParser(prog="npptf", description="Certified key rates for twin-field QKD "
                                "without phase postselection, with phase-locked decoys.")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration entry, e.g. channel.misalignment=0.015")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("point", help="rate report (JSON) at one distance")
    s.add_argument("--distance-km", type=float, required=True)
    s.add_argument("--mode")
    s.add_argument("--mu", type=float)
    s.add_argument("--optimize-mu", action="store_true")
    s.add_argument("--gains", help="measured gain table (CSV) instead of the channel model")
    s.add_argument("--output")

    s = sub.add_parser("sweep", help="rate table (CSV) over distance")
    s.add_argument("--from", dest="start", type=float, required=True)
    s.add_argument("--to", dest="stop", type=float, required=True)
    s.add_argument("--step", type=float, required=True)
    s.add_argument("--mode")
    s.add_argument("--optimize-mu", action="store_true")
    s.add_argument("--output", help="CSV path (default stdout)")
    s.add_argument("--figure", help="also render the rate curves to this image file")

    s = sub.add_parser("loss-limit", help="largest total fiber loss (dB) with positive key rate")
    s.add_argument("--mode", default="improved")
    s.add_argument("--resolution", type=float, default=0.25)
    s.add_argument("--max-loss", type=float, default=160.0)
    s.add_argument("--json", action="store_true")

    s = sub.add_parser("ingest-check", help="validate a measured gain table")
    s.add_argument("--gains", required=True)
    s.add_argument("--rel-tol", type=float, default=0.0,
                   help="extra allowed |Q_d2 - Q_d1| relative to Q_d1 (statistical noise)")
    s.add_argument("--allow-cross-terms", action="store_true",
                   help="accept non-honest differences if some cross terms explain them")

    s = sub.add_parser("gains", help="write the modeled gain table (CSV) for one distance")
    s.add_argument("--distance-km", type=float, required=True)
    s.add_argument("--output")
    return p


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.overrides)
        if args.command == "point":
            return cmd_point(cfg, args, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, args, out, err)
        if args.command == "loss-limit":
            return cmd_loss_limit(cfg, args, out)
        if args.command == "ingest-check":
            return cmd_ingest_check(cfg, args, out)
        return cmd_gains(cfg, args, out)
    except NpptfError as exc:
        err.write(json.dumps(_json_safe(exc.as_dict()), sort_keys=True) + "\n")
        return EXIT_CODES.get(exc.code, 1)


if __name__ == "__main__":
    sys.exit(main())
