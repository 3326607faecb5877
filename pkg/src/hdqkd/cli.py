"""Command-line interface: ``hdqkd {keyrate,sweep,simulate,optimize,txpattern,validate}``.

Exit codes: 0 success, 1 computation or invariant failure, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from . import config as cfgmod
from . import montecarlo, receiver, txpattern
from .config import ConfigError, RunConfig
from .finite_key import asymptotic_threshold
from .link import error_prob, expected_tallies, detection_prob
from .optimizer import SearchSpace, optimize
from .pipeline import analyze
from .states import Basis, encode, verify_mub

log = logging.getLogger("hdqkd")

SWEEP_SCHEMA = "# hdqkd-sweep v1"
SWEEP_COLUMNS = ("distance_km", "dimension", "rep_rate_hz", "mu", "nu", "p_mu", "p_x_alice",
                 "qber_z", "phi_z", "ell_bits", "skr_bps")

_FLAG_OVERRIDES = {
    "length_km": "link.length_km",
    "rx_loss_db": "link.rx_excess_loss_db",
    "misalignment": "link.misalignment",
    "mu": "intensities.mu",
    "nu": "intensities.nu",
    "p_mu": "intensities.p_mu",
    "p_x": "intensities.p_x_alice",
    "block_semantics": "security.block_semantics",
    "seed": "seed",
    "workers": "workers",
}


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".10g")


def _dims(text: str | None, default: int) -> list[int]:
    if not text:
        return [default]
    try:
        dims = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"--dims expects a comma list of 2/4, got {text!r}") from None
    if not dims or any(d not in (2, 4) for d in dims):
        raise UsageError(f"--dims expects values from {{2,4}}, got {text!r}")
    return dims


def load_config(args) -> RunConfig:
    overrides = {}
    for item in args.set or []:
        key, value = cfgmod.parse_assignment(item)
        overrides[key] = value
    for flag, dotted in _FLAG_OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[dotted] = value
    if args.config:
        return cfgmod.load(args.config, overrides)
    return cfgmod.from_dict({}, overrides)


# -- commands ------------------------------------------------------------

def cmd_keyrate(cfg: RunConfig, args, out) -> int:
    for d in _dims(args.dims, cfg.dimension):
        res = analyze(cfg.intensities, cfg.link, cfg.security, d)
        out.write(f"dimension={d} length_km={_fmt(cfg.link.length_km)} "
                  f"skr_bps={_fmt(res.skr_bps)} ell_bits={res.ell_bits}\n")
        if args.verbose:
            out.write(json.dumps(res.diagnostics, indent=2, sort_keys=True) + "\n")
    return 0


def sweep_rows(cfg: RunConfig, start: float, stop: float, step: float, dims, do_optimize: bool,
               budget: int | None = None):
    if step <= 0 or stop < start:
        raise UsageError("sweep needs from <= to and step > 0")
    n = int(math.floor((stop - start) / step + 1e-9))
    distances = [start + i * step for i in range(n + 1)]
    rows = []
    for dist in distances:
        link = cfg.link.with_length(dist)
        for d in dims:
            settings = cfg.intensities
            if do_optimize:
                settings = optimize(SearchSpace(), link, cfg.security, budget, dimension=d).settings
            res = analyze(settings, link, cfg.security, d)
            dg = res.diagnostics
            rows.append((dist, d, link.rep_rate(d), settings.mu, settings.nu, settings.p_mu,
                         settings.p_x_alice, dg.get("qber_z", 0.0), dg.get("phi_Z_up", 0.0),
                         res.ell_bits, res.skr_bps))
    return rows


def write_sweep_csv(rows, out) -> None:
    out.write(SWEEP_SCHEMA + "\n")
    out.write(",".join(SWEEP_COLUMNS) + "\n")
    for row in rows:
        out.write(",".join(_fmt(v) for v in row) + "\n")


def cmd_sweep(cfg: RunConfig, args, out) -> int:
    rows = sweep_rows(cfg, args.from_km, args.to_km, args.step_km, _dims(args.dims, cfg.dimension),
                      args.optimize, args.budget)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, out)
    return 0


def simulate_report(cfg: RunConfig, states: int, bookkeeping: bool, dimension: int) -> dict:
    trial = montecarlo.TrialConfig(seed=cfg.seed, states_to_send=states, settings=cfg.intensities,
                                   link=cfg.link, dimension=dimension, bookkeeping=bookkeeping)
    rep = montecarlo.run_partitioned(trial, cfg.workers)
    analytic = expected_tallies(cfg.intensities, cfg.link, states, dimension)
    s = cfg.intensities
    comparison = {}
    for b in Basis:
        comparison[f"qber_{b.value}"] = {"empirical": rep.qber[b.value], "analytic": analytic.qber(b)}
        for k in ("mu", "nu"):
            comparison[f"qber_{b.value}_{k}"] = {
                "empirical": rep.qber[f"{b.value}_{k}"],
                "analytic": error_prob(s.intensity(k), cfg.link, dimension, b)}
    for k in ("mu", "nu"):
        comparison[f"gain_{k}"] = {"empirical": rep.gains[k],
                                   "analytic": detection_prob(s.intensity(k), cfg.link, dimension)}
    body = {
        "seed": cfg.seed, "states": states, "dimension": dimension,
        "tallies": rep.tallies.to_dict(), "comparison": comparison,
        "conclusive_fraction": rep.conclusive_fraction,
        "backend": rep.backend, "workers": rep.workers,
        "wall_time_s": rep.wall_time_s, "states_per_s": rep.states_per_s,
    }
    if bookkeeping:
        body["true_counts"] = rep.true_counts
    return body


def cmd_simulate(cfg: RunConfig, args, out) -> int:
    d = _dims(args.dims, cfg.dimension)[0]
    if args.states <= 0:
        raise UsageError("--states must be > 0")
    body = simulate_report(cfg, args.states, args.bookkeeping, d)
    out.write(json.dumps(body, indent=2, sort_keys=True) + "\n")
    if args.event_log:
        trial = montecarlo.TrialConfig(cfg.seed, args.states, cfg.intensities, cfg.link, d)
        montecarlo.write_event_log(trial, args.event_log)
    return 0


def cmd_optimize(cfg: RunConfig, args, out) -> int:
    for d in _dims(args.dims, cfg.dimension):
        res = optimize(SearchSpace(), cfg.link, cfg.security, args.budget, dimension=d)
        body = json.loads(res.to_json())
        body["dimension"] = d
        body["length_km"] = cfg.link.length_km
        out.write(json.dumps(body, indent=2, sort_keys=True) + "\n")
        if args.trace_csv:
            path = args.trace_csv if len(_dims(args.dims, cfg.dimension)) == 1 else f"{args.trace_csv}.{d}d"
            res.write_trace_csv(path)
    return 0


def cmd_txpattern(cfg: RunConfig, args, out) -> int:
    if args.demo:
        items = txpattern.demo_sequence()
    elif args.sequence:
        try:
            with open(args.sequence, encoding="utf-8") as fh:
                items = txpattern.sequence_from_json(fh.read())
        except (OSError, ValueError) as exc:
            raise UsageError(f"sequence file {args.sequence}: {exc}") from None
        if not items:
            raise UsageError("sequence file has no frames")
    else:
        raise UsageError("txpattern needs --sequence FILE or --demo")
    timeline = txpattern.compile_sequence(items, sample_rate=args.sample_rate)
    txpattern.write_binary(timeline, args.out)
    if args.json_export:
        with open(args.json_export, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(txpattern.sequence_to_json(items))
    out.write(f"wrote {len(items)} frames ({len(timeline)} samples/channel) to {args.out}\n")
    return 0


def invariant_checks():
    """Embedded self-checks; yields ``(name, ok, detail)``."""
    for d in (4, 2):
        ok, cross = verify_mub(d)
        yield f"mub_d{d}", ok, f"cross |<z|x>|^2 in [{cross.min():.12f}, {cross.max():.12f}]"
    worst = 0.0
    for d in (4, 2):
        for b in Basis:
            for s in range(d):
                for arm_b in Basis:
                    total = sum(receiver.propagate(encode(b, s, d), receiver.arm(arm_b, d)).values())
                    worst = max(worst, abs(total - 1))
    yield "propagation_conservation", worst < 1e-12, f"max |sum P - 1| = {worst:.2e}"
    worst_err, worst_conc = 0.0, 0.0
    for d in (4, 2):
        for b in Basis:
            for s in range(d):
                dist = receiver.measure(encode(b, s, d), b, dimension=d)
                conc = 1 - dist[None]
                worst_err = max(worst_err, (conc - dist[s]) / conc)
                worst_conc = max(worst_conc, abs(conc - 0.5))
    yield "matched_basis_discrimination", worst_err < 1e-12 and worst_conc < 1e-12, \
        f"max error {worst_err:.1e}, conclusive deviation {worst_conc:.1e}"
    t4, t2 = asymptotic_threshold(4), asymptotic_threshold(2)
    yield "threshold_4d", abs(t4 - 0.189) <= 0.001, f"root {t4:.4f}"
    yield "threshold_2d", abs(t2 - 0.110) <= 0.001, f"root {t2:.4f}"
    seq = txpattern.demo_sequence()
    back = txpattern.decode_timeline(txpattern.compile_sequence(seq))
    yield "txpattern_round_trip", back == seq, f"{len(seq)} frames"


def cmd_validate(cfg: RunConfig, args, out) -> int:
    failed = []
    for name, ok, detail in invariant_checks():
        out.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
        if not ok:
            failed.append(name)
    if args.timeline:
        try:
            frames = txpattern.decode_timeline(txpattern.read_binary(args.timeline))
            out.write(f"PASS timeline {args.timeline}: {len(frames)} frames decoded\n")
            if args.verbose:
                out.write(txpattern.sequence_to_json(frames))
        except (OSError, ValueError) as exc:
            out.write(f"FAIL timeline {args.timeline}: {exc}\n")
            failed.append("timeline")
    if failed:
        out.write(f"invariant failures: {', '.join(failed)}\n")
        return 1
    return 0


COMMANDS = {
    "keyrate": cmd_keyrate, "sweep": cmd_sweep, "simulate": cmd_simulate,
    "optimize": cmd_optimize, "txpattern": cmd_txpattern, "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="64-bit simulation seed")
    common.add_argument("--verbose", action="store_true")
    common.add_argument("--dims", metavar="LIST", help="comma list of dimensions, e.g. 2,4")
    common.add_argument("--workers", type=int)
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config value, e.g. link.length_km=200")
    for flag in ("length-km", "rx-loss-db", "misalignment", "mu", "nu", "p-mu", "p-x"):
        common.add_argument(f"--{flag}", type=float)
    common.add_argument("--block-semantics", choices=("pulses", "detections"))

    p = argparse.ArgumentParser(prog="hdqkd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("keyrate", parents=[common], help="secret key rate at one point")
    sw = sub.add_parser("sweep", parents=[common], help="key rate versus distance as CSV")
    sw.add_argument("--from", dest="from_km", type=float, default=0.0)
    sw.add_argument("--to", dest="to_km", type=float, default=250.0)
    sw.add_argument("--step", dest="step_km", type=float, default=25.0)
    sw.add_argument("--optimize", action="store_true")
    sw.add_argument("--budget", type=int)
    sw.add_argument("--out", metavar="PATH")
    sm = sub.add_parser("simulate", parents=[common], help="Monte Carlo run")
    sm.add_argument("--states", type=int, default=1_000_000)
    sm.add_argument("--bookkeeping", action="store_true")
    sm.add_argument("--event-log", metavar="PATH")
    op = sub.add_parser("optimize", parents=[common], help="optimize protocol parameters")
    op.add_argument("--budget", type=int)
    op.add_argument("--trace-csv", metavar="PATH")
    tx = sub.add_parser("txpattern", parents=[common], help="compile drive timeline")
    tx.add_argument("--sequence", metavar="PATH")
    tx.add_argument("--demo", action="store_true")
    tx.add_argument("--out", metavar="PATH", required=True)
    tx.add_argument("--json-export", metavar="PATH")
    tx.add_argument("--sample-rate", type=float, default=txpattern.DEFAULT_SAMPLE_RATE)
    va = sub.add_parser("validate", parents=[common], help="run embedded invariant checks")
    va.add_argument("--timeline", metavar="PATH", help="also decode an HDTX timeline file")
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, args, out)
    except (ConfigError, UsageError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        sys.stderr.write(f"computation failed: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
