"""Command-line front end.

Subcommands: ``metrics``, ``lrb``, ``models`` and ``gateset-export``. Exit
codes: 0 success, 2 invalid input, 3 a decay fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .clifford import export_gateset, read_superop_csv
from .config import ExperimentConfig
from .experiment import (
    CURVE_COLUMNS,
    FIG4_COLUMNS,
    FIG5_COLUMNS,
    SEEDS_COLUMNS,
    SUMMARY_COLUMNS,
    THERMAL_COLUMNS,
    cell_name,
    decay_curves,
    fig4_rows,
    fig5_rows,
    run_sweep,
    seeds_convergence,
    summary_rows,
    thermal_rows,
    write_csv,
    write_sweep,
)
from .fitting import FitError, config_hash, fit_report
from .lindblad import thermal_channel
from .metrics import coherent_rates, fidelities, worst_case_bounds
from .models import dlm, erasure_channel, exchange_unitary, simple_dissipative_channel
from .operators import Channel, SubspacePartition, ValidationError, check_cptp, identity_channel
from .pulses import export_pulse_csv
from .seeding import derive_rng
from .transmon import transmon_gateset

EXIT_OK, EXIT_INVALID, EXIT_FIT = 0, 2, 3
MODELS = ("identity", "erasure", "dlm", "exchange", "dissipative", "thermal")


def _parse_dims(text: str) -> SubspacePartition:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"--dims expects integers like 2,1; got {text!r}") from exc
    if len(vals) < 2:
        raise ValidationError("--dims needs the computational dimension and at least one leakage dimension")
    return SubspacePartition(vals[0], tuple(vals[1:]))


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ValidationError(f"model {args.model!r} needs " + ", ".join("--" + n.replace("_", "-") for n in missing))


def build_channel(args) -> Channel:
    part = _parse_dims(args.dims)
    if args.real or args.imag:
        if not (args.real and args.imag):
            raise ValidationError("--real and --imag must be given together")
        chan = read_superop_csv(args.real, args.imag, part)
        if chan.sop.shape != (part.dim**2, part.dim**2):
            raise ValidationError(f"superoperator shape {chan.sop.shape} does not match --dims {args.dims}")
        return chan
    if args.model is None:
        raise ValidationError("give --model or a --real/--imag superoperator CSV pair")
    if args.model == "identity":
        return identity_channel(part)
    if args.model == "erasure":
        _require(args, "p")
        return erasure_channel(args.p, part)
    if args.model == "dlm":
        _require(args, "mu1", "L1", "L2")
        return dlm(args.mu1, args.L1, args.L2, part)
    if part != SubspacePartition.qutrit():
        raise ValidationError(f"model {args.model!r} is defined on a qutrit (--dims 2,1)")
    if args.model == "exchange":
        _require(args, "t")
        return exchange_unitary(args.t)
    if args.model == "dissipative":
        _require(args, "gamma1", "gamma2", "t")
        return simple_dissipative_channel(args.gamma1, args.gamma2, args.t, part)
    _require(args, "kappa_dt", "nbar")
    return thermal_channel(1.0, args.nbar, args.kappa_dt)


def cmd_metrics(args) -> int:
    chan = build_channel(args)
    cp = check_cptp(chan, args.tol)
    if not cp.ok:
        print(
            f"error: input channel is not CPTP (tp_defect={cp.tp_defect:.3e}, min_choi_eig={cp.min_choi_eig:.3e})",
            file=sys.stderr,
        )
        return EXIT_INVALID
    rep = fidelities(chan)
    w1, w2 = worst_case_bounds(chan)
    cr = coherent_rates(chan, args.samples, derive_rng(args.seed, "coherent-rates"))
    d1, d2 = chan.partition.d1, chan.partition.d2
    bound1 = 2 * np.sqrt(max(rep.L1 * (1 - rep.L1), 0.0))
    bound2 = 2 * np.sqrt(max(rep.L2 * (1 - rep.L2), 0.0))
    out = {
        "tool_version": __version__,
        "dims": [d1, *chan.partition.leak_dims],
        "L1": rep.L1,
        "L2": rep.L2,
        "avg_fidelity": rep.avg_fidelity,
        "process_fidelity": rep.process_fidelity,
        "E": 1 - rep.avg_fidelity,
        "worst_case_leakage_bound": w1,
        "worst_case_seepage_bound": w2,
        "CL1": cr.CL1,
        "CL1_stderr": cr.CL1_stderr,
        "CL2": cr.CL2,
        "CL2_stderr": cr.CL2_stderr,
        "coherent_samples": cr.n_samples,
        "checks": {
            "cptp": asdict(cp),
            "CL1_within_bound": bool(cr.CL1 <= bound1 + 3 * cr.CL1_stderr + 1e-12),
            "CL2_within_bound": bool(cr.CL2 <= bound2 + 3 * cr.CL2_stderr + 1e-12),
            "unital_balance_d1L1_minus_d2L2": d1 * rep.L1 - d2 * rep.L2,
        },
    }
    text = json.dumps(out, indent=2, default=float)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "metrics.json").write_text(text + "\n")
    return EXIT_OK


def _load(args) -> ExperimentConfig:
    return ExperimentConfig.load(args.config)


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _hashed(cfg: ExperimentConfig, seed: int) -> dict:
    """The part of the configuration that determines results."""
    doc = {k: v for k, v in cfg.doc.items() if k != "outputs"}
    doc = json.loads(json.dumps(doc))
    doc["lrb"]["master_seed"] = seed
    return doc


def _print_table(header, rows):
    print(",".join(header))
    for r in rows:
        print(",".join(f"{x:.4g}" if isinstance(x, float) else str(x) for x in r))


def cmd_lrb(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    lcfg = cfg.lrb_config(threads=args.threads, master_seed=args.seed)
    params = cfg.transmon_params()
    lr = cfg.doc["lrb"]
    mode = args.mode or lr["mode"]
    n_boot = lr["bootstrap_resamples"]
    hashed = _hashed(cfg, lcfg.master_seed)
    if mode == "sweep":
        cells = run_sweep(cfg.doc["pulses"]["types"], cfg.durations, params, lcfg, n_boot, threads=args.threads)
        if "csv" in cfg.formats:
            write_sweep(cells, out)
        if "json" in cfg.formats:
            (out / "fits").mkdir(exist_ok=True)
            for c in cells:
                flags = {"non_monotone": c.flag.non_monotone, "largest_rise": c.flag.largest_rise}
                rep = fit_report(c.fit, c.ci, hashed, flags)
                rep["cell"] = {"pulse": c.kind, "duration_ns": round(c.duration * 1e9, 9)}
                rep["theory"] = {"E": c.theory.E, "L1": c.theory.L1, "L2": c.theory.L2}
                path = out / "fits" / f"{cell_name(c.kind, c.duration)}.json"
                path.write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
        _print_table(SUMMARY_COLUMNS, summary_rows(cells))
    elif mode == "seeds":
        rows = seeds_convergence(
            lr["seeds_pulse"], 1e-9 * lr["seeds_duration_ns"], lr["seed_counts"], params, lcfg, n_boot
        )
        write_csv(out / "seeds.csv", SEEDS_COLUMNS, rows)
        _print_table(SEEDS_COLUMNS, rows)
    else:
        rows = decay_curves(lr["curve_pulse"], [1e-9 * t for t in lr["curve_durations_ns"]], params, lcfg)
        write_csv(out / "curves.csv", CURVE_COLUMNS, rows)
        print(f"wrote {len(rows)} rows to {out / 'curves.csv'}")
    (out / "config_used.json").write_text(
        json.dumps({"config": hashed, "config_sha256": config_hash(hashed), "tool_version": __version__}, indent=2, sort_keys=True)
        + "\n"
    )
    return EXIT_OK


def cmd_models(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    md = cfg.doc["models"]
    if args.figure == "fig4":
        rows = fig4_rows(md["fig4_dt"], md["fig4_depol_p"], md["fig4_m_max"])
        path = write_csv(out / "fig4.csv", FIG4_COLUMNS, rows)
    elif args.figure == "fig5":
        rows = fig5_rows([1e-9 * t for t in md["fig5_durations_ns"]], md["fig5_alphas"], cfg.transmon_params())
        path = write_csv(out / "fig5.csv", FIG5_COLUMNS, rows)
    else:
        rows = thermal_rows(md["thermal_nbar"], md["thermal_kappa_dt"])
        path = write_csv(out / "thermal.csv", THERMAL_COLUMNS, rows)
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_gateset_export(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    params = cfg.transmon_params()
    for kind in cfg.doc["pulses"]["types"]:
        for t in cfg.durations:
            tg = transmon_gateset(kind, t, params)
            d = out / "gatesets" / cell_name(kind, t)
            export_gateset(tg.gateset, d)
            export_pulse_csv(tg.pulse, d / "pulse_X90.csv")
            print(f"exported {cell_name(kind, t)} to {d}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qleak", description="Leakage metrics, channel models and LRB simulation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON experiment configuration (defaults used when omitted)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on this)")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")

    m = sub.add_parser("metrics", help="leakage, fidelity and coherence figures of a channel")
    common(m, config=False)
    m.add_argument("--model", choices=MODELS)
    m.add_argument("--dims", default="2,1", help="computational then leakage dimensions, e.g. 2,1")
    m.add_argument("--p", type=float)
    m.add_argument("--t", type=float)
    m.add_argument("--mu1", type=float)
    m.add_argument("--L1", type=float)
    m.add_argument("--L2", type=float)
    m.add_argument("--gamma1", type=float)
    m.add_argument("--gamma2", type=float)
    m.add_argument("--kappa-dt", dest="kappa_dt", type=float)
    m.add_argument("--nbar", type=float)
    m.add_argument("--real", help="CSV with the real part of a superoperator")
    m.add_argument("--imag", help="CSV with the imaginary part of a superoperator")
    m.add_argument("--samples", type=int, default=10_000, help="Haar samples for the coherent rates")
    m.add_argument("--tol", type=float, default=1e-8, help="CPTP tolerance")
    m.set_defaults(func=cmd_metrics)

    lr = sub.add_parser("lrb", help="simulate and fit LRB experiments on the transmon model")
    common(lr)
    lr.add_argument("--mode", choices=["sweep", "seeds", "curves"], help="override lrb/mode of the config")
    lr.set_defaults(func=cmd_lrb)

    mo = sub.add_parser("models", help="curves for the channel-model figures")
    common(mo)
    mo.add_argument("figure", choices=["fig4", "fig5", "thermal"])
    mo.set_defaults(func=cmd_models)

    ge = sub.add_parser("gateset-export", help="write gate superoperators as real/imag CSV pairs")
    common(ge)
    ge.set_defaults(func=cmd_gateset_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if args.seed is None and args.command == "metrics":
        args.seed = 0
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
