"""Command-line front end: config-driven, seeded, file-based workflows.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numeric failure.
"""

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .channel import DetectionRecord, histogram, simulate_run
from .config import RunConfig
from .errors import (
    ConfigError,
    DegenerateSeriesError,
    FitFailureError,
    NoPositiveRateError,
    ParameterError,
    ResourceLimitError,
    SagnacBb84Error,
    UndefinedSlotError,
)
from .fixtures import (
    constant_stokes_series,
    synthetic_g2_histogram,
    synthetic_stokes_series,
)
from .g2fit import g2_fit, load_histogram_csv, save_histogram_csv
from .qber import SlotCounts, encoding_agreement, mean_qber
from .skr import skr_sweep
from .stability import StokesSeries, nsd_fit, stability_metrics

SWEEP_CSV_HEADER = ["distance_km", "loss_db", "skr_bps", "p_c", "e_tot", "e1_bar", "pc1_lower"]


class _ArgumentParser(argparse.ArgumentParser):
    # raise instead of exiting so usage problems map onto exit code 1
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="sbb84",
        description="Simulate and analyze a Sagnac-encoded single-photon BB84 link.",
    )
    parser.add_argument("--config", type=Path, help="INI run configuration")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="simulation worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", help="run the Monte Carlo and write an event file")

    p_an = sub.add_parser("analyze", help="QBER/agreement report from an event file")
    p_an.add_argument("events", type=Path, help="events CSV")
    p_an.add_argument("--meta", type=Path, help="metadata sidecar (default: <events>.meta.json)")
    p_an.add_argument("--bin-width-ps", type=float, default=100.0)

    p_skr = sub.add_parser("skr", help="asymptotic secure-key-rate distance sweep")
    p_skr.add_argument("--d-min", type=float, default=0.0)
    p_skr.add_argument("--d-max", type=float, default=120.0)
    p_skr.add_argument("--step", type=float, default=1.0)
    p_skr.add_argument(
        "--p-mis",
        type=float,
        action="append",
        help="misencoding probability; repeat for several sweeps",
    )

    p_g2 = sub.add_parser("g2fit", help="fit the correlation model to a histogram CSV")
    p_g2.add_argument("histogram", type=Path)

    p_st = sub.add_parser("stability", help="stability metrics and noise spectrum")
    p_st.add_argument("stokes", type=Path, help="Stokes series CSV")
    p_st.add_argument("--nsd-window", choices=["none", "hann"], default="none")
    p_st.add_argument("--nsd-skip-bins", type=int, default=3)

    p_gf = sub.add_parser("gen-fixtures")  # synthetic inputs for self-contained tests
    p_gf.add_argument("kind", choices=["g2", "stokes"])
    p_gf.add_argument("--out", type=Path, help="output CSV path")
    p_gf.add_argument("--g2-zero", type=float, default=0.0055)
    p_gf.add_argument("--bunch-amp", type=float, default=0.1)
    p_gf.add_argument("--bunch-ns", type=float, default=38.0)
    p_gf.add_argument("--side-counts", type=float, default=2e5)
    p_gf.add_argument("--beta", type=float, default=1.16)
    p_gf.add_argument("--samples", type=int, default=2**16)
    p_gf.add_argument("--constant", action="store_true", help="emit a constant series")
    return parser


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_ini(args.config) if args.config else RunConfig.defaults()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    record = simulate_run(cfg.experiment, cfg.n_slots, cfg.seed, n_jobs=max(1, args.threads))
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    record.to_csv(out / "events.csv", out / "events.meta.json")
    cfg.to_ini(out / "config.resolved.ini")
    print(f"wrote {len(record)} events to {out / 'events.csv'}")
    return 0


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    params = cfg.experiment
    meta = args.meta
    if meta is None:
        candidate = args.events.with_suffix(args.events.suffix + ".meta.json")
        if not candidate.exists():
            candidate = args.events.parent / (args.events.stem + ".meta.json")
        meta = candidate if candidate.exists() else None
    record = DetectionRecord.from_csv(args.events, meta_path=meta, params=params)

    window = params.encoder.filter_window_ps
    counts = SlotCounts.from_record(record, filter_window_ps=window)
    n_total = len(record)
    n_accepted = counts.total

    report = {
        "n_events": n_total,
        "n_accepted": n_accepted,
        "filter_window_ps": window,
        "accepted_fraction": (n_accepted / n_total) if n_total else None,
        "discarded_fraction": (1.0 - n_accepted / n_total) if n_total else None,
        "no_data": n_total == 0,
        "qber": None,
        "encoding_agreement": None,
    }
    if n_accepted > 0:
        try:
            q = mean_qber(counts, params.sequence)
            report["qber"] = {
                "mean": q.overall,
                "mean_stderr": q.stderr_overall,
                "x_basis": q.x_basis,
                "x_basis_stderr": q.stderr_x,
                "y_basis": q.y_basis,
                "y_basis_stderr": q.stderr_y,
                "per_slot": q.per_slot,
                "undefined_slots": q.undefined_slots,
            }
        except UndefinedSlotError:
            report["qber"] = None
        try:
            report["encoding_agreement"] = encoding_agreement(counts, params.sequence)
        except SagnacBb84Error:
            report["encoding_agreement"] = None

    hist = histogram(record, args.bin_width_ps)
    report["histograms"] = {
        "bin_width_ps": args.bin_width_ps,
        "n_bins": hist.counts.shape[2],
        "channels": {
            letter: hist.counts[i].tolist()
            for i, letter in enumerate(("D", "A", "R", "L"))
        },
    }

    args.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = args.out_dir / "analysis.json"
    _write_json(out_path, report)
    qber_txt = f"{report['qber']['mean']:.6f}" if report["qber"] else "n/a"
    print(f"analyzed {n_total} events (QBER {qber_txt}); report at {out_path}")
    return 0


def cmd_skr(args) -> int:
    cfg = _load_config(args)
    p_mis_list = args.p_mis or [cfg.skr.misencoding_prob]
    args.out_dir.mkdir(parents=True, exist_ok=True)

    sweeps = []
    for pm in p_mis_list:
        params = dataclasses.replace(cfg.skr, misencoding_prob=pm)
        points = skr_sweep(params, args.d_min, args.d_max, args.step)
        sweeps.append((pm, params, points))
        path = args.out_dir / f"skr_pmis{pm:g}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_CSV_HEADER)
            for pt in points:
                writer.writerow(
                    [
                        f"{pt.distance_km:g}",
                        f"{pt.channel_loss_db:.6f}",
                        f"{pt.skr_bps:.6f}",
                        f"{pt.p_c:.12g}",
                        f"{pt.e_tot:.12g}",
                        f"{pt.e1_bar:.12g}",
                        f"{pt.pc1_lower:.12g}",
                    ]
                )
        print(f"wrote {path}")

    if len(sweeps) == 2:
        path = args.out_dir / "skr_ratio.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["distance_km", "ratio"])
            for a, b in zip(sweeps[0][2], sweeps[1][2]):
                ratio = a.skr_bps / b.skr_bps if (a.skr_bps > 0 and b.skr_bps > 0) else ""
                writer.writerow([f"{a.distance_km:g}", f"{ratio:.6f}" if ratio else ""])
        print(f"wrote {path}")

    _write_json(
        args.out_dir / "skr_params.json",
        {"p_mis_values": p_mis_list, "params": sweeps[0][1].to_dict()},
    )
    return 0


def cmd_g2fit(args) -> int:
    t_ns, counts = load_histogram_csv(args.histogram)
    result = g2_fit(t_ns, counts)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = args.out_dir / "g2fit.json"
    _write_json(out_path, result.to_dict())
    print(
        f"g2(0) = {result.g2_zero:.6g} +- {result.g2_zero_stderr:.2g}; report at {out_path}"
    )
    return 0


def cmd_stability(args) -> int:
    series = StokesSeries.from_csv(args.stokes)
    metrics = stability_metrics(series)
    args.out_dir.mkdir(parents=True, exist_ok=True)

    report = {
        "n_samples": len(series),
        "mean_error": metrics.mean_error,
        "max_error": metrics.max_error,
        "mean_vector": metrics.mean_vector.tolist(),
        "nsd": None,
    }
    try:
        fit = nsd_fit(
            metrics.projection_error,
            series.interval_s,
            window=args.nsd_window,
            skip_low_bins=args.nsd_skip_bins,
        )
    except DegenerateSeriesError:
        fit = None
        report["nsd_degenerate"] = True
    if fit is not None:
        report["nsd"] = {
            "amplitude": fit.amplitude,
            "beta": fit.beta,
            "beta_stderr": fit.beta_stderr,
            "residual_rms": fit.residual_rms,
            "residual_max": fit.residual_max,
            "poor_fit": fit.poor_fit,
            "fit_band_hz": list(fit.fit_band),
        }
        spec_path = args.out_dir / "spectrum.csv"
        with open(spec_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["freq_hz", "power"])
            writer.writerows(
                (f"{f:.9g}", f"{p:.9g}") for f, p in zip(fit.freq_hz, fit.power)
            )
        print(f"wrote {spec_path}")

    err_path = args.out_dir / "errors.csv"
    with open(err_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "eps"])
        writer.writerows(
            (f"{t:.6f}", f"{e:.9g}")
            for t, e in zip(series.t_s, metrics.projection_error)
        )

    out_path = args.out_dir / "stability.json"
    _write_json(out_path, report)
    print(f"mean polarization error {metrics.mean_error:.3g}; report at {out_path}")
    return 0


def cmd_gen_fixtures(args) -> int:
    seed = args.seed if args.seed is not None else 12345
    rng = np.random.default_rng(seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "g2":
        out = args.out or (args.out_dir / "fixture_g2.csv")
        t, counts, truth = synthetic_g2_histogram(
            rng,
            g2_zero=args.g2_zero,
            bunch_amp=args.bunch_amp,
            bunch_time_ns=args.bunch_ns,
            side_peak_counts=args.side_counts,
        )
        save_histogram_csv(out, t, counts)
        print(f"wrote {out} (true g2_zero {truth.amp_center / truth.amp_side:g})")
    else:
        out = args.out or (args.out_dir / "fixture_stokes.csv")
        if args.constant:
            series = constant_stokes_series(n=args.samples)
        else:
            series = synthetic_stokes_series(rng, n=args.samples, beta=args.beta)
        series.to_csv(out)
        print(f"wrote {out}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "skr": cmd_skr,
    "g2fit": cmd_g2fit,
    "stability": cmd_stability,
    "gen-fixtures": cmd_gen_fixtures,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (FitFailureError, NoPositiveRateError, ResourceLimitError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except SagnacBb84Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:
    raise SystemExit(main())
