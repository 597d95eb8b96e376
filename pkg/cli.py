"""
Command-line utility for dpsrate

    python cli.py rate --protocol dps --loss-db 20 --nbar 0.2
    python cli.py sweep --loss-min 0 --loss-max 60 --protocols dps,bb84-poisson --out rates.csv
    python cli.py simulate --attack intercept-resend --pulses 1000000 --nbar 0.05 --transmission 1
    python cli.py figures --out figures/

Exit status: 0 ok, 2 bad flags or config, 3 invalid parameters, 4 no result
(beyond cutoff or empty oracle band).
"""
import argparse
import csv
import io
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import collision
import montecarlo
import optimize
import plotting
import rates
import run_config
from model import (
    DEFAULT_BASELINE_ERROR,
    SHANNON_LIMIT,
    BeyondCutoffError,
    ChannelModel,
    EmptyBinError,
    ErrorCorrectionModel,
    ProtocolKind,
    RegimeError,
    SourceKind,
    SourceModel,
    ValidationError,
    parse_protocol,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_NO_RESULT = 4

SWEEP_COLUMNS = ("loss_db", "transmission", "protocol", "source", "nbar_opt", "p_click", "qber", "rate")
ORACLE_COLUMNS = ("e_bin", "analytic_pc0", "bruteforce_pc0", "gap", "e_at_max", "n_in_band")
REPORT_COLUMNS = ("protocol", "cutoff_loss_db")
DEFAULT_ORACLE_TARGETS = tuple(round(0.01 * i, 2) for i in range(16))
SIMULATE_NBAR = 0.05

DEFAULTS: Dict[str, Any] = {
    "protocol": "dps",
    "source": "poisson",
    "protocols": ["dps", "bb84-poisson", "bb84-single", "dps-seq"],
    "loss_db": 0.0,
    "transmission": None,
    "dark_count": None,
    "baseline_error": DEFAULT_BASELINE_ERROR,
    "nbar": None,
    "f_ec": None,
    "loss_min": 0.0,
    "loss_max": 60.0,
    "loss_step": 1.0,
    "pulses": 1_000_000,
    "attack": "none",
    "k": 2,
    "eps_s": None,
    "intercept_fraction": 1.0,
    "seed": 0,
    "grid_points": collision.DEFAULT_GRID_POINTS,
    "e_tol": collision.DEFAULT_E_TOL,
    "workers": 1,
    "integer_k": False,
}

ATTACKS = {
    "none": (montecarlo.AttackKind.NONE, False),
    "intercept-resend": (montecarlo.AttackKind.INTERCEPT_RESEND, False),
    "beamsplitter": (montecarlo.AttackKind.BEAMSPLITTER, False),
    "beamsplitter-delayed": (montecarlo.AttackKind.BEAMSPLITTER, True),
    "sequential": (montecarlo.AttackKind.SEQUENTIAL, False),
}


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _labels(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"key=value config file (default: ${run_config.CONFIG_ENV_VAR})")
    p.add_argument("--dark-count", type=float, help="dark counts per slot, all detectors (default 1e-5 DPS, 2e-5 BB84)")
    p.add_argument("--baseline-error", type=float, help="baseline error rate mu (default 0.01)")
    p.add_argument("--f-ec", help="two-column e,f error-correction table (default f = 1)")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--workers", type=int, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpsrate", description="DPS-QKD secure rates under individual attacks")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    subparsers = parser.add_subparsers(dest="command", required=True)

    rate = subparsers.add_parser("rate", help="rate of one protocol at one operating point")
    rate.add_argument("--protocol", help="dps, bb84-poisson, bb84-single or dps-seq")
    rate.add_argument("--loss-db", type=float)
    rate.add_argument("--transmission", type=float, help="overrides --loss-db")
    rate.add_argument("--nbar", type=float, help="mean photon number (optimized if omitted)")
    rate.add_argument("--integer-k", action="store_const", const=True, help="round the sequential block length down")
    _add_common_flags(rate)

    sweep = subparsers.add_parser("sweep", help="optimized rates over a loss grid as CSV")
    sweep.add_argument("--protocols", type=_labels)
    sweep.add_argument("--loss-min", type=float)
    sweep.add_argument("--loss-max", type=float)
    sweep.add_argument("--loss-step", type=float)
    _add_common_flags(sweep)

    opt = subparsers.add_parser("optimize", help="optimal mean photon number at one loss")
    opt.add_argument("--protocol")
    opt.add_argument("--loss-db", type=float)
    opt.add_argument("--transmission", type=float)
    _add_common_flags(opt)

    sim = subparsers.add_parser("simulate", help="Monte Carlo pulse-train simulation")
    sim.add_argument("--attack", choices=sorted(ATTACKS))
    sim.add_argument("--pulses", type=int)
    sim.add_argument("--nbar", type=float)
    sim.add_argument("--loss-db", type=float)
    sim.add_argument("--transmission", type=float)
    sim.add_argument("--k", type=int, help="sequential attack block length")
    sim.add_argument("--eps-s", type=float, help="sequential attack error budget")
    sim.add_argument("--intercept-fraction", type=float, help="intercept-resend share of slots attacked")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--replicas", type=int, default=1, help="independent runs with seeds seed, seed+1, ...")
    sim.add_argument("--format", choices=("text", "csv"), default="text")
    _add_common_flags(sim)

    oracle = subparsers.add_parser("oracle", help="brute-force check of the collision bound as CSV")
    oracle.add_argument("--e-targets", type=lambda text: [float(x) for x in _labels(text)],
                        help="comma-separated error rates (default 0, 0.01, ..., 0.15)")
    oracle.add_argument("--grid-points", type=int)
    oracle.add_argument("--e-tol", type=float)
    _add_common_flags(oracle)

    figures = subparsers.add_parser("figures", help="rate curve CSVs, SVG charts and a report")
    figures.add_argument("--loss-min", type=float)
    figures.add_argument("--loss-max", type=float)
    figures.add_argument("--loss-step", type=float)
    _add_common_flags(figures)
    return parser


def _resolve_parameters(args: argparse.Namespace) -> Dict[str, Any]:
    path = run_config.config_path(getattr(args, "config", None))
    file_values = run_config.load_config(path)
    flags = {key: value for key, value in vars(args).items()
             if key in run_config.CONFIG_KEYS or key in ("e_targets", "out")}
    return run_config.resolved_parameters(DEFAULTS, file_values, flags)


def _error_correction(params: Dict[str, Any]) -> ErrorCorrectionModel:
    if params.get("f_ec"):
        return ErrorCorrectionModel.from_csv(params["f_ec"])
    return SHANNON_LIMIT


def _protocol(params: Dict[str, Any]) -> str:
    label = params["protocol"]
    if label == "bb84":
        label = "bb84-single" if params.get("source") == "single" else "bb84-poisson"
    parse_protocol(label)
    return label


def _channel(kind: ProtocolKind, params: Dict[str, Any]) -> ChannelModel:
    dark_count = params["dark_count"] if params["dark_count"] is not None else kind.default_dark_count
    if params.get("transmission") is not None:
        return ChannelModel.from_transmission(params["transmission"], dark_count, params["baseline_error"])
    return ChannelModel.from_loss_db(params["loss_db"], dark_count, params["baseline_error"])


def _write(lines: Sequence[str], out: Optional[str]) -> None:
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", newline="") as f:
            f.write(text)
        logger.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _csv_lines(rows: Sequence[Sequence[str]]) -> List[str]:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue().splitlines()


def _sweep_rows(points: Sequence[rates.RatePoint]) -> List[List[str]]:
    return [[_fmt(p.loss_db), _fmt(p.transmission), p.label, p.source_kind.value,
             _fmt(p.nbar), _fmt(p.p_click), _fmt(p.qber), _fmt(p.rate)] for p in points]


def _public(params: Dict[str, Any], keys: Sequence[str]) -> Dict[str, Any]:
    return {key: params[key] for key in keys}


def cmd_rate(params: Dict[str, Any]) -> int:
    label = _protocol(params)
    kind, source_kind = parse_protocol(label)
    channel = _channel(kind, params)
    ec = _error_correction(params)
    if source_kind is SourceKind.SINGLE_PHOTON:
        if params["nbar"] is not None:
            raise ValidationError("nbar", "single-photon BB84 has no mean photon number to set")
        source = SourceModel.single_photon()
    elif params["nbar"] is not None:
        source = SourceModel.poisson(params["nbar"])
    else:
        source = SourceModel.poisson(optimize.optimize_nbar(label, channel, ec).nbar_opt)
    point = rates.evaluate(kind, source, channel, ec, integer_k=params["integer_k"])
    resolved = _public(params, ("baseline_error", "f_ec", "integer_k"))
    resolved.update(protocol=label, loss_db=channel.loss_db, dark_count=channel.dark_count, nbar=source.mean_photon_number)
    lines = run_config.header_lines("rate", resolved, ("protocol", "loss_db", "nbar", "p_click", "qber", "rate"))
    line = (f"protocol={label} loss_db={_fmt(point.loss_db)} nbar={_fmt(point.nbar)} "
            f"p_click={_fmt(point.p_click)} qber={_fmt(point.qber)} rate={_fmt(point.rate)}")
    if point.flags:
        line += " flags=" + ";".join(point.flags)
    _write(lines + [line], params.get("out"))
    return EXIT_OK


def _sweep_spec(params: Dict[str, Any], protocols: Sequence[str]) -> optimize.SweepSpec:
    return optimize.SweepSpec(
        loss_min_db=params["loss_min"],
        loss_max_db=params["loss_max"],
        loss_step_db=params["loss_step"],
        protocols=tuple(protocols),
        dark_count=params["dark_count"],
        baseline_error=params["baseline_error"],
        ec=_error_correction(params),
        workers=params["workers"],
    )


def cmd_sweep(params: Dict[str, Any]) -> int:
    spec = _sweep_spec(params, params["protocols"])
    points = optimize.sweep(spec)
    resolved = _public(params, ("loss_min", "loss_max", "loss_step", "protocols", "dark_count",
                                "baseline_error", "f_ec"))
    lines = run_config.header_lines("sweep", resolved, SWEEP_COLUMNS)
    lines += _csv_lines([SWEEP_COLUMNS] + _sweep_rows(points))
    _write(lines, params.get("out"))
    return EXIT_OK


def cmd_optimize(params: Dict[str, Any]) -> int:
    label = _protocol(params)
    kind, _ = parse_protocol(label)
    channel = _channel(kind, params)
    result = optimize.optimize_nbar(label, channel, _error_correction(params))
    resolved = _public(params, ("baseline_error", "f_ec"))
    resolved.update(protocol=label, loss_db=channel.loss_db, dark_count=channel.dark_count)
    lines = run_config.header_lines("optimize", resolved, ("nbar_opt", "rate_opt", "bracket", "evaluations"))
    lines.append(f"nbar_opt={_fmt(result.nbar_opt)} rate_opt={_fmt(result.rate_opt)} "
                 f"bracket=[{_fmt(result.bracket[0])},{_fmt(result.bracket[1])}] evaluations={result.evaluations}")
    _write(lines, params.get("out"))
    return EXIT_OK


def cmd_simulate(params: Dict[str, Any], replicas: int, output_format: str) -> int:
    if params["attack"] not in ATTACKS:
        raise ValidationError("attack", f"unknown attack '{params['attack']}'")
    if replicas < 1:
        raise ValidationError("replicas", "need at least one replica")
    attack, delayed = ATTACKS[params["attack"]]
    channel = _channel(ProtocolKind.DPS, params)
    nbar = params["nbar"] if params["nbar"] is not None else SIMULATE_NBAR
    configs = [montecarlo.SimConfig(
        n_pulses=params["pulses"], nbar=nbar, transmission=channel.transmission,
        dark_count=channel.dark_count, baseline_error=channel.baseline_error,
        attack=attack, delayed=delayed, k=params["k"], eps_s=params["eps_s"],
        intercept_fraction=params["intercept_fraction"],
        seed=params["seed"] + i) for i in range(replicas)]
    reports = montecarlo.run_replicas(configs, workers=params["workers"])

    resolved = _public(params, ("attack", "pulses", "k", "eps_s", "intercept_fraction", "seed", "baseline_error"))
    resolved.update(nbar=nbar, transmission=channel.transmission, dark_count=channel.dark_count, replicas=replicas)
    if output_format == "csv":
        lines = run_config.header_lines("simulate", resolved, montecarlo.SimReport.CSV_COLUMNS)
        lines += _csv_lines([montecarlo.SimReport.CSV_COLUMNS] + [r.csv_row() for r in reports])
    else:
        lines = run_config.header_lines("simulate", resolved, ("summary",))
        for report in reports:
            lines += ["", report.summary()]
    _write(lines, params.get("out"))
    return EXIT_OK


def cmd_oracle(params: Dict[str, Any]) -> int:
    targets = params.get("e_targets") or list(DEFAULT_ORACLE_TARGETS)
    results = collision.oracle_table(targets, params["e_tol"], params["grid_points"], params["workers"])
    rows = []
    for target, result in zip(targets, results):
        analytic = collision.pc0_bound(target).pc0
        if result is None:
            rows.append([_fmt(target), _fmt(analytic), "nan", "nan", "nan", "0"])
            continue
        rows.append([_fmt(target), _fmt(analytic), _fmt(result.pc_max), _fmt(result.gap),
                     _fmt(result.e_at_max), str(result.n_in_band)])
    resolved = _public(params, ("grid_points", "e_tol"))
    resolved["e_targets"] = targets
    lines = run_config.header_lines("oracle", resolved, ORACLE_COLUMNS)
    lines += _csv_lines([ORACLE_COLUMNS] + rows)
    _write(lines, params.get("out"))
    return EXIT_OK if any(r is not None for r in results) else EXIT_NO_RESULT


def _cutoff_text(label: str, params: Dict[str, Any], ec: ErrorCorrectionModel) -> str:
    try:
        cutoff = optimize.cutoff_loss(label, params["dark_count"], params["baseline_error"], ec)
    except BeyondCutoffError:
        return "no positive rate at 0 dB"
    if cutoff is None:
        return f"none below {optimize.PROBE_CEILING_DB:.0f} dB"
    return f"{cutoff:.2f} dB"


def cmd_figures(params: Dict[str, Any]) -> int:
    outdir = params.get("out") or "figures"
    os.makedirs(outdir, exist_ok=True)
    ec = _error_correction(params)
    resolved = _public(params, ("loss_min", "loss_max", "loss_step", "dark_count", "baseline_error", "f_ec"))

    figure_sets = [
        ("rates_vs_loss", ("dps", "bb84-poisson", "bb84-single"), "Secure rate vs. channel loss"),
        ("individual_vs_sequential", ("dps", "dps-seq"), "Individual vs. sequential attacks"),
    ]
    for stem, protocols, title in figure_sets:
        points = optimize.sweep(_sweep_spec(params, protocols))
        header = run_config.header_lines("figures", dict(resolved, protocols=list(protocols)), SWEEP_COLUMNS)
        _write(header + _csv_lines([SWEEP_COLUMNS] + _sweep_rows(points)), os.path.join(outdir, f"{stem}.csv"))
        plotting.plot_rate_curves(points, os.path.join(outdir, f"{stem}.svg"), title, header=header)

    report = [
        "# dpsrate figures",
        "",
        f"Baseline error {params['baseline_error']}, dark counts "
        f"{params['dark_count'] if params['dark_count'] is not None else '1e-5 (DPS) / 2e-5 (BB84)'}, "
        f"loss {params['loss_min']} to {params['loss_max']} dB in steps of {params['loss_step']} dB.",
        "",
        "| Protocol | Cutoff loss |",
        "|---|---|",
    ]
    for label in ("dps", "bb84-poisson", "bb84-single"):
        report.append(f"| {plotting.CURVE_NAMES[label]} | {_cutoff_text(label, params, ec)} |")
    report += [
        "",
        "## Collision bound",
        "",
        f"- Pc0(0) = {collision.pc0_bound(0.0).pc0:.6f}",
        f"- Pc0 saturates at e = 3/19 with value {collision.PC0_MAX:.6f}",
        "",
        "Files: `rates_vs_loss.csv`, `rates_vs_loss.svg`, "
        "`individual_vs_sequential.csv`, `individual_vs_sequential.svg`.",
        "",
    ]
    plotting.write_report("\n".join(report), os.path.join(outdir, "report.md"), os.path.join(outdir, "report.html"),
                          header=run_config.header_lines("figures", resolved, REPORT_COLUMNS))
    print(f"Figures written to {outdir}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the script."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s [%(levelname)s] [%(name)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )
    try:
        params = _resolve_parameters(args)
        if args.command == "rate":
            return cmd_rate(params)
        if args.command == "sweep":
            return cmd_sweep(params)
        if args.command == "optimize":
            return cmd_optimize(params)
        if args.command == "simulate":
            return cmd_simulate(params, args.replicas, args.format)
        if args.command == "oracle":
            return cmd_oracle(params)
        return cmd_figures(params)
    except run_config.ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, RegimeError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (BeyondCutoffError, EmptyBinError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NO_RESULT


if __name__ == "__main__":
    sys.exit(main())
