"""Command-line front end: simulation runs, channel analysis, rate calculators."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import binio, distributed, linksim, metrics

try:
    from tomllib import load as _toml_load
except ModuleNotFoundError:  # Python < 3.11
    from tomli import load as _toml_load
from .channel import rayleigh_distance, SPEED_OF_LIGHT
from .errors import XlsimError
from .numerology import load_numerology


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(scenario, args):
    import dataclasses

    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "scheme", None):
        updates["scheme"] = args.scheme
    if getattr(args, "distributed", None):
        updates["processors"] = args.distributed
    return dataclasses.replace(scenario, **updates) if updates else scenario


def cmd_rates(args) -> int:
    budget = distributed.default_rate_budget(n_sc=args.n_sc, chains=args.chains)
    window = 0.5e-3
    wavelength = SPEED_OF_LIGHT / args.f_c_hz
    aperture = args.aperture_m if args.aperture_m is not None else 63 * wavelength / 2
    se_spec = metrics.ThroughputSpec(args.n_sc, 26, 8, 12, window, args.bandwidth_hz)
    se_variant = metrics.ThroughputSpec(args.variant_n_sc, 26, 8, 12, window, args.bandwidth_hz)
    payload = {
        "rayleigh_distance_m": rayleigh_distance(aperture, wavelength),
        "aggregate_sample_rate_gbps": distributed.aggregate_sample_rate(budget) / 1e9,
        "group_interaction_rate_gbps": distributed.group_interaction_rate(budget) / 1e9,
        "peak_throughput_gbps": metrics.throughput(
            metrics.ThroughputSpec(args.n_sc, 26, 8, 8, window)
        )
        / 1e9,
        "switched_throughput_gbps": metrics.throughput(
            metrics.ThroughputSpec(args.n_sc, 22, 8, 8, window)
        )
        / 1e9,
        "peak_throughput_12u_gbps": metrics.throughput(
            metrics.ThroughputSpec(args.n_sc, 26, 8, 12, window)
        )
        / 1e9,
        "spectral_efficiency_12u": metrics.spectral_efficiency(se_spec),
        "spectral_efficiency_12u_variant": metrics.spectral_efficiency(se_variant),
        "aperture_m": aperture,
        "f_c_hz": args.f_c_hz,
        "n_sc": args.n_sc,
        "chains": args.chains,
        "bandwidth_hz": args.bandwidth_hz,
    }
    print(json.dumps(payload, indent=2))
    if args.out:
        _write_json(Path(args.out) / "rates.json", payload)
    return 0


def cmd_simulate_ul(args) -> int:
    scenario = _apply_overrides(linksim.load_scenario(args.config), args)
    result = linksim.run_uplink(scenario)
    out = _out_dir(args)
    _write_json(out / "summary.json", result.summary())
    metrics.write_rows_csv(out / "per_user.csv", result.per_user)
    binio.save_tensor(out / "detected.tensor", result.detected,
                      result.channel.f_c_hz, result.channel.scs_hz)
    binio.save_tensor(out / "channel.tensor", result.channel.h,
                      result.channel.f_c_hz, result.channel.scs_hz)
    if result.estimate is not None:
        binio.save_tensor(out / "estimate.tensor", result.estimate.per_subcarrier,
                          result.channel.f_c_hz, result.channel.scs_hz)
    if scenario.processors > 1:
        num = scenario.numerology
        n_sym = 1 + scenario.data_symbol_count()
        window = sum(
            num.symbol_samples(s % num.symbols_per_slot) for s in range(n_sym)
        ) / num.sample_rate_hz
        plan = distributed.plan_partition(
            scenario.geometry.n_elements, num.n_data_sc, scenario.processors,
            subband_align=scenario.k_users,
        )
        report = distributed.exchange_report(plan, n_sym, window)
        _write_json(out / "exchange_report.json", report)
    print(json.dumps(result.summary(), indent=2))
    return 0


def cmd_simulate_dl(args) -> int:
    scenario = _apply_overrides(linksim.load_scenario(args.config), args)
    result = linksim.run_downlink(scenario)
    out = _out_dir(args)
    _write_json(out / "summary.json", result.summary())
    metrics.write_rows_csv(out / "per_user.csv", result.per_user)
    binio.save_tensor(out / "equalized.tensor", result.equalized,
                      result.channel.f_c_hz, result.channel.scs_hz)
    binio.save_tensor(out / "channel.tensor", result.channel.h,
                      result.channel.f_c_hz, result.channel.scs_hz)
    print(json.dumps(result.summary(), indent=2))
    return 0


def cmd_sweep(args) -> int:
    scenario = _apply_overrides(linksim.load_scenario(args.config), args)
    values: list = []
    for raw in args.values.split(","):
        raw = raw.strip()
        try:
            if args.axis == "scheme":
                values.append(raw)
            elif args.axis == "snr_db":
                values.append(float(raw))
            else:
                values.append(int(raw))
        except ValueError:
            raise XlsimError(f"bad value {raw!r} for axis {args.axis}") from None
    rows = linksim.run_sweep(scenario, args.axis, values, direction=args.direction)
    out = _out_dir(args)
    metrics.write_rows_csv(out / "sweep.csv", rows)
    _write_json(out / "sweep.json", {"axis": args.axis, "rows": rows})
    print(json.dumps(rows, indent=2))
    return 0


def cmd_analyze_channel(args) -> int:
    scenario = _apply_overrides(linksim.load_scenario(args.config), args)
    tensor = linksim._scenario_channel(scenario)
    out = _out_dir(args)
    spread = metrics.singular_value_spread(tensor.h, normalize=True)
    spread.to_csv(out / "spread.csv")
    profiles = []
    for k in range(tensor.n_users):
        profile = metrics.element_power_profile(tensor.h, user=k)
        profiles.append(profile)
    rows = [
        {"element": n, **{f"user{k}": float(p[n]) for k, p in enumerate(profiles)}}
        for n in range(tensor.n_elements)
    ]
    metrics.write_rows_csv(out / "power_profile.csv", rows)
    binio.save_tensor(out / "channel.tensor", tensor.h, tensor.f_c_hz, tensor.scs_hz)
    wavelength = SPEED_OF_LIGHT / tensor.f_c_hz
    payload = {
        "n_subcarriers": tensor.n_subcarriers,
        "n_elements": tensor.n_elements,
        "n_users": tensor.n_users,
        "aperture_m": scenario.geometry.aperture_m,
        "rayleigh_distance_m": rayleigh_distance(scenario.geometry.aperture_m, wavelength),
        "median_spread": spread.median,
        "finite_spread_fraction": float(np.mean(np.isfinite(spread.spreads))),
    }
    _write_json(out / "summary.json", payload)
    print(json.dumps(payload, indent=2))
    return 0


def cmd_sync_test(args) -> int:
    numerology = load_numerology(args.config)
    with open(args.config, "rb") as fh:
        sync_cfg = _toml_load(fh).get("sync", {})
    root = args.root if args.root is not None else int(sync_cfg.get("root", 25))
    threshold = (
        args.threshold if args.threshold is not None else float(sync_cfg.get("threshold", 8.0))
    )
    rng = np.random.default_rng(args.seed or 0)
    results = []
    for trial in range(args.trials):
        delay = args.delay if args.delay is not None else int(
            rng.integers(0, numerology.frame_samples)
        )
        results.append(
            linksim.sync_trial(
                numerology,
                root=root,
                delay=delay,
                snr_db=args.snr_db,
                seed=(args.seed or 0) + trial,
                threshold=threshold,
            )
        )
    payload = {
        "trials": args.trials,
        "snr_db": args.snr_db,
        "root": root,
        "threshold": threshold,
        "success_rate": float(np.mean([r["success"] for r in results])),
        "mean_peak_metric": float(np.mean([r["peak_metric"] for r in results])),
    }
    print(json.dumps(payload, indent=2))
    if args.out:
        _write_json(Path(args.out) / "sync_test.json", payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="TOML scenario file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("rates", help="closed-form rate and efficiency calculators")
    p.add_argument("--n-sc", type=int, default=3168, dest="n_sc")
    p.add_argument("--variant-n-sc", type=int, default=3276, dest="variant_n_sc")
    p.add_argument("--chains", type=int, default=256)
    p.add_argument("--bandwidth-hz", type=float, default=200e6, dest="bandwidth_hz")
    p.add_argument("--f-c-hz", type=float, default=6.8e9, dest="f_c_hz")
    p.add_argument("--aperture-m", type=float, default=None, dest="aperture_m",
                   help="array aperture for the Rayleigh distance (default 63*lambda/2)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("simulate-ul", help="run one uplink experiment")
    add_common(p)
    p.add_argument("--scheme", choices=("mr", "zf", "lmmse"), default=None)
    p.add_argument("--distributed", type=int, default=None, metavar="P")
    p.set_defaults(func=cmd_simulate_ul)

    p = sub.add_parser("simulate-dl", help="run one downlink experiment")
    add_common(p)
    p.add_argument("--scheme", choices=("mr", "zf", "lmmse"), default=None)
    p.add_argument("--distributed", type=int, default=None, metavar="P")
    p.set_defaults(func=cmd_simulate_dl)

    p = sub.add_parser("sweep", help="sweep one scenario axis")
    add_common(p)
    p.add_argument("--axis", required=True, choices=linksim.SWEEP_AXES)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--direction", choices=("ul", "dl"), default="ul")
    p.add_argument("--scheme", choices=("mr", "zf", "lmmse"), default=None)
    p.add_argument("--distributed", type=int, default=None, metavar="P")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze-channel", help="spread and power-profile analysis")
    add_common(p)
    p.set_defaults(func=cmd_analyze_channel)

    p = sub.add_parser("sync-test", help="PSS detection trials")
    p.add_argument("--config", required=True, help="TOML file with a [numerology] section")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--root", type=int, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--delay", type=int, default=None)
    p.add_argument("--snr-db", type=float, default=None, dest="snr_db")
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_sync_test)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except XlsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
