"""Command-line interface.

Subcommands: run, sweep, compare, bounds, gen-scenario. Exit codes:
0 success, 2 configuration error, 3 divergence abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from declust.analysis import theory_report
from declust.harness import (
    ExperimentConfig,
    compare_schemes,
    materialize_scenario,
    run_experiment,
    sweep,
    write_comparison_csv,
    write_relay_log_csv,
    write_sweep_csv,
    write_trace_csv,
    render_svg,
)
from declust.model import ScenarioError
from declust.scenario import load_scenario, preset_config, save_scenario, scenario_from_dict
from declust.simulate import SCHEMES, DivergenceAbort

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario config file (YAML or JSON)")
    p.add_argument("--preset", choices=["protocol", "bridge", "easy", "sweep"],
                   help="built-in scenario recipe (alternative to --config)")
    p.add_argument("--seed", type=int, default=0, help="master seed; all randomness derives from it")
    p.add_argument("--mc", type=int, default=100, help="number of Monte-Carlo runs")
    p.add_argument("--rounds", type=int, default=800, help="rounds per run")
    p.add_argument("--scheme", choices=SCHEMES, default="clustering")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--decimate", type=int, default=1, help="record every n-th round")
    p.add_argument("--svg", action="store_true", help="also render SVG line charts")
    p.add_argument("--relay-log", action="store_true", help="record relay provenance (linking only)")
    p.add_argument("--on-divergence", choices=["abort", "exclude"], default="abort")


def _scenario_cfg(args) -> dict:
    if args.config is not None:
        text = args.config.read_text()
        return json.loads(text) if args.config.suffix == ".json" else yaml.safe_load(text)
    if getattr(args, "preset", None):
        return preset_config(args.preset)
    raise ScenarioError("either --config or --preset is required")


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        scenario=_scenario_cfg(args),
        scheme=args.scheme,
        n_rounds=args.rounds,
        n_monte_carlo=args.mc,
        seed=args.seed,
        out_dir=args.out,
        decimate=args.decimate,
        relay_log=args.relay_log,
        on_divergence=args.on_divergence,
    )


def cmd_run(args) -> int:
    config = _experiment_config(args)
    result = run_experiment(config)
    path = write_trace_csv(result, args.out / "trace.csv")
    print(f"wrote {path}")
    if config.relay_log and args.scheme == "clustering_linking":
        print(f"wrote {write_relay_log_csv(result, args.out / 'relay_log.csv')}")
    if result.diverged_runs:
        print(f"excluded diverged runs: {result.diverged_runs}")
    if args.svg:
        for p in render_svg(result, args.out):
            print(f"wrote {p}")
    print(f"steady MSD_w: {result.steady_msd_db():.2f} dB over {len(result.traces)} runs")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _experiment_config(args)
    rows = sweep(config, args.param, [float(v) for v in args.values])
    path = write_sweep_csv(rows, args.out / f"sweep_{args.param}.csv")
    print(f"wrote {path}")
    for row in rows:
        print(
            f"{args.param}={row.value:g}: steady MSD_w {row.steady_msd_w_db:.2f} dB, "
            f"P_d={row.tails.p_d.point:.4g}, P_f={row.tails.p_f.point:.4g}"
        )
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _experiment_config(args)
    comp = compare_schemes(config, args.schemes)
    path = write_comparison_csv(comp, args.out / "comparison.csv")
    print(f"wrote {path}")
    for scheme in comp.schemes:
        line = f"{scheme}: steady MSD_w {comp.steady_db[scheme]:.2f} dB"
        if scheme in comp.paired_diff_db:
            lo, hi = comp.diff_ci[scheme]
            line += f" (diff vs {comp.schemes[0]}: {comp.paired_diff_db[scheme].mean():.2f} dB, CI [{lo:.2f}, {hi:.2f}])"
        print(line)
    return EXIT_OK


def cmd_bounds(args) -> int:
    config = _experiment_config(args)
    scenario, _ = materialize_scenario(config)
    report = theory_report(scenario, beta_sq=args.beta_sq, p_d=args.pd, p_f=args.pf)
    text = report.to_text()
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "bounds.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    cfg = _scenario_cfg(args)
    import numpy as np

    scenario = scenario_from_dict(cfg, seed=np.random.SeedSequence(args.seed).spawn(1)[0])
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "scenario.yaml"
    save_scenario(scenario, path)
    # materialized files round-trip: loading them back is deterministic
    load_scenario(path)
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="declust",
        description="Decentralized multi-task clustering/learning network simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment and emit CSV traces")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep one hyperparameter over a value list")
    _add_common(p)
    p.add_argument("--param", required=True, choices=["mu", "nu", "gamma", "alpha"])
    p.add_argument("--values", required=True, nargs="+")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="run several schemes under common random numbers")
    _add_common(p)
    p.add_argument("--schemes", required=True, nargs="+", choices=SCHEMES)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bounds", help="emit the theoretical bound report")
    _add_common(p)
    p.add_argument("--beta-sq", type=float, default=0.0,
                   help="gradient-noise constant in the step-size bound (default 0)")
    p.add_argument("--pd", type=float, help="assumed detection probability for trust bounds")
    p.add_argument("--pf", type=float, help="assumed false-alarm probability for trust bounds")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("gen-scenario", help="materialize a scenario recipe to an explicit file")
    _add_common(p)
    p.set_defaults(func=cmd_gen_scenario)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceAbort as exc:
        where = f"run {exc.run_idx}, " if exc.run_idx is not None else ""
        print(f"divergence abort: {where}{exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
