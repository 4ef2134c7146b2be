"""Experiment orchestration: Monte-Carlo execution, sweeps, scheme comparisons.

All randomness flows from one master seed: SeedSequence(seed) is spawned
into n_monte_carlo + 1 children, the first materializes the scenario
recipe and the rest drive the runs. Comparing schemes under the same
master seed therefore presents identical data streams to every agent
round-for-round (common random numbers).
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from declust.analysis import (
    TailEstimates,
    estimate_tail_probs,
    steady_window,
    theory_report,
    to_db,
    trust_error_bounds,
)
from declust.model import HyperParams, ScenarioError
from declust.scenario import Scenario, scenario_from_dict
from declust.simulate import SCHEMES, DivergenceAbort, RunTrace, run_single


@dataclass
class ExperimentConfig:
    scenario: dict | Scenario
    scheme: str = "clustering"
    n_rounds: int = 800
    n_monte_carlo: int = 100
    seed: int = 0
    out_dir: Path | None = None
    decimate: int = 1
    collect_edges: bool = False
    relay_log: bool = False
    on_divergence: str = "abort"  # or "exclude"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ScenarioError(f"unknown scheme {self.scheme!r}")
        if self.n_rounds < 1 or self.n_monte_carlo < 1 or self.decimate < 1:
            raise ScenarioError("n_rounds, n_monte_carlo and decimate must be >= 1")
        if self.on_divergence not in ("abort", "exclude"):
            raise ScenarioError("on_divergence must be 'abort' or 'exclude'")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    scenario: Scenario
    traces: list[RunTrace]
    rounds: np.ndarray
    msd_psi: np.ndarray  # Monte-Carlo mean, linear scale
    msd_w: np.ndarray
    v1_bar: np.ndarray
    v2_bar: np.ndarray
    diverged_runs: list[tuple[int, int]] = field(default_factory=list)  # (run, round)

    @property
    def msd_psi_db(self) -> np.ndarray:
        return to_db(self.msd_psi)

    @property
    def msd_w_db(self) -> np.ndarray:
        return to_db(self.msd_w)

    def window_mask(self, window: tuple[int, int]) -> np.ndarray:
        return (self.rounds >= window[0]) & (self.rounds < window[1])

    def steady_msd_db(self, window: tuple[int, int] | None = None, which: str = "w") -> float:
        """Mean MSD over the steady window, in dB."""
        window = window or steady_window(self.config.n_rounds, self.scenario)
        sel = self.window_mask(window)
        series = self.msd_w if which == "w" else self.msd_psi
        return float(to_db(series[sel].mean()))

    def per_run_steady_msd_db(self, window: tuple[int, int] | None = None, which: str = "w") -> np.ndarray:
        window = window or steady_window(self.config.n_rounds, self.scenario)
        sel = self.window_mask(window)
        key = "msd_w" if which == "w" else "msd_psi"
        return np.array([to_db(getattr(tr, key)[sel].mean()) for tr in self.traces])


def materialize_scenario(config: ExperimentConfig) -> tuple[Scenario, list[np.random.SeedSequence]]:
    ss = np.random.SeedSequence(config.seed)
    children = ss.spawn(config.n_monte_carlo + 1)
    if isinstance(config.scenario, Scenario):
        scenario = config.scenario
    else:
        scenario = scenario_from_dict(config.scenario, seed=children[0])
    return scenario, children[1:]


def run_experiment(config: ExperimentConfig, scenario: Scenario | None = None,
                   run_seeds: list[np.random.SeedSequence] | None = None) -> ExperimentResult:
    """Execute n_monte_carlo independent seeded runs and aggregate them."""
    if scenario is None or run_seeds is None:
        scenario, run_seeds = materialize_scenario(config)
    traces: list[RunTrace] = []
    diverged: list[tuple[int, int]] = []
    for r, child in enumerate(run_seeds):
        try:
            tr = run_single(
                scenario,
                config.scheme,
                config.n_rounds,
                child,
                decimate=config.decimate,
                collect_edges=config.collect_edges,
                relay_log=config.relay_log,
                raise_on_divergence=(config.on_divergence == "abort"),
            )
        except DivergenceAbort as exc:
            exc.run_idx = r
            raise
        if tr.diverged_at is not None:
            diverged.append((r, tr.diverged_at))
            continue
        traces.append(tr)
    if not traces:
        raise ScenarioError("all Monte-Carlo runs diverged")
    rounds = traces[0].rounds
    agg = {
        key: np.mean([getattr(tr, key) for tr in traces], axis=0)
        for key in ("msd_psi", "msd_w", "v1_bar", "v2_bar")
    }
    return ExperimentResult(
        config=config,
        scenario=scenario,
        traces=traces,
        rounds=rounds,
        diverged_runs=diverged,
        **agg,
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

_SWEEPABLE = ("mu", "nu", "gamma", "alpha")


def _with_param(scenario: Scenario, parameter: str, value: float) -> Scenario:
    hp = scenario.hyper
    if parameter == "mu":
        hp = HyperParams(np.array([value]), hp.alpha, hp.nu, hp.gamma)
    elif parameter == "nu":
        hp = HyperParams(hp.step_sizes, hp.alpha, value, hp.gamma)
    elif parameter == "gamma":
        hp = HyperParams(hp.step_sizes, hp.alpha, hp.nu, value)
    else:
        hp = HyperParams(hp.step_sizes, value, hp.nu, hp.gamma)
    return dataclasses.replace(scenario, hyper=hp)


def _validate_sweep(scenario: Scenario, parameter: str, values) -> None:
    if parameter not in _SWEEPABLE:
        raise ScenarioError(f"sweep parameter must be one of {_SWEEPABLE}")
    if not values:
        raise ScenarioError("sweep values list is empty")
    for v in values:
        if parameter == "mu" and v <= 0:
            raise ScenarioError("step sizes must be positive")
        if parameter in ("nu", "gamma") and not 0 < v < 1:
            raise ScenarioError(f"{parameter} values must lie in (0, 1)")
        if parameter == "alpha" and not 0 < v < scenario.clusters.delta**2:
            raise ScenarioError("alpha values must lie in (0, delta^2)")


@dataclass
class SweepRow:
    parameter: str
    value: float
    steady_msd_psi_db: float
    steady_msd_w_db: float
    tails: TailEstimates
    mu_bound_min: float
    p1_bound: float | None
    p2_bound: float | None


def sweep(config: ExperimentConfig, parameter: str, values: list[float]) -> list[SweepRow]:
    """One experiment per parameter value, identical seeds throughout."""
    base_scenario, run_seeds = materialize_scenario(config)
    _validate_sweep(base_scenario, parameter, values)
    rows = []
    for value in values:
        scenario = _with_param(base_scenario, parameter, float(value))
        cfg = dataclasses.replace(config, collect_edges=True)
        result = run_experiment(cfg, scenario=scenario, run_seeds=run_seeds)
        window = steady_window(config.n_rounds, scenario)
        tails = estimate_tail_probs(result.traces, scenario, window)
        report = theory_report(scenario)
        tb = trust_error_bounds(
            tails.p_d.point, tails.p_f.point, scenario.hyper.nu, scenario.hyper.gamma
        )
        rows.append(
            SweepRow(
                parameter=parameter,
                value=float(value),
                steady_msd_psi_db=result.steady_msd_db(window, which="psi"),
                steady_msd_w_db=result.steady_msd_db(window, which="w"),
                tails=tails,
                mu_bound_min=float(report.mu_bound.min()),
                p1_bound=tb.p1_bound,
                p2_bound=tb.p2_bound,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Scheme comparison with common random numbers
# ---------------------------------------------------------------------------


@dataclass
class SchemeComparison:
    schemes: list[str]
    results: dict[str, ExperimentResult]
    steady_db: dict[str, float]
    # per-run paired dB differences of each scheme against the first one
    paired_diff_db: dict[str, np.ndarray]
    diff_ci: dict[str, tuple[float, float]]


def _mean_ci(x: np.ndarray, conf: float = 0.95) -> tuple[float, float]:
    from scipy.stats import t

    n = len(x)
    if n < 2:
        return float("-inf"), float("inf")
    half = t.ppf(0.5 + conf / 2, n - 1) * x.std(ddof=1) / math.sqrt(n)
    return float(x.mean() - half), float(x.mean() + half)


def compare_schemes(config: ExperimentConfig, schemes: list[str]) -> SchemeComparison:
    if len(schemes) < 2:
        raise ScenarioError("need at least two schemes to compare")
    scenario, run_seeds = materialize_scenario(config)
    window = steady_window(config.n_rounds, scenario)
    results, steady, diffs, cis = {}, {}, {}, {}
    base_runs = None
    for scheme in schemes:
        cfg = dataclasses.replace(config, scheme=scheme)
        res = run_experiment(cfg, scenario=scenario, run_seeds=run_seeds)
        results[scheme] = res
        steady[scheme] = res.steady_msd_db(window)
        per_run = res.per_run_steady_msd_db(window)
        if base_runs is None:
            base_runs = per_run
        else:
            d = per_run - base_runs
            diffs[scheme] = d
            cis[scheme] = _mean_ci(d)
    return SchemeComparison(
        schemes=schemes, results=results, steady_db=steady, paired_diff_db=diffs, diff_ci=cis
    )


# ---------------------------------------------------------------------------
# Output emission
# ---------------------------------------------------------------------------


def write_trace_csv(result: ExperimentResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    msd_psi_db, msd_w_db = result.msd_psi_db, result.msd_w_db
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "msd_psi_db", "msd_w_db", "v1_bar", "v2_bar"])
        for i, rnd in enumerate(result.rounds):
            writer.writerow(
                [
                    int(rnd),
                    f"{msd_psi_db[i]:.10g}",
                    f"{msd_w_db[i]:.10g}",
                    f"{result.v1_bar[i]:.10g}",
                    f"{result.v2_bar[i]:.10g}",
                ]
            )
    return path


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    def fmt(x):
        return "n/a" if x is None else f"{x:.10g}"

    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "parameter", "value", "steady_msd_psi_db", "steady_msd_w_db",
                "p_d", "p_f", "p1", "p2",
                "p_d_upper", "p_f_upper", "p1_upper", "p2_upper",
                "mu_bound_min", "p1_bound", "p2_bound",
            ]
        )
        for row in rows:
            t = row.tails
            writer.writerow(
                [
                    row.parameter, f"{row.value:.10g}",
                    f"{row.steady_msd_psi_db:.10g}", f"{row.steady_msd_w_db:.10g}",
                    f"{t.p_d.point:.10g}", f"{t.p_f.point:.10g}",
                    f"{t.p1.point:.10g}", f"{t.p2.point:.10g}",
                    f"{t.p_d.upper:.10g}", f"{t.p_f.upper:.10g}",
                    f"{t.p1.upper:.10g}", f"{t.p2.upper:.10g}",
                    f"{row.mu_bound_min:.10g}", fmt(row.p1_bound), fmt(row.p2_bound),
                ]
            )
    return path


def write_comparison_csv(comp: SchemeComparison, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scheme", "steady_msd_w_db", "diff_vs_first_db", "ci_low", "ci_high"])
        for scheme in comp.schemes:
            if scheme in comp.paired_diff_db:
                d = comp.paired_diff_db[scheme].mean()
                lo, hi = comp.diff_ci[scheme]
                writer.writerow(
                    [scheme, f"{comp.steady_db[scheme]:.10g}", f"{d:.10g}", f"{lo:.10g}", f"{hi:.10g}"]
                )
            else:
                writer.writerow([scheme, f"{comp.steady_db[scheme]:.10g}", "0", "0", "0"])
    return path


def write_relay_log_csv(result: ExperimentResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "round", "sender", "receiver", "relayed_from"])
        for r, tr in enumerate(result.traces):
            for rnd, s, d, m in tr.relay_log:
                writer.writerow([r, rnd, s, d, m])
    return path


def render_svg(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Static SVG line charts of the aggregate traces."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(result.rounds, result.msd_psi_db, label="MSD psi")
    ax.plot(result.rounds, result.msd_w_db, label="MSD w")
    ax.set_xlabel("round")
    ax.set_ylabel("MSD [dB]")
    ax.legend()
    ax.grid(alpha=0.3)
    p = out_dir / "msd.svg"
    fig.savefig(p, format="svg")
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(result.rounds, result.v1_bar, label="type-I (v1)")
    ax.plot(result.rounds, result.v2_bar, label="type-II (v2)")
    ax.set_xlabel("round")
    ax.set_ylabel("normalized clustering error")
    ax.legend()
    ax.grid(alpha=0.3)
    p = out_dir / "errors.svg"
    fig.savefig(p, format="svg")
    plt.close(fig)
    paths.append(p)
    return paths
