"""The five canonical experiments.

Each ``run_*`` takes a validated :class:`~algestim.config.ExperimentConfig`
and returns a :class:`Report`: CSV tables keyed by file name plus the list
of failed checks.  Nothing here touches the filesystem.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Sequence, TypeVar

import numpy as np

from .config import ExperimentConfig
from .demod import plain_bias, records_to_csv, symbol_error_rate
from .estimator import build_constant_estimator, estimate, window_sweep
from .hypergrid import GridSpec, oscillation_norm
from .noise import (
    IidNoiseSpec,
    SinusoidMixSpec,
    apply_multiplicative,
    centlim_statistic,
    generate,
    poly_function,
    residual_decompose,
    verify_noise,
)

T = TypeVar("T")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def fan_out(fn: Callable[[int], T], count: int, jobs: int = 1) -> List[T]:
    """``[fn(0), ..., fn(count-1)]``, optionally on ``jobs`` threads; order is by index."""
    if jobs > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(i) for i in range(count)]


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass
class Report:
    experiment: str
    tables: Dict[str, str] = field(default_factory=dict)
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[str]:
        return [f"{c.name}: value {c.value:.6g} vs threshold {c.threshold:.6g} {c.detail}".rstrip()
                for c in self.checks if not c.passed]

    def add_summary(self) -> None:
        rows = [(c.name, c.value, c.threshold, c.passed) for c in self.checks]
        self.tables[f"{self.experiment}_summary.csv"] = to_csv(["check", "value", "threshold", "pass"], rows)


def run_osc_trend(cfg: ExperimentConfig, jobs: int = 1) -> Report:
    p = cfg.params
    sinusoid = p.doc["noise"]["kind"] == "sinusoid"

    def norm_at(i: int) -> float:
        n, omega = p.ladder[i]
        grid = GridSpec(n)
        spec = p.noise
        if sinusoid:
            spec = SinusoidMixSpec(tuple((a, omega, phi) for a, _, phi in spec.terms))
        noise, mean = generate(spec, grid, 0)
        return oscillation_norm(noise - mean)

    norms = fan_out(norm_at, len(p.ladder), jobs)
    report = Report("osc_trend")
    report.tables["osc_trend.csv"] = to_csv(
        ["n", "omega", "osc_norm"], [(n, om, v) for (n, om), v in zip(p.ladder, norms)]
    )
    for i in range(1, len(norms)):
        n, om = p.ladder[i]
        limit = norms[i - 1] / p.min_decrease_factor
        report.checks.append(Check(f"row{i}_decrease", norms[i], limit, norms[i] <= limit,
                                   f"(n={n}, omega={om:g})"))
    report.add_summary()
    return report


def run_mult_reduce(cfg: ExperimentConfig, jobs: int = 1) -> Report:
    p = cfg.params
    grid = cfg.grid
    x = poly_function(p.x_coeffs, grid)
    # distinct trial indices keep n1 and n2 independent when they share a seed
    fluct, _ = generate(p.n1_noise, grid, 0)
    n2, n2_mean = generate(p.n2_noise, grid, 1)
    n1 = 1.0 + fluct
    y = apply_multiplicative(x, n1, n2)
    ok, norm = verify_noise(residual_decompose(y, x), n2_mean, p.threshold)
    report = Report("mult_reduce")
    report.tables["mult_reduce.csv"] = to_csv(["n", "osc_norm", "threshold", "pass"],
                                              [(grid.n, norm, p.threshold, ok)])
    report.checks.append(Check("residual_is_noise", norm, p.threshold, ok))
    report.add_summary()
    return report


def run_window_sweep(cfg: ExperimentConfig, jobs: int = 1) -> Report:
    p = cfg.params
    grid = cfg.grid
    lengths = list(p.window_lengths)
    if p.probe not in lengths:
        lengths.append(p.probe)
    results = fan_out(lambda i: window_sweep(p.estimator, p.theta, p.noise, grid, lengths, i),
                      cfg.trials, jobs)
    errors = np.array([r.abs_errors for r in results])
    estimates = np.array([r.estimates for r in results])
    first = results[0]
    rows = []
    for j, t in enumerate(first.window_lengths):
        rows.append((t, float(np.median(estimates[:, j])), float(np.median(errors[:, j])),
                     first.divisor_values[j], first.near_zero_flags[j]))
    report = Report("window_sweep")
    report.tables["window_sweep.csv"] = to_csv(["t", "estimate", "abs_error", "divisor", "near_zero"], rows)

    band = [j for j, t in enumerate(first.window_lengths)
            if p.band[0] <= lengths[j] <= p.band[1] and not first.near_zero_flags[j]]
    probe = lengths.index(p.probe)
    band_err = float(np.median(errors[:, band].mean(axis=1)))
    probe_err = float(np.median(errors[:, probe]))
    ratio = probe_err / band_err if band_err > 0 else math.inf
    report.checks.append(Check("divisor_zero_amplification", ratio, p.amplification_factor,
                               ratio >= p.amplification_factor,
                               f"(probe t={p.probe:g}, band {p.band[0]:g}-{p.band[1]:g})"))

    const = build_constant_estimator()
    small_len = p.small_steps / grid.n
    small = fan_out(lambda i: window_sweep(const, p.theta, p.noise, grid, [small_len, p.small_ref], i),
                    p.small_trials, jobs)
    small_err = np.array([r.abs_errors for r in small])
    med_small = float(np.median(small_err[:, 0]))
    med_ref = float(np.median(small_err[:, 1]))
    ratio_small = med_small / med_ref if med_ref > 0 else math.inf
    report.checks.append(Check("small_window_error", ratio_small, p.small_factor,
                               ratio_small >= p.small_factor,
                               f"(t={p.small_steps}/n vs t={p.small_ref:g})"))
    report.add_summary()
    return report


def run_centlim(cfg: ExperimentConfig, jobs: int = 1) -> Report:
    p = cfg.params
    spec = IidNoiseSpec(p.family, cfg.seed, 1.0)

    def median_abs(n_bar: int, t_i: float, t_f: float, trials: int) -> float:
        vals = fan_out(lambda i: abs(centlim_statistic(spec, n_bar, t_i, t_f, i)), trials, jobs)
        return float(np.median(vals))

    rows = []
    conv = [median_abs(nb, p.t_i, p.t_f, p.convergent_trials) for nb in p.convergent_n_bars]
    rows += [("convergent", nb, m, p.convergent_trials) for nb, m in zip(p.convergent_n_bars, conv)]
    div = [median_abs(nb, 0.0, float(nb * nb), p.divergent_trials) for nb in p.divergent_n_bars]
    rows += [("divergent", nb, m, p.divergent_trials) for nb, m in zip(p.divergent_n_bars, div)]

    report = Report("centlim")
    report.tables["centlim.csv"] = to_csv(["regime", "n_bar", "median_abs", "trials"], rows)
    slope = float(np.polyfit(np.log(p.convergent_n_bars), np.log(conv), 1)[0])
    lo, hi = p.slope_range
    report.checks.append(Check("convergent_slope_min", slope, lo, slope >= lo))
    report.checks.append(Check("convergent_slope_max", slope, hi, slope <= hi))
    growth = div[1] / div[0] if div[0] > 0 else math.inf
    report.checks.append(Check("divergent_growth", growth, p.growth_factor, growth >= p.growth_factor,
                               f"(n_bar {p.divergent_n_bars[0]} -> {p.divergent_n_bars[1]})"))
    report.add_summary()
    return report


def run_burst_demod(cfg: ExperimentConfig, jobs: int = 1) -> Report:
    """Symbol error rate with and without the annihilating kernel.

    Raises :class:`~algestim.demod.ScenarioError` when the window sits in a
    divisor zero's exclusion zone.
    """
    p = cfg.params
    grid = cfg.grid
    annih = p.scenario
    plain = replace(annih, estimator_degree=-1)
    ser_a, rec_a = symbol_error_rate(annih, grid, jobs=jobs)
    ser_p, rec_p = symbol_error_rate(plain, grid, jobs=jobs)

    report = Report("burst_demod")
    report.tables["burst_demod.csv"] = to_csv(["mode", "ser"], [("annihilating", ser_a), ("plain", ser_p)])
    report.tables["burst_demod_annihilating_trials.csv"] = records_to_csv(rec_a)
    report.tables["burst_demod_plain_trials.csv"] = records_to_csv(rec_p)

    if annih.carrier.kind == "sine":
        # the plain estimate of the burst alone, on the grid, against the closed form
        est = plain.build_estimator()
        t = grid.index(annih.window_length)
        p_only = poly_function(annih.noise.poly_coeffs, grid)
        grid_bias = estimate(est, p_only, t)
        exact = plain_bias(annih, grid)
        tol = 50.0 / grid.n / max(abs(est.grid_divisor(grid, t)), 1e-300)
        report.checks.append(Check("plain_bias_oracle", abs(grid_bias - exact), tol,
                                   abs(grid_bias - exact) <= tol, f"(bias {exact:.6g})"))
    report.checks.append(Check("annihilating_ser", ser_a, p.max_ser_annihilating,
                               ser_a <= p.max_ser_annihilating))
    report.checks.append(Check("plain_over_annihilating", ser_p, p.min_ratio * ser_a,
                               ser_p >= p.min_ratio * ser_a))
    report.checks.append(Check("plain_ser", ser_p, p.min_plain_ser, ser_p >= p.min_plain_ser))
    report.add_summary()
    return report


RUNNERS = {
    "osc-trend": run_osc_trend,
    "mult-reduce": run_mult_reduce,
    "window-sweep": run_window_sweep,
    "centlim": run_centlim,
    "burst-demod": run_burst_demod,
}


def run(cfg: ExperimentConfig, jobs: int = 1) -> Report:
    return RUNNERS[cfg.experiment](cfg, jobs)
