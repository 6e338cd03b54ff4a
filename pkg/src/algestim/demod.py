"""Symbol detection over a finite alphabet under burst noise."""
from __future__ import annotations

import bisect
import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .estimator import (
    Carrier,
    DivisorZeroError,
    EstimatorSpec,
    build_amplitude_estimator,
    build_annihilating_estimator,
    estimate,
)
from .hypergrid import GridFunction, GridSpec
from .noise import BurstSpec, IidNoiseSpec, gen_burst

MAX_DIVISOR_FAILURES = 0.10


class ScenarioError(ValueError):
    """The scenario cannot be run as configured (e.g. window next to a divisor zero)."""


@dataclass(frozen=True)
class Alphabet:
    symbols: Tuple[float, ...]

    def __post_init__(self) -> None:
        syms = tuple(float(s) for s in self.symbols)
        if len(syms) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if not all(math.isfinite(s) for s in syms):
            raise ValueError("alphabet symbols must be finite")
        if any(b <= a for a, b in zip(syms, syms[1:])):
            raise ValueError(f"alphabet must be strictly increasing, got {syms}")
        object.__setattr__(self, "symbols", syms)

    @classmethod
    def uniform(cls, size: int, separation: float) -> "Alphabet":
        """``size`` symbols spaced by ``separation``, symmetric about 0."""
        return cls(tuple(separation * (i - (size - 1) / 2) for i in range(size)))

    @property
    def separation(self) -> float:
        return min(b - a for a, b in zip(self.symbols, self.symbols[1:]))

    def nearest(self, value: float) -> float:
        """Closest symbol; a value exactly between two symbols maps to the smaller."""
        syms = self.symbols
        i = bisect.bisect_left(syms, value)
        if i == 0:
            return syms[0]
        if i == len(syms):
            return syms[-1]
        lo, hi = syms[i - 1], syms[i]
        return hi if hi - value < value - lo else lo


@dataclass(frozen=True)
class DemodScenario:
    carrier: Carrier
    window_length: float
    noise: BurstSpec
    alphabet: Alphabet
    trials: int = 200
    estimator_degree: int = 2

    def __post_init__(self) -> None:
        if not 0.0 < self.window_length <= 1.0:
            raise ValueError(f"window length must be in (0, 1], got {self.window_length}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.estimator_degree < -1:
            raise ValueError("estimator degree must be -1 (plain) or a nonnegative degree")

    def build_estimator(self) -> EstimatorSpec:
        if self.estimator_degree < 0:
            return build_amplitude_estimator(self.carrier)
        return build_annihilating_estimator(self.carrier, self.estimator_degree)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    symbol_sent: float
    raw_estimate: float
    symbol_detected: float

    @property
    def error(self) -> bool:
        return self.symbol_detected != self.symbol_sent


def detect(est: EstimatorSpec, y: GridFunction, t: int, alphabet: Alphabet) -> Tuple[float, float]:
    raw = estimate(est, y, t)
    return alphabet.nearest(raw), raw


def received_signal(scenario: DemodScenario, grid: GridSpec, symbol: float, trial: int) -> GridFunction:
    noise, _ = gen_burst(scenario.noise, grid, trial)
    return symbol * scenario.carrier.on_grid(grid) + noise


def _seeded(noise: BurstSpec, seed: Optional[int]) -> BurstSpec:
    if seed is None or not isinstance(noise.base, IidNoiseSpec):
        return noise
    return replace(noise, base=replace(noise.base, seed=seed))


def symbol_error_rate(
    scenario: DemodScenario,
    grid: GridSpec,
    seed: Optional[int] = None,
    jobs: int = 1,
) -> Tuple[float, List[TrialRecord]]:
    """Send ``scenario.trials`` symbols round-robin through the channel and count errors.

    ``seed`` replaces the seed of an iid base noise.  Trials are independent
    and may be spread over ``jobs`` threads; records stay in trial order.
    """
    est = scenario.build_estimator()
    scen = replace(scenario, noise=_seeded(scenario.noise, seed))
    t = grid.index(scen.window_length)
    if t == 0:
        raise ScenarioError(f"window {scen.window_length} is shorter than one grid step")
    syms = scen.alphabet.symbols

    def one(trial: int) -> Optional[TrialRecord]:
        sent = syms[trial % len(syms)]
        y = received_signal(scen, grid, sent, trial)
        try:
            got, raw = detect(est, y, t, scen.alphabet)
        except DivisorZeroError:
            return None
        return TrialRecord(trial, sent, raw, got)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(scen.trials)))
    else:
        results = [one(i) for i in range(scen.trials)]

    failed = sum(r is None for r in results)
    if failed > MAX_DIVISOR_FAILURES * scen.trials:
        raise ScenarioError(
            f"{failed}/{scen.trials} trials hit a divisor zero at window {scen.window_length}"
        )
    records = [r for r in results if r is not None]
    errors = sum(r.error for r in records) + failed
    return errors / scen.trials, records


def records_to_csv(records: Sequence[TrialRecord], path: Union[str, Path, None] = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "symbol_sent", "raw_estimate", "symbol_detected", "error_flag"])
    for r in records:
        writer.writerow([r.trial, f"{r.symbol_sent:.17g}", f"{r.raw_estimate:.17g}",
                         f"{r.symbol_detected:.17g}", int(r.error)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, newline="")
    return text


def plain_bias(scenario: DemodScenario, grid: GridSpec) -> float:
    """Offset the burst polynomial adds to the plain-kernel estimate, ``int p / delta``.

    Closed-form integrals; independent of the grid sums used by the estimator.
    ``grid`` only fixes where the window is snapped.
    """
    t = grid.index(scenario.window_length) / grid.n
    poly = np.polynomial.Polynomial(scenario.noise.poly_coeffs)
    num = poly.integ()(t) - poly.integ()(0.0)
    c = scenario.carrier
    if c.kind != "sine":
        raise ValueError("closed-form bias is only available for sine carriers")
    w = 2 * np.pi * c.freq
    den = (math.cos(c.phase) - math.cos(w * t + c.phase)) / w
    return float(num / den)
