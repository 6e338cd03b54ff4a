"""Noise generators and the numeric noise test.

A function ``n`` is accepted as a noise of mean ``m`` when the oscillation
norm of ``n - m`` is under a threshold.  Generators here are deterministic:
sinusoid mixes are closed form, iid noises come from the counter-based
streams in :mod:`algestim.rng`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Tuple, Union

import numpy as np

from . import rng
from .hypergrid import GridFunction, GridSpec, integrate, oscillation_norm

MAX_POLY_DEGREE = 8
_CHUNK = 1 << 20


@dataclass(frozen=True)
class SinusoidMixSpec:
    """Finite sum of ``A sin(2 pi Omega t + phi)``; Omega in cycles per unit time."""

    terms: Tuple[Tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        terms = tuple(tuple(float(v) for v in term) for term in self.terms)
        if not terms:
            raise ValueError("sinusoid mix needs at least one term")
        for term in terms:
            if len(term) != 3:
                raise ValueError(f"sinusoid term must be (amplitude, frequency, phase), got {term}")
            if not all(math.isfinite(v) for v in term):
                raise ValueError(f"non-finite sinusoid term {term}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, amplitude: float, frequency: float, phase: float = 0.0) -> "SinusoidMixSpec":
        return cls(((amplitude, frequency, phase),))

    @classmethod
    def constant(cls, value: float) -> "SinusoidMixSpec":
        return cls(((value, 0.0, math.pi / 2),))

    def default_threshold(self, n: int) -> float:
        amps = [abs(a) for a, _, _ in self.terms]
        freqs = [abs(w) for _, w, _ in self.terms]
        if min(freqs) == 0.0:
            return math.inf
        return sum(amps) / (math.pi * min(freqs)) + 2 * math.pi * sum(amps) * max(freqs) / n


IID_FAMILIES = rng.FAMILIES + ("zero",)


@dataclass(frozen=True)
class IidNoiseSpec:
    """Independent centered draws of unit variance, multiplied by ``scale``.

    The ``zero`` family is degenerate (all draws 0); it exists for checks
    that need a noiseless path through the same code.
    """

    family: str = "rademacher"
    seed: int = 0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.family not in IID_FAMILIES:
            raise ValueError(f"family must be one of {IID_FAMILIES}, got {self.family!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    def default_threshold(self, n: int) -> float:
        return 5.0 * self.scale * math.sqrt(math.log(n) / n)


@dataclass(frozen=True)
class BurstSpec:
    """Noise whose mean is the polynomial ``poly_coeffs`` (ascending powers)."""

    poly_coeffs: Tuple[float, ...] = (0.0,)
    base: Union[IidNoiseSpec, SinusoidMixSpec] = field(default_factory=IidNoiseSpec)

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.poly_coeffs)
        if not coeffs:
            raise ValueError("burst polynomial needs at least one coefficient")
        if len(coeffs) - 1 > MAX_POLY_DEGREE:
            raise ValueError(f"burst polynomial degree {len(coeffs) - 1} exceeds {MAX_POLY_DEGREE}")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("non-finite burst coefficient")
        if not isinstance(self.base, (IidNoiseSpec, SinusoidMixSpec)):
            raise TypeError(f"burst base must be an iid or sinusoid spec, got {type(self.base).__name__}")
        object.__setattr__(self, "poly_coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.poly_coeffs) - 1


NoiseSpec = Union[SinusoidMixSpec, IidNoiseSpec, BurstSpec]


def gen_sinusoid(spec: SinusoidMixSpec, grid: GridSpec) -> GridFunction:
    t = grid.points()
    values = np.zeros_like(t)
    for amp, freq, phase in spec.terms:
        values += amp * np.sin(2 * np.pi * freq * t + phase)
    return GridFunction(grid, values)


def gen_iid(spec: IidNoiseSpec, grid: GridSpec, trial: int = 0) -> GridFunction:
    values = rng.draws(spec.family, spec.seed, trial, 0, grid.n + 1)
    return GridFunction(grid, spec.scale * values)


def poly_function(coeffs: Sequence[float], grid: GridSpec) -> GridFunction:
    return GridFunction(grid, np.polynomial.polynomial.polyval(grid.points(), list(coeffs)))


def gen_base(spec: Union[IidNoiseSpec, SinusoidMixSpec], grid: GridSpec, trial: int = 0) -> GridFunction:
    if isinstance(spec, IidNoiseSpec):
        return gen_iid(spec, grid, trial)
    return gen_sinusoid(spec, grid)


def gen_burst(spec: BurstSpec, grid: GridSpec, trial: int = 0) -> Tuple[GridFunction, GridFunction]:
    """Return ``(noise, mean)`` where ``noise = mean + base realization``."""
    mean = poly_function(spec.poly_coeffs, grid)
    return mean + gen_base(spec.base, grid, trial), mean


def generate(spec: NoiseSpec, grid: GridSpec, trial: int = 0) -> Tuple[GridFunction, GridFunction]:
    """Any noise spec to ``(noise, declared mean)``."""
    if isinstance(spec, BurstSpec):
        return gen_burst(spec, grid, trial)
    return gen_base(spec, grid, trial), GridFunction.constant(grid, 0.0)


def default_threshold(spec: NoiseSpec, n: int) -> float:
    if isinstance(spec, BurstSpec):
        return default_threshold(spec.base, n)
    return spec.default_threshold(n)


def sup_bound(spec: NoiseSpec) -> float:
    """A hard bound on ``sup |noise|`` for any grid and trial.

    Exact for the variate maps in :mod:`algestim.rng`: the largest gaussian
    draw is ``ndtri`` of the last representable ``u``.
    """
    if isinstance(spec, SinusoidMixSpec):
        return float(sum(abs(a) for a, _, _ in spec.terms))
    if isinstance(spec, IidNoiseSpec):
        return spec.scale * rng.FAMILY_SUP[spec.family]
    if isinstance(spec, BurstSpec):
        return sum(abs(c) for c in spec.poly_coeffs) + sup_bound(spec.base)
    raise TypeError(f"not a noise spec: {spec!r}")


def apply_multiplicative(x: GridFunction, n1: GridFunction, n2: GridFunction) -> GridFunction:
    """Sensor reading ``y = n1 * x + n2``."""
    x._check(n1)
    x._check(n2)
    return GridFunction(x.spec, n1.values * x.values + n2.values)


def residual_decompose(y: GridFunction, x: GridFunction) -> GridFunction:
    """Effective additive noise ``y - x``."""
    y._check(x)
    return y - x


def verify_noise(n: GridFunction, m: GridFunction, threshold: float) -> Tuple[bool, float]:
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    n._check(m)
    norm = oscillation_norm(n - m)
    return norm <= threshold, norm


def mean_square(f: GridFunction) -> float:
    return integrate(f * f, 0, f.n)


def _alpha_range(n_bar: int, t_i: float, t_f: float) -> Tuple[int, int]:
    lo = math.ceil(Fraction(t_i) * n_bar)
    hi = math.floor(Fraction(t_f) * n_bar)
    return lo, hi


def centlim_statistic(spec: IidNoiseSpec, n_bar: int, t_i: float, t_f: float, trial: int = 0) -> float:
    """``(t_F - t_I)/n_bar * sum of draws at alpha/n_bar in [t_I, t_F]``.

    ``t_F`` may exceed 1.  Draws are streamed in chunks, so very long
    ranges cost no memory.
    """
    if n_bar < 1:
        raise ValueError(f"n_bar must be positive, got {n_bar}")
    if not 0 <= t_i < t_f:
        raise ValueError(f"need 0 <= t_I < t_F, got t_I={t_i}, t_F={t_f}")
    lo, hi = _alpha_range(n_bar, t_i, t_f)
    if hi < lo:
        raise ValueError(f"no sample alpha/{n_bar} lies in [{t_i}, {t_f}]")
    total = 0.0
    start = lo
    while start <= hi:
        count = min(_CHUNK, hi - start + 1)
        total += math.fsum(rng.draws(spec.family, spec.seed, trial, start, count))
        start += count
    return (t_f - t_i) / n_bar * spec.scale * total
