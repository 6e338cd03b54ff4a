"""Windowed algebraic estimators of a single constant parameter.

Every estimator has the shape

    estimate(t) = (integral_0^t K(tau, t) y(tau) dtau) / delta(t),
    delta(t)    =  integral_0^t K(tau, t) s(tau) dtau,

for a measurement ``y = theta * s + noise``.  Both integrals use the left
sums of :mod:`algestim.hypergrid`.  Four families are built in: the
running mean, the slope of an affine signal, the amplitude of a known
carrier, and the carrier amplitude with a kernel that also cancels an
unknown polynomial offset of limited degree.

Derivations of the residual terms
---------------------------------
Running mean: ``K = 1``, ``s = 1`` so ``delta(t) = t`` and
``t (est - theta) = int_0^t n``, one term ``(c=1, nu=0, k=1)``.

Affine slope: ``K = 2 tau - t`` and ``s = tau``.  ``int_0^t (2 tau - t) d tau
= 0`` removes the intercept, ``int_0^t (2 tau - t) tau dtau = t^3/6``.  The
noise part ``int (2 tau - t) n`` is rewritten with constant coefficients
using ``t int_0^t n = int_0^t int_0^s n + int_0^t tau n`` (integration by
parts), giving ``int tau n - int int n``, i.e. terms ``(1, 1, 1)`` and
``(-1, 0, 2)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import legendre
from scipy import optimize

from .hypergrid import MAX_DEPTH, GridFunction, GridSpec, Kernel, eval_estim_term
from .noise import NoiseSpec, generate

SHADOW_NODES = 64
SUP_SCAN = 512
EPS_DIV_FACTOR = 10.0
ANNIHILATION_TOL = 1e-9

_GL_NODES, _GL_WEIGHTS = legendre.leggauss(SHADOW_NODES)


class DivisorZeroError(ArithmeticError):
    """The window length sits in the exclusion zone around a divisor zero."""


class ConstructionError(ValueError):
    """The requested estimator cannot identify the parameter."""


@dataclass(frozen=True)
class Carrier:
    """Known signal ``s`` multiplying the parameter.

    ``kind`` is one of ``one`` (s = 1), ``ramp`` (s = t), ``sine``
    (``sin(2 pi freq t + phase)``), ``sinc`` (``sinc(freq (t - center))``,
    normalized) or ``grid`` (sampled values, linearly interpolated off-grid).
    """

    kind: str = "sine"
    freq: float = 2.0
    phase: float = 0.0
    center: float = 0.5
    samples: Optional[GridFunction] = field(default=None, compare=False, repr=False)

    KINDS = ("one", "ramp", "sine", "sinc", "grid")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"carrier kind must be one of {self.KINDS}, got {self.kind!r}")
        if (self.kind == "grid") != (self.samples is not None):
            raise ValueError("sampled values are required for, and only for, kind='grid'")
        for name in ("freq", "phase", "center"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"carrier {name} must be finite")

    @classmethod
    def from_grid(cls, f: GridFunction) -> "Carrier":
        return cls(kind="grid", samples=f)

    def __call__(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.kind == "one":
            return np.ones_like(tau)
        if self.kind == "ramp":
            return tau.copy()
        if self.kind == "sine":
            return np.sin(2 * np.pi * self.freq * tau + self.phase)
        if self.kind == "sinc":
            return np.sinc(self.freq * (tau - self.center))
        return np.interp(tau, self.samples.spec.points(), self.samples.values)

    def on_grid(self, grid: GridSpec) -> GridFunction:
        if self.samples is not None:
            if self.samples.spec != grid:
                raise ValueError(f"carrier sampled on n={self.samples.n}, signal on n={grid.n}")
            return self.samples
        return grid.sample(self)

    def describe(self) -> dict:
        if self.kind in ("one", "ramp", "grid"):
            return {"kind": self.kind}
        if self.kind == "sine":
            return {"kind": "sine", "freq": self.freq, "phase": self.phase}
        return {"kind": "sinc", "freq": self.freq, "center": self.center}


@dataclass(frozen=True)
class EstimTerm:
    c: float
    nu: int
    k: int

    def __post_init__(self) -> None:
        if not 0 <= self.nu <= MAX_DEPTH:
            raise ValueError(f"nu must be in [0, {MAX_DEPTH}], got {self.nu}")
        if not 1 <= self.k <= MAX_DEPTH:
            raise ValueError(f"k must be in [1, {MAX_DEPTH}], got {self.k}")


def unit_kernel(tau: np.ndarray, t: float) -> np.ndarray:
    return np.ones_like(tau)


def slope_kernel(tau: np.ndarray, t: float) -> np.ndarray:
    return 2.0 * tau - t


def legendre_kernel(degree: int) -> Kernel:
    """``P_degree(2 tau / t - 1)``, the Legendre polynomial mapped onto [0, t]."""
    coef = [0.0] * degree + [1.0]

    def kern(tau: np.ndarray, t: float) -> np.ndarray:
        return legendre.legval(2.0 * np.asarray(tau) / t - 1.0, coef)

    return kern


def _gauss(integrand, t: float) -> float:
    if t == 0.0:
        return 0.0
    tau = 0.5 * t * (_GL_NODES + 1.0)
    return float(0.5 * t * np.dot(_GL_WEIGHTS, integrand(tau, t)))


def _unit_divisor(t: float) -> float:
    return t


def _cubic_divisor(t: float) -> float:
    return t**3 / 6.0


@dataclass(frozen=True)
class EstimatorSpec:
    """An estimator ``int K y / delta``.

    ``annihilation_degree = d >= 0`` means the kernel cancels polynomials of
    degree <= d.  On a grid the sampled kernel is made exactly orthogonal to
    the sampled monomials by removing its least-squares component on them,
    so the cancellation holds to rounding rather than to quadrature error.
    """

    name: str
    kernel: Kernel
    carrier: Carrier
    residual_terms: Tuple[EstimTerm, ...] = ()
    annihilation_degree: int = -1
    closed_divisor: Optional[Callable[[float], float]] = None
    divisor_sup: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        if self.annihilation_degree < -1 or self.annihilation_degree > MAX_DEPTH:
            raise ValueError(f"annihilation degree must be in [-1, {MAX_DEPTH}]")
        object.__setattr__(self, "residual_terms", tuple(self.residual_terms))
        scan = np.arange(1, SUP_SCAN + 1) / SUP_SCAN
        object.__setattr__(self, "divisor_sup", max(abs(self.divisor(t)) for t in scan))

    def divisor(self, t: float) -> float:
        """Continuous divisor ``delta(t)`` (closed form, else Gauss-Legendre)."""
        if self.closed_divisor is not None:
            return float(self.closed_divisor(t))
        return _gauss(lambda tau, t: self.kernel(tau, t) * self.carrier(tau), t)

    def weights(self, n: int, t: int) -> np.ndarray:
        """Kernel values at the grid points ``k/n``, ``k < t``."""
        tau = np.arange(t) / n
        w = np.broadcast_to(np.asarray(self.kernel(tau, t / n), dtype=float), tau.shape).copy()
        d = self.annihilation_degree
        if d >= 0 and t > 0:
            basis = legendre.legvander(2.0 * tau * n / t - 1.0, d)
            coef, *_ = np.linalg.lstsq(basis, w, rcond=None)
            w -= basis @ coef
        if not np.all(np.isfinite(w)):
            raise ArithmeticError(f"estimator {self.name}: non-finite kernel weights at t={t}/{n}")
        return w

    def epsilon_div(self, n: int) -> float:
        return EPS_DIV_FACTOR / n * self.divisor_sup

    def grid_divisor(self, grid: GridSpec, t: int) -> float:
        s = self.carrier.on_grid(grid)
        return float(np.dot(self.weights(grid.n, t), s.values[:t])) / grid.n


def build_constant_estimator() -> EstimatorSpec:
    """Running mean of ``y = theta + noise``."""
    return EstimatorSpec(
        name="constant",
        kernel=unit_kernel,
        carrier=Carrier("one"),
        residual_terms=(EstimTerm(1.0, 0, 1),),
        closed_divisor=_unit_divisor,
    )


def build_affine_slope_estimator() -> EstimatorSpec:
    """Slope of ``y = b + theta t + noise`` whatever the intercept ``b``."""
    return EstimatorSpec(
        name="affine-slope",
        kernel=slope_kernel,
        carrier=Carrier("ramp"),
        residual_terms=(EstimTerm(1.0, 1, 1), EstimTerm(-1.0, 0, 2)),
        annihilation_degree=0,
        closed_divisor=_cubic_divisor,
    )


def build_amplitude_estimator(carrier: Carrier, kernel: Optional[Kernel] = None) -> EstimatorSpec:
    """Amplitude of a known carrier; ``kernel`` defaults to 1."""
    if kernel is None or kernel is unit_kernel:
        return EstimatorSpec(
            name="amplitude",
            kernel=unit_kernel,
            carrier=carrier,
            residual_terms=(EstimTerm(1.0, 0, 1),),
        )
    return EstimatorSpec(name="amplitude", kernel=kernel, carrier=carrier)


def build_annihilating_estimator(carrier: Carrier, d: int) -> EstimatorSpec:
    """Carrier amplitude, blind to any additive polynomial of degree <= d."""
    if not 0 <= d <= MAX_DEPTH:
        raise ValueError(f"annihilation degree must be in [0, {MAX_DEPTH}], got {d}")
    kern = legendre_kernel(d + 1)
    est = EstimatorSpec(
        name=f"annihilating-d{d}",
        kernel=kern,
        carrier=carrier,
        annihilation_degree=d,
    )
    # compare against the size the divisor would have without cancellation
    scan = np.arange(1, SUP_SCAN + 1) / SUP_SCAN
    mass = max(_gauss(lambda tau, t: np.abs(kern(tau, t) * carrier(tau)), t) for t in scan)
    if mass == 0.0 or est.divisor_sup <= ANNIHILATION_TOL * mass:
        raise ConstructionError(
            f"carrier {carrier.describe()} is cancelled by the degree-{d} kernel; "
            "its amplitude is not identifiable"
        )
    return est


def _check_window(grid: GridSpec, t: int) -> None:
    if isinstance(t, bool) or not isinstance(t, (int, np.integer)):
        raise TypeError(f"window end must be a grid index, got {t!r}")
    if t <= 0:
        raise ValueError("window of zero width")
    if t > grid.n:
        raise ValueError(f"window end {t} beyond grid n={grid.n}")


def estimate(est: EstimatorSpec, y: GridFunction, t: int, epsilon_div: Optional[float] = None) -> float:
    """Estimate from the window ``[0, t/n]``.

    Raises :class:`DivisorZeroError` when ``|delta(t)| < epsilon_div``
    (default ``10/n`` times the divisor's sup over (0, 1]).
    """
    _check_window(y.spec, t)
    w = est.weights(y.n, t)
    s = est.carrier.on_grid(y.spec)
    delta = float(np.dot(w, s.values[:t])) / y.n
    eps = est.epsilon_div(y.n) if epsilon_div is None else epsilon_div
    if not abs(delta) >= eps or delta == 0.0:
        raise DivisorZeroError(
            f"{est.name}: |delta({t}/{y.n})| = {abs(delta):.3g} below {eps:.3g}"
        )
    return float(np.dot(w, y.values[:t])) / y.n / delta


def residual_identity_check(est: EstimatorSpec, noise: GridFunction, theta: float, t: int) -> float:
    """``|delta(t) (estimate - theta) - sum of residual terms|`` for ``y = theta s + noise``."""
    if not est.residual_terms:
        raise ValueError(f"estimator {est.name} has no residual terms")
    y = theta * est.carrier.on_grid(noise.spec) + noise
    delta = est.grid_divisor(noise.spec, t)
    lhs = delta * (estimate(est, y, t) - theta)
    rhs = math.fsum(eval_estim_term(term.c, term.nu, term.k, noise, t) for term in est.residual_terms)
    return abs(lhs - rhs)


@dataclass
class WindowSweepResult:
    window_lengths: List[float]
    estimates: List[float]
    abs_errors: List[float]
    divisor_values: List[float]
    near_zero_flags: List[bool]

    def __post_init__(self) -> None:
        sizes = {len(self.window_lengths), len(self.estimates), len(self.abs_errors),
                 len(self.divisor_values), len(self.near_zero_flags)}
        if len(sizes) != 1:
            raise ValueError("window sweep columns differ in length")

    def rows(self):
        return zip(self.window_lengths, self.estimates, self.abs_errors,
                   self.divisor_values, self.near_zero_flags)

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "estimate", "abs_error", "divisor", "near_zero"])
        for t, e, err, dv, flag in self.rows():
            writer.writerow([f"{t:.17g}", f"{e:.17g}", f"{err:.17g}", f"{dv:.17g}", int(flag)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text


def window_sweep(
    est: EstimatorSpec,
    theta: float,
    noise_spec: NoiseSpec,
    grid: GridSpec,
    window_lengths: Sequence[float],
    trial: int = 0,
    epsilon_div: Optional[float] = None,
) -> WindowSweepResult:
    """Estimate over a list of window lengths for one noise realization.

    Points inside a divisor zero's exclusion zone are flagged; their raw
    ratio is still reported (NaN only when the divisor is exactly 0).
    """
    noise, _ = generate(noise_spec, grid, trial)
    s = est.carrier.on_grid(grid)
    y = theta * s + noise
    eps = est.epsilon_div(grid.n) if epsilon_div is None else epsilon_div
    out = WindowSweepResult([], [], [], [], [])
    for length in window_lengths:
        if not 0.0 < length <= 1.0:
            raise ValueError(f"window length {length} outside (0, 1]")
        t = grid.index(length)
        if t == 0:
            num = delta = 0.0
        else:
            w = est.weights(grid.n, t)
            num = float(np.dot(w, y.values[:t])) / grid.n
            delta = float(np.dot(w, s.values[:t])) / grid.n
        value = num / delta if delta != 0.0 else math.nan
        out.window_lengths.append(t / grid.n)
        out.estimates.append(value)
        out.abs_errors.append(abs(value - theta))
        out.divisor_values.append(delta)
        out.near_zero_flags.append(abs(delta) < eps)
    return out


def divisor_zeros(est: EstimatorSpec, resolution: int = 64) -> List[float]:
    """Zeros of the continuous divisor on [0, 1].

    Sign changes on a uniform scan are bracketed and bisected; touching
    zeros are found as local minima of ``|delta|`` that refine to ~0.
    """
    if resolution < 16:
        raise ValueError(f"resolution must be >= 16, got {resolution}")
    xtol = 1.0 / resolution**2
    ts = np.arange(resolution + 1) / resolution
    vals = np.array([est.divisor(t) for t in ts])
    absv = np.abs(vals)
    zero_tol = max(ANNIHILATION_TOL * est.divisor_sup, 1e-300)
    found = [0.0]
    for i in range(1, resolution + 1):
        if absv[i] <= zero_tol:
            found.append(float(ts[i]))
            continue
        if vals[i - 1] * vals[i] < 0 and absv[i - 1] > zero_tol:
            found.append(float(optimize.brentq(est.divisor, ts[i - 1], ts[i], xtol=xtol * 1e-3)))
            continue
        left_ok = absv[i] <= absv[i - 1]
        right_ok = i == resolution or absv[i] <= absv[i + 1]
        if left_ok and right_ok:
            hi = ts[min(i + 1, resolution)]
            res = optimize.minimize_scalar(
                lambda x: abs(est.divisor(x)), bounds=(ts[i - 1], hi),
                method="bounded", options={"xatol": 1e-10},
            )
            if abs(est.divisor(res.x)) <= zero_tol:
                found.append(float(res.x))
    found.sort()
    merged: List[float] = []
    for z in found:
        if not merged or z - merged[-1] > 1.0 / resolution:
            merged.append(z)
    return merged
