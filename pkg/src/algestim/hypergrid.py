"""Uniform grids on [0, 1] standing in for the hyperfinite time set.

A grid of resolution ``n`` has the points ``k/n`` for ``k = 0..n``.  Every
point except the last carries the weight ``1/n``; integrals are left
Riemann sums.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

import numpy as np

Kernel = Callable[[np.ndarray, float], np.ndarray]

MAX_DEPTH = 8


class NumericError(ArithmeticError):
    """A kernel or integrand produced a non-finite value."""


@dataclass(frozen=True)
class GridSpec:
    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise TypeError(f"grid resolution must be an integer, got {self.n!r}")
        if self.n < 2:
            raise ValueError(f"grid resolution must be >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def step(self) -> float:
        return 1.0 / self.n

    def points(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    def index(self, t: float) -> int:
        """Snap a time in [0, 1] down to its grid index."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"time {t} outside [0, 1]")
        # guard against 0.3 * n landing a hair under an integer
        return min(self.n, int(math.floor(t * self.n + 1e-9)))

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        values = np.broadcast_to(np.asarray(func(self.points()), dtype=float), (self.n + 1,))
        return GridFunction(self, values)


class GridFunction:
    """Immutable sampled function; ``values[k]`` is the value at ``k/n``."""

    __slots__ = ("spec", "values")

    def __init__(self, spec: GridSpec, values) -> None:
        arr = np.array(values, dtype=float)
        if arr.shape != (spec.n + 1,):
            raise ValueError(f"expected {spec.n + 1} values, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValueError(f"non-finite value at grid index {bad}")
        arr.setflags(write=False)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @classmethod
    def constant(cls, spec: GridSpec, c: float) -> "GridFunction":
        return cls(spec, np.full(spec.n + 1, float(c)))

    @property
    def n(self) -> int:
        return self.spec.n

    def _check(self, other: "GridFunction") -> None:
        if not isinstance(other, GridFunction):
            raise TypeError(f"expected GridFunction, got {type(other).__name__}")
        if other.spec != self.spec:
            raise ValueError(f"grid mismatch: n={self.n} vs n={other.n}")

    def _lift(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return other.values
        return float(other)

    def __add__(self, other):
        return GridFunction(self.spec, self.values + self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.spec, self.values - self._lift(other))

    def __rsub__(self, other):
        return GridFunction(self.spec, self._lift(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.spec, self.values * self._lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.spec, -self.values)

    def __repr__(self) -> str:
        return f"GridFunction(n={self.n})"

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "value"])
        for t, v in zip(self.spec.points(), self.values):
            writer.writerow([f"{t:.17g}", f"{v:.17g}"])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text

    @classmethod
    def from_csv(cls, source: Union[str, Path]) -> "GridFunction":
        """Read the ``t,value`` format written by :meth:`to_csv`.

        ``source`` is a path, or the CSV text itself when it contains a newline.
        """
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["t", "value"]:
            raise ValueError("missing 't,value' header")
        body = rows[1:]
        n = len(body) - 1
        spec = GridSpec(n)
        ts = np.array([float(r[0]) for r in body])
        if not np.allclose(ts, spec.points(), rtol=0, atol=1e-12):
            raise ValueError("t column is not the uniform grid k/n")
        return cls(spec, [float(r[1]) for r in body])


def _check_range(f: GridFunction, a: int, b: int) -> None:
    if not (0 <= a <= b <= f.n):
        raise ValueError(f"need 0 <= a <= b <= n, got a={a}, b={b}, n={f.n}")


def integrate(f: GridFunction, a: int, b: int) -> float:
    """Left Riemann sum of ``f`` over the grid indices ``a <= k < b``."""
    _check_range(f, a, b)
    return math.fsum(f.values[a:b]) / f.n


def prefix_integrals(f: GridFunction) -> np.ndarray:
    """Cumulative left sums ``P[k] = integral of f over [0, k/n)``, ``P[0] = 0``."""
    out = np.empty(f.n + 1)
    out[0] = 0.0
    np.cumsum(f.values[:-1] / f.n, out=out[1:])
    return out


def oscillation_norm(f: GridFunction) -> float:
    """Largest absolute integral of ``f`` over any grid subinterval.

    Equal to the spread of the prefix integrals, so it runs in linear time.
    """
    p = prefix_integrals(f)
    return float(p.max() - p.min())


def _check_depth(k: int) -> None:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise TypeError(f"depth must be an integer, got {k!r}")
    if k < 1:
        raise ValueError(f"iterated-integral depth must be >= 1, got {k}")
    if k > MAX_DEPTH:
        raise ValueError(f"iterated-integral depth {k} exceeds {MAX_DEPTH}")


def kernel_integral(f: GridFunction, kernel: Kernel, t: int) -> float:
    """``sum_{k < t} kernel(k/n, t/n) f(k/n) / n``.

    ``kernel`` is called once with the array of grid points below ``t`` and
    the scalar window end.
    """
    _check_range(f, 0, t)
    if t == 0:
        return 0.0
    n = f.n
    tau = np.arange(t) / n
    w = np.broadcast_to(np.asarray(kernel(tau, t / n), dtype=float), tau.shape)
    if not np.all(np.isfinite(w)):
        bad = int(np.flatnonzero(~np.isfinite(w))[0])
        raise NumericError(f"kernel is not finite at grid point {bad}/{n} (t={t}/{n})")
    return float(np.dot(w, f.values[:t])) / n


def cauchy_kernel(k: int, nu: int = 0) -> Kernel:
    """Kernel ``(t - tau)^(k-1) / (k-1)! * tau^nu`` of a k-fold integral."""
    _check_depth(k)
    fact = math.factorial(k - 1)

    def kern(tau: np.ndarray, t: float) -> np.ndarray:
        return (t - tau) ** (k - 1) / fact * tau**nu

    return kern


def iterated_integral(f: GridFunction, k: int, t: int) -> float:
    """k-fold iterated integral of ``f`` from 0 to ``t/n`` by the Cauchy formula."""
    _check_depth(k)
    return kernel_integral(f, cauchy_kernel(k), t)


def eval_estim_term(c: float, nu: int, k: int, f: GridFunction, t: int) -> float:
    """One residual term: ``c`` times the k-fold integral of ``tau^nu f(tau)``."""
    _check_depth(k)
    if nu < 0 or nu > MAX_DEPTH:
        raise ValueError(f"power nu must be in [0, {MAX_DEPTH}], got {nu}")
    return c * kernel_integral(f, cauchy_kernel(k, nu), t)


def nested_integral(f: GridFunction, k: int, t: int, nu: int = 0) -> float:
    """Literal k-fold nested left sums; reference implementation for tests."""
    _check_depth(k)
    _check_range(f, 0, t)
    n = f.n
    g = f.values * (np.arange(n + 1) / n) ** nu
    layer = g
    for _ in range(k):
        acc = np.empty(n + 1)
        acc[0] = 0.0
        np.cumsum(layer[:-1] / n, out=acc[1:])
        layer = acc
    return float(layer[t])
