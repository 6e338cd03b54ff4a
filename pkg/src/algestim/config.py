"""Experiment configuration: JSON in, validated typed objects out.

Every field is checked (and every default filled in) before any experiment
code runs.  ``ExperimentConfig.resolved()`` gives the fully materialized
document that is written next to the results.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from .demod import Alphabet, DemodScenario
from .estimator import (
    Carrier,
    ConstructionError,
    EstimatorSpec,
    build_affine_slope_estimator,
    build_amplitude_estimator,
    build_annihilating_estimator,
    build_constant_estimator,
)
from .hypergrid import GridSpec
from .noise import BurstSpec, IidNoiseSpec, NoiseSpec, SinusoidMixSpec, sup_bound

EXPERIMENTS = ("osc-trend", "mult-reduce", "window-sweep", "centlim", "burst-demod")
SEED_ENV = "ALGESTIM_SEED"


class ConfigError(ValueError):
    pass


def _take(d: Mapping, key: str, default: Any = ...) -> Any:
    if key in d:
        return d[key]
    if default is ...:
        raise ConfigError(f"missing required key {key!r}")
    return default


def _no_extra(d: Mapping, allowed, where: str) -> None:
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _num(value, where: str, lo: float = -math.inf, hi: float = math.inf, integer: bool = False,
         lo_open: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if integer and not (isinstance(value, int) or float(value).is_integer()):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    if value < lo or value > hi or (lo_open and value == lo):
        raise ConfigError(f"{where}: {value} outside allowed range")
    return int(value) if integer else float(value)


def _num_list(value, where: str, *bounds, **kw) -> List:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{where}: expected a nonempty list")
    return [_num(v, f"{where}[{i}]", *bounds, **kw) for i, v in enumerate(value)]


# -- noise ------------------------------------------------------------------

def parse_noise(d: Mapping, default_seed: int, where: str = "noise") -> Tuple[NoiseSpec, Dict]:
    """Build a noise spec; returns it with its materialized JSON form."""
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object")
    kind = d.get("kind")
    try:
        if kind == "sinusoid":
            _no_extra(d, {"kind", "terms"}, where)
            terms = _take(d, "terms")
            if not isinstance(terms, list) or not terms:
                raise ConfigError(f"{where}.terms: expected a nonempty list")
            parsed = []
            for i, term in enumerate(terms):
                if not isinstance(term, list) or len(term) != 3:
                    raise ConfigError(f"{where}.terms[{i}]: expected [amplitude, frequency, phase]")
                parsed.append(tuple(_num(v, f"{where}.terms[{i}]") for v in term))
            spec = SinusoidMixSpec(tuple(parsed))
            return spec, {"kind": "sinusoid", "terms": [list(t) for t in spec.terms]}
        if kind == "constant":
            _no_extra(d, {"kind", "value"}, where)
            value = _num(_take(d, "value"), f"{where}.value")
            return SinusoidMixSpec.constant(value), {"kind": "constant", "value": value}
        if kind == "iid":
            _no_extra(d, {"kind", "family", "seed", "scale"}, where)
            family = d.get("family", "rademacher")
            if family not in ("rademacher", "uniform", "gaussian"):
                raise ConfigError(f"{where}.family: {family!r} not one of rademacher/uniform/gaussian")
            seed = _num(d.get("seed", default_seed), f"{where}.seed", 0, 2**64 - 1, integer=True)
            scale = _num(d.get("scale", 1.0), f"{where}.scale", 0.0, lo_open=True)
            spec = IidNoiseSpec(family, seed, scale)
            return spec, {"kind": "iid", "family": family, "seed": seed, "scale": scale}
        if kind == "burst":
            _no_extra(d, {"kind", "poly", "base"}, where)
            poly = _num_list(_take(d, "poly"), f"{where}.poly")
            if len(poly) > 9:
                raise ConfigError(f"{where}.poly: degree above 8")
            base, base_doc = parse_noise(_take(d, "base"), default_seed, f"{where}.base")
            if isinstance(base, BurstSpec):
                raise ConfigError(f"{where}.base: bursts cannot be nested")
            return BurstSpec(tuple(poly), base), {"kind": "burst", "poly": poly, "base": base_doc}
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.kind: expected sinusoid/constant/iid/burst, got {kind!r}")


def parse_carrier(d: Mapping, where: str = "carrier") -> Tuple[Carrier, Dict]:
    _no_extra(d, {"kind", "freq", "phase", "center"}, where)
    kind = d.get("kind", "sine")
    if kind not in ("one", "ramp", "sine", "sinc"):
        raise ConfigError(f"{where}.kind: expected one/ramp/sine/sinc, got {kind!r}")
    carrier = Carrier(
        kind=kind,
        freq=_num(d.get("freq", 2.0), f"{where}.freq"),
        phase=_num(d.get("phase", 0.0), f"{where}.phase"),
        center=_num(d.get("center", 0.5), f"{where}.center"),
    )
    return carrier, carrier.describe()


def parse_estimator(d: Mapping, where: str = "estimator") -> Tuple[EstimatorSpec, Dict]:
    _no_extra(d, {"kind", "carrier", "degree"}, where)
    kind = d.get("kind", "amplitude")
    try:
        if kind == "constant":
            return build_constant_estimator(), {"kind": "constant"}
        if kind == "affine":
            return build_affine_slope_estimator(), {"kind": "affine"}
        if kind in ("amplitude", "annihilating"):
            carrier, cdoc = parse_carrier(d.get("carrier", {}), f"{where}.carrier")
            if kind == "amplitude":
                return build_amplitude_estimator(carrier), {"kind": kind, "carrier": cdoc}
            degree = _num(d.get("degree", 2), f"{where}.degree", 0, 8, integer=True)
            est = build_annihilating_estimator(carrier, degree)
            return est, {"kind": kind, "carrier": cdoc, "degree": degree}
    except ConstructionError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}.kind: expected constant/affine/amplitude/annihilating, got {kind!r}")


# -- per-experiment parameters ---------------------------------------------

@dataclass
class OscTrendParams:
    noise: NoiseSpec
    ladder: List[Tuple[int, float]]
    min_decrease_factor: float
    doc: Dict = field(repr=False, default_factory=dict)


@dataclass
class MultReduceParams:
    x_coeffs: List[float]
    n1_noise: NoiseSpec
    n2_noise: NoiseSpec
    threshold: float
    n1_max_amplitude: float = 10.0
    doc: Dict = field(repr=False, default_factory=dict)


@dataclass
class WindowSweepParams:
    estimator: EstimatorSpec
    theta: float
    noise: NoiseSpec
    window_lengths: List[float]
    band: Tuple[float, float]
    probe: float
    amplification_factor: float
    small_trials: int
    small_steps: int
    small_ref: float
    small_factor: float
    doc: Dict = field(repr=False, default_factory=dict)


@dataclass
class CentlimParams:
    family: str
    convergent_n_bars: List[int]
    convergent_trials: int
    t_i: float
    t_f: float
    slope_range: Tuple[float, float]
    divergent_n_bars: List[int]
    divergent_trials: int
    growth_factor: float
    doc: Dict = field(repr=False, default_factory=dict)


@dataclass
class BurstDemodParams:
    scenario: DemodScenario
    max_ser_annihilating: float
    min_ratio: float
    min_plain_ser: float
    doc: Dict = field(repr=False, default_factory=dict)


DEFAULT_N = {
    "osc-trend": 1 << 16,
    "mult-reduce": 1 << 16,
    "window-sweep": 1 << 14,
    "centlim": 1 << 14,
    "burst-demod": 1 << 14,
}
DEFAULT_TRIALS = {"osc-trend": 1, "mult-reduce": 1, "window-sweep": 50, "centlim": 100, "burst-demod": 200}


def _osc_trend(p: Mapping, seed: int, n: int, trials: int) -> OscTrendParams:
    _no_extra(p, {"noise", "ladder", "min_decrease_factor"}, "params")
    noise_doc = p.get("noise", {"kind": "sinusoid", "terms": [[1.0, 1.0, 0.0]]})
    noise, ndoc = parse_noise(noise_doc, seed, "params.noise")
    ladder_raw = p.get("ladder", [[n, 8], [n, 64]])
    if not isinstance(ladder_raw, list) or len(ladder_raw) < 2:
        raise ConfigError("params.ladder: expected at least two [n, omega] rows")
    ladder = []
    for i, row in enumerate(ladder_raw):
        if not isinstance(row, list) or len(row) != 2:
            raise ConfigError(f"params.ladder[{i}]: expected [n, omega]")
        ladder.append((_num(row[0], f"params.ladder[{i}][0]", 2, 1 << 24, integer=True),
                       _num(row[1], f"params.ladder[{i}][1]", 0.0)))
    factor = _num(p.get("min_decrease_factor", 4.0), "params.min_decrease_factor", 0.0, lo_open=True)
    doc = {"noise": ndoc, "ladder": [list(r) for r in ladder], "min_decrease_factor": factor}
    return OscTrendParams(noise, ladder, factor, doc)


def _mult_reduce(p: Mapping, seed: int, n: int, trials: int) -> MultReduceParams:
    _no_extra(p, {"x", "n1_noise", "n2_noise", "threshold", "n1_max_amplitude"}, "params")
    x = _num_list(p.get("x", [1.0, 1.0]), "params.x")
    n1, n1doc = parse_noise(p.get("n1_noise", {"kind": "sinusoid", "terms": [[1.0, 512.0, 0.0]]}),
                            seed, "params.n1_noise")
    n2, n2doc = parse_noise(p.get("n2_noise", {"kind": "iid", "family": "rademacher"}), seed, "params.n2_noise")
    if isinstance(n1, BurstSpec):
        raise ConfigError("params.n1_noise: the multiplicative part is 1 + zero-mean noise, not a burst")
    if len(x) > 9:
        raise ConfigError("params.x: degree above 8")
    threshold = _num(p.get("threshold", 0.05), "params.threshold", 0.0, lo_open=True)
    cap = _num(p.get("n1_max_amplitude", 10.0), "params.n1_max_amplitude", 0.0, lo_open=True)
    if sup_bound(n1) > cap:
        raise ConfigError(f"params.n1_noise: sup |n1 - 1| can reach {sup_bound(n1):.6g}, "
                          f"above n1_max_amplitude={cap:g}")
    doc = {"x": x, "n1_noise": n1doc, "n2_noise": n2doc, "threshold": threshold, "n1_max_amplitude": cap}
    return MultReduceParams(x, n1, n2, threshold, cap, doc)


def _window_sweep(p: Mapping, seed: int, n: int, trials: int) -> WindowSweepParams:
    _no_extra(p, {"estimator", "theta", "noise", "window_lengths", "band", "probe",
                  "amplification_factor", "small_window"}, "params")
    est, edoc = parse_estimator(p.get("estimator", {"kind": "amplitude", "carrier": {"kind": "sine", "freq": 2.0}}))
    theta = _num(p.get("theta", 1.0), "params.theta")
    noise, ndoc = parse_noise(p.get("noise", {"kind": "iid", "family": "rademacher"}), seed, "params.noise")
    lengths = _num_list(p.get("window_lengths", [round(0.01 * i, 2) for i in range(1, 101)]),
                        "params.window_lengths", 0.0, 1.0, lo_open=True)
    band = _num_list(p.get("band", [0.15, 0.35]), "params.band", 0.0, 1.0, lo_open=True)
    if len(band) != 2 or band[0] > band[1]:
        raise ConfigError("params.band: expected [lo, hi] with lo <= hi")
    if not any(band[0] <= t <= band[1] for t in lengths):
        raise ConfigError("params.band: no window length falls inside the band")
    probe = _num(p.get("probe", 0.49), "params.probe", 0.0, 1.0, lo_open=True)
    amp = _num(p.get("amplification_factor", 10.0), "params.amplification_factor", 0.0, lo_open=True)
    sw = p.get("small_window", {})
    _no_extra(sw, {"trials", "steps", "ref", "factor"}, "params.small_window")
    small_trials = _num(sw.get("trials", 100), "params.small_window.trials", 1, integer=True)
    small_steps = _num(sw.get("steps", 8), "params.small_window.steps", 1, n, integer=True)
    small_ref = _num(sw.get("ref", 0.25), "params.small_window.ref", 0.0, 1.0, lo_open=True)
    small_factor = _num(sw.get("factor", 10.0), "params.small_window.factor", 0.0, lo_open=True)
    if small_steps >= GridSpec(n).index(small_ref):
        raise ConfigError("params.small_window: steps must be below the reference window")
    doc = {"estimator": edoc, "theta": theta, "noise": ndoc, "window_lengths": lengths, "band": band,
           "probe": probe, "amplification_factor": amp,
           "small_window": {"trials": small_trials, "steps": small_steps, "ref": small_ref,
                            "factor": small_factor}}
    return WindowSweepParams(est, theta, noise, lengths, tuple(band), probe, amp,
                             small_trials, small_steps, small_ref, small_factor, doc)


def _centlim(p: Mapping, seed: int, n: int, trials: int) -> CentlimParams:
    _no_extra(p, {"family", "convergent", "divergent"}, "params")
    family = p.get("family", "rademacher")
    if family not in ("rademacher", "uniform", "gaussian"):
        raise ConfigError(f"params.family: unknown family {family!r}")
    conv = p.get("convergent", {})
    _no_extra(conv, {"n_bars", "trials", "t_i", "t_f", "slope_range"}, "params.convergent")
    c_nbars = _num_list(conv.get("n_bars", [100, 1000, 10000]), "params.convergent.n_bars",
                        1, 10**7, integer=True)
    if len(set(c_nbars)) < 2:
        raise ConfigError("params.convergent.n_bars: need two distinct values for a slope")
    c_trials = _num(conv.get("trials", trials), "params.convergent.trials", 1, integer=True)
    t_i = _num(conv.get("t_i", 0.0), "params.convergent.t_i", 0.0)
    t_f = _num(conv.get("t_f", 1.0), "params.convergent.t_f", t_i, lo_open=True)
    slope = _num_list(conv.get("slope_range", [-0.7, -0.3]), "params.convergent.slope_range")
    if len(slope) != 2 or slope[0] > slope[1]:
        raise ConfigError("params.convergent.slope_range: expected [lo, hi]")
    for nb in c_nbars:
        if math.floor(t_f * nb) < math.ceil(t_i * nb):
            raise ConfigError(f"params.convergent: no samples in [t_i, t_f] for n_bar={nb}")
    div = p.get("divergent", {})
    _no_extra(div, {"n_bars", "trials", "growth_factor"}, "params.divergent")
    d_nbars = _num_list(div.get("n_bars", [16, 64]), "params.divergent.n_bars", 1, 512, integer=True)
    if len(d_nbars) != 2 or d_nbars[0] >= d_nbars[1]:
        raise ConfigError("params.divergent.n_bars: expected [small, large]")
    d_trials = _num(div.get("trials", 50), "params.divergent.trials", 1, integer=True)
    growth = _num(div.get("growth_factor", 4.0), "params.divergent.growth_factor", 0.0, lo_open=True)
    doc = {"family": family,
           "convergent": {"n_bars": c_nbars, "trials": c_trials, "t_i": t_i, "t_f": t_f, "slope_range": slope},
           "divergent": {"n_bars": d_nbars, "trials": d_trials, "growth_factor": growth}}
    return CentlimParams(family, c_nbars, c_trials, t_i, t_f, tuple(slope), d_nbars, d_trials, growth, doc)


def _burst_demod(p: Mapping, seed: int, n: int, trials: int) -> BurstDemodParams:
    _no_extra(p, {"carrier", "window", "noise", "alphabet", "degree",
                  "max_ser_annihilating", "min_ratio", "min_plain_ser"}, "params")
    carrier, cdoc = parse_carrier(p.get("carrier", {"kind": "sine", "freq": 2.0}), "params.carrier")
    window = _num(p.get("window", 0.3), "params.window", 0.0, 1.0, lo_open=True)
    noise_raw = p.get("noise", {"kind": "burst", "poly": [0.5, 0.5, 0.5],
                                "base": {"kind": "iid", "family": "rademacher"}})
    noise, ndoc = parse_noise(noise_raw, seed, "params.noise")
    if not isinstance(noise, BurstSpec):
        raise ConfigError("params.noise: burst-demod needs a noise of kind 'burst'")
    alphabet_raw = _num_list(p.get("alphabet", [-3.0, -1.0, 1.0, 3.0]), "params.alphabet")
    degree = _num(p.get("degree", 2), "params.degree", 0, 8, integer=True)
    try:
        alphabet = Alphabet(tuple(alphabet_raw))
        scenario = DemodScenario(carrier, window, noise, alphabet, trials, degree)
        scenario.build_estimator()
    except ConstructionError as exc:
        raise ConfigError(f"params: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from exc
    max_ser = _num(p.get("max_ser_annihilating", 0.02), "params.max_ser_annihilating", 0.0, 1.0)
    ratio = _num(p.get("min_ratio", 5.0), "params.min_ratio", 0.0)
    min_plain = _num(p.get("min_plain_ser", 0.05), "params.min_plain_ser", 0.0, 1.0)
    doc = {"carrier": cdoc, "window": window, "noise": ndoc, "alphabet": alphabet_raw, "degree": degree,
           "max_ser_annihilating": max_ser, "min_ratio": ratio, "min_plain_ser": min_plain}
    return BurstDemodParams(scenario, max_ser, ratio, min_plain, doc)


_PARSERS = {
    "osc-trend": _osc_trend,
    "mult-reduce": _mult_reduce,
    "window-sweep": _window_sweep,
    "centlim": _centlim,
    "burst-demod": _burst_demod,
}


@dataclass
class ExperimentConfig:
    experiment: str
    n: int
    seed: int
    trials: int
    output: Optional[str]
    params: Any

    def resolved(self) -> Dict:
        return {"experiment": self.experiment, "n": self.n, "seed": self.seed, "trials": self.trials,
                "params": self.params.doc}

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n)


def resolve_seed(cli_seed: Optional[int], doc_seed) -> int:
    if cli_seed is not None:
        return _num(cli_seed, "--seed", 0, 2**64 - 1, integer=True)
    if doc_seed is not None:
        return _num(doc_seed, "seed", 0, 2**64 - 1, integer=True)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            value = int(env, 0)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
        return _num(value, SEED_ENV, 0, 2**64 - 1, integer=True)
    return 0


def parse_config(doc: Mapping, experiment: Optional[str] = None, seed: Optional[int] = None) -> ExperimentConfig:
    """Validate a config document.  ``experiment``/``seed`` come from the command line."""
    _no_extra(doc, {"experiment", "n", "seed", "trials", "output", "params"}, "config")
    name = experiment or doc.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {name!r}")
    if experiment and doc.get("experiment") not in (None, experiment):
        raise ConfigError(f"config is for {doc.get('experiment')!r}, not {experiment!r}")
    n = _num(doc.get("n", DEFAULT_N[name]), "n", 2, 1 << 24, integer=True)
    trials = _num(doc.get("trials", DEFAULT_TRIALS[name]), "trials", 1, 10**6, integer=True)
    run_seed = resolve_seed(seed, doc.get("seed"))
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output: expected a path string")
    params = _PARSERS[name](doc.get("params", {}), run_seed, n, trials)
    return ExperimentConfig(name, n, run_seed, trials, output, params)


def load_config(path, experiment: Optional[str] = None, seed: Optional[int] = None) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc, experiment, seed)
