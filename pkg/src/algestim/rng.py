"""Counter-based random streams: draw = G(seed, trial, index).

The generator is Philox4x64-10 as shipped by numpy, keyed with
``(seed, trial)``.  The draw at position ``index`` is the ``index``-th
64-bit word of that keyed stream, so any slice of it can be produced
directly without touching earlier positions.  Changing the generator or
the word-to-variate maps below changes every stored result; don't.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_WORDS_PER_BLOCK = 4
_TWO_M52 = 2.0**-52
_SQRT3 = np.sqrt(3.0)

FAMILIES = ("rademacher", "uniform", "gaussian")
# sup |variate| per family; the gaussian value is ndtri of the largest u
FAMILY_SUP = {
    "rademacher": 1.0,
    "uniform": float(_SQRT3),
    "gaussian": float(-ndtri(0.5 * _TWO_M52)),
    "zero": 0.0,
}


def raw_words(seed: int, trial: int, start: int, count: int) -> np.ndarray:
    """The 64-bit words at positions ``start .. start+count-1`` of stream (seed, trial)."""
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    if trial < 0:
        raise ValueError(f"trial must be nonnegative, got {trial}")
    bg = np.random.Philox(key=np.array([seed & _MASK64, trial & _MASK64], dtype=np.uint64))
    block, skip = divmod(start, _WORDS_PER_BLOCK)
    if block:
        bg.advance(block)
    words = bg.random_raw(skip + count)
    return np.asarray(words[skip:], dtype=np.uint64)


def words_to_variates(words: np.ndarray, family: str) -> np.ndarray:
    """Map raw words to centered unit-variance variates of ``family``."""
    if family == "rademacher":
        return np.where(words >> np.uint64(63), 1.0, -1.0)
    # top 52 bits plus half a unit: exact in float64, never 0 or 1
    u = ((words >> np.uint64(12)).astype(np.float64) + 0.5) * _TWO_M52
    if family == "uniform":
        return _SQRT3 * (2.0 * u - 1.0)
    if family == "gaussian":
        return ndtri(u)
    if family == "zero":
        return np.zeros(words.shape)
    raise ValueError(f"unknown noise family {family!r}")


def draws(family: str, seed: int, trial: int, start: int, count: int) -> np.ndarray:
    return words_to_variates(raw_words(seed, trial, start, count), family)
