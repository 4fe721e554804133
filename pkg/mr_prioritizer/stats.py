"""
One-sided paired permutation test (sign-flip null distribution).
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple

import numpy as np

from .core_model import check_seed
from .errors import DataError, EmptySample, InvalidProbability, LengthMismatch

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05
DEFAULT_MAX_EXACT_N = 20
DEFAULT_RESAMPLES = 100_000

_EXACT_CHUNK = 1 << 16
_MONTE_CARLO_CHUNK = 10_000
# Flipped sums within this fraction of sum(|d|) of the observed sum count as ties
_TIE_RTOL = 1e-12


class Alternative(str, Enum):
    GREATER = "greater"


@dataclass(frozen=True)
class PairedSample:
    """(treatment, control) pairs, e.g. two methods' detection values over evaluation runs"""
    pairs: Tuple[Tuple[float, float], ...]
    label: str = ""

    def __post_init__(self):
        pairs = []
        for pair in self.pairs:
            if len(pair) != 2:
                raise LengthMismatch(f"pair {pair!r} does not have exactly two values")
            pairs.append((float(pair[0]), float(pair[1])))
        object.__setattr__(self, "pairs", tuple(pairs))

    @classmethod
    def from_columns(cls, treatment: Sequence[float], control: Sequence[float],
                     label: str = "") -> "PairedSample":
        if len(treatment) != len(control):
            raise LengthMismatch("treatment and control columns differ in length")
        return cls(tuple(zip(treatment, control)), label)

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def differences(self) -> np.ndarray:
        return np.array([t - c for t, c in self.pairs], dtype=float)


def _exact_p(d: np.ndarray, tol: float) -> float:
    n = d.size
    observed = d.sum()
    total = 1 << n
    bits = np.arange(n, dtype=np.int64)
    at_least = 0
    for start in range(0, total, _EXACT_CHUNK):
        codes = np.arange(start, min(start + _EXACT_CHUNK, total), dtype=np.int64)
        signs = 1.0 - 2.0 * ((codes[:, None] >> bits) & 1)
        at_least += int(np.count_nonzero(signs @ d >= observed - tol))
    return at_least / total


def _monte_carlo_p(d: np.ndarray, tol: float, resamples: int, seed: int) -> float:
    observed = d.sum()
    chunks = math.ceil(resamples / _MONTE_CARLO_CHUNK)
    # One child seed per chunk keeps chunked (or parallel) runs identical
    children = np.random.SeedSequence(seed).spawn(chunks)
    at_least = 0
    for k, child in enumerate(children):
        size = min(_MONTE_CARLO_CHUNK, resamples - k * _MONTE_CARLO_CHUNK)
        signs = np.random.default_rng(child).integers(0, 2, size=(size, d.size)) * 2 - 1
        at_least += int(np.count_nonzero(signs @ d >= observed - tol))
    # The observed assignment is counted once
    return (at_least + 1) / (resamples + 1)


def paired_permutation_test(sample: PairedSample,
                            alternative: Alternative = Alternative.GREATER,
                            max_exact_n: int = DEFAULT_MAX_EXACT_N,
                            resamples: int = DEFAULT_RESAMPLES,
                            seed: int = 0) -> float:
    """
    One-sided p-value for "treatment is greater than control".

    The statistic is the mean paired difference. Under the null each difference
    is equally likely to have either sign; all 2**n sign flips are enumerated
    when n <= max_exact_n, otherwise ``resamples`` random flips are drawn.
    Flipped statistics tying the observed one count toward the p-value.

    Args:
        sample: Paired observations
        alternative: Only Alternative.GREATER is supported
        max_exact_n: Largest n for exhaustive enumeration
        resamples: Monte Carlo draws when n > max_exact_n
        seed: u64 seed for Monte Carlo draws

    Returns:
        p-value in (0, 1]
    """
    if Alternative(alternative) is not Alternative.GREATER:
        raise DataError("only the one-sided 'greater' alternative is supported")
    if sample.n == 0:
        raise EmptySample(f"sample {sample.label!r} has no pairs")
    if resamples < 1:
        raise DataError("resamples must be >= 1")
    seed = check_seed(seed)

    d = sample.differences
    tol = _TIE_RTOL * float(np.abs(d).sum())
    if sample.n <= max_exact_n:
        return _exact_p(d, tol)
    logger.debug("sample %r: n=%d > %d, using %d Monte Carlo resamples",
                 sample.label, sample.n, max_exact_n, resamples)
    return _monte_carlo_p(d, tol, resamples, seed)


def min_attainable_p(n: int, max_exact_n: int = DEFAULT_MAX_EXACT_N,
                     resamples: int = DEFAULT_RESAMPLES) -> float:
    """Smallest p-value the test can return for a sample of n pairs"""
    if n <= max_exact_n:
        return 2.0 ** -n
    return 1.0 / (resamples + 1)


def significance_flag(p: float, alpha: float = DEFAULT_ALPHA) -> bool:
    """True when p < alpha (strict)"""
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(f"p-value {p} outside [0, 1]")
    if not 0.0 < alpha < 1.0:
        raise InvalidProbability(f"alpha {alpha} outside (0, 1)")
    return p < alpha
