"""Scoring of candidate matches against the background model.

A candidate block is compared to the reference block component by component
through the background CDF values of their coefficients.  The per-component
resemblance probabilities are quantized onto a dyadic grid, forced
non-decreasing, and multiplied; the number of false alarms (NFA) is that
product scaled by the total number of tests.  A candidate is meaningful when
its NFA does not exceed epsilon.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Overflow

_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class AcbmParams:
    """Matcher knobs.

    search_radius bounds the epipolar search: candidate disparities run over
    [-search_radius, search_radius] on the same row.  num_components is how
    many locally-ordered PCA components are compared, num_levels how many
    dyadic probability levels the quantizer uses.
    """

    search_radius: int
    epsilon: float = 1.0
    block_side: int = 9
    num_components: int = 9
    num_levels: int = 5

    def __post_init__(self):
        if self.search_radius < 0:
            raise ValueError("search radius must be >= 0")
        if not (self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        if self.block_side < 3 or self.block_side % 2 == 0:
            raise ValueError("block side must be odd and >= 3")
        if not 1 <= self.num_components <= self.block_side ** 2:
            raise ValueError("component count must lie in [1, block_side^2]")
        if self.num_levels < 1:
            raise ValueError("need at least one probability level")

    @property
    def block_area(self) -> int:
        return self.block_side * self.block_side

    def candidate_order(self) -> tuple[int, ...]:
        """Disparities in tie-breaking order: smaller |d| first, then the
        negative one of each +/- pair."""
        r = self.search_radius
        return tuple(sorted(range(-r, r + 1), key=lambda d: (abs(d), d)))


@dataclass(frozen=True)
class QuantizedProbVector:
    """Non-decreasing dyadic probability levels, one per compared component."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("empty quantized vector")
        prev = 0.0
        for v in self.values:
            if not 0.0 < v <= 1.0 or 2.0 ** round(math.log2(v)) != v:
                raise ValueError(f"{v} is not a dyadic probability level")
            if v < prev:
                raise ValueError("levels must be non-decreasing")
            prev = v

    def probability(self) -> float:
        return math.prod(self.values)


def order_components(coeffs) -> np.ndarray:
    """Indices of all components sorted by |coefficient| descending; equal
    magnitudes keep ascending index order."""
    c = np.abs(np.asarray(coeffs, dtype=np.float64))
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coefficient vector must be 1-D and non-empty")
    return np.argsort(-c, kind="stable")


def resemblance_probability(h_q, h_qp):
    """Probability that a background block lands at least as close to the
    reference as the candidate did, in one component.

    Both arguments are CDF values in [0, 1]; the reference value h_q splits
    the unit interval into a central band (two-sided distance) and two outer
    tails.  Accepts scalars or same-shape arrays.
    """
    a = np.asarray(h_q, dtype=np.float64)
    b = np.asarray(h_qp, dtype=np.float64)
    scalar = a.ndim == 0 and b.ndim == 0
    diff = b - a
    p = np.where(diff > a, b,
                 np.where(-diff > 1.0 - a, 1.0 - b, 2.0 * np.abs(diff)))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if scalar else p


def quantize_levels(num_levels: int) -> np.ndarray:
    """Available levels 1/2^(j-1), j = 1..num_levels, ascending."""
    return 2.0 ** -np.arange(num_levels - 1, -1, -1)


def quantize_array(p_hat: np.ndarray, num_levels: int) -> np.ndarray:
    """Vector quantizer along the last axis: per-element dyadic ceiling (the
    smallest level >= p, everything at or below the smallest level maps to
    it), then a running maximum so the result is non-decreasing.  This is the
    least element of the non-decreasing grid dominating p_hat."""
    levels = quantize_levels(num_levels)
    idx = np.minimum(np.searchsorted(levels, p_hat, side="left"),
                     num_levels - 1)
    return np.maximum.accumulate(levels[idx], axis=-1)


def quantize_sequence(p_hat, num_levels: int) -> QuantizedProbVector:
    p = np.asarray(p_hat, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probability sequence must be 1-D and non-empty")
    if (p < 0).any() or (p > 1).any():
        raise ValueError("probabilities must lie in [0, 1]")
    return QuantizedProbVector(tuple(quantize_array(p, num_levels)))


def _binom(m: int, k: int) -> int:
    # conventions: C(m, 0) = 1 down to m = -1, C(m, k) = 0 when m < k
    if k == 0:
        return 1 if m >= -1 else 0
    if k < 0 or m < k:
        return 0
    return math.comb(m, k)


def count_nondecreasing(num_components: int, num_levels: int) -> int:
    """Number of non-decreasing quantized vectors of length num_components
    over num_levels levels."""
    if num_components < 1 or num_levels < 1:
        raise ValueError("component and level counts must be >= 1")
    n, q = num_components, num_levels
    total = sum((t + 1) * _binom(n + q - t - 3, q - t - 1) for t in range(q))
    if total > _INT64_MAX:
        raise Overflow(f"vector count {total} exceeds 64-bit range")
    return total


def number_of_tests(num_pixels: int, params: AcbmParams) -> int:
    """Total tested triples: reference pixels (whole image) x candidate
    disparities x quantized vectors."""
    if num_pixels < 1:
        raise ValueError("pixel count must be >= 1")
    total = (num_pixels * (2 * params.search_radius + 1)
             * count_nondecreasing(params.num_components, params.num_levels))
    if total > _INT64_MAX:
        raise Overflow(f"test count {total} exceeds 64-bit range")
    return total


def nfa(n_test: int, quantized) -> float:
    """Expected number of background candidates at least this similar."""
    if isinstance(quantized, QuantizedProbVector):
        return n_test * quantized.probability()
    return float(n_test * np.prod(np.asarray(quantized, dtype=np.float64)))


def is_meaningful(nfa_value: float, epsilon: float) -> bool:
    return nfa_value <= epsilon
