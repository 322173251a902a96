"""Categorical option distributions and the statistical distances between them.

The unit of comparison is a probability vector over the options of one
multiple-choice question. Four distances are supported: KL divergence,
one-best (argmax match), total variation, and Hellinger. The answerability
measure (effective number of options) also lives here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

from . import _kernels

SUM_TOLERANCE = 1e-6
KL_EPSILON = 1e-10


class DistanceKind(enum.Enum):
    """The supported statistical distances over option distributions."""

    KL = "kl"
    ONE_BEST = "ob"
    TOTAL_VARIATION = "tv"
    HELLINGER = "hl"

    @classmethod
    def parse(cls, name: str) -> "DistanceKind":
        key = name.strip().lower()
        aliases = {
            "kl": cls.KL,
            "ob": cls.ONE_BEST,
            "one-best": cls.ONE_BEST,
            "one_best": cls.ONE_BEST,
            "tv": cls.TOTAL_VARIATION,
            "total-variation": cls.TOTAL_VARIATION,
            "total_variation": cls.TOTAL_VARIATION,
            "hl": cls.HELLINGER,
            "hellinger": cls.HELLINGER,
        }
        if key not in aliases:
            raise ValueError(f"unknown distance kind: {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class OptionDistribution:
    """A validated, renormalized probability vector over question options.

    Inputs must have length >= 2, entries in [0, 1], and sum to 1 within
    SUM_TOLERANCE; the stored vector is renormalized to sum to 1 up to
    machine epsilon. Instances are immutable.
    """

    probs: tuple[float, ...]

    def __init__(self, probs: Iterable[float]):
        vals = tuple(float(x) for x in probs)
        if len(vals) < 2:
            raise ValueError(f"need at least 2 options, got {len(vals)}")
        for i, x in enumerate(vals):
            if not (0.0 <= x <= 1.0):
                raise ValueError(f"probability {i} out of [0, 1]: {x!r}")
        total = sum(vals)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"probabilities sum to {total!r}, not 1 within {SUM_TOLERANCE}")
        object.__setattr__(self, "probs", tuple(x / total for x in vals))

    def __len__(self) -> int:
        return len(self.probs)

    def __iter__(self):
        return iter(self.probs)


def _check_lengths(p: OptionDistribution, q: OptionDistribution) -> None:
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} vs {len(q)}")


def kl_divergence(p: OptionDistribution, q: OptionDistribution) -> float:
    """Base-2 KL divergence D(p || q), asymmetric: p is the reference.

    Both vectors are clamped to KL_EPSILON and renormalized before the log
    ratio, so zero entries never produce NaN or infinity.
    """
    _check_lengths(p, q)
    return _kernels.kl_div(p.probs, q.probs, KL_EPSILON)


def one_best(p: OptionDistribution, q: OptionDistribution) -> int:
    """0 if both argmaxes agree, 1 otherwise (ties break to the lowest index)."""
    _check_lengths(p, q)
    return _kernels.one_best(p.probs, q.probs)


def total_variation(p: OptionDistribution, q: OptionDistribution) -> float:
    """Total variation distance, half the L1 difference; in [0, 1]."""
    _check_lengths(p, q)
    return _kernels.total_variation(p.probs, q.probs)


def hellinger(p: OptionDistribution, q: OptionDistribution) -> float:
    """Hellinger distance (1/sqrt(2)) * ||sqrt(p) - sqrt(q)||_2; in [0, 1]."""
    _check_lengths(p, q)
    return _kernels.hellinger(p.probs, q.probs)


_DISPATCH = {
    DistanceKind.KL: kl_divergence,
    DistanceKind.ONE_BEST: one_best,
    DistanceKind.TOTAL_VARIATION: total_variation,
    DistanceKind.HELLINGER: hellinger,
}


def distance(kind: DistanceKind, p: OptionDistribution, q: OptionDistribution) -> float:
    """Evaluate the distance of the given kind; delegates to the four above."""
    return float(_DISPATCH[kind](p, q))


def effective_options(p: OptionDistribution) -> float:
    """Effective number of options 2**H(p) with base-2 entropy H; in [1, K].

    The result is clamped into [1, K] so float noise near the uniform
    distribution can never push it above the option count.
    """
    value = 2.0 ** _kernels.entropy2(p.probs)
    k = float(len(p))
    return min(max(value, 1.0), k)
