"""Core NPS types: trinomial counts, probability vectors, confidence levels."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import ndtri

if TYPE_CHECKING:
    from npsci.methods import MethodSpec

# Tpmd inputs whose components sum to within this of 1 are renormalized.
SUM_TOLERANCE = 1e-9


class InvalidInputError(ValueError):
    """Raised for counts, probabilities or parameters outside their domain."""


@dataclass(frozen=True)
class TrinomialCounts:
    """Respondent counts per category (Detractor, Passive, Promoter)."""

    det: int
    pas: int
    pro: int

    def __post_init__(self):
        for name in ("det", "pas", "pro"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise InvalidInputError(f"{name} must be an integer, got {value!r}")
            if value < 0:
                raise InvalidInputError(f"{name} must be >= 0, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def n(self) -> int:
        return self.det + self.pas + self.pro

    def swapped(self) -> TrinomialCounts:
        """Counts with Detractors and Promoters exchanged."""
        return TrinomialCounts(self.pro, self.pas, self.det)

    def require_nonempty(self) -> None:
        if self.n < 1:
            raise InvalidInputError("total count must be at least 1")


@dataclass(frozen=True)
class Tpmd:
    """Trinomial probability mass distribution ``(p_det, p_pas, p_pro)``.

    Inputs summing to 1 within ``SUM_TOLERANCE`` are renormalized; anything
    further off is rejected.
    """

    p_det: float
    p_pas: float
    p_pro: float

    def __post_init__(self):
        values = [float(self.p_det), float(self.p_pas), float(self.p_pro)]
        for value in values:
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"probabilities must lie in [0, 1], got {values}")
        total = sum(values)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise InvalidInputError(f"probabilities must sum to 1, got {total!r}")
        if total != 1.0:
            values = [v / total for v in values]
        object.__setattr__(self, "p_det", values[0])
        object.__setattr__(self, "p_pas", values[1])
        object.__setattr__(self, "p_pro", values[2])

    @property
    def nps(self) -> float:
        return nps_from_tpmd(self)

    @property
    def variance(self) -> float:
        return nps_variance(self)

    def swapped(self) -> Tpmd:
        return Tpmd(self.p_pro, self.p_pas, self.p_det)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_det, self.p_pas, self.p_pro)

    @classmethod
    def from_nps_variance(cls, nps: float, variance: float) -> Tpmd:
        """The unique distribution with the given score and variance."""
        extremes = variance + nps * nps
        if not abs(nps) <= extremes + 1e-12 or extremes > 1.0 + 1e-12:
            raise InvalidInputError(
                f"(nps={nps}, variance={variance}) lies outside the feasible region"
            )
        p_pro = min(max((extremes + nps) / 2.0, 0.0), 1.0)
        p_det = min(max((extremes - nps) / 2.0, 0.0), 1.0)
        p_pas = max(1.0 - p_pro - p_det, 0.0)
        return cls(p_det, p_pas, p_pro)


@dataclass(frozen=True)
class ConfidenceLevel:
    """Two-sided confidence level and its standard-normal critical value."""

    level: float
    z: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        level = float(self.level)
        if not 0.0 < level < 1.0:
            raise InvalidInputError(f"confidence level must lie in (0, 1), got {level}")
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "z", float(ndtri(1.0 - (1.0 - level) / 2.0)))

    @property
    def alpha(self) -> float:
        return 1.0 - self.level


@dataclass(frozen=True)
class IntervalEstimate:
    """An interval with its central estimate.

    Bounds are stored unclamped; use :meth:`clamped` for display.
    """

    center: float
    lower: float
    upper: float
    method: MethodSpec
    level: ConfidenceLevel

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def clamped(self) -> tuple[float, float, float]:
        """``(center, lower, upper)`` clipped to the score range [-1, 1]."""
        return tuple(min(max(v, -1.0), 1.0) for v in (self.center, self.lower, self.upper))


def tpmd_from_counts(c: TrinomialCounts) -> Tpmd:
    c.require_nonempty()
    n = c.n
    return Tpmd(c.det / n, c.pas / n, c.pro / n)


def nps_from_counts(c: TrinomialCounts) -> float:
    """Share of Promoters less share of Detractors."""
    c.require_nonempty()
    return (c.pro - c.det) / c.n


def nps_from_tpmd(p: Tpmd) -> float:
    return p.p_pro - p.p_det


def nps_variance(p: Tpmd) -> float:
    """Per-respondent variance of the score, ``p_pro + p_det - (p_pro - p_det)**2``."""
    return float(variance_of(p.p_det, p.p_pro))


def variance_of(p_det, p_pro):
    # Elementwise; clipped at 0 against rounding at the simplex vertices.
    d = p_pro - p_det
    return np.maximum(p_pro + p_det - d * d, 0.0)


def possible_scores(n: int) -> list[float]:
    """All achievable scores for a sample of size ``n``, ascending.

    ``pro - det`` ranges over every integer in [-n, n], so there are 2n + 1.
    """
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    achievable = {
        Fraction(pro - det, n) for det in range(n + 1) for pro in range(n + 1 - det)
    }
    return [float(s) for s in sorted(achievable)]
