"""Interval estimators for the NPS of trinomial data.

Every method is implemented as an array kernel taking count arrays
``(det, pas, pro)`` and a critical value ``z``, returning
``(center, lower, upper)`` arrays. The scalar functions wrap those kernels, and
the coverage code calls them directly to evaluate many outcomes at once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np
from scipy.special import ndtri, xlogy

from npsci.core import (
    ConfidenceLevel,
    IntervalEstimate,
    InvalidInputError,
    Tpmd,
    TrinomialCounts,
    variance_of,
)

__all__ = [
    "KINDS",
    "DEFAULT_METHODS",
    "ConstrainedMle",
    "MethodSpec",
    "MethodSyntaxError",
    "ShrinkageWeights",
    "SolverError",
    "adjusted_wald_interval",
    "aw_adjust",
    "compute_interval",
    "constrained_mle",
    "goodman_interval",
    "interval_arrays",
    "iterative_score_interval",
    "may_johnson_interval",
    "score_shrunk_interval",
    "shrinkage_weights",
    "wald_interval",
]

KINDS = ("wald", "goodman", "aw", "score", "mayjohnson", "iterscore")
SHAPES = ("E", "T", "U")

# Pseudo-count split (det, pas, pro) of the total added weight, per shape.
SHAPE_SPLITS = {
    "E": (0.5, 0.0, 0.5),
    "U": (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    "T": (0.25, 0.5, 0.25),
}

# Variance of the pseudo-distribution each shape shrinks toward.
SHAPE_PRIOR_VARIANCE = {"E": 1.0, "U": 2.0 / 3.0, "T": 0.5}

DEFAULT_GOODMAN_K = 3

BISECTION_XTOL = 1e-10
BISECTION_MAX_ITER = 200

Weight = Union[float, str]  # a number, or "z2" for z**2 at the active level


class SolverError(RuntimeError):
    """Raised when the score-inversion bisection fails to converge."""


class MethodSyntaxError(InvalidInputError):
    """A method string could not be parsed.

    ``position`` is the 0-based character offset of the offending field.
    """

    def __init__(self, text: str, position: int, reason: str):
        self.text = text
        self.position = position
        self.reason = reason
        super().__init__(f"invalid method {text!r} at position {position}: {reason}")


@dataclass(frozen=True)
class MethodSpec:
    """An interval method and the parameters relevant to it.

    Parameters irrelevant to ``kind`` are normalized to ``None`` so that equal
    methods compare and hash equal. Use :meth:`parse` and :func:`str` for the
    textual form (``wald``, ``goodman:3``, ``aw:3:t``, ``aw:z2:u``,
    ``score:2/3``, ``mayjohnson``, ``iterscore``).
    """

    kind: str
    w: Weight | None = None
    shape: str | None = None
    prior_variance: Fraction | None = None
    goodman_k: int | None = None
    printed_form: bool = False

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise InvalidInputError(f"unknown method kind {self.kind!r}")
        w = shape = prior = k = None
        printed = False
        if kind == "aw":
            w = _normalize_weight(self.w)
            shape = str(self.shape).upper()
            if shape not in SHAPES:
                raise InvalidInputError(f"shape must be one of E, T, U, got {self.shape!r}")
        elif kind == "score":
            prior = Fraction(1) if self.prior_variance is None else Fraction(self.prior_variance)
            if not 0 < prior <= 1:
                raise InvalidInputError(f"prior variance must lie in (0, 1], got {prior}")
        elif kind == "goodman":
            k = DEFAULT_GOODMAN_K if self.goodman_k is None else self.goodman_k
            if isinstance(k, bool) or int(k) != k or k < 1:
                raise InvalidInputError(f"Goodman K must be a positive integer, got {k!r}")
            k = int(k)
        elif kind == "mayjohnson":
            printed = bool(self.printed_form)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "prior_variance", prior)
        object.__setattr__(self, "goodman_k", k)
        object.__setattr__(self, "printed_form", printed)

    def __str__(self) -> str:
        if self.kind == "goodman":
            return f"goodman:{self.goodman_k}"
        if self.kind == "aw":
            return f"aw:{_format_weight(self.w)}:{self.shape.lower()}"
        if self.kind == "score":
            return f"score:{self.prior_variance}"
        if self.kind == "mayjohnson" and self.printed_form:
            return "mayjohnson:printed"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> MethodSpec:
        raw = text
        fields = text.strip().lower().split(":")
        offsets = [0]
        for f in fields[:-1]:
            offsets.append(offsets[-1] + len(f) + 1)
        lead = len(text) - len(text.lstrip())
        offsets = [o + lead for o in offsets]
        kind, args = fields[0], fields[1:]

        def fail(i: int, reason: str):
            raise MethodSyntaxError(raw, offsets[i], reason)

        def arity(count: int):
            if len(args) > count:
                fail(count + 1, f"unexpected field {args[count]!r}")

        if kind in ("wald", "iterscore"):
            arity(0)
            return cls(kind)
        if kind == "mayjohnson":
            arity(1)
            if args and args[0] != "printed":
                fail(1, "the only option is 'printed'")
            return cls(kind, printed_form=bool(args))
        if kind == "goodman":
            arity(1)
            if not args:
                return cls(kind)
            if not re.fullmatch(r"[0-9]+", args[0]) or int(args[0]) < 1:
                fail(1, "K must be a positive integer")
            return cls(kind, goodman_k=int(args[0]))
        if kind == "score":
            arity(1)
            if not args:
                return cls(kind)
            try:
                prior = Fraction(args[0])
            except (ValueError, ZeroDivisionError):
                fail(1, "prior variance must be a number or fraction such as 2/3")
            if not 0 < prior <= 1:
                fail(1, "prior variance must lie in (0, 1]")
            return cls(kind, prior_variance=prior)
        if kind == "aw":
            arity(2)
            if len(args) < 2:
                fail(0, "expected aw:W:SHAPE")
            if args[0] == "z2":
                w: Weight = "z2"
            else:
                try:
                    w = float(args[0])
                except ValueError:
                    fail(1, "weight must be a positive number or 'z2'")
                if not (np.isfinite(w) and w > 0):
                    fail(1, "weight must be a positive number or 'z2'")
            if args[1].upper() not in SHAPES:
                fail(2, "shape must be one of E, T, U")
            return cls(kind, w=w, shape=args[1])
        fail(0, f"unknown method {kind!r}; expected one of {', '.join(KINDS)}")

    def resolved_weight(self, z: float) -> float:
        """Total added weight, with ``z2`` resolved at critical value ``z``."""
        return z * z if self.w == "z2" else float(self.w)


def _normalize_weight(w) -> Weight:
    if isinstance(w, str):
        if w.lower() == "z2":
            return "z2"
        w = float(w)
    if w is None or not (np.isfinite(w) and w > 0):
        raise InvalidInputError(f"Adjusted Wald weight must be positive, got {w!r}")
    return float(w)


def _format_weight(w: Weight) -> str:
    if w == "z2":
        return "z2"
    return str(int(w)) if float(w).is_integer() else repr(float(w))


# The standard comparison set.
DEFAULT_METHODS = tuple(
    MethodSpec.parse(s)
    for s in (
        "wald",
        "goodman:3",
        *(f"aw:{w}:{shape}" for w in ("2", "3", "z2") for shape in "etu"),
        "score:1",
        "score:2/3",
        "score:1/2",
        "mayjohnson",
        "iterscore",
    )
)


@dataclass(frozen=True)
class ShrinkageWeights:
    w1: float
    w2: float


def shrinkage_weights(n: int, z: float) -> ShrinkageWeights:
    z2 = z * z
    return ShrinkageWeights(n / (n + z2), z2 / (n + z2))


@dataclass(frozen=True)
class ConstrainedMle:
    delta: float
    p_tilde: Tpmd
    loglik: float


# ---------------------------------------------------------------------------
# Array kernels


def _as_counts(det, pas, pro):
    det = np.asarray(det, dtype=float)
    pas = np.asarray(pas, dtype=float)
    pro = np.asarray(pro, dtype=float)
    return det, pas, pro, det + pas + pro


def _sample_moments(det, pro, n):
    return (pro - det) / n, variance_of(det / n, pro / n)


def wald_arrays(det, pas, pro, z):
    det, pas, pro, n = _as_counts(det, pas, pro)
    nps, var = _sample_moments(det, pro, n)
    half = z * np.sqrt(var / n)
    return nps, nps - half, nps + half


def goodman_chi(level: float, k: int) -> float:
    """Upper (alpha/K) point of chi-square with 1 df, via the normal quantile."""
    q = ndtri(1.0 - (1.0 - level) / (2.0 * k))
    return float(q * q)


def goodman_arrays(det, pas, pro, chi):
    det, pas, pro, n = _as_counts(det, pas, pro)
    nps, var = _sample_moments(det, pro, n)
    half = np.sqrt(chi * var / n)
    return nps, nps - half, nps + half


def aw_arrays(det, pas, pro, z, w, shape):
    det, pas, pro, n = _as_counts(det, pas, pro)
    s_det, s_pas, s_pro = SHAPE_SPLITS[shape]
    x_det = det + w * s_det
    x_pro = pro + w * s_pro
    n_hat = n + w
    center = (x_pro - x_det) / n_hat
    var = variance_of(x_det / n_hat, x_pro / n_hat)
    half = z * np.sqrt(var / n_hat)
    return center, center - half, center + half


def score_arrays(det, pas, pro, z, prior_variance):
    det, pas, pro, n = _as_counts(det, pas, pro)
    nps, var = _sample_moments(det, pro, n)
    z2 = z * z
    w1 = n / (n + z2)
    w2 = z2 / (n + z2)
    # (NPS + 1) w1 + w2 - 1 reduces to NPS * w1; the product form keeps
    # det/pro reflection exact.
    center = nps * w1
    half = z * np.sqrt((var * w1 + prior_variance * w2) / (n + z2))
    return center, center - half, center + half


def may_johnson_arrays(det, pas, pro, z, printed_form=False):
    det, pas, pro, n = _as_counts(det, pas, pro)
    nps = (pro - det) / n
    extremes = pro / n + det / n
    n_hat = n + z * z
    center = nps * (n / n_hat)
    radicand = np.maximum(n_hat * extremes - n * nps * nps, 0.0)
    if printed_form:
        half = z * np.sqrt(radicand / n_hat)
    else:
        half = (z / n_hat) * np.sqrt(radicand)
    return center, center - half, center + half


def constrained_mle_arrays(det, pas, pro, delta):
    """Trinomial MLE under ``p_pro - p_det = delta``, elementwise.

    With ``p_det = t`` the log-likelihood is concave in t on
    ``[max(0, -delta), (1 - delta) / 2]``; its stationary points solve
    ``-2n t^2 + b t + c = 0``. The maximum is taken over the in-range roots and
    both endpoints, which also covers the zero-count cases.

    Returns ``(t, loglik)`` where ``t`` is the constrained ``p_det``.
    """
    det, pas, pro, n = _as_counts(det, pas, pro)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), n.shape)
    s = 1.0 - delta
    t_lo = np.maximum(0.0, -delta)
    t_hi = np.maximum(s / 2.0, t_lo)

    a = -2.0 * n
    b = det * (s - 2.0 * delta) + pro * s - 2.0 * pas * delta
    c = det * delta * s
    disc = np.maximum(b * b - 4.0 * a * c, 0.0)
    q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / a
        r2 = np.where(q != 0.0, c / q, r1)

    candidates = np.stack([t_lo, t_hi, r1, r2])
    candidates = np.clip(np.nan_to_num(candidates, nan=0.0), t_lo, t_hi)
    loglik = _loglik(det, pas, pro, candidates, delta)
    best = np.argmax(loglik, axis=0)
    t = np.take_along_axis(candidates, best[None, ...], axis=0)[0]
    ll = np.take_along_axis(loglik, best[None, ...], axis=0)[0]
    return t, ll


def _loglik(det, pas, pro, t, delta):
    p_pas = np.maximum(1.0 - 2.0 * t - delta, 0.0)
    p_pro = np.maximum(t + delta, 0.0)
    return xlogy(det, t) + xlogy(pas, p_pas) + xlogy(pro, p_pro)


def _score_gap(det, pas, pro, nps, delta, z):
    """``|nps - delta| - z * SE(delta)``; nonpositive inside the interval."""
    n = det + pas + pro
    t, _ = constrained_mle_arrays(det, pas, pro, delta)
    # p_pro + p_det at the constrained MLE is 2t + delta.
    var = np.maximum(2.0 * t + delta - delta * delta, 0.0)
    return np.abs(nps - delta) - z * np.sqrt(var / n)


def _score_upper(det, pas, pro, z):
    """Upper score-inversion bound by bisection on ``[NPS, 1]``.

    The bracket keeps ``gap(lo) <= 0 < gap(hi)``. At ``delta = 1`` the
    constrained variance vanishes, so ``gap(1) = 1 - NPS > 0`` unless every
    respondent is a Promoter, in which case the bound is exactly 1.
    """
    det, pas, pro, n = _as_counts(det, pas, pro)
    nps = (pro - det) / n
    lo = nps.copy()
    hi = np.ones_like(nps)
    done = pro == n
    iterations = 0
    while True:
        active = ~done & (hi - lo > BISECTION_XTOL)
        if not active.any():
            break
        if iterations >= BISECTION_MAX_ITER:
            raise SolverError(
                f"score bisection did not converge in {BISECTION_MAX_ITER} iterations"
            )
        mid = 0.5 * (lo + hi)
        inside = _score_gap(det, pas, pro, nps, mid, z) <= 0.0
        lo = np.where(active & inside, mid, lo)
        hi = np.where(active & ~inside, mid, hi)
        iterations += 1
    return np.where(done, 1.0, 0.5 * (lo + hi))


def iterative_score_arrays(det, pas, pro, z):
    det, pas, pro, n = _as_counts(det, pas, pro)
    nps = (pro - det) / n
    upper = _score_upper(det, pas, pro, z)
    # The lower bound is the reflected upper bound of the det/pro-swapped data.
    lower = -_score_upper(pro, pas, det, z)
    return nps, lower, upper


def interval_arrays(spec: MethodSpec, det, pas, pro, level: ConfidenceLevel):
    """Vectorized ``(center, lower, upper)`` for method ``spec``."""
    z = level.z
    if spec.kind == "wald":
        return wald_arrays(det, pas, pro, z)
    if spec.kind == "goodman":
        return goodman_arrays(det, pas, pro, goodman_chi(level.level, spec.goodman_k))
    if spec.kind == "aw":
        return aw_arrays(det, pas, pro, z, spec.resolved_weight(z), spec.shape)
    if spec.kind == "score":
        return score_arrays(det, pas, pro, z, float(spec.prior_variance))
    if spec.kind == "mayjohnson":
        return may_johnson_arrays(det, pas, pro, z, spec.printed_form)
    if spec.kind == "iterscore":
        return iterative_score_arrays(det, pas, pro, z)
    raise InvalidInputError(f"unknown method kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# Scalar API


def _estimate(spec, c, lvl, arrays) -> IntervalEstimate:
    center, lower, upper = (float(v) for v in arrays)
    return IntervalEstimate(center, lower, upper, spec, lvl)


def wald_interval(c: TrinomialCounts, lvl: ConfidenceLevel) -> IntervalEstimate:
    c.require_nonempty()
    return _estimate(MethodSpec("wald"), c, lvl, wald_arrays(c.det, c.pas, c.pro, lvl.z))


def goodman_interval(
    c: TrinomialCounts, lvl: ConfidenceLevel, k: int = DEFAULT_GOODMAN_K
) -> IntervalEstimate:
    return compute_interval(c, lvl, MethodSpec("goodman", goodman_k=k))


def aw_adjust(
    c: TrinomialCounts, lvl: ConfidenceLevel, w: Weight, shape: str
) -> tuple[tuple[float, float, float], float]:
    """Pseudo-counts ``(det, pas, pro)`` and total after adding weight ``w``.

    ``w`` may be ``"z2"`` for the squared critical value at ``lvl``.
    """
    spec = MethodSpec("aw", w=w, shape=shape)
    w = spec.resolved_weight(lvl.z)
    s_det, s_pas, s_pro = SHAPE_SPLITS[spec.shape]
    x_hat = (c.det + w * s_det, c.pas + w * s_pas, c.pro + w * s_pro)
    return x_hat, c.n + w


def adjusted_wald_interval(
    c: TrinomialCounts, lvl: ConfidenceLevel, w: Weight, shape: str
) -> IntervalEstimate:
    return compute_interval(c, lvl, MethodSpec("aw", w=w, shape=shape))


def score_shrunk_interval(
    c: TrinomialCounts, lvl: ConfidenceLevel, prior_variance=1
) -> IntervalEstimate:
    return compute_interval(c, lvl, MethodSpec("score", prior_variance=Fraction(prior_variance)))


def may_johnson_interval(
    c: TrinomialCounts, lvl: ConfidenceLevel, printed_form: bool = False
) -> IntervalEstimate:
    """May-Johnson closed-form score interval.

    ``printed_form=True`` divides the whole radicand by ``n + z**2`` once, as
    originally typeset; the default normalization shrinks like ``1/sqrt(n)``.
    """
    return compute_interval(c, lvl, MethodSpec("mayjohnson", printed_form=printed_form))


def constrained_mle(c: TrinomialCounts, delta: float) -> ConstrainedMle:
    c.require_nonempty()
    if not -1.0 <= delta <= 1.0:
        raise InvalidInputError(f"delta must lie in [-1, 1], got {delta}")
    t, ll = constrained_mle_arrays(c.det, c.pas, c.pro, delta)
    t = float(t) + 0.0  # no negative zero
    p_pro = min(max(t + delta, 0.0), 1.0)
    p_pas = max(1.0 - t - p_pro, 0.0)
    return ConstrainedMle(float(delta), Tpmd(t, p_pas, p_pro), float(ll))


def iterative_score_interval(c: TrinomialCounts, lvl: ConfidenceLevel) -> IntervalEstimate:
    return compute_interval(c, lvl, MethodSpec("iterscore"))


def compute_interval(
    c: TrinomialCounts, lvl: ConfidenceLevel, m: MethodSpec
) -> IntervalEstimate:
    c.require_nonempty()
    return _estimate(m, c, lvl, interval_arrays(m, c.det, c.pas, c.pro, lvl))
