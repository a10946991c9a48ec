"""Observation weights for sampled distributions, and weighted MAE of coverage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from npsci.core import ConfidenceLevel, InvalidInputError, Tpmd
from npsci.coverage import CoverageRecord
from npsci.methods import MethodSpec

# Published summary of the observed distributions: (mean, sd) of score and variance.
OBSERVED_NPS_MOMENTS = (0.26, 0.24)
OBSERVED_VAR_MOMENTS = (0.59, 0.12)

# Location and scale of the untruncated normal whose feasible part has the
# moments above; see calibrate_surrogate().
SURROGATE_LOCATION = (0.3735, 0.6057)
SURROGATE_SCALE = (0.3119, 0.1257)

_FEASIBLE_TOL = 1e-12


def is_feasible(nps, variance, tol: float = _FEASIBLE_TOL):
    """Whether (score, variance) pairs can arise from some trinomial distribution.

    The region is ``|nps| <= variance + nps**2 <= 1``.
    """
    nps = np.asarray(nps, dtype=float)
    extremes = np.asarray(variance, dtype=float) + nps * nps
    return (np.abs(nps) <= extremes + tol) & (extremes <= 1.0 + tol)


@dataclass(frozen=True)
class WeightModel:
    """Bivariate Gaussian product-kernel density over (score, variance)."""

    observations: np.ndarray
    bandwidth: tuple[float, float]

    def density(self, nps, variance) -> np.ndarray:
        nps = np.atleast_1d(np.asarray(nps, dtype=float))
        variance = np.atleast_1d(np.asarray(variance, dtype=float))
        h1, h2 = self.bandwidth
        u = (nps[:, None] - self.observations[None, :, 0]) / h1
        v = (variance[:, None] - self.observations[None, :, 1]) / h2
        kernel = np.exp(-0.5 * (u * u + v * v)) / (2.0 * np.pi * h1 * h2)
        return kernel.mean(axis=1)

    def weights(self, tpmds: Sequence[Tpmd]) -> np.ndarray:
        """Density at each distribution's (score, variance), rescaled to sum to 1."""
        nps = np.array([p.nps for p in tpmds])
        var = np.array([p.variance for p in tpmds])
        dens = self.density(nps, var)
        total = dens.sum()
        if not total > 0:
            raise InvalidInputError("density vanishes at every evaluation point")
        return dens / total


def fit_weight_model(observations) -> WeightModel:
    """Fit the density to (score, variance) pairs.

    Bandwidths follow Scott's rule for two dimensions,
    ``h_i = sd_i * N**(-1/6)``.
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 2:
        raise InvalidInputError("observations must be (nps, variance) pairs")
    if obs.shape[0] < 2:
        raise InvalidInputError("at least two observations are required")
    if not np.all(np.isfinite(obs)):
        raise InvalidInputError("observations must be finite")
    bad = ~is_feasible(obs[:, 0], obs[:, 1])
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise InvalidInputError(
            f"observation {i} (nps={obs[i, 0]}, variance={obs[i, 1]}) is infeasible"
        )
    sd = obs.std(axis=0, ddof=1)
    if np.any(sd <= 0):
        raise InvalidInputError("observations have zero spread in one dimension")
    h = sd * obs.shape[0] ** (-1.0 / 6.0)
    obs = obs.copy()
    obs.setflags(write=False)
    return WeightModel(obs, (float(h[0]), float(h[1])))


def synth_observed_surrogate(count: int, seed: int) -> list[Tpmd]:
    """Synthetic stand-in for the observed distributions.

    Draws independent normal (score, variance) pairs, keeps the feasible ones,
    and maps each back to its distribution. The normal is located so that the
    kept pairs have the published means and standard deviations.
    """
    if count < 1:
        raise InvalidInputError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    have = 0
    while have < count:
        batch = max(2 * (count - have), 64)
        nps = rng.normal(SURROGATE_LOCATION[0], SURROGATE_SCALE[0], size=batch)
        var = rng.normal(SURROGATE_LOCATION[1], SURROGATE_SCALE[1], size=batch)
        ok = is_feasible(nps, var, tol=0.0)
        pairs = np.column_stack([nps[ok], var[ok]])
        kept.append(pairs)
        have += len(pairs)
    pairs = np.concatenate(kept)[:count]
    return [Tpmd.from_nps_variance(d, v) for d, v in pairs.tolist()]


def calibrate_surrogate(draws: int = 400_000, iterations: int = 40, seed: int = 0):
    """Solve for the normal's location and scale by moment matching after truncation.

    Uses one fixed set of standard-normal draws throughout, so the iteration is
    deterministic. Returns ``(location, scale)`` as 2-tuples.
    """
    z = np.random.default_rng(seed).standard_normal((2, draws))
    target_mean = np.array([OBSERVED_NPS_MOMENTS[0], OBSERVED_VAR_MOMENTS[0]])
    target_sd = np.array([OBSERVED_NPS_MOMENTS[1], OBSERVED_VAR_MOMENTS[1]])
    loc, scale = target_mean.copy(), target_sd.copy()
    for _ in range(iterations):
        x = loc[:, None] + scale[:, None] * z
        kept = x[:, is_feasible(x[0], x[1], tol=0.0)]
        loc += target_mean - kept.mean(axis=1)
        scale *= target_sd / kept.std(axis=1)
    return tuple(loc.tolist()), tuple(scale.tolist())


@dataclass(frozen=True)
class MaeSummary:
    method: MethodSpec
    n: int
    level: ConfidenceLevel
    weighting: str
    mae: float


def mae(
    records: Sequence[CoverageRecord],
    weights: Sequence[float] | None = None,
    weighting: str | None = None,
) -> MaeSummary:
    """Weighted mean absolute deviation of coverage from the nominal level.

    ``weights=None`` gives every record weight ``1/J``.
    """
    if not records:
        raise InvalidInputError("no coverage records")
    first = records[0]
    for r in records:
        if (r.method, r.n, r.level) != (first.method, first.n, first.level):
            raise InvalidInputError("records must share method, n and level")
    coverage = np.array([r.coverage for r in records])
    if weights is None:
        w = np.full(len(records), 1.0 / len(records))
        weighting = weighting or "uniform"
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != coverage.shape:
            raise InvalidInputError(
                f"{len(records)} records but {w.size} weights"
            )
        if np.any(w < 0) or not w.sum() > 0:
            raise InvalidInputError("weights must be nonnegative with a positive sum")
        weighting = weighting or "observed"
    value = float(np.sum(np.abs(coverage - first.level.level) * w) / np.sum(w))
    return MaeSummary(first.method, first.n, first.level, weighting, value)
