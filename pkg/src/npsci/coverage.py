"""Coverage probability of NPS intervals over sampled trinomial distributions.

Intervals depend only on the observed counts, so for a given (method, n,
level) the interval of every possible outcome is computed once and cached.
Exact coverage is then a probability-weighted sum over that table, and Monte
Carlo draws are lookups into it.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from npsci.core import ConfidenceLevel, InvalidInputError, Tpmd
from npsci.methods import MethodSpec, interval_arrays

log = logging.getLogger(__name__)

EXACT_N_CAP = 300
DEFAULT_N_VALUES = tuple(range(5, 101, 5))
DESCRIPTIVE_N_VALUES = tuple(range(120, 301, 20))

MODES = ("exact", "monte_carlo")

# Tpmds per block when forming the (tpmd x outcome) probability matrix.
_BLOCK = 256


class CostGuardError(InvalidInputError):
    """Exact enumeration refused because n exceeds the configured cap."""


@dataclass(frozen=True)
class LatticeSpec:
    """A seeded sample of ``sample_size`` points from the (3, degree) simplex lattice."""

    degree: int = 400
    sample_size: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.degree < 1:
            raise InvalidInputError(f"lattice degree must be >= 1, got {self.degree}")
        if self.sample_size < 1:
            raise InvalidInputError(f"sample size must be >= 1, got {self.sample_size}")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.sample_size > lattice_size(self.degree):
            raise InvalidInputError(
                f"cannot draw {self.sample_size} distinct points from a lattice of "
                f"{lattice_size(self.degree)}"
            )


@dataclass(frozen=True)
class CoverageRecord:
    method: MethodSpec
    n: int
    level: ConfidenceLevel
    tpmd: Tpmd
    true_nps: float
    true_var: float
    coverage: float
    mean_width: float
    mode: str
    sims: int | None = None
    seed: int | None = None


def lattice_size(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def lattice_points(degree: int) -> np.ndarray:
    """Integer lattice points ``(a, b, c)`` with ``a + b + c = degree``, shape (K, 3)."""
    return _composition_table(degree)


@lru_cache(maxsize=8)
def _composition_table(total: int) -> np.ndarray:
    first = np.repeat(np.arange(total + 1), np.arange(total + 1, 0, -1))
    offsets = np.concatenate([[0], np.cumsum(np.arange(total + 1, 0, -1))[:-1]])
    second = np.arange(first.size) - offsets[first]
    table = np.stack([first, second, total - first - second], axis=1)
    table.setflags(write=False)
    return table


def sample_simplex_lattice(spec: LatticeSpec) -> list[Tpmd]:
    """Draw distinct lattice points uniformly without replacement."""
    points = lattice_points(spec.degree)
    rng = np.random.default_rng(spec.seed)
    chosen = rng.choice(points.shape[0], size=spec.sample_size, replace=False)
    m = spec.degree
    return [Tpmd(a / m, b / m, c / m) for a, b, c in points[chosen].tolist()]


def lattice_nps_histogram(degree: int, bins: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """Density histogram of the score over the whole lattice, on [-1, 1]."""
    points = lattice_points(degree)
    scores = (points[:, 2] - points[:, 0]) / degree
    return np.histogram(scores, bins=bins, range=(-1.0, 1.0), density=True)


def triangular_l1_distance(degree: int, bins: int = 40) -> float:
    """L1 distance between the lattice score histogram and the triangular density.

    Both are compared as bin probabilities; the triangular law has mode 0 on
    [-1, 1] with CDF ``(1 + x)**2 / 2`` below 0.
    """
    density, edges = lattice_nps_histogram(degree, bins)
    observed = density * np.diff(edges)
    cdf = np.where(edges <= 0, (1 + edges) ** 2 / 2, 1 - (1 - edges) ** 2 / 2)
    return float(np.abs(observed - np.diff(cdf)).sum())


# ---------------------------------------------------------------------------
# Outcome tables


@lru_cache(maxsize=64)
def _outcomes(n: int):
    table = _composition_table(n)
    counts = table.astype(float)
    log_coef = gammaln(n + 1.0) - gammaln(counts + 1.0).sum(axis=1)
    return counts, log_coef


@lru_cache(maxsize=512)
def _outcome_intervals(method: MethodSpec, n: int, level: ConfidenceLevel):
    counts, _ = _outcomes(n)
    _, lower, upper = interval_arrays(method, counts[:, 0], counts[:, 1], counts[:, 2], level)
    lower = np.array(lower, dtype=float)
    upper = np.array(upper, dtype=float)
    lower.setflags(write=False)
    upper.setflags(write=False)
    return lower, upper


def _outcome_index(det: np.ndarray, pas: np.ndarray, n: int) -> np.ndarray:
    # Row of (det, pas) in the composition table: rows for det' < det come first.
    return det * (n + 1) - det * (det - 1) // 2 + pas


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise CostGuardError(
            f"exact coverage enumerates {lattice_size(n)} outcomes at n={n}; "
            f"cap is n={cap}"
        )


def exact_coverage_arrays(
    probs: np.ndarray, n: int, level: ConfidenceLevel, method: MethodSpec, cap: int = EXACT_N_CAP
) -> tuple[np.ndarray, np.ndarray]:
    """Exact coverage and expected width for each row of ``probs`` (J x 3)."""
    _check_cap(n, cap)
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    counts, log_coef = _outcomes(n)
    lower, upper = _outcome_intervals(method, n, level)
    width = upper - lower
    coverage = np.empty(probs.shape[0])
    mean_width = np.empty(probs.shape[0])
    for start in range(0, probs.shape[0], _BLOCK):
        block = probs[start:start + _BLOCK]
        logp = log_coef[None, :] + sum(
            xlogy(counts[None, :, k], block[:, k, None]) for k in range(3)
        )
        weight = np.exp(logp)
        truth = (block[:, 2] - block[:, 0])[:, None]
        inside = (lower[None, :] <= truth) & (truth <= upper[None, :])
        coverage[start:start + _BLOCK] = (weight * inside).sum(axis=1)
        mean_width[start:start + _BLOCK] = weight @ width
    return coverage, mean_width


def exact_coverage(
    p: Tpmd, n: int, lvl: ConfidenceLevel, m: MethodSpec, cap: int = EXACT_N_CAP
) -> CoverageRecord:
    coverage, width = exact_coverage_arrays(np.array([p.as_tuple()]), n, lvl, m, cap)
    return _record(m, n, lvl, p, coverage[0], width[0], "exact")


def trinomial_draws(rng: np.random.Generator, p: Tpmd, n: int, size: int):
    """Exact trinomial samples by sequential binomial conditioning."""
    det = rng.binomial(n, p.p_det, size=size)
    rest = 1.0 - p.p_det
    share = min(max(p.p_pas / rest, 0.0), 1.0) if rest > 0 else 0.0
    pas = rng.binomial(n - det, share)
    return det, pas, n - det - pas


def simulate_coverage(
    p: Tpmd,
    n: int,
    lvl: ConfidenceLevel,
    m: MethodSpec,
    sims: int,
    seed: int,
    cap: int = EXACT_N_CAP,
) -> CoverageRecord:
    """Monte Carlo coverage from ``sims`` trinomial samples of size ``n``.

    For ``n <= cap`` each draw's interval is looked up in the cached outcome
    table; above it intervals are computed per draw.
    """
    if sims < 1:
        raise InvalidInputError(f"sims must be >= 1, got {sims}")
    rng = np.random.default_rng(seed)
    det, pas, pro = trinomial_draws(rng, p, n, sims)
    if n <= cap:
        lower, upper = _outcome_intervals(m, n, lvl)
        idx = _outcome_index(det, pas, n)
        lower, upper = lower[idx], upper[idx]
    else:
        _, lower, upper = interval_arrays(m, det, pas, pro, lvl)
    truth = p.p_pro - p.p_det
    inside = (lower <= truth) & (truth <= upper)
    return _record(
        m, n, lvl, p, inside.mean(), float(np.mean(upper - lower)), "monte_carlo", sims, seed
    )


def _record(m, n, lvl, p, coverage, width, mode, sims=None, seed=None) -> CoverageRecord:
    return CoverageRecord(
        method=m,
        n=n,
        level=lvl,
        tpmd=p,
        true_nps=p.nps,
        true_var=p.variance,
        coverage=float(min(max(coverage, 0.0), 1.0)),
        mean_width=float(width),
        mode=mode,
        sims=sims,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Grids


def cell_seed(master_seed: int, method_index: int, n: int, tpmd_index: int) -> int:
    """64-bit seed for one grid cell, independent of every other cell."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(method_index, n, tpmd_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def resolve_mode(mode: str, n: int, exact_max_n: int = 100) -> str:
    """``auto`` picks exact enumeration up to ``exact_max_n`` and Monte Carlo above."""
    if mode == "auto":
        return "exact" if n <= exact_max_n else "monte_carlo"
    if mode not in MODES:
        raise InvalidInputError(f"mode must be exact, monte_carlo or auto, got {mode!r}")
    return mode


def _grid_task(task):
    method_index, method, n, lvl, tpmds, mode, seed, sims, cap = task
    mode = resolve_mode(mode, n)
    if mode == "exact":
        probs = np.array([p.as_tuple() for p in tpmds])
        try:
            coverage, width = exact_coverage_arrays(probs, n, lvl, method, cap)
        except Exception as exc:
            _annotate(exc, f"cell (method={method}, n={n})")
            raise
        return [
            _record(method, n, lvl, p, c, w, "exact")
            for p, c, w in zip(tpmds, coverage.tolist(), width.tolist())
        ]
    records = []
    for ti, p in enumerate(tpmds):
        try:
            records.append(
                simulate_coverage(
                    p, n, lvl, method, sims, cell_seed(seed, method_index, n, ti), cap
                )
            )
        except Exception as exc:
            _annotate(exc, f"cell (method={method}, n={n}, tpmd={ti})")
            raise
    return records


def _annotate(exc: Exception, where: str) -> None:
    exc.args = (f"{where}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]


def run_grid(
    methods: Sequence[MethodSpec],
    n_values: Sequence[int],
    lvl: ConfidenceLevel,
    tpmds: Sequence[Tpmd],
    mode: str = "exact",
    seed: int = 0,
    sims: int = 2_000,
    cap: int = EXACT_N_CAP,
    workers: int = 1,
) -> list[CoverageRecord]:
    """Coverage for every (method, n, tpmd) cell, ordered method-major then n then tpmd.

    Monte Carlo cells are seeded by :func:`cell_seed`, so a cell gives the same
    record whether run alone or inside any grid, at any worker count.
    """
    if not methods or not n_values or not tpmds:
        raise InvalidInputError("methods, n values and tpmds must all be nonempty")
    tpmds = list(tpmds)
    tasks = [
        (mi, m, int(n), lvl, tpmds, mode, seed, sims, cap)
        for mi, m in enumerate(methods)
        for n in n_values
    ]
    records: list[CoverageRecord] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (_, m, n, *_), chunk in zip(tasks, pool.map(_grid_task, tasks)):
                log.info("finished %s n=%d", m, n)
                records.extend(chunk)
    else:
        for task in tasks:
            records.extend(_grid_task(task))
            log.info("finished %s n=%d", task[1], task[2])
    return records


def summarize(records: Iterable[CoverageRecord]) -> dict:
    """Mean coverage per (method, n), uniform over tpmds."""
    groups: dict = {}
    for r in records:
        groups.setdefault((str(r.method), r.n), []).append(r.coverage)
    return {key: float(np.mean(values)) for key, values in groups.items()}
