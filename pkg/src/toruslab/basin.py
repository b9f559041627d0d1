"""Finite-time statistical basins: grid volume sweeps and rate regression.

The basin A(eps, n) of a target measure is the set of start points whose
time-n empirical measure lies within eps of the target in the weak* metric.
Volumes are estimated over a deterministic grid of cell centers (optionally
jittered inside cells with a seeded generator); membership is evaluated by
accumulating the test-function sums along each orbit, so a single traversal
of length max(n) yields every requested n and every epsilon at once.

Work is split into fixed-size chunks of start points that are independent of
the worker count; hit counters are integers merged by addition, so counts are
bit-identical for any thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from toruslab.dynamics import HyperbolicToralMap
from toruslab.weakstar import MomentVector, TestFunctionFamily

CHUNK = 1 << 17
THREADS_ENV_VAR = "TORUSLAB_THREADS"


class InsufficientData(RuntimeError):
    """Fewer than three uncensored rows available for regression."""


class Verdict(str, Enum):
    CONSISTENT_WITH_ZERO = "consistent_with_zero"
    NEGATIVE_RATE = "negative_rate"
    INCONCLUSIVE = "inconclusive"


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SampleGrid:
    """resolution^2 start points at cell centers, optionally jittered.

    Deterministic given (resolution, jitter, seed): jitter offsets come from
    one seeded generator for the whole grid, independent of how the points
    are later chunked.
    """
    resolution: int
    jitter: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")

    @property
    def size(self) -> int:
        return self.resolution * self.resolution

    def _offsets(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.random((self.size, 2))

    def chunk(self, start: int, stop: int, offsets: np.ndarray | None = None
              ) -> np.ndarray:
        idx = np.arange(start, stop)
        g = self.resolution
        off = offsets[start:stop] if offsets is not None else 0.5
        cells = np.column_stack([idx // g, idx % g]).astype(float)
        return (cells + off) / g

    def spec(self) -> dict:
        return {"resolution": self.resolution, "jitter": self.jitter,
                "seed": self.seed}


@dataclass
class BasinCurve:
    """Hit counts of A(eps, n) over the grid, one row per requested n."""
    epsilon: float
    target: MomentVector
    ns: np.ndarray
    hits: np.ndarray
    samples: int

    def fractions(self) -> np.ndarray:
        return self.hits / self.samples

    def log_fractions(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.fractions())


@dataclass
class RateEstimate:
    """Least-squares slope of log(fraction) vs n over uncensored rows."""
    epsilon: float
    slope: float
    stderr: float
    window: tuple[int, int]
    censored: list[int]
    min_hits: int
    rows_used: int


@dataclass
class SweepResult:
    estimates: list[RateEstimate] = field(default_factory=list)
    errors: dict[float, str] = field(default_factory=dict)
    curves: list[BasinCurve] = field(default_factory=list)


def _accumulate_hits(map: HyperbolicToralMap, points: np.ndarray,
                     target: np.ndarray, weights: np.ndarray,
                     epsilons: Sequence[float], n_values: Sequence[int],
                     family: TestFunctionFamily) -> np.ndarray:
    """Hit counts for one chunk, shape (n_eps, n_rows)."""
    hits = np.zeros((len(epsilons), len(n_values)), dtype=np.int64)
    sums = np.zeros((len(points), family.truncation))
    x = points
    row = 0
    n_max = n_values[-1]
    for n in range(1, n_max + 1):
        family.accumulate(x, sums)
        if n == n_values[row]:
            dist = np.abs(sums / n - target) @ weights
            for ei, eps in enumerate(epsilons):
                hits[ei, row] = int(np.count_nonzero(dist < eps))
            row += 1
            if row == len(n_values):
                break
        x = map.step(x)
    return hits


def curve_sweep(map: HyperbolicToralMap, target: MomentVector,
                epsilons: Sequence[float], n_values: Sequence[int],
                grid: SampleGrid, family: TestFunctionFamily,
                threads: int | None = None) -> list[BasinCurve]:
    """One grid traversal shared by every epsilon; returns one curve per eps."""
    if target.truncation != family.truncation:
        raise ValueError("target moments and family disagree on truncation")
    n_values = list(n_values)
    if not n_values or any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be non-empty and strictly increasing")
    if n_values[0] < 1:
        raise ValueError("n_values must be >= 1")
    epsilons = [float(e) for e in epsilons]
    workers = threads if threads is not None else default_threads()
    offsets = grid._offsets() if grid.jitter else None
    tvals = target.values
    w = family.weights

    spans = [(i, min(i + CHUNK, grid.size))
             for i in range(0, grid.size, CHUNK)]

    def work(span):
        pts = grid.chunk(span[0], span[1], offsets)
        return _accumulate_hits(map, pts, tvals, w, epsilons, n_values,
                                family)

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, spans))
    else:
        parts = [work(s) for s in spans]
    hits = np.sum(parts, axis=0)

    ns = np.array(n_values)
    return [BasinCurve(epsilon=eps, target=target, ns=ns,
                       hits=hits[ei].copy(), samples=grid.size)
            for ei, eps in enumerate(epsilons)]


def basin_curve(map: HyperbolicToralMap, target: MomentVector, epsilon: float,
                n_values: Sequence[int], grid: SampleGrid,
                family: TestFunctionFamily,
                threads: int | None = None) -> BasinCurve:
    return curve_sweep(map, target, [epsilon], n_values, grid, family,
                       threads)[0]


def basin_volume_estimate(map: HyperbolicToralMap, target: MomentVector,
                          epsilon: float, n: int, grid: SampleGrid,
                          family: TestFunctionFamily,
                          threads: int | None = None):
    """(fraction, hits, samples) for a single n."""
    curve = basin_curve(map, target, epsilon, [n], grid, family, threads)
    return curve.fractions()[0], int(curve.hits[0]), curve.samples


def basin_membership(map: HyperbolicToralMap, point, target: MomentVector,
                     epsilon: float, n: int,
                     family: TestFunctionFamily) -> bool:
    """Is dist*(sigma_n(point), target) < epsilon?  Streaming accumulation,
    the empirical measure is never materialized."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    pts = np.asarray(point, dtype=float).reshape(1, 2)
    hits = _accumulate_hits(map, pts, target.values, family.weights,
                            [epsilon], [n], family)
    return bool(hits[0, 0])


def rate_estimate(curve: BasinCurve, window: tuple[int, int],
                  min_hits: int = 30) -> RateEstimate:
    """Regress log(hits/samples) on n over uncensored rows inside window."""
    lo, hi = window
    in_win = (curve.ns >= lo) & (curve.ns <= hi)
    censored = [int(n) for n, h in zip(curve.ns[in_win], curve.hits[in_win])
                if h < min_hits]
    use = in_win & (curve.hits >= min_hits)
    m = int(np.count_nonzero(use))
    if m < 3:
        raise InsufficientData(
            f"only {m} uncensored rows in window {window} at eps="
            f"{curve.epsilon} (min_hits={min_hits}); grid too coarse "
            "for this epsilon and window")
    x = curve.ns[use].astype(float)
    y = np.log(curve.hits[use] / curve.samples)
    xm = x.mean()
    ym = y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    resid = y - ym - slope * (x - xm)
    stderr = math.sqrt(float(np.sum(resid ** 2)) / max(m - 2, 1) / sxx)
    return RateEstimate(epsilon=curve.epsilon, slope=slope, stderr=stderr,
                        window=(int(lo), int(hi)), censored=censored,
                        min_hits=min_hits, rows_used=m)


def epsilon_sweep(map: HyperbolicToralMap, target: MomentVector,
                  epsilons: Sequence[float], n_values: Sequence[int],
                  grid: SampleGrid, family: TestFunctionFamily,
                  window: tuple[int, int], min_hits: int = 30,
                  threads: int | None = None) -> SweepResult:
    """Rate estimates for a strictly decreasing epsilon list.

    A per-epsilon InsufficientData is recorded, not raised; the reported
    limit toward eps -> 0 is the last valid estimate together with the
    observed trend, never a claimed converged value.
    """
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    result = SweepResult()
    result.curves = curve_sweep(map, target, eps, n_values, grid, family,
                                threads)
    for curve in result.curves:
        try:
            result.estimates.append(rate_estimate(curve, window, min_hits))
        except InsufficientData as exc:
            result.errors[curve.epsilon] = str(exc)
    return result


def weak_pseudo_physical_verdict(estimates: Sequence[RateEstimate],
                                 tol: float) -> Verdict:
    """Classify a sweep: all slopes within +-tol of zero, some slope clearly
    negative (below -3 stderr - tol), or neither."""
    if not estimates:
        raise ValueError("need at least one valid estimate")
    slopes = np.array([e.slope for e in estimates])
    if np.all(np.abs(slopes) <= tol):
        return Verdict.CONSISTENT_WITH_ZERO
    if any(e.slope < -3.0 * e.stderr - tol for e in estimates):
        return Verdict.NEGATIVE_RATE
    return Verdict.INCONCLUSIVE


def rate_residual(a_est: float, h_est: float, integral_est: float) -> float:
    """Defect of the rate identity: a - (h - integral of psi)."""
    for name, v in (("a_est", a_est), ("h_est", h_est),
                    ("integral_est", integral_est)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v}")
    return a_est - (h_est - integral_est)


def pesin_defect(h_est: float, integral_est: float) -> float:
    """h - integral of psi; zero exactly when the entropy formula holds."""
    return h_est - integral_est
