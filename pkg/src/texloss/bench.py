"""Wall-clock scaling of hard and soft GLCM construction.

Counting co-occurrences costs O(N) in the pixel count; the soft matrix sums
one n x n outer product per pixel pair, O(N n^2).  ``run_scaling`` times both
on random images over a grid of sizes and bin counts, and ``fit_slope``
recovers the exponents from a log-log regression.

The quadratic term only dominates once n is large: below a few hundred bins
the O(N n) weight pass and the rising efficiency of the matrix product keep
the apparent exponent near 1.  ``SOFT_BINS`` is chosen in the regime where
the leading term is visible.  A small image keeps the matrix product's inner
dimension short; its throughput then varies less across that range.
"""
from __future__ import annotations

import math
import os
import platform
import statistics
import time
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from threadpoolctl import threadpool_info, threadpool_limits

from .glcm import BinGrid, Offset, hard_glcm, soft_glcm
from .synthetic import rng_for

HARD_SIDES = (128, 256, 512, 1024)
SOFT_SIDE = 10
SOFT_BINS = (2048, 2896, 4096, 5792, 8192)
RATIO_SIDE = 128
RATIO_BINS = (4, 8, 16, 32, 64, 128)


@dataclass(frozen=True)
class BenchRow:
    N: int
    n: int
    mode: str
    seconds: float
    repeats: int

    def __post_init__(self):
        if self.mode not in ("hard", "soft"):
            raise ValueError(f"mode must be 'hard' or 'soft', got {self.mode!r}")
        if not self.seconds > 0:
            raise ValueError("wall time must be positive")
        if self.repeats < 3:
            raise ValueError("at least three repeats are required")


@dataclass
class BenchResult:
    rows: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def select(self, mode: str, N: int | None = None, n: int | None = None) -> list:
        return [r for r in self.rows if r.mode == mode
                and (N is None or r.N == N) and (n is None or r.n == n)]

    def seconds(self, mode: str, N: int, n: int) -> float:
        (row,) = self.select(mode, N, n)
        return row.seconds

    def to_csv(self) -> str:
        lines = [f"# {k}={v}" for k, v in self.environment.items()]
        lines.append("N,n,mode,seconds,repeats")
        lines += [f"{r.N},{r.n},{r.mode},{r.seconds!r},{r.repeats}" for r in self.rows]
        return "\n".join(lines) + "\n"


def environment() -> dict:
    blas = [f"{p.get('internal_api')}:{p.get('num_threads')}" for p in threadpool_info()]
    return {"machine": platform.machine(), "processor": platform.processor() or "unknown",
            "cpu_count": os.cpu_count(), "python": platform.python_version(),
            "numpy": np.__version__, "threadpools": ";".join(blas) or "none",
            "bench_threads": 1}


def time_call(fn, repeats: int = 3) -> float:
    """Median wall time of ``repeats`` calls after one discarded warm-up."""
    if repeats < 3:
        raise ValueError("at least three repeats are required")
    fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _side(N: int) -> int:
    side = math.isqrt(N)
    if side * side != N or side < 2:
        raise ValueError(f"pixel count must be a square of at least 4, got {N}")
    return side


def run_scaling(sizes, bins, repeats: int = 3, modes=("hard", "soft"), seed: int = 0,
                offset: Offset = Offset(1, 0)) -> BenchResult:
    """Time every (N, n, mode) combination; ``sizes`` are pixel counts.

    Repeats are interleaved: each round times every configuration once, so
    slow drift in machine state lands on all points alike instead of skewing
    whichever configuration happened to run during it.  The reported time is
    the per-configuration median after one discarded warm-up round.
    """
    sizes, bins = list(sizes), list(bins)
    if not sizes or not bins:
        raise ValueError("sizes and bins must be non-empty")
    if repeats < 3:
        raise ValueError("at least three repeats are required")
    funcs = {"hard": hard_glcm, "soft": soft_glcm}
    jobs = []
    for N in sizes:
        side = _side(N)
        img = rng_for(seed).uniform(0.0, 1.0, (side, side))
        for n in bins:
            grid = BinGrid.uniform(0.0, 1.0, n)
            for mode in modes:
                jobs.append(((N, n, mode), partial(funcs[mode], img, offset, grid)))
    times = {key: [] for key, _ in jobs}
    with threadpool_limits(limits=1):
        for _, fn in jobs:
            fn()
        for _ in range(repeats):
            for key, fn in jobs:
                t0 = time.perf_counter()
                fn()
                times[key].append(time.perf_counter() - t0)
    result = BenchResult(environment=environment())
    for key, _ in jobs:
        result.rows.append(BenchRow(*key, statistics.median(times[key]), repeats))
    return result


def fit_slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.size < 2:
        raise ValueError("a slope needs at least two points")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def slope_vs_N(result: BenchResult, mode: str, n: int) -> float:
    rows = sorted(result.select(mode, n=n), key=lambda r: r.N)
    return fit_slope([r.N for r in rows], [r.seconds for r in rows])


def slope_vs_n(result: BenchResult, mode: str, N: int) -> float:
    rows = sorted(result.select(mode, N=N), key=lambda r: r.n)
    return fit_slope([r.n for r in rows], [r.seconds for r in rows])


def soft_hard_ratios(result: BenchResult, N: int) -> list:
    ns = sorted({r.n for r in result.select("soft", N=N)})
    return [result.seconds("soft", N, n) / result.seconds("hard", N, n) for n in ns]


def inversions(seq) -> int:
    """Number of adjacent decreases."""
    return sum(1 for a, b in zip(seq, seq[1:]) if b < a)


@dataclass(frozen=True)
class ScalingSummary:
    hard_slope: float
    soft_slope: float
    ratios: list
    result: BenchResult

    @property
    def ratio_inversions(self) -> int:
        return inversions(self.ratios)


def complexity_suite(repeats: int = 7, seed: int = 0) -> ScalingSummary:
    """The three sweeps behind the complexity claims.

    Hard GLCM vs N at n=8; soft GLCM vs n at a 10x10 image; soft/hard ratio
    vs n at a 128x128 image.
    """
    hard = run_scaling([s * s for s in HARD_SIDES], [8], repeats, ("hard",), seed)
    soft = run_scaling([SOFT_SIDE ** 2], SOFT_BINS, repeats, ("soft",), seed)
    ratio = run_scaling([RATIO_SIDE ** 2], RATIO_BINS, repeats, ("hard", "soft"), seed)
    merged = BenchResult(hard.rows + soft.rows + ratio.rows, hard.environment)
    return ScalingSummary(slope_vs_N(hard, "hard", 8),
                          slope_vs_n(soft, "soft", SOFT_SIDE ** 2),
                          soft_hard_ratios(ratio, RATIO_SIDE ** 2), merged)
