"""Residual-noise template matching and perception-distortion ranking.

Templates cut from a noisy image are searched for in a denoised image with
zero-padded normalized cross-correlation (no mean subtraction).  A perfect
copy of the noise pattern scores 1; the spread of best-match scores across
templates and images is summarized with a Gaussian KDE.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import correlate

from .core import Image, as_array


class DegenerateKdeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Template:
    patch: np.ndarray = field(repr=False)
    origin: tuple  # (x, y): column, row of the top-left corner in the source

    @classmethod
    def extract(cls, img, x: int, y: int, t: int = 32) -> Template:
        src = as_array(img)
        h, w = src.shape
        if not (0 <= x and 0 <= y and x + t <= w and y + t <= h):
            raise ValueError(f"{t}x{t} template at ({x}, {y}) leaves the {w}x{h} image")
        patch = np.array(src[y:y + t, x:x + t])
        patch.setflags(write=False)
        return cls(patch, (x, y))

    @property
    def size(self) -> int:
        return self.patch.shape[0]


def ncc_map(template: Template, img) -> np.ndarray:
    """Normalized cross-correlation at every top-left position of ``img``.

    The image is zero-padded on the bottom and right so the template may hang
    over the border.  Windows with zero energy score 0.
    """
    x = as_array(img)
    t = template.patch
    th, tw = t.shape
    padded = np.pad(x, ((0, th - 1), (0, tw - 1)))
    num = correlate(padded, t, mode="valid")
    energy = correlate(padded * padded, np.ones_like(t), mode="valid")
    denom = np.sqrt(np.maximum(energy, 0.0) * float(np.sum(t * t)))
    # FFT round-off never yields an exact zero, so count nonzero pixels exactly
    live = _box_count(padded != 0, th, tw) > 0
    out = np.zeros_like(num)
    np.divide(num, denom, out=out, where=live & (denom > 0))
    return out


def _box_count(mask, th, tw) -> np.ndarray:
    """Number of True entries in every ``th`` x ``tw`` window (valid mode)."""
    c = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int64)
    c[1:, 1:] = np.cumsum(np.cumsum(mask, axis=0), axis=1)
    return c[th:, tw:] - c[:-th, tw:] - c[th:, :-tw] + c[:-th, :-tw]


def max_match(template: Template, img) -> float:
    return float(ncc_map(template, img).max())


def equispaced_templates(img, r: int = 9, t: int = 32) -> list[Template]:
    """``r`` templates on a sqrt(r) x sqrt(r) grid.

    Origins are evenly spaced with a margin of ``t // 2`` from each border.
    The margin shrinks, down to 0, when the image is too small to fit the
    templates side by side inside it; a single template is centered.
    """
    src = as_array(img)
    h, w = src.shape
    g = math.isqrt(r)
    if r < 1 or g * g != r:
        raise ValueError(f"r must be a perfect square, got {r}")
    if h < t or w < t:
        raise ValueError(f"a {w}x{h} image cannot hold a {t}x{t} template")

    def origins(n):
        if g == 1:
            return [(n - t) // 2]
        margin = max(0, min(t // 2, (n - g * t) // 2))
        return np.rint(np.linspace(margin, n - t - margin, g)).astype(int).tolist()

    return [Template.extract(src, x, y, t) for y in origins(h) for x in origins(w)]


def matching_scores(source, targets, r: int = 9, t: int = 32) -> np.ndarray:
    """Best-match scores of templates from each source against its target.

    ``source`` and ``targets`` are paired lists of images (or single images).
    """
    if isinstance(source, (Image, np.ndarray)):
        source, targets = [source], [targets]
    scores = []
    for src, tgt in zip(source, targets, strict=True):
        scores.extend(max_match(tp, tgt) for tp in equispaced_templates(src, r, t))
    return np.array(scores)


@dataclass(frozen=True, eq=False)
class MatchDistribution:
    scores: np.ndarray = field(repr=False)
    bandwidth: float
    grid: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    @property
    def mean(self) -> float:
        """Mean of the estimated density (equal to the sample mean)."""
        return float(np.mean(self.scores))

    def to_csv(self) -> str:
        lines = ["m,density"] + [f"{m!r},{f!r}" for m, f in zip(self.grid, self.density)]
        return "\n".join(lines) + "\n"


def scott_bandwidth(scores) -> float:
    """``sigma_hat * N^(-1/5)`` with the unbiased sample standard deviation."""
    s = np.asarray(scores, dtype=np.float64)
    return float(np.std(s, ddof=1) * s.size ** (-1.0 / 5.0))


def kde(scores, eval_grid=None) -> MatchDistribution:
    """Gaussian kernel density estimate with Scott's bandwidth.

    Without ``eval_grid`` the density is evaluated on 512 points spanning the
    data range widened by five bandwidths on each side.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.size < 2 or np.std(s) == 0:
        raise DegenerateKdeError("KDE needs at least two distinct scores")
    h = scott_bandwidth(s)
    if eval_grid is None:
        eval_grid = np.linspace(s.min() - 5 * h, s.max() + 5 * h, 512)
    grid = np.asarray(eval_grid, dtype=np.float64)
    z = (grid[:, None] - s[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (s.size * h * math.sqrt(2.0 * math.pi))
    return MatchDistribution(s, h, grid, density)


# ---------------------------------------------------------------------------
# perception-distortion ranking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PdPoint:
    label: str
    perception: float
    distortion: float

    def __post_init__(self):
        for v in (self.perception, self.distortion):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{self.label}: coordinates must be finite and non-negative")

    @property
    def distance(self) -> float:
        return math.hypot(self.perception, self.distortion)


@dataclass(frozen=True)
class RankedPoint:
    rank: int
    point: PdPoint
    distance: float


def pd_rank(points) -> list[RankedPoint]:
    """Rank by Euclidean distance to the origin; ties by label."""
    points = list(points)
    if not points:
        raise ValueError("need at least one point to rank")
    ordered = sorted(points, key=lambda p: (p.distance, p.label))
    return [RankedPoint(i + 1, p, p.distance) for i, p in enumerate(ordered)]


def read_pd_csv(text: str) -> list[PdPoint]:
    """Parse ``label,perception,distortion`` rows (header required)."""
    reader = csv.DictReader(io.StringIO(text))
    missing = {"label", "perception", "distortion"} - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"rank CSV lacks columns: {sorted(missing)}")
    return [PdPoint(row["label"], float(row["perception"]), float(row["distortion"]))
            for row in reader]


def ranked_csv(ranked) -> str:
    lines = ["rank,label,perception,distortion,distance"]
    lines += [f"{r.rank},{r.point.label},{r.point.perception!r},{r.point.distortion!r},{r.distance!r}"
              for r in ranked]
    return "\n".join(lines) + "\n"
