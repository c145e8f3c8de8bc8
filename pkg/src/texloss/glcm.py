"""Gray-level co-occurrence matrices, counted (hard) or soft-binned.

The soft variant assigns each pixel to every bin with normalized Gaussian
weights and accumulates outer products of the anchor and displaced pixels'
weight vectors, which makes the matrix a smooth function of the pixel
values.  ``soft_glcm_backward`` carries a gradient on the matrix entries back
to the pixels.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Image, as_array


class DegenerateGlcmError(ValueError):
    """The offset leaves no in-image pixel pair to count."""


class NumericallyDegenerateError(ArithmeticError):
    pass


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class Offset:
    """Spatial offset of ``d`` pixels at angle ``theta`` degrees.

    Column displacement is ``round(d cos theta)``, row displacement
    ``round(d sin theta)``, both rounded half away from zero.
    """

    d: float
    theta: float

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"offset distance must be positive, got {self.d}")

    @property
    def displacement(self) -> tuple[int, int]:
        """``(du, dv)``: column and row steps."""
        rad = math.radians(self.theta)
        return (_round_half_away(self.d * math.cos(rad)),
                _round_half_away(self.d * math.sin(rad)))


@dataclass(frozen=True, eq=False)
class BinGrid:
    """Bin centers and the soft-assignment standard deviation.

    ``sigma`` is in the same units as ``centers``.
    """

    centers: np.ndarray
    sigma: float = 0.5

    def __post_init__(self):
        c = np.array(self.centers, dtype=np.float64).ravel()
        if c.size < 2:
            raise ValueError("a bin grid needs at least two bins")
        if np.any(np.diff(c) <= 0):
            raise ValueError("bin centers must be strictly increasing")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @classmethod
    def integer(cls, n: int, sigma: float = 0.5) -> BinGrid:
        """Centers 0, 1, ..., n-1."""
        return cls(np.arange(n, dtype=np.float64), sigma)

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int, sigma_bins: float = 0.5) -> BinGrid:
        """``n`` centers spanning ``[lo, hi]``; sigma given in bin widths."""
        centers = np.linspace(lo, hi, n)
        return cls(centers, sigma_bins * (centers[1] - centers[0]))

    @property
    def n(self) -> int:
        return self.centers.size

    def __eq__(self, other):
        if not isinstance(other, BinGrid):
            return NotImplemented
        return self.sigma == other.sigma and np.array_equal(self.centers, other.centers)

    def __hash__(self):
        return hash((self.centers.tobytes(), self.sigma))


@dataclass(frozen=True, eq=False)
class Glcm:
    entries: np.ndarray
    offset: Offset

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def to_csv(self) -> str:
        return "\n".join(",".join(repr(float(v)) for v in row) for row in self.entries) + "\n"

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "d": self.offset.d, "theta": self.offset.theta,
                           "entries": self.entries.tolist()})


@dataclass(frozen=True, eq=False)
class SoftAssignment:
    """Per-pixel bin weights, shape ``(N, n)`` in row-major pixel order."""

    weights: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# pair geometry
# ---------------------------------------------------------------------------

def pair_slices(shape, offset: Offset):
    """Slices selecting anchor pixels and their displaced partners.

    Returns ``(anchor, partner)`` index tuples so that ``x[anchor]`` and
    ``x[partner]`` line up pair by pair; both are empty when no pair fits.
    """
    h, w = shape
    du, dv = offset.displacement

    def span(n, step):
        lo, hi = max(0, -step), min(n, n - step)
        if hi <= lo:
            return slice(0, 0), slice(0, 0)
        return slice(lo, hi), slice(lo + step, hi + step)

    rows_a, rows_b = span(h, dv)
    cols_a, cols_b = span(w, du)
    return (rows_a, cols_a), (rows_b, cols_b)


def shift_image(img: Image, off: Offset):
    """Displaced copy ``x_s(u, v) = x(u + du, v + dv)`` and its validity mask.

    ``valid`` is True where the displaced coordinate lies inside the image;
    elsewhere ``x_s`` holds the range floor and must not be counted.
    """
    x = img.data
    shifted = np.full_like(x, img.value_range.lo)
    valid = np.zeros(x.shape, dtype=bool)
    anchor, partner = pair_slices(x.shape, off)
    shifted[anchor] = x[partner]
    valid[anchor] = True
    return img.with_data(shifted), valid


# ---------------------------------------------------------------------------
# hard GLCM
# ---------------------------------------------------------------------------

def nearest_bin(x, bins: BinGrid) -> np.ndarray:
    """Index of the closest bin center; ties go to the lower index."""
    x = np.asarray(x, dtype=np.float64)
    c = bins.centers
    hi = np.clip(np.searchsorted(c, x), 1, c.size - 1)
    lo = hi - 1
    return np.where(x - c[lo] <= c[hi] - x, lo, hi)


def hard_glcm(img, off: Offset, bins: BinGrid) -> Glcm:
    x = as_array(img)
    anchor, partner = pair_slices(x.shape, off)
    a = nearest_bin(x[anchor], bins).ravel()
    if a.size == 0:
        raise DegenerateGlcmError(f"no pixel pairs for offset {off} in a {x.shape} image")
    b = nearest_bin(x[partner], bins).ravel()
    n = bins.n
    counts = np.bincount(a * n + b, minlength=n * n).astype(np.float64)
    return Glcm(counts.reshape(n, n) / a.size, off)


# ---------------------------------------------------------------------------
# soft GLCM
# ---------------------------------------------------------------------------

def soft_weights(x, bins: BinGrid) -> np.ndarray:
    """Normalized Gaussian bin weights, shape ``x.shape + (n,)``."""
    x = np.asarray(x, dtype=np.float64)
    # w holds the scaled squared distance, then its max-shifted exponential
    w = x[..., None] - bins.centers
    w *= 1.0 / (math.sqrt(2.0) * bins.sigma)
    w *= w
    w -= w.min(axis=-1, keepdims=True)
    np.negative(w, out=w)
    np.exp(w, out=w)
    total = w.sum(axis=-1, keepdims=True)
    # the shifted largest term is exactly 1, so total >= 1 unless inputs are non-finite
    if not np.all(np.isfinite(total)):
        raise NumericallyDegenerateError("soft assignment produced non-finite weights")
    w /= total
    return w


def soft_assign(img, bins: BinGrid) -> SoftAssignment:
    return SoftAssignment(soft_weights(as_array(img), bins).reshape(-1, bins.n))


def cooccurrence(weights: np.ndarray, off: Offset) -> np.ndarray:
    """Pair-averaged outer products of an ``(h, w, n)`` weight field."""
    anchor, partner = pair_slices(weights.shape[:2], off)
    n = weights.shape[-1]
    wa = weights[anchor].reshape(-1, n)
    if wa.shape[0] == 0:
        raise DegenerateGlcmError(f"no pixel pairs for offset {off} in a {weights.shape[:2]} image")
    wb = weights[partner].reshape(-1, n)
    g = wa.T @ wb
    g /= wa.shape[0]
    return g


def cooccurrence_backward(weights: np.ndarray, off: Offset, g_bar: np.ndarray,
                          out: np.ndarray) -> None:
    """Accumulate d(loss)/d(weights) into ``out`` given d(loss)/d(G)."""
    anchor, partner = pair_slices(weights.shape[:2], off)
    n = weights.shape[-1]
    wa = weights[anchor]
    wb = weights[partner]
    count = wa.shape[0] * wa.shape[1]
    # G = wa^T wb / P  =>  wa_bar = wb G_bar^T / P,  wb_bar = wa G_bar / P
    out[anchor] += (wb.reshape(-1, n) @ g_bar.T).reshape(wa.shape) / count
    out[partner] += (wa.reshape(-1, n) @ g_bar).reshape(wb.shape) / count


def soft_weights_backward(x, bins: BinGrid, weights: np.ndarray,
                          w_bar: np.ndarray) -> np.ndarray:
    """Pull a gradient on the weight field back to the pixels."""
    x = np.asarray(x, dtype=np.float64)
    # softmax Jacobian-vector product
    z_bar = weights * (w_bar - np.sum(weights * w_bar, axis=-1, keepdims=True))
    dz_dx = -(x[..., None] - bins.centers) / bins.sigma ** 2
    return np.sum(z_bar * dz_dx, axis=-1)


def soft_glcm(img, off: Offset, bins: BinGrid) -> Glcm:
    """Soft co-occurrence matrix, normalized by the number of valid pairs."""
    x = as_array(img)
    return Glcm(cooccurrence(soft_weights(x, bins), off), off)


def soft_glcm_backward(img, off: Offset, bins: BinGrid, g_bar) -> np.ndarray:
    """Pixel gradient of ``sum(g_bar * soft_glcm(img).entries)``."""
    x = as_array(img)
    w = soft_weights(x, bins)
    w_bar = np.zeros_like(w)
    cooccurrence_backward(w, off, np.asarray(g_bar, dtype=np.float64), w_bar)
    return soft_weights_backward(x, bins, w, w_bar)


def glcm(img, off: Offset, bins: BinGrid, mode: str = "soft") -> Glcm:
    if mode == "soft":
        return soft_glcm(img, off, bins)
    if mode == "hard":
        return hard_glcm(img, off, bins)
    raise ValueError(f"mode must be 'soft' or 'hard', got {mode!r}")
