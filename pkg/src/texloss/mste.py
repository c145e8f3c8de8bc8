"""Multi-scale texture representation over a grid of spatial offsets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import as_array
from .descriptors import DescriptorKind, UndefinedDescriptorError, descriptor
from .glcm import BinGrid, DegenerateGlcmError, Offset, glcm

DEFAULT_DISTANCES = (1.0, 3.0, 5.0, 7.0)
DEFAULT_ANGLES = (0.0, 45.0, 90.0, 135.0)


class OffsetError(ValueError):
    """A grid cell failed; carries the offending offset."""

    def __init__(self, offset: Offset, cause: Exception):
        super().__init__(f"offset (d={offset.d:g}, theta={offset.theta:g}): {cause}")
        self.offset = offset
        self.cause = cause


@dataclass(frozen=True)
class OffsetGrid:
    distances: tuple = DEFAULT_DISTANCES
    angles: tuple = DEFAULT_ANGLES

    def __post_init__(self):
        d = tuple(float(v) for v in self.distances)
        a = tuple(float(v) for v in self.angles)
        if not d or not a:
            raise ValueError("offset grid needs at least one distance and one angle")
        if len(set(d)) != len(d) or len(set(a)) != len(a):
            raise ValueError("distances and angles must be pairwise distinct")
        if min(d) <= 0:
            raise ValueError("distances must be positive")
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "angles", a)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.distances), len(self.angles)

    def offsets(self):
        """Row-major ``(i, j, Offset)`` triples."""
        for i, d in enumerate(self.distances):
            for j, theta in enumerate(self.angles):
                yield i, j, Offset(d, theta)


def _grid_csv(values, grid) -> str:
    lines = ["D," + ",".join(f"{d:g}" for d in grid.distances),
             "THETA," + ",".join(f"{a:g}" for a in grid.angles)]
    lines += [",".join(repr(float(v)) for v in row) for row in values]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class TextureRepr:
    """Descriptor values ``values[i, j]`` at offset ``(D[i], Theta[j])``."""

    values: np.ndarray = field(repr=False)
    grid: OffsetGrid
    kind: DescriptorKind

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("texture representation has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_csv(self) -> str:
        """Two header rows (distances, angles) followed by the p x q values."""
        return _grid_csv(self.values, self.grid)


@dataclass(frozen=True, eq=False)
class DeltaH:
    values: np.ndarray = field(repr=False)
    grid: OffsetGrid
    kind: DescriptorKind

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if np.any(v < 0):
            raise ValueError("error deviation entries must be non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_csv(self) -> str:
        return _grid_csv(self.values, self.grid)


def extract(img, grid: OffsetGrid, bins: BinGrid, kind=DescriptorKind.CONTRAST,
            mode: str = "soft") -> TextureRepr:
    x = as_array(img)
    kind = DescriptorKind.parse(kind)
    values = np.empty(grid.shape)
    for i, j, off in grid.offsets():
        try:
            values[i, j] = descriptor(glcm(x, off, bins, mode), kind)
        except (DegenerateGlcmError, UndefinedDescriptorError) as exc:
            raise OffsetError(off, exc) from exc
    return TextureRepr(values, grid, kind)


def delta(hx: TextureRepr, hy: TextureRepr) -> DeltaH:
    """Elementwise absolute difference of two representations."""
    if hx.grid != hy.grid or hx.kind != hy.kind:
        raise ValueError("texture representations differ in grid or descriptor kind")
    return DeltaH(np.abs(hx.values - hy.values), hx.grid, hx.kind)
