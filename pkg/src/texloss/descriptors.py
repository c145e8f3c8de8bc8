"""Haralick descriptors of a co-occurrence matrix and their gradients.

Every descriptor is a weighted sum ``sum_ij f(i, j) G(i, j)`` where ``i`` and
``j`` are 0-based bin ordinals (not bin-center values).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import as_array
from .glcm import BinGrid, Glcm, Offset, glcm


class UndefinedDescriptorError(ValueError):
    """Correlation of a GLCM whose marginals have zero variance."""


class DescriptorKind(str, enum.Enum):
    CONTRAST = "contrast"
    HOMOGENEITY = "homogeneity"
    CORRELATION = "correlation"
    ASM = "asm"

    @classmethod
    def parse(cls, value) -> DescriptorKind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown descriptor {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class GlcmMarginals:
    mu_i: float
    mu_j: float
    var_i: float
    var_j: float


_VAR_FLOOR = 1e-15


def _entries(g) -> np.ndarray:
    return g.entries if isinstance(g, Glcm) else np.asarray(g, dtype=np.float64)


def _ordinals(n):
    idx = np.arange(n, dtype=np.float64)
    return idx[:, None], idx[None, :]


def marginals(g) -> GlcmMarginals:
    G = _entries(g)
    i, j = _ordinals(G.shape[0])
    mu_i = float(np.sum(i * G))
    mu_j = float(np.sum(j * G))
    var_i = float(np.sum((i - mu_i) ** 2 * G))
    var_j = float(np.sum((j - mu_j) ** 2 * G))
    return GlcmMarginals(mu_i, mu_j, max(var_i, 0.0), max(var_j, 0.0))


def weight_matrix(n: int, kind) -> np.ndarray:
    """``f(i, j)`` for the descriptors that are linear in G."""
    kind = DescriptorKind.parse(kind)
    i, j = _ordinals(n)
    if kind is DescriptorKind.CONTRAST:
        return (i - j) ** 2
    if kind is DescriptorKind.HOMOGENEITY:
        return 1.0 / (1.0 + (i - j) ** 2)
    raise ValueError(f"{kind.value} is not linear in the GLCM")


def _correlation(G, with_grad=False):
    n = G.shape[0]
    i, j = _ordinals(n)
    mu_i, mu_j = np.sum(i * G), np.sum(j * G)
    di, dj = i - mu_i, j - mu_j
    var_i, var_j = np.sum(di ** 2 * G), np.sum(dj ** 2 * G)
    if min(var_i, var_j) <= _VAR_FLOOR:
        raise UndefinedDescriptorError(
            f"correlation undefined: marginal variances ({var_i:.3g}, {var_j:.3g})")
    cov = np.sum(di * dj * G)
    norm = np.sqrt(var_i * var_j)
    value = cov / norm
    if not with_grad:
        return value
    # means depend on G; the sums below vanish when G sums to one
    s_i, s_j = np.sum(di * G), np.sum(dj * G)
    d_cov = di * dj - i * s_j - j * s_i
    d_var_i = di ** 2 - 2.0 * i * s_i
    d_var_j = dj ** 2 - 2.0 * j * s_j
    grad = d_cov / norm - 0.5 * value * (d_var_i / var_i + d_var_j / var_j)
    return value, grad


def descriptor(g, kind) -> float:
    kind = DescriptorKind.parse(kind)
    G = _entries(g)
    if kind is DescriptorKind.ASM:
        return float(np.sum(G * G))
    if kind is DescriptorKind.CORRELATION:
        return float(_correlation(G))
    return float(np.sum(weight_matrix(G.shape[0], kind) * G))


def descriptor_and_grad(g, kind) -> tuple[float, np.ndarray]:
    """Descriptor value and its derivative with respect to each GLCM entry."""
    kind = DescriptorKind.parse(kind)
    G = _entries(g)
    if kind is DescriptorKind.ASM:
        return float(np.sum(G * G)), 2.0 * G
    if kind is DescriptorKind.CORRELATION:
        value, grad = _correlation(G, with_grad=True)
        return float(value), grad
    f = weight_matrix(G.shape[0], kind)
    return float(np.sum(f * G)), f


@dataclass(frozen=True)
class SensitivityReport:
    """Per-offset descriptor differences and their offset averages."""

    rows: list  # (kind, d, theta, |h(noisy) - h(clean)|)

    @property
    def mean_delta(self) -> dict:
        out = {}
        for kind in DescriptorKind:
            vals = [v for k, _, _, v in self.rows if k is kind]
            if vals:
                out[kind] = float(np.mean(vals))
        return out

    def ranking(self) -> list:
        """Descriptor kinds by decreasing mean difference."""
        means = self.mean_delta
        return sorted(means, key=lambda k: -means[k])

    def to_csv(self) -> str:
        lines = ["descriptor,d,theta,value"]
        lines += [f"{k.value},{d:g},{t:g},{v!r}" for k, d, t, v in self.rows]
        return "\n".join(lines) + "\n"


def noise_sensitivity_report(clean, noisy, bins: BinGrid, offsets,
                             kinds=tuple(DescriptorKind), mode: str = "soft") -> SensitivityReport:
    clean, noisy = as_array(clean), as_array(noisy)
    if clean.shape != noisy.shape:
        raise ValueError(f"shape mismatch: {clean.shape} vs {noisy.shape}")
    rows = []
    for off in offsets:
        off = off if isinstance(off, Offset) else Offset(*off)
        g_clean = glcm(clean, off, bins, mode)
        g_noisy = glcm(noisy, off, bins, mode)
        for kind in map(DescriptorKind.parse, kinds):
            delta = abs(descriptor(g_noisy, kind) - descriptor(g_clean, kind))
            rows.append((kind, off.d, off.theta, delta))
    return SensitivityReport(rows)
