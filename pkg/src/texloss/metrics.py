"""Paired image-quality metrics and the contrast-to-noise ratio."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d, correlate2d

from .core import Image, as_array


def _pair(a, b):
    x, y = as_array(a), as_array(b)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def mse(a, b) -> float:
    x, y = _pair(a, b)
    return float(np.mean((x - y) ** 2))


def psnr(a, b, peak: str | float = "max") -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical.

    ``a`` is the denoised image.  ``peak="max"`` uses its observed maximum,
    ``"range"`` the width of its value range, and a number is used as is.
    """
    x, _ = _pair(a, b)
    err = mse(a, b)
    if peak == "max":
        top = float(x.max())
    elif peak == "range":
        if not isinstance(a, Image):
            raise ValueError("peak='range' needs an Image with a value range")
        top = a.value_range.width
    else:
        top = float(peak)
    if err == 0:
        return float("inf")
    return float(10.0 * np.log10(top * top / err))


@dataclass(frozen=True)
class SsimParams:
    """SSIM stabilizers and window.

    ``c1``/``c2`` default to ``(0.01 L)^2`` and ``(0.03 L)^2`` with ``L`` the
    value-range width.  ``window`` is ``"gaussian"`` (sliding, ``size`` and
    ``sigma``; shrunk to the largest odd size that fits the image) or
    ``"global"`` (whole-image statistics).
    """

    c1: float | None = None
    c2: float | None = None
    window: str = "gaussian"
    size: int = 11
    sigma: float = 1.5

    def __post_init__(self):
        if self.window not in ("gaussian", "global"):
            raise ValueError(f"window must be 'gaussian' or 'global', got {self.window!r}")
        for c in (self.c1, self.c2):
            if c is not None and not c > 0:
                raise ValueError("SSIM stabilizers must be positive")

    def constants(self, data_range: float) -> tuple[float, float]:
        c1 = self.c1 if self.c1 is not None else (0.01 * data_range) ** 2
        c2 = self.c2 if self.c2 is not None else (0.03 * data_range) ** 2
        return c1, c2

    def kernel(self, shape) -> np.ndarray:
        if self.window == "global":
            return np.full(shape, 1.0 / (shape[0] * shape[1]))
        size = min(self.size, shape[0], shape[1])
        if size % 2 == 0:
            size -= 1
        r = np.arange(size) - size // 2
        g = np.exp(-(r ** 2) / (2.0 * self.sigma ** 2))
        k = np.outer(g, g)
        return k / k.sum()


def _data_range(a, b, data_range):
    if data_range is not None:
        return float(data_range)
    for img in (a, b):
        if isinstance(img, Image):
            return img.value_range.width
    raise ValueError("data_range is required for plain arrays")


def ssim_and_grad(a, b, params: SsimParams = SsimParams(), data_range=None,
                  with_grad: bool = True):
    """Mean SSIM and (optionally) its gradient with respect to ``a``."""
    x, y = _pair(a, b)
    c1, c2 = params.constants(_data_range(a, b, data_range))
    k = params.kernel(x.shape)

    def filt(z):
        return correlate2d(z, k, mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    exx, eyy, exy = filt(x * x), filt(y * y), filt(x * y)
    var_x, var_y = exx - mu_x ** 2, eyy - mu_y ** 2
    cov = exy - mu_x * mu_y
    lum_num, lum_den = 2.0 * mu_x * mu_y + c1, mu_x ** 2 + mu_y ** 2 + c1
    cs_num, cs_den = 2.0 * cov + c2, var_x + var_y + c2
    smap = (lum_num * cs_num) / (lum_den * cs_den)
    value = float(smap.mean())
    if not with_grad:
        return value, None

    w = 1.0 / smap.size
    d_mu = w * (2.0 * mu_y * cs_num / (lum_den * cs_den) - smap * 2.0 * mu_x / lum_den)
    d_var = w * (-smap / cs_den)
    d_cov = w * (2.0 * lum_num / (lum_den * cs_den))
    # moments in terms of filtered raw products
    g_mu = d_mu - 2.0 * mu_x * d_var - mu_y * d_cov

    def filt_t(g):
        return convolve2d(g, k, mode="full")

    grad = filt_t(g_mu) + 2.0 * x * filt_t(d_var) + y * filt_t(d_cov)
    return value, grad


def ssim(a, b, params: SsimParams = SsimParams(), data_range=None) -> float:
    return ssim_and_grad(a, b, params, data_range, with_grad=False)[0]


def cnr(s_a: float, s_b: float, sigma_n: float) -> float:
    """Contrast-to-noise ratio ``|S_A - S_B| / sigma_N``."""
    if not sigma_n > 0:
        raise ValueError(f"noise standard deviation must be positive, got {sigma_n}")
    return abs(s_a - s_b) / sigma_n


def snr(signal: float, sigma_n: float) -> float:
    if not sigma_n > 0:
        raise ValueError(f"noise standard deviation must be positive, got {sigma_n}")
    return signal / sigma_n


def paired_metrics(denoised, reference, params: SsimParams = SsimParams()) -> dict:
    return {"mse": mse(denoised, reference), "psnr": psnr(denoised, reference),
            "ssim": ssim(denoised, reference, params)}
