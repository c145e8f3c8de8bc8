"""Texture loss with exact pixel-space gradients, and a finite-difference checker.

The backward pass runs the forward chain in reverse: aggregation rule ->
absolute difference (subgradient 0 at 0) -> descriptor -> soft GLCM outer
products -> softmax-normalized Gaussian bin weights -> pixels.  The soft
assignment is computed once per image and shared by every offset, so each
pixel collects contributions both as an anchor and as a displaced partner.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .aggregation import AggregationRule, AttentionGrads, AttentionParams, aggregate_and_grad, attention_backward
from .core import as_array
from .descriptors import DescriptorKind, descriptor_and_grad
from .glcm import BinGrid, cooccurrence, cooccurrence_backward, soft_weights, soft_weights_backward
from .mste import OffsetGrid, TextureRepr, extract


class NonFiniteLossError(ArithmeticError):
    pass


@dataclass(frozen=True)
class LossResult:
    value: float
    grad: np.ndarray                     # same shape as the image
    per_kind: dict                       # DescriptorKind -> aggregated loss
    param_grads: AttentionGrads | None = None


class TextureLoss:
    """Multi-scale texture loss between an image and reference representations.

    Several descriptor kinds may be combined; their aggregated losses are
    summed.  ``params`` is required for the attention rule.
    """

    def __init__(self, grid: OffsetGrid = OffsetGrid(), bins: BinGrid | None = None,
                 kinds=(DescriptorKind.CONTRAST,), rule=AggregationRule.AVERAGE,
                 params: AttentionParams | None = None):
        if isinstance(kinds, (str, DescriptorKind)):
            kinds = (kinds,)
        self.grid = grid
        self.bins = bins if bins is not None else BinGrid.uniform(-1.0, 1.0, 8)
        self.kinds = tuple(DescriptorKind.parse(k) for k in kinds)
        self.rule = AggregationRule.parse(rule)
        if self.rule is AggregationRule.ATTENTION and params is None:
            raise ValueError("the attention rule needs AttentionParams")
        self.params = params

    def targets(self, reference) -> list[TextureRepr]:
        """Soft representations of the reference image, one per kind."""
        return [extract(reference, self.grid, self.bins, k, "soft") for k in self.kinds]

    def __call__(self, x, targets) -> float:
        return self.evaluate(x, targets).value

    def evaluate(self, x, targets, params: AttentionParams | None = None) -> LossResult:
        x = as_array(x)
        params = params if params is not None else self.params
        targets = _by_kind(targets, self.kinds, self.grid)
        w = soft_weights(x, self.bins)
        w_bar = np.zeros_like(w)
        total = 0.0
        per_kind = {}
        param_grads = None
        offsets = list(self.grid.offsets())
        for kind in self.kinds:
            h = np.empty(self.grid.shape)
            dh_dg = {}
            for i, j, off in offsets:
                h[i, j], dh_dg[i, j] = descriptor_and_grad(cooccurrence(w, off), kind)
            diff = h - targets[kind].values
            dev = np.abs(diff)
            if self.rule is AggregationRule.ATTENTION:
                value, dev_bar, pg = attention_backward(dev, params)
                param_grads = pg if param_grads is None else _add_grads(param_grads, pg)
            else:
                value, dev_bar = aggregate_and_grad(dev, self.rule)
            h_bar = dev_bar * np.sign(diff)
            for i, j, off in offsets:
                if h_bar[i, j] != 0.0:
                    cooccurrence_backward(w, off, h_bar[i, j] * dh_dg[i, j], w_bar)
            per_kind[kind] = value
            total += value
        if not np.isfinite(total):
            raise NonFiniteLossError(f"texture loss is not finite: {total}")
        grad = soft_weights_backward(x, self.bins, w, w_bar)
        return LossResult(float(total), grad, per_kind, param_grads)


def _by_kind(targets, kinds, grid) -> dict:
    if isinstance(targets, TextureRepr):
        targets = [targets]
    out = {t.kind: t for t in targets}
    for kind in kinds:
        if kind not in out:
            raise ValueError(f"no target representation for {kind.value}")
        if out[kind].grid != grid:
            raise ValueError("target representation was built on a different offset grid")
    return out


def _add_grads(a: AttentionGrads, b: AttentionGrads) -> AttentionGrads:
    return AttentionGrads(a.wq + b.wq, a.wk + b.wk, a.wv + b.wv, a.gamma + b.gamma)


def loss_and_grad(x, target_repr, grid: OffsetGrid, bins: BinGrid, kind=None, rule="average",
                  params: AttentionParams | None = None) -> tuple[float, np.ndarray]:
    """Texture loss of ``x`` against ``target_repr`` and its pixel gradient."""
    reprs = [target_repr] if isinstance(target_repr, TextureRepr) else list(target_repr)
    kinds = [kind] if kind is not None else [t.kind for t in reprs]
    result = TextureLoss(grid, bins, kinds, rule, params).evaluate(x, reprs)
    return result.value, result.grad


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradCheckReport:
    """Analytic vs central-difference gradient comparison.

    ``max_rel_err`` is the largest absolute deviation divided by the gradient
    scale ``max(|analytic|_inf, |numeric|_inf)``.  ``pointwise_rel_err`` divides
    each pixel by its own magnitude instead; it is dominated by O(h^2)
    truncation at pixels whose gradient is tiny, so it is reported but not
    used as the pass criterion.
    """

    max_abs_err: float
    max_rel_err: float
    worst_pixel: tuple  # (u, v): column, row of the largest absolute deviation
    step: float
    pointwise_rel_err: float = 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["worst_pixel"] = list(self.worst_pixel)
        return json.dumps(d)


def finite_diff_check(x, objective, step: float = 1e-4, grad=None) -> GradCheckReport:
    """Compare an analytic gradient against central differences pixel by pixel.

    ``objective(x)`` returns the loss or ``(loss, grad)``; ``grad`` overrides
    the analytic gradient.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.array(as_array(x), dtype=np.float64)

    def value(arr):
        out = objective(arr)
        out = out[0] if isinstance(out, tuple) else out
        if not np.isfinite(out):
            raise NonFiniteLossError(f"objective is not finite while probing: {out}")
        return float(out)

    if grad is None:
        out = objective(x)
        if not isinstance(out, tuple):
            raise ValueError("objective returned no gradient and none was supplied")
        grad = out[1]
    analytic = np.asarray(grad, dtype=np.float64)
    if analytic.shape != x.shape:
        raise ValueError(f"gradient shape {analytic.shape} != image shape {x.shape}")

    numeric = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        up = value(x)
        x[idx] = orig - step
        down = value(x)
        x[idx] = orig
        numeric[idx] = (up - down) / (2.0 * step)

    abs_err = np.abs(analytic - numeric)
    magnitude = np.maximum(np.abs(analytic), np.abs(numeric))
    scale = magnitude.max()
    worst = np.unravel_index(int(np.argmax(abs_err)), x.shape)
    max_abs = float(abs_err.max())
    if scale > 0:
        rel = max_abs / scale
        pointwise = float(np.max(np.divide(abs_err, magnitude, out=np.zeros_like(abs_err),
                                           where=magnitude > 0)))
    else:
        rel = pointwise = 0.0
    return GradCheckReport(max_abs, float(rel), (int(worst[1]), int(worst[0])),
                           float(step), pointwise)
