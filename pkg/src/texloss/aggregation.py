"""Reduce an error-deviation matrix to a scalar loss.

Static rules are max, mean and Frobenius norm.  The dynamic rule is a
single-head self-attention layer over the ``p*q`` grid positions: the matrix
enters as a one-channel map, 1x1 convolutions (no bias) produce queries and
keys with ``cq`` channels and a one-channel value, and the output
``gamma * A @ V + dh`` is summed.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .synthetic import rng_for


class NumericOverflowError(ArithmeticError):
    pass


class AggregationRule(str, enum.Enum):
    MAX = "max"
    AVERAGE = "average"
    FROBENIUS = "frobenius"
    ATTENTION = "attention"

    @classmethod
    def parse(cls, value) -> AggregationRule:
        if isinstance(value, cls):
            return value
        aliases = {"avg": "average", "mean": "average", "frob": "frobenius", "att": "attention"}
        key = str(value).lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            names = ", ".join(r.value for r in cls)
            raise ValueError(f"unknown aggregation rule {value!r}; expected one of {names}") from None

    @property
    def is_static(self) -> bool:
        return self is not AggregationRule.ATTENTION


@dataclass(frozen=True, eq=False)
class AttentionParams:
    wq: np.ndarray
    wk: np.ndarray
    wv: float
    gamma: float = 0.0

    def __post_init__(self):
        wq = np.array(self.wq, dtype=np.float64).ravel()
        wk = np.array(self.wk, dtype=np.float64).ravel()
        if wq.size < 1 or wq.shape != wk.shape:
            raise ValueError(f"query/key weights must share a positive length, got {wq.size}, {wk.size}")
        for name, v in (("wq", wq), ("wk", wk), ("wv", self.wv), ("gamma", self.gamma)):
            if not np.all(np.isfinite(v)):
                raise ValueError(f"attention parameter {name} is not finite")
        wq.setflags(write=False)
        wk.setflags(write=False)
        object.__setattr__(self, "wq", wq)
        object.__setattr__(self, "wk", wk)
        object.__setattr__(self, "wv", float(self.wv))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def cq(self) -> int:
        return self.wq.size

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.wq, self.wk, [self.wv, self.gamma]])

    @classmethod
    def from_vector(cls, vec) -> AttentionParams:
        vec = np.asarray(vec, dtype=np.float64)
        cq = (vec.size - 2) // 2
        return cls(vec[:cq], vec[cq:2 * cq], vec[-2], vec[-1])

    def to_json(self) -> str:
        return json.dumps({"cq": self.cq, "wq": self.wq.tolist(), "wk": self.wk.tolist(),
                           "wv": self.wv, "gamma": self.gamma})

    @classmethod
    def from_json(cls, text: str) -> AttentionParams:
        obj = json.loads(text)
        params = cls(obj["wq"], obj["wk"], obj["wv"], obj["gamma"])
        if params.cq != int(obj["cq"]):
            raise ValueError(f"cq={obj['cq']} disagrees with weight length {params.cq}")
        return params

    def __eq__(self, other):
        if not isinstance(other, AttentionParams):
            return NotImplemented
        return bool(np.array_equal(self.as_vector(), other.as_vector()))


@dataclass(frozen=True, eq=False)
class AttentionTrace:
    attention: np.ndarray = field(repr=False)  # (s, s), rows sum to one
    output: np.ndarray = field(repr=False)     # dh' with the input's shape


@dataclass(frozen=True, eq=False)
class AttentionGrads:
    wq: np.ndarray
    wk: np.ndarray
    wv: float
    gamma: float

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.wq, self.wk, [self.wv, self.gamma]])


def init_attention(cq: int = 1, seed: int = 0) -> AttentionParams:
    """Uniform(-1/sqrt(cq), 1/sqrt(cq)) weights and gamma = 0."""
    if cq < 1:
        raise ValueError("cq must be at least 1")
    bound = 1.0 / math.sqrt(cq)
    rng = rng_for(seed)
    wq = rng.uniform(-bound, bound, cq)
    wk = rng.uniform(-bound, bound, cq)
    wv = rng.uniform(-bound, bound)
    return AttentionParams(wq, wk, wv, 0.0)


def _values(dh) -> np.ndarray:
    return np.asarray(getattr(dh, "values", dh), dtype=np.float64)


# ---------------------------------------------------------------------------
# static rules
# ---------------------------------------------------------------------------

def aggregate_static(dh, rule) -> float:
    return static_and_grad(dh, rule)[0]


def static_and_grad(dh, rule) -> tuple[float, np.ndarray]:
    """Loss value and its derivative with respect to each entry of ``dh``.

    Max routes the gradient to the first maximal cell in row-major order;
    the Frobenius norm has zero gradient at the zero matrix.
    """
    v = _values(dh)
    rule = AggregationRule.parse(rule)
    grad = np.zeros_like(v)
    if rule is AggregationRule.MAX:
        k = int(np.argmax(v))
        grad.flat[k] = 1.0
        return float(v.flat[k]), grad
    if rule is AggregationRule.AVERAGE:
        grad[...] = 1.0 / v.size
        return float(v.mean()), grad
    if rule is AggregationRule.FROBENIUS:
        norm = float(np.sqrt(np.sum(v * v)))
        if norm > 0:
            grad = v / norm
        return norm, grad
    raise ValueError("attention aggregation needs AttentionParams; use aggregate_attention")


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

def _softmax_rows(s):
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _attention_forward(v, params):
    x = v.ravel()                     # row-major flatten, s positions
    with np.errstate(over="ignore", invalid="ignore"):
        q = np.outer(params.wq, x)    # (cq, s)
        k = np.outer(params.wk, x)    # (cq, s)
        val = params.wv * x           # (s,)
        scores = q.T @ k              # (s, s)
        a = _softmax_rows(scores)
        av = a @ val
        out = params.gamma * av + x
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(out))):
        raise NumericOverflowError("attention aggregation produced non-finite values")
    return x, q, k, val, a, av, out


def aggregate_attention(dh, params: AttentionParams) -> tuple[float, AttentionTrace]:
    v = _values(dh)
    *_, a, _, out = _attention_forward(v, params)
    return float(out.sum()), AttentionTrace(a, out.reshape(v.shape))


def attention_backward(dh, params: AttentionParams):
    """Loss, gradient with respect to ``dh`` and gradients of the parameters."""
    v = _values(dh)
    x, q, k, val, a, av, out = _attention_forward(v, params)
    g = params.gamma
    # L = sum(gamma * A @ val + x)
    a_bar = g * np.broadcast_to(val, a.shape)          # dL/dA[p, r] = gamma * val[r]
    val_bar = g * a.sum(axis=0)
    s_bar = a * (a_bar - np.sum(a * a_bar, axis=1, keepdims=True))
    q_bar = k @ s_bar.T                                 # scores = q^T k
    k_bar = q @ s_bar
    x_bar = 1.0 + params.wv * val_bar + params.wq @ q_bar + params.wk @ k_bar
    grads = AttentionGrads(wq=q_bar @ x, wk=k_bar @ x, wv=float(val_bar @ x),
                           gamma=float(av.sum()))
    return float(out.sum()), x_bar.reshape(v.shape), grads


def attention_param_gradients(dh, params: AttentionParams) -> AttentionGrads:
    return attention_backward(dh, params)[2]


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def aggregate(dh, rule, params: AttentionParams | None = None) -> float:
    return aggregate_and_grad(dh, rule, params)[0]


def aggregate_and_grad(dh, rule, params: AttentionParams | None = None):
    rule = AggregationRule.parse(rule)
    if rule is AggregationRule.ATTENTION:
        if params is None:
            raise ValueError("attention aggregation needs AttentionParams")
        value, grad, _ = attention_backward(dh, params)
        return value, grad
    return static_and_grad(dh, rule)
