"""Bi-directional cascade supervision and the class-balanced cross-entropy."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import expit

from ..errors import TensorUsageError
from ..network.bdcn import BdcnOutputs
from ..tensor import Function, Tensor, add_n, scale

logger = logging.getLogger(__name__)

EPSILON = 1e-7

CascadeMode = Literal["bidirectional", "s2d", "d2s", "none"]


@dataclass(frozen=True)
class ConsensusGT:
    """Averaged annotator map Y in [0, 1] with the gamma band used for class membership."""

    values: np.ndarray
    gamma: float = 0.3

    def __post_init__(self):
        if self.values.ndim != 2:
            raise TensorUsageError(f"Consensus GT must be a 2-D map, got shape {self.values.shape}")
        if not 0 < self.gamma < 1:
            raise TensorUsageError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.values.size and (self.values.min() < 0 or self.values.max() > 1):
            raise TensorUsageError("Consensus GT values must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def positive_mask(self) -> np.ndarray:
        return self.values > self.gamma

    @property
    def negative_mask(self) -> np.ndarray:
        return self.values == 0


@dataclass
class SupervisionTarget:
    """One head's target map with the pixels counted as positive and negative."""

    values: np.ndarray
    positive: np.ndarray
    negative: np.ndarray

    @classmethod
    def from_residual(cls, residual: np.ndarray, gt: ConsensusGT) -> "SupervisionTarget":
        values = np.clip(residual, 0.0, 1.0)
        return cls(values=values, positive=values > gt.gamma, negative=gt.negative_mask)

    @classmethod
    def raw(cls, gt: ConsensusGT) -> "SupervisionTarget":
        return cls(values=gt.values.astype(np.float64), positive=gt.positive_mask, negative=gt.negative_mask)


@dataclass
class CascadeTargets:
    """Per-block targets for the shallow-to-deep and deep-to-shallow heads."""

    s2d: list[SupervisionTarget]
    d2s: list[SupervisionTarget]

    @property
    def num_blocks(self) -> int:
        return len(self.s2d)


def _head_maps(heads: Sequence[Tensor], shape: tuple[int, int]) -> list[np.ndarray]:
    maps = []
    for t in heads:
        if t.shape[0] != 1 or t.shape[1] != 1:
            raise TensorUsageError(f"Cascade targets are built per sample; got prediction shape {t.shape}")
        if t.shape[2:] != shape:
            raise TensorUsageError(f"Prediction {t.shape[2:]} and GT {shape} differ in size")
        maps.append(t.data[0, 0].astype(np.float64))
    return maps


def build_cascade_targets(gt: ConsensusGT, outputs: BdcnOutputs, mode: CascadeMode = "bidirectional") -> CascadeTargets:
    """Residual targets from the current, detached side predictions.

    s2d head s learns Y minus what heads 1..s-1 already predict; d2s head s learns
    Y minus what heads s+1..S predict. Residuals are clamped to [0, 1]. ``mode``
    selects which directions cascade; the others are supervised by Y directly.
    """
    y = gt.values.astype(np.float64)
    s2d_maps = _head_maps(outputs.side_s2d, gt.shape)
    d2s_maps = _head_maps(outputs.side_d2s, gt.shape)
    n = len(s2d_maps)

    if mode in ("bidirectional", "s2d"):
        s2d = []
        propagated = np.zeros_like(y)
        for p in s2d_maps:
            s2d.append(SupervisionTarget.from_residual(y - propagated, gt))
            propagated += p
    else:
        s2d = [SupervisionTarget.raw(gt) for _ in range(n)]

    if mode in ("bidirectional", "d2s"):
        d2s: list[SupervisionTarget] = [None] * n  # type: ignore[list-item]
        propagated = np.zeros_like(y)
        for k in reversed(range(n)):
            d2s[k] = SupervisionTarget.from_residual(y - propagated, gt)
            propagated += d2s_maps[k]
    else:
        d2s = [SupervisionTarget.raw(gt) for _ in range(n)]

    return CascadeTargets(s2d=s2d, d2s=d2s)


def class_weights(n_pos: int, n_neg: int, lam: float) -> tuple[float, float]:
    """alpha = lam * |Y+| / |Y|, beta = |Y-| / |Y|; both zero when nothing is counted."""
    total = n_pos + n_neg
    if total == 0:
        return 0.0, 0.0
    return lam * n_pos / total, n_neg / total


class BalancedBCE(Function):
    """Class-balanced cross-entropy of an edge map against a (soft) target.

    Negatives contribute -alpha * log(1 - p); positives -beta * [t log p + (1 - t) log(1 - p)].
    Pixels in neither mask contribute nothing. With ``from_logits`` the input is the
    pre-sigmoid map and the loss stays differentiable where float32 probabilities saturate.
    """

    def forward(self, pred: np.ndarray, target: SupervisionTarget, lam: float, from_logits: bool = False) -> np.ndarray:
        if pred.shape[-2:] != target.values.shape or pred.size != target.values.size:
            raise TensorUsageError(f"Prediction {pred.shape} and target {target.values.shape} differ in size")
        x = pred.reshape(target.values.shape).astype(np.float64)
        if from_logits:
            p = expit(x)
            log_p, log_q = -np.logaddexp(0.0, -x), -np.logaddexp(0.0, x)
            self.inside = None
        else:
            self.inside = (x > EPSILON) & (x < 1 - EPSILON)
            p = np.clip(x, EPSILON, 1 - EPSILON)
            log_p, log_q = np.log(p), np.log1p(-p)
        t = target.values
        pos, neg = target.positive, target.negative
        alpha, beta = class_weights(int(pos.sum()), int(neg.sum()), lam)

        self.alpha, self.beta = alpha, beta
        self.p, self.t, self.pos, self.neg = p, t, pos, neg
        self.pred_shape, self.dtype = pred.shape, pred.dtype

        neg_term = log_q[neg].sum()
        pos_term = (t[pos] * log_p[pos] + (1 - t[pos]) * log_q[pos]).sum()
        return np.asarray(-alpha * neg_term - beta * pos_term, dtype=pred.dtype)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray | None, ...]:
        p, t, pos, neg = self.p, self.t, self.pos, self.neg
        g = np.zeros_like(p)
        if self.inside is None:
            g[neg] = self.alpha * p[neg]
            g[pos] = self.beta * (p[pos] - t[pos])
        else:
            g[neg] = self.alpha / (1 - p[neg])
            g[pos] = -self.beta * (t[pos] / p[pos] - (1 - t[pos]) / (1 - p[pos]))
            g *= self.inside
        g *= float(grad)
        return (g.reshape(self.pred_shape).astype(self.dtype),)


def balanced_bce(
    pred: Tensor,
    target: SupervisionTarget | ConsensusGT,
    lam: float = 1.1,
    from_logits: bool = False,
) -> Tensor:
    if lam <= 0:
        raise TensorUsageError(f"lambda must be positive, got {lam}")
    if isinstance(target, ConsensusGT):
        target = SupervisionTarget.raw(target)
    return BalancedBCE.apply(pred, target=target, lam=lam, from_logits=from_logits)


@dataclass
class LossBreakdown:
    """The training loss plus its parts as plain floats for logging."""

    total: Tensor
    side: float
    fuse: float
    terms: dict[str, float] = field(default_factory=dict)

    def nonfinite_terms(self) -> list[str]:
        return [name for name, value in self.terms.items() if not math.isfinite(value)]


def total_loss(
    outputs: BdcnOutputs,
    targets: CascadeTargets,
    gt: ConsensusGT,
    w_side: float = 0.5,
    w_fuse: float = 1.1,
    lam: float = 1.1,
) -> LossBreakdown:
    """w_side * sum of the 2S side losses + w_fuse * loss of the fused map against Y."""
    if w_side < 0 or w_fuse < 0:
        raise TensorUsageError(f"Loss weights must be non-negative, got w_side={w_side}, w_fuse={w_fuse}")
    if targets.num_blocks != outputs.num_blocks:
        raise TensorUsageError(f"{targets.num_blocks} target blocks for {outputs.num_blocks} output blocks")

    def term(name: str, pred: Tensor, target: SupervisionTarget | ConsensusGT) -> Tensor:
        if name in outputs.logits:
            return balanced_bce(outputs.logits[name], target, lam, from_logits=True)
        return balanced_bce(pred, target, lam)

    named: dict[str, Tensor] = {}
    for k, (pred, target) in enumerate(zip(outputs.side_s2d, targets.s2d, strict=True), start=1):
        named[f"s2d_{k}"] = term(f"s2d_{k}", pred, target)
    for k, (pred, target) in enumerate(zip(outputs.side_d2s, targets.d2s, strict=True), start=1):
        named[f"d2s_{k}"] = term(f"d2s_{k}", pred, target)
    side = add_n(list(named.values()))
    fuse = term("fused", outputs.fused, gt)
    named["fused"] = fuse

    total = add_n([scale(side, w_side), scale(fuse, w_fuse)])
    return LossBreakdown(
        total=total,
        side=side.item(),
        fuse=fuse.item(),
        terms={name: t.item() for name, t in named.items()},
    )


def naive_summed_loss(predictions: Sequence[Tensor], gt: ConsensusGT, lam: float = 1.1) -> Tensor:
    """Loss of the plain sum of predictions against Y.

    Every prediction receives the same gradient under this formulation, which is what
    the cascade targets avoid.
    """
    if not predictions:
        raise TensorUsageError("naive_summed_loss needs at least one prediction")
    return balanced_bce(add_n(list(predictions)), gt, lam)
