"""Bi-Directional Cascade Network: VGG-style ID Blocks with Scale Enhancement Modules."""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..config.models import BdcnConfig
from ..errors import ConfigurationError
from ..tensor import (
    DEFAULT_DTYPE,
    ConvSpec,
    Tensor,
    add_n,
    concat,
    conv2d,
    maxpool2,
    parameter,
    relu,
    sigmoid,
    upsample_bilinear,
)

logger = logging.getLogger(__name__)


def rate_schedule(sem_branches: int, dilation_factor: int) -> tuple[int, ...]:
    """Dilation rates r_k = max(1, r0 * k), k = 1..K."""
    if sem_branches < 0 or dilation_factor < 0:
        raise ConfigurationError(f"K and r0 must be non-negative, got K={sem_branches}, r0={dilation_factor}")
    return tuple(max(1, dilation_factor * k) for k in range(1, sem_branches + 1))


class _Initializer:
    """Deterministic weight factory; draws happen in construction order."""

    def __init__(self, config: BdcnConfig):
        self.rng = np.random.default_rng(config.seed)
        self.scheme = config.weight_init
        self.std = config.init_std

    def random(self, shape: tuple[int, ...]) -> np.ndarray:
        if self.scheme == "kaiming":
            fan_in = int(np.prod(shape[1:]))
            std = np.sqrt(2.0 / fan_in)
        else:
            std = self.std
        return self.rng.normal(0.0, std, size=shape)


class ConvLayer:
    """Weights, bias and geometry of one convolution."""

    def __init__(self, name: str, weight: Tensor, bias: Tensor, spec: ConvSpec):
        self.name = name
        self.weight = weight
        self.bias = bias
        self.spec = spec

    @classmethod
    def create(
        cls,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel: int,
        init: _Initializer | np.ndarray | float,
        dilation: int = 1,
    ) -> "ConvLayer":
        shape = (out_channels, in_channels, kernel, kernel)
        if isinstance(init, _Initializer):
            values = init.random(shape)
        else:
            values = np.full(shape, init, dtype=np.float64)
        weight = parameter(shape, values, name=f"{name}.weight")
        bias = parameter((out_channels,), name=f"{name}.bias")
        return cls(name, weight, bias, ConvSpec.same(kernel, dilation))

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.spec)

    def parameters(self) -> dict[str, Tensor]:
        return {self.weight.name: self.weight, self.bias.name: self.bias}

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]


class ScaleEnhancementModule:
    """3x3 reduction to ``mid_channels`` then K parallel dilated 3x3 convs, summed.

    With K = 0 the module copies its input.
    """

    def __init__(self, name: str, in_channels: int, rates: tuple[int, ...], mid_channels: int, init: _Initializer):
        self.name = name
        self.rates = rates
        self.in_channels = in_channels
        self.reduce: ConvLayer | None = None
        self.branches: list[ConvLayer] = []
        if rates:
            self.reduce = ConvLayer.create(f"{name}.reduce", in_channels, mid_channels, 3, init)
            self.branches = [
                ConvLayer.create(f"{name}.branch{k}", mid_channels, mid_channels, 3, init, dilation=r)
                for k, r in enumerate(rates, start=1)
            ]

    @property
    def out_channels(self) -> int:
        return self.branches[0].out_channels if self.branches else self.in_channels

    def __call__(self, feature: Tensor) -> Tensor:
        if self.reduce is None:
            return feature
        reduced = relu(self.reduce(feature))
        return add_n([relu(branch(reduced)) for branch in self.branches])

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for layer in [self.reduce, *self.branches]:
            if layer is not None:
                params.update(layer.parameters())
        return params


def sem_forward(
    feature: Tensor,
    sem_branches: int,
    dilation_factor: int,
    mid_channels: int,
    seed: int = 0,
    weight_init: str = "gaussian",
) -> Tensor:
    """Run a freshly initialized Scale Enhancement Module over ``feature``; weights are drawn from ``seed``."""
    rates = rate_schedule(sem_branches, dilation_factor)
    config = BdcnConfig(
        sem_branches=sem_branches,
        dilation_factor=dilation_factor,
        sem_mid_channels=mid_channels,
        seed=seed,
        weight_init=weight_init,
    )
    sem = ScaleEnhancementModule("sem", feature.shape[1], rates, mid_channels, _Initializer(config))
    return sem(feature)


class ScoreHead:
    """Two stacked 1x1 convolutions producing one edge logit map."""

    def __init__(self, name: str, in_channels: int, head_channels: int, init: _Initializer):
        self.hidden = ConvLayer.create(f"{name}.0", in_channels, head_channels, 1, init)
        self.score = ConvLayer.create(f"{name}.1", head_channels, 1, 1, 0.0)

    def __call__(self, x: Tensor) -> Tensor:
        return self.score(self.hidden(x))

    def parameters(self) -> dict[str, Tensor]:
        return {**self.hidden.parameters(), **self.score.parameters()}


class IDBlock:
    """Backbone convs, one SEM per conv, and the s2d/d2s score heads."""

    def __init__(self, index: int, in_channels: int, widths: tuple[int, ...], config: BdcnConfig, init: _Initializer):
        self.index = index
        self.pool = index > 1
        name = f"block{index}"
        self.convs: list[ConvLayer] = []
        self.sems: list[ScaleEnhancementModule] = []
        rates = config.rate_schedule
        if not rates and len(set(widths)) > 1:
            raise ConfigurationError(f"Block {index} widths {widths} must agree when SEM is disabled (K=0)")
        c = in_channels
        for j, width in enumerate(widths, start=1):
            self.convs.append(ConvLayer.create(f"{name}.conv{j}", c, width, 3, init))
            self.sems.append(
                ScaleEnhancementModule(f"{name}.conv{j}.sem", width, rates, config.sem_mid_channels, init)
            )
            c = width
        self.out_channels = c
        head_in = self.sems[-1].out_channels
        self.s2d = ScoreHead(f"{name}.s2d", head_in, config.head_channels, init)
        self.d2s = ScoreHead(f"{name}.d2s", head_in, config.head_channels, init)

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        """Returns (features for the next block, s2d logits, d2s logits)."""
        if self.pool:
            x = maxpool2(x)
        enhanced = []
        for conv, sem in zip(self.convs, self.sems, strict=True):
            x = relu(conv(x))
            enhanced.append(sem(x))
        fused = add_n(enhanced)
        return x, self.s2d(fused), self.d2s(fused)

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for conv, sem in zip(self.convs, self.sems, strict=True):
            params.update(conv.parameters())
            params.update(sem.parameters())
        params.update(self.s2d.parameters())
        params.update(self.d2s.parameters())
        return params


@dataclass
class BdcnOutputs:
    """Sigmoid edge maps at input resolution: S shallow-to-deep, S deep-to-shallow, one fused.

    ``logits`` holds the pre-sigmoid maps under the same names when the network produced them.
    """

    side_s2d: list[Tensor]
    side_d2s: list[Tensor]
    fused: Tensor
    logits: dict[str, Tensor] = field(default_factory=dict)

    @property
    def num_blocks(self) -> int:
        return len(self.side_s2d)

    def maps(self) -> dict[str, Tensor]:
        """All 2S + 1 maps keyed ``s2d_k``, ``d2s_k`` and ``fused``."""
        named = {f"s2d_{k}": p for k, p in enumerate(self.side_s2d, start=1)}
        named.update({f"d2s_{k}": p for k, p in enumerate(self.side_d2s, start=1)})
        named["fused"] = self.fused
        return named

    def __len__(self) -> int:
        return 2 * self.num_blocks + 1


class BdcnNetwork:
    """A built BDCN graph; immutable during inference, mutated in place by the optimizer."""

    def __init__(self, config: BdcnConfig):
        self.config = config
        init = _Initializer(config)
        self.blocks: list[IDBlock] = []
        c = config.input_channels
        for index in range(1, config.num_blocks + 1):
            block = IDBlock(index, c, config.block_channels(index), config, init)
            self.blocks.append(block)
            c = block.out_channels
        s = config.num_blocks
        self.fuse = ConvLayer.create("fuse", 2 * s, 1, 1, 1.0 / (2 * s))

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for block in self.blocks:
            params.update(block.parameters())
        params.update(self.fuse.parameters())
        return params

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters().values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise ConfigurationError(f"State mismatch; missing={missing} unexpected={unexpected}")
        for name, value in state.items():
            if value.shape != params[name].shape:
                raise ConfigurationError(
                    f"Parameter '{name}' has shape {value.shape}, network expects {params[name].shape}"
                )
            params[name].data = np.array(value, dtype=params[name].dtype)

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def forward(self, image: Tensor | np.ndarray) -> BdcnOutputs:
        image = image if isinstance(image, Tensor) else Tensor(image, dtype=DEFAULT_DTYPE)
        if image.ndim != 4:
            raise ConfigurationError(f"Image must be rank 4 (n, c, h, w), got shape {image.shape}")
        _, c, h, w = image.shape
        if c != self.config.input_channels:
            raise ConfigurationError(f"Image has {c} channels, network expects {self.config.input_channels}")
        if min(h, w) < self.config.min_input_size:
            raise ConfigurationError(
                f"Image {h}x{w} too small for {self.config.num_blocks} ID Blocks; "
                f"need at least {self.config.min_input_size} pixels per side"
            )

        s2d_logits, d2s_logits = [], []
        x = image
        for block in self.blocks:
            x, s2d, d2s = block(x)
            if s2d.shape[2:] != (h, w):
                s2d = upsample_bilinear(s2d, h, w)
                d2s = upsample_bilinear(d2s, h, w)
            s2d_logits.append(s2d)
            d2s_logits.append(d2s)

        fused_logits = self.fuse(concat(s2d_logits + d2s_logits))
        logits = {f"s2d_{k}": t for k, t in enumerate(s2d_logits, start=1)}
        logits.update({f"d2s_{k}": t for k, t in enumerate(d2s_logits, start=1)})
        logits["fused"] = fused_logits
        return BdcnOutputs(
            side_s2d=[sigmoid(t) for t in s2d_logits],
            side_d2s=[sigmoid(t) for t in d2s_logits],
            fused=sigmoid(fused_logits),
            logits=logits,
        )

    __call__ = forward


def build_network(config: BdcnConfig) -> BdcnNetwork:
    """Construct a BDCN network with weights drawn from ``config.seed``."""
    network = BdcnNetwork(config)
    logger.debug(
        "Built BDCN with %d blocks, SEM rates %s, %d parameters",
        config.num_blocks,
        config.rate_schedule,
        network.num_parameters(),
    )
    return network


def param_count(config: BdcnConfig) -> int:
    """Exact number of trainable scalars, computed without allocating the network."""
    rates = config.rate_schedule
    mid = config.sem_mid_channels
    hc = config.head_channels
    total = 0
    c = config.input_channels
    for widths in config.blocks:
        for width in widths:
            total += c * width * 9 + width
            if rates:
                total += width * mid * 9 + mid
                total += len(rates) * (mid * mid * 9 + mid)
            c = width
        head_in = mid if rates else c
        total += 2 * (head_in * hc + hc + hc + 1)
    s = config.num_blocks
    total += 2 * s + 1
    return total
