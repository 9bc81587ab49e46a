"""Pydantic models for bdcnet configuration."""

from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import ConfigurationError

VGG16_CHANNEL_PLAN: tuple[tuple[int, ...], ...] = (
    (64, 64),
    (128, 128),
    (256, 256, 256),
    (512, 512, 512),
    (512, 512, 512),
)


class BdcnConfig(BaseModel):
    """Architecture of a BDCN network."""

    model_config = ConfigDict(frozen=True)

    num_blocks: int = Field(5, ge=2, le=5, description="Number of ID Blocks S")
    sem_branches: int = Field(3, ge=0, description="Dilated branches per SEM (K); 0 disables SEM")
    dilation_factor: int = Field(4, ge=0, description="SEM dilation rate factor r0")
    sem_mid_channels: int = Field(32, gt=0, description="Channel width inside each SEM")
    head_channels: int = Field(21, gt=0, description="Intermediate width of the score heads")
    vgg_channel_plan: tuple[tuple[int, ...], ...] = Field(
        VGG16_CHANNEL_PLAN, description="Conv-layer output widths per backbone block"
    )
    input_channels: int = Field(3, gt=0, description="Channels of the input image")
    seed: int = Field(0, ge=0, lt=2**64, description="Seed for weight initialization")
    weight_init: Literal["gaussian", "kaiming"] = Field(
        "gaussian", description="Initialization of backbone, SEM and first head convs"
    )
    init_std: float = Field(0.01, gt=0, description="Std of the gaussian initialization")

    @model_validator(mode="after")
    def _check_plan(self) -> "BdcnConfig":
        if len(self.vgg_channel_plan) < self.num_blocks:
            raise ValueError(
                f"vgg_channel_plan has {len(self.vgg_channel_plan)} blocks, "
                f"num_blocks={self.num_blocks} needs more"
            )
        for block in self.vgg_channel_plan[: self.num_blocks]:
            if not block or min(block) < 1:
                raise ValueError(f"Invalid block widths {block} in vgg_channel_plan")
        return self

    @property
    def rate_schedule(self) -> tuple[int, ...]:
        """Dilation rates r_k = max(1, r0 * k) for k = 1..K."""
        return tuple(max(1, self.dilation_factor * k) for k in range(1, self.sem_branches + 1))

    @property
    def blocks(self) -> tuple[tuple[int, ...], ...]:
        """Conv widths of the retained backbone blocks."""
        return self.vgg_channel_plan[: self.num_blocks]

    def block_channels(self, block: int) -> tuple[int, ...]:
        """Conv widths of ID Block ``block`` (1-based)."""
        if not 1 <= block <= self.num_blocks:
            raise ConfigurationError(f"Block index {block} outside 1..{self.num_blocks}")
        return self.vgg_channel_plan[block - 1]

    @property
    def min_input_size(self) -> int:
        return 2 ** (self.num_blocks - 1)


class OptimConfig(BaseModel):
    """SGD schedule."""

    lr: float = Field(1e-6, gt=0, description="Initial learning rate")
    momentum: float = Field(0.9, ge=0, lt=1)
    weight_decay: float = Field(2e-4, ge=0)
    batch_size: int = Field(10, ge=1, description="Samples accumulated per update")
    iterations: int = Field(40000, ge=0, description="Number of parameter updates")
    lr_decay_step: int = Field(10000, ge=1, description="Updates between learning-rate decays")
    lr_decay_factor: float = Field(0.1, gt=0, le=1)
    checkpoint_interval: int = Field(10000, ge=1, description="Updates between checkpoints")


class LossConfig(BaseModel):
    """Loss weights and class balancing."""

    model_config = ConfigDict(populate_by_name=True)

    w_side: float = Field(0.5, ge=0, description="Weight of the side-output losses")
    w_fuse: float = Field(1.1, ge=0, description="Weight of the fused-output loss")
    lam: float = Field(1.1, gt=0, alias="lambda", description="Positive-weight factor lambda")
    gamma: float = Field(0.3, gt=0, lt=1, description="Consensus threshold for positives")
    cascade: Literal["bidirectional", "s2d", "d2s", "none"] = Field(
        "bidirectional", description="Which cascade directions build residual targets"
    )


class AugmentConfig(BaseModel):
    """Random geometric augmentation."""

    flip: bool = Field(True, description="Random horizontal flip")
    rotations: tuple[float, ...] = Field((0.0, 90.0, 180.0, 270.0), min_length=1)
    scales: tuple[float, ...] = Field((0.75, 1.0, 1.25), min_length=1)
    crop: tuple[int, int] | None = Field(None, description="Random crop size (h, w)")

    @field_validator("scales")
    @classmethod
    def _positive_scales(cls, scales: tuple[float, ...]) -> tuple[float, ...]:
        if min(scales) <= 0:
            raise ValueError(f"Scale factors must be positive, got {scales}")
        return scales


class EvalConfig(BaseModel):
    """Benchmark settings."""

    tolerance: float = Field(0.0075, gt=0, description="Match radius as a fraction of the diagonal")
    num_thresholds: int = Field(99, ge=1, description="Uniform thresholds inside (0, 1)")
    max_concurrent: int = Field(4, ge=1, description="Images evaluated concurrently")


class RunConfig(BaseModel):
    """Everything a training run needs."""

    description: str | None = Field(None, description="Description of this run")
    model: BdcnConfig = Field(default_factory=BdcnConfig)
    optim: OptimConfig = Field(default_factory=OptimConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    manifest: Path | None = Field(None, description="Dataset manifest (tab-separated)")
    output_dir: Path = Field(Path("runs/bdcn"), description="Where checkpoints and logs go")
    seed: int = Field(0, ge=0, lt=2**64, description="Seed for data order and augmentation")
