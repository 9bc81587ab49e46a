"""SGD training loop with cascade supervision."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)

from ..config.models import RunConfig
from ..data.augment import augment
from ..data.dataset import EdgeDataset, Sample
from ..errors import IngestionError, TrainingError
from ..losses.cascade import ConsensusGT, LossBreakdown, build_cascade_targets, total_loss
from ..network.bdcn import BdcnNetwork, build_network
from ..network.serialization import save_checkpoint
from ..tensor.optim import OptimState, sgd_step, step_decay

logger = logging.getLogger(__name__)

console = Console()

LOG_HEADER = "# iteration\ttotal\tside\tfuse\tlr"
FINAL_CHECKPOINT = "final.bdcn"


def checkpoint_name(iteration: int) -> str:
    return f"checkpoint_{iteration:06d}.bdcn"


@dataclass
class TrainingResult:
    network: BdcnNetwork
    final_checkpoint: Path
    log_path: Path
    iterations: int
    checkpoints: list[Path] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)


class _SampleStream:
    """Endless, seeded reshuffling pass over the dataset."""

    def __init__(self, dataset: EdgeDataset, rng: np.random.Generator):
        self.dataset = dataset
        self.rng = rng
        self.order: list[int] = []

    def next(self) -> Sample:
        if not self.order:
            self.order = list(self.rng.permutation(len(self.dataset)))
        return self.dataset[int(self.order.pop(0))]


class Trainer:
    """Runs load, augment, forward, cascade targets, loss, backward and SGD for a RunConfig."""

    def __init__(self, config: RunConfig, dataset: EdgeDataset, use_progress_bar: bool = False):
        if len(dataset) == 0:
            raise IngestionError("Cannot train on an empty dataset")
        self.config = config
        self.dataset = dataset
        self.use_progress_bar = use_progress_bar
        self.network = build_network(config.model)
        optim = config.optim
        self.state = OptimState(learning_rate=optim.lr, momentum=optim.momentum, weight_decay=optim.weight_decay)
        self.rng = np.random.default_rng(config.seed)
        self.stream = _SampleStream(dataset, self.rng)

    def _sample_loss(self, sample: Sample) -> LossBreakdown:
        loss_cfg = self.config.loss
        sample = augment(sample, self.config.augment, self.rng)
        outputs = self.network(sample.image)
        gt = ConsensusGT(sample.gt, gamma=loss_cfg.gamma)
        targets = build_cascade_targets(gt, outputs, loss_cfg.cascade)
        breakdown = total_loss(outputs, targets, gt, loss_cfg.w_side, loss_cfg.w_fuse, loss_cfg.lam)
        bad = breakdown.nonfinite_terms()
        if bad or not math.isfinite(breakdown.total.item()):
            raise TrainingError(
                f"Non-finite loss on sample '{sample.id}' in term(s): {', '.join(bad) or 'total'}",
                term=bad[0] if bad else "total",
            )
        return breakdown

    def step(self, iteration: int) -> tuple[float, float, float]:
        """One parameter update from ``batch_size`` accumulated samples; returns mean (total, side, fuse)."""
        optim = self.config.optim
        self.state.learning_rate = step_decay(optim.lr, iteration, optim.lr_decay_step, optim.lr_decay_factor)
        params = self.network.parameters()
        self.network.zero_grad()

        totals = np.zeros(3)
        for _ in range(optim.batch_size):
            breakdown = self._sample_loss(self.stream.next())
            breakdown.total.backward()
            totals += (breakdown.total.item(), breakdown.side, breakdown.fuse)

        grads = {
            name: (np.zeros_like(p.data) if p.grad is None else p.grad / optim.batch_size)
            for name, p in params.items()
        }
        sgd_step(params, grads, self.state)
        self.network.zero_grad()
        return tuple(totals / optim.batch_size)

    def train(self, output_dir: Path | None = None) -> TrainingResult:
        output_dir = Path(output_dir or self.config.output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        optim = self.config.optim
        log_path = output_dir / "train.log"
        result = TrainingResult(
            network=self.network,
            final_checkpoint=output_dir / FINAL_CHECKPOINT,
            log_path=log_path,
            iterations=optim.iterations,
        )
        logger.info(
            "Training S=%d K=%d r0=%d for %d iterations on %d samples",
            self.config.model.num_blocks,
            self.config.model.sem_branches,
            self.config.model.dilation_factor,
            optim.iterations,
            len(self.dataset),
        )

        with open(log_path, "w", encoding="utf-8") as log:
            log.write(LOG_HEADER + "\n")
            if self.use_progress_bar and optim.iterations:
                with Progress(
                    SpinnerColumn(),
                    TextColumn("[progress.description]{task.description}"),
                    BarColumn(),
                    MofNCompleteColumn(),
                    TimeElapsedColumn(),
                    console=console,
                ) as progress:
                    task_id = progress.add_task("[cyan]Training[/cyan]", total=optim.iterations)
                    self._loop(log, output_dir, result, lambda: progress.advance(task_id))
            else:
                self._loop(log, output_dir, result, lambda: None)

        save_checkpoint(result.final_checkpoint, self.network, optim.iterations, {"seed": str(self.config.seed)})
        logger.info("Final checkpoint written to %s", result.final_checkpoint)
        return result

    def _loop(self, log, output_dir: Path, result: TrainingResult, advance) -> None:
        optim = self.config.optim
        for iteration in range(optim.iterations):
            total, side, fuse = self.step(iteration)
            done = iteration + 1
            log.write(f"{done}\t{total:.6f}\t{side:.6f}\t{fuse:.6f}\t{self.state.learning_rate:.3e}\n")
            result.losses.append(total)
            if done % optim.checkpoint_interval == 0 and done < optim.iterations:
                path = output_dir / checkpoint_name(done)
                save_checkpoint(path, self.network, done, {"seed": str(self.config.seed)})
                result.checkpoints.append(path)
            advance()
            logger.debug("iteration %d total %.4f side %.4f fuse %.4f", done, total, side, fuse)


def train(config: RunConfig, dataset: EdgeDataset, output_dir: Path | None = None, use_progress_bar: bool = False) -> TrainingResult:
    return Trainer(config, dataset, use_progress_bar).train(output_dir)
