"""
Per-gene training driver
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from errors import EmptyDataset, NonFinite, NonFiniteLoss, NslError, ValidationFailure
from models.configs import TrainConfig
from models.params import NslParams
from models.records import SpotDataset, SpotRecord
from stain.core import PixelBank
from stain.optim import AdamState, adam_step

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class TrainedGeneModel:
    gene_name: str
    params: NslParams
    loss_trace: Tuple[float, ...]
    config_digest: str

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1]


@dataclass(frozen=True)
class GeneFailure:
    """A gene whose training did not produce a model"""

    gene_name: str
    error_type: str
    reason: str


GeneOutcome = Union[TrainedGeneModel, GeneFailure]


@dataclass(frozen=True, eq=False)
class TrainingResult:
    """Outcome per requested gene, in request order"""

    outcomes: Tuple[GeneOutcome, ...]
    config: TrainConfig

    @property
    def models(self) -> List[TrainedGeneModel]:
        return [o for o in self.outcomes if isinstance(o, TrainedGeneModel)]

    @property
    def failures(self) -> List[GeneFailure]:
        return [o for o in self.outcomes if isinstance(o, GeneFailure)]


def gene_rng(seed: int, gene_index: int) -> np.random.Generator:
    """Counter-based stream owned by one gene"""
    return np.random.Generator(np.random.Philox(key=(int(seed) ^ int(gene_index)) & (2**64 - 1)))


def initial_params(rng: np.random.Generator, config: TrainConfig) -> NslParams:
    raw = rng.uniform(0.1, 1.0, size=(3, 3))
    w, b = rng.uniform(-config.init_range, config.init_range, size=2)
    return NslParams.create(raw, np.zeros(3), w, b)


def fit_gene(
    bank: PixelBank,
    targets: np.ndarray,
    gene_index: int,
    config: TrainConfig,
    gene_name: Optional[str] = None,
) -> TrainedGeneModel:
    """Train one gene's model on spots already folded into a pixel bank"""
    gene_name = gene_name if gene_name is not None else str(gene_index)
    targets = np.asarray(targets, dtype=np.float64)
    n = len(bank)
    if n == 0:
        raise EmptyDataset(f"gene {gene_name}: no training spots")
    if n < 2:
        raise EmptyDataset(f"gene {gene_name}: need at least 2 training spots, got {n}")
    if targets.shape != (n,):
        raise ValidationFailure(f"gene {gene_name}: {targets.shape[0]} targets for {n} spots")
    if not np.all(np.isfinite(targets)):
        raise NonFiniteLoss(f"gene {gene_name}: targets contain non-finite values")

    rng = gene_rng(config.seed, gene_index)
    params = initial_params(rng, config)
    state = AdamState()
    trace: List[float] = []

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            try:
                loss, grads = bank.loss_and_gradients(params, batch, targets[batch])
            except NonFinite as e:
                raise NonFiniteLoss(f"gene {gene_name}: non-finite gradient at epoch {epoch + 1}: {e}") from e
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"gene {gene_name}: loss became {loss} at epoch {epoch + 1}")
            params, state = adam_step(params, grads, state, config)
            total += loss * batch.shape[0]
        trace.append(total / n)
        if (epoch + 1) % 50 == 0:
            logger.debug("epoch_done", gene=gene_name, epoch=epoch + 1, loss=trace[-1])

    logger.info("gene_trained", gene=gene_name, epochs=config.epochs, first_loss=trace[0], final_loss=trace[-1])
    return TrainedGeneModel(gene_name, params, tuple(trace), config.digest())


def train_gene(
    spots: Union[SpotDataset, Sequence[SpotRecord]],
    gene_index: int,
    config: TrainConfig,
    gene_name: Optional[str] = None,
) -> TrainedGeneModel:
    """Train the model of one gene on the given spots"""
    spots = list(spots.spots if isinstance(spots, SpotDataset) else spots)
    if not spots:
        raise EmptyDataset("no training spots")
    if any(spot.expression is None or spot.patch is None for spot in spots):
        raise ValidationFailure("training spots need both a patch and an expression vector")
    if not 0 <= gene_index < spots[0].expression.shape[0]:
        raise ValidationFailure(f"gene index {gene_index} is out of range")
    bank = PixelBank.from_patches([spot.patch for spot in spots], config.epsilon)
    targets = np.array([spot.expression[gene_index] for spot in spots])
    return fit_gene(bank, targets, gene_index, config, gene_name)


# Per-process training context; set in the parent for in-process runs and by
# the pool initializer in worker processes.
_context: dict = {}


def _set_context(bank: PixelBank, targets: np.ndarray, config: TrainConfig) -> None:
    _context["bank"] = bank
    _context["targets"] = targets
    _context["config"] = config


def _train_task(task: Tuple[str, Optional[int]]) -> GeneOutcome:
    gene_name, gene_index = task
    if gene_index is None:
        return GeneFailure(gene_name, "UnknownGene", f"gene {gene_name!r} is not in the dataset")
    try:
        return fit_gene(_context["bank"], _context["targets"][:, gene_index], gene_index, _context["config"], gene_name)
    except NslError as e:
        logger.warning("gene_failed", gene=gene_name, error=type(e).__name__, reason=str(e))
        return GeneFailure(gene_name, type(e).__name__, str(e))


def train_all(
    dataset: SpotDataset,
    gene_list: Sequence[str],
    config: TrainConfig,
    workers: int = 1,
) -> TrainingResult:
    """Train one independent model per gene; failures are recorded, not raised"""
    if not gene_list:
        raise ValidationFailure("gene list is empty")
    if workers < 1:
        raise ValidationFailure("workers must be at least 1")

    bank = PixelBank.from_patches(dataset.patches(), config.epsilon)
    targets = dataset.expression_matrix()
    known = {name: i for i, name in enumerate(dataset.gene_names)}
    tasks = [(name, known.get(name)) for name in gene_list]

    logger.info("training_started", genes=len(tasks), spots=len(dataset), colors=bank.n_colors, workers=workers)

    if workers == 1 or len(tasks) == 1:
        _set_context(bank, targets, config)
        try:
            outcomes = [_train_task(task) for task in tasks]
        finally:
            _context.clear()
    else:
        with ProcessPoolExecutor(
            max_workers=min(workers, len(tasks)),
            initializer=_set_context,
            initargs=(bank, targets, config),
        ) as executor:
            outcomes = list(executor.map(_train_task, tasks))

    result = TrainingResult(tuple(outcomes), config)
    logger.info("training_finished", trained=len(result.models), failed=len(result.failures))
    return result
