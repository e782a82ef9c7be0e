"""
Leave-one-patient-out cross-validation
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from sklearn.model_selection import LeaveOneGroupOut

from errors import NslError, SinglePatient, TooFew, ZeroVariance
from evaluation.stats import combine_correlations, combine_pvalues, pearson, pearson_pvalue
from models.configs import TrainConfig
from models.records import SpotDataset
from stain.core import PixelBank
from stain.trainer import train_all

logger = structlog.get_logger(__name__)

R_THRESHOLD = 0.5
P_THRESHOLD = 1e-5


@dataclass(frozen=True)
class Fold:
    held_out_patient: str
    train_indices: Tuple[int, ...]
    test_indices: Tuple[int, ...]


def lopo_split(dataset: SpotDataset) -> List[Fold]:
    """One fold per patient, in first-seen order: that patient's spots are the test set"""
    patients = dataset.patients
    if len(patients) < 2:
        raise SinglePatient(f"leave-one-patient-out needs at least 2 patients, got {len(patients)}")
    # group codes follow first appearance so folds come out in that order
    code = {patient: i for i, patient in enumerate(patients)}
    groups = np.array([code[spot.patient_id] for spot in dataset.spots], dtype=np.int64)
    folds = []
    for train, test in LeaveOneGroupOut().split(np.zeros((groups.shape[0], 1)), groups=groups):
        folds.append(Fold(patients[groups[test[0]]], tuple(train.tolist()), tuple(test.tolist())))
    return folds


@dataclass(frozen=True)
class GeneFoldStat:
    r: Optional[float]
    p: Optional[float]
    n: int
    skipped_reason: Optional[str] = None

    @property
    def valid(self) -> bool:
        return self.skipped_reason is None


@dataclass(frozen=True, eq=False)
class FoldResult:
    held_out_patient: str
    per_gene: Dict[str, GeneFoldStat]
    # out-of-fold predictions: gene -> per test spot value, aligned with test_spot_ids
    test_spot_ids: Tuple[str, ...] = ()
    predictions: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class GeneSummary:
    gene: str
    median_r: Optional[float]
    combined_p: Optional[float]
    n_folds: int
    n_skipped: int

    @property
    def evaluable(self) -> bool:
        return self.median_r is not None


@dataclass(frozen=True, eq=False)
class EvalReport:
    per_gene: Dict[str, GeneSummary]
    folds: Tuple[FoldResult, ...]
    r_threshold: float = R_THRESHOLD
    p_threshold: float = P_THRESHOLD

    @property
    def count_r_gt_half(self) -> int:
        return sum(1 for s in self.per_gene.values() if s.evaluable and s.median_r > self.r_threshold)

    @property
    def count_p_significant(self) -> int:
        return sum(1 for s in self.per_gene.values() if s.evaluable and s.combined_p < self.p_threshold)

    @property
    def unevaluable(self) -> List[str]:
        return [g for g, s in self.per_gene.items() if not s.evaluable]

    def out_of_fold(self, gene: str) -> Dict[str, float]:
        """Spot id -> prediction made while that spot's patient was held out"""
        values: Dict[str, float] = {}
        for fold in self.folds:
            if gene in fold.predictions:
                values.update(zip(fold.test_spot_ids, fold.predictions[gene].tolist()))
        return values


def fold_statistic(predicted: np.ndarray, observed: np.ndarray) -> GeneFoldStat:
    n = int(observed.shape[0])
    try:
        r = pearson(predicted, observed)
    except (ZeroVariance, TooFew) as e:
        return GeneFoldStat(None, None, n, f"{type(e).__name__}: {e}")
    return GeneFoldStat(r, pearson_pvalue(r, n), n)


def summarize(gene_names: Sequence[str], folds: Sequence[FoldResult]) -> EvalReport:
    per_gene: Dict[str, GeneSummary] = {}
    for gene in gene_names:
        stats = [fold.per_gene[gene] for fold in folds if gene in fold.per_gene]
        valid = [s for s in stats if s.valid]
        if valid:
            median_r = combine_correlations([s.r for s in valid])
            combined_p = combine_pvalues([s.p for s in valid])
        else:
            median_r = combined_p = None
            logger.warning("gene_unevaluable", gene=gene, folds=len(stats))
        per_gene[gene] = GeneSummary(gene, median_r, combined_p, len(valid), len(stats) - len(valid))
    return EvalReport(per_gene, tuple(folds))


# (train dataset, test dataset, genes) -> gene -> predictions for the test spots,
# or gene -> error message when that gene could not be fitted
FoldPredictor = Callable[[SpotDataset, SpotDataset, Sequence[str]], Dict[str, object]]


def cross_validate(dataset: SpotDataset, gene_list: Sequence[str], predictor: FoldPredictor) -> EvalReport:
    """Run a fold predictor under leave-one-patient-out and aggregate per gene"""
    folds = []
    for fold in lopo_split(dataset):
        train = dataset.subset(fold.train_indices)
        test = dataset.subset(fold.test_indices)
        log = logger.bind(patient=fold.held_out_patient, train=len(train), test=len(test))
        log.info("fold_started")

        outputs = predictor(train, test, gene_list)
        observed = test.expression_matrix()
        per_gene: Dict[str, GeneFoldStat] = {}
        predictions: Dict[str, np.ndarray] = {}
        for gene in gene_list:
            output = outputs.get(gene)
            if not isinstance(output, np.ndarray):
                per_gene[gene] = GeneFoldStat(None, None, len(test), str(output))
                continue
            predictions[gene] = output
            per_gene[gene] = fold_statistic(output, observed[:, dataset.gene_index(gene)])

        folds.append(FoldResult(fold.held_out_patient, per_gene, tuple(s.spot_id for s in test.spots), predictions))
        log.info("fold_finished", evaluated=sum(1 for s in per_gene.values() if s.valid))
    return summarize(gene_list, folds)


def nsl_predictor(config: TrainConfig, workers: int = 1) -> FoldPredictor:
    def predict(train: SpotDataset, test: SpotDataset, gene_list: Sequence[str]) -> Dict[str, object]:
        result = train_all(train, gene_list, config, workers)
        bank = PixelBank.from_patches(test.patches(), config.epsilon)
        outputs: Dict[str, object] = {f.gene_name: f"{f.error_type}: {f.reason}" for f in result.failures}
        for model in result.models:
            outputs[model.gene_name] = bank.predict(model.params)
        return outputs

    return predict


def run_cv(dataset: SpotDataset, gene_list: Sequence[str], config: TrainConfig, workers: int = 1) -> EvalReport:
    """Train and score the stain model under leave-one-patient-out"""
    try:
        return cross_validate(dataset, gene_list, nsl_predictor(config, workers))
    except NslError as e:
        logger.error("cross_validation_failed", error=type(e).__name__, reason=str(e))
        raise
