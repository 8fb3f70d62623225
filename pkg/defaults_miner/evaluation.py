"""
Balanced accuracy, stratified cross-validation and the shared fitness.

The shared fitness of a setting is the median, over a sample of datasets,
of its cross-validated balanced accuracy.
"""
import logging
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .datasets import stratified_folds
from .exceptions import DefaultsMinerError, EvaluationError, FoldError, SolverError
from .seeding import derive_seed
from .svm import DEFAULT_TOL, GRAM_LIMIT, fit_ovo, predict, rbf_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got shape {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, 'counts', counts)

    @classmethod
    def from_predictions(cls, truth, predicted, n_classes):
        truth = np.asarray(truth, dtype=np.intp)
        predicted = np.asarray(predicted, dtype=np.intp)
        flat = np.bincount(truth * n_classes + predicted, minlength=n_classes * n_classes)
        return cls(flat.reshape(n_classes, n_classes))

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def support(self):
        return self.counts.sum(axis=1)

    def __add__(self, other):
        return ConfusionMatrix(self.counts + other.counts)

    def to_list(self):
        return self.counts.tolist()


def balanced_accuracy(cm):
    """Mean recall over the classes that occur in the matrix."""
    counts = cm.counts
    support = counts.sum(axis=1)
    present = support > 0
    if counts.size == 0 or not present.any():
        raise ValueError("balanced accuracy of an empty confusion matrix")
    recalls = np.diag(counts)[present] / support[present]
    return float(recalls.mean())


@dataclass(frozen=True)
class CvResult:
    dataset: str
    hp: object
    per_fold_bac: tuple
    mean_bac: float
    seed: int
    converged: bool = True

    @property
    def k(self):
        return len(self.per_fold_bac)


@dataclass(frozen=True)
class FitnessValue:
    value: float
    per_dataset: tuple
    results: tuple = ()


def fold_seed(seed, dataset):
    return derive_seed(seed, 'folds', dataset)


def cross_validate(table, hp, k, seed, tol=DEFAULT_TOL):
    """
    Stratified k-fold CV of one setting on one table.

    Fold membership depends on ``seed`` and the table name only, so every
    setting evaluated with the same seed sees identical folds.
    """
    try:
        folds = stratified_folds(table, k, fold_seed(seed, table.name))
    except FoldError as exc:
        raise EvaluationError(table.name, str(exc)) from exc

    features, labels = table.features, table.labels
    gram = rbf_matrix(features, features, hp.log2_gamma) if table.n_instances <= GRAM_LIMIT else None

    scores = []
    converged = True
    for fold, train, test in folds.splits():
        fold_gram = gram[np.ix_(train, train)] if gram is not None else None
        try:
            model = fit_ovo(features[train], labels[train], table.n_classes, hp, tol, gram=fold_gram)
        except SolverError as exc:
            raise EvaluationError(table.name, str(exc), fold=fold) from exc
        converged = converged and model.converged
        confusion = ConfusionMatrix.from_predictions(labels[test], predict(model, features[test]), table.n_classes)
        scores.append(balanced_accuracy(confusion))

    per_fold = tuple(float(score) for score in scores)
    return CvResult(
        dataset=table.name,
        hp=hp,
        per_fold_bac=per_fold,
        mean_bac=float(np.mean(per_fold)),
        seed=seed,
        converged=converged,
    )


def _evaluate_member(table, hp, k, seed):
    try:
        return cross_validate(table, hp, k, seed)
    except EvaluationError:
        raise
    except (DefaultsMinerError, ValueError) as exc:
        raise EvaluationError(table.name, str(exc)) from exc


def shared_fitness(tables, hp, k, seed, n_jobs=1):
    """
    Median mean-BAC of ``hp`` over ``tables``; even counts average the two
    middle values. Any failing dataset fails the whole evaluation.
    """
    tables = list(tables)
    if not tables:
        raise ValueError("shared fitness needs at least one dataset")
    if n_jobs == 1:
        results = [_evaluate_member(table, hp, k, seed) for table in tables]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(_evaluate_member)(table, hp, k, seed) for table in tables)
    per_dataset = tuple((result.dataset, result.mean_bac) for result in results)
    value = float(np.median([bac for _, bac in per_dataset]))
    logger.debug("Fitness %s = %.6f over %d datasets", hp, value, len(tables))
    return FitnessValue(value=value, per_dataset=per_dataset, results=tuple(results))
