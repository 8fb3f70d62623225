"""Per-dataset random search, the tuning baseline."""
import logging
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .evaluation import cross_validate
from .svm import HPSetting, Provenance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RsResult:
    """
    Every evaluated setting with its mean BAC, in draw order.

    ``best`` is the first setting reaching the highest mean BAC;
    ``best_folds`` keeps its per-fold scores for paired tests.
    """

    dataset: str
    best: tuple
    all_evaluations: tuple
    budget: int
    seed: int
    cv_seed: int
    folds: int
    best_folds: tuple = ()

    def __post_init__(self):
        if len(self.all_evaluations) != self.budget:
            raise ValueError(f"{self.dataset}: {len(self.all_evaluations)} evaluations for budget {self.budget}")

    @property
    def best_setting(self):
        return self.best[0]

    @property
    def best_bac(self):
        return self.best[1]


def sample_settings(space, count, rng):
    """Uniform draws in log2 space, one per axis."""
    draws = rng.uniform(space.lower, space.upper, size=(count, 2))
    return [
        HPSetting(float(cost), float(gamma), Provenance.RANDOM_SEARCH, f'draw {index}')
        for index, (cost, gamma) in enumerate(draws)
    ]


def random_search(table, space, budget, k, seed, cv_seed=None, n_jobs=1):
    """
    Cross-validate ``budget`` uniform draws on one table.

    Draws come from ``seed``; all candidates share the fold plan of
    ``cv_seed`` (``seed`` when not given).
    """
    if budget < 1:
        raise ValueError(f"budget must be at least 1, got {budget}")
    cv_seed = seed if cv_seed is None else cv_seed
    candidates = sample_settings(space, budget, np.random.default_rng(seed))
    if n_jobs == 1:
        results = [cross_validate(table, candidate, k, cv_seed) for candidate in candidates]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(cross_validate)(table, candidate, k, cv_seed) for candidate in candidates)

    winner = max(range(budget), key=lambda index: (results[index].mean_bac, -index))
    logger.info(
        "Random search on %s: best %s with BAC %.4f after %d draws",
        table.name,
        candidates[winner],
        results[winner].mean_bac,
        budget,
    )
    return RsResult(
        dataset=table.name,
        best=(candidates[winner], results[winner].mean_bac),
        all_evaluations=tuple((result.hp, result.mean_bac) for result in results),
        budget=budget,
        seed=seed,
        cv_seed=cv_seed,
        folds=k,
        best_folds=results[winner].per_fold_bac,
    )
