"""
Nonparametric comparison of strategies over many datasets.

Friedman test on per-dataset ranks, Nemenyi critical difference with
connected groups for CD diagrams, the Wilcoxon signed-rank test (exact
distribution for small samples) and the best-pair protocol built on it.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.stats import chi2, norm, rankdata

from .exceptions import StatisticsError

logger = logging.getLogger(__name__)

# Studentized range statistic divided by sqrt(2), for k = 2..10.
NEMENYI_Q = {
    0.05: (1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164),
    0.10: (1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920),
}

EXACT_LIMIT = 25
ZERO_TOLERANCE = 1e-12

EXACT = 'exact'
NORMAL_APPROX = 'normal-approx'
DEGENERATE = 'degenerate'

POSITIVE = 'positive'
NEGATIVE = 'negative'
ZERO = 'zero'

PAIR_REPLICATIONS = 'replications'
PAIR_FOLDS = 'folds'
PAIRINGS = (PAIR_REPLICATIONS, PAIR_FOLDS)

LOW = 'low'
MEDIUM = 'medium'
HIGH = 'high'


@dataclass(frozen=True, eq=False)
class RankMatrix:
    """Rows are datasets, columns strategies; rank 1 is the best value."""

    values: np.ndarray
    strategies: tuple
    datasets: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise StatisticsError("rank matrix values must be a 2-d matrix")
        if len(self.strategies) != values.shape[1]:
            raise StatisticsError(f"{len(self.strategies)} strategy names for {values.shape[1]} columns")
        if not np.isfinite(values).all():
            raise StatisticsError("rank matrix values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'strategies', tuple(self.strategies))
        object.__setattr__(self, 'datasets', tuple(self.datasets) or tuple(str(i) for i in range(values.shape[0])))

    @classmethod
    def from_values(cls, values, strategies=None, datasets=()):
        values = np.asarray(values, dtype=float)
        if strategies is None:
            strategies = tuple(f"s{j}" for j in range(values.shape[1]))
        return cls(values=values, strategies=strategies, datasets=datasets)

    @classmethod
    def from_table(cls, table):
        return cls(
            values=table.scores.to_numpy(dtype=float),
            strategies=tuple(table.scores.columns),
            datasets=tuple(str(name) for name in table.scores.index),
        )

    @property
    def n_datasets(self):
        return self.values.shape[0]

    @property
    def n_strategies(self):
        return self.values.shape[1]

    @property
    def ranks(self):
        return rankdata(-self.values, method='average', axis=1)

    def mean_ranks(self):
        return pd.Series(self.ranks.mean(axis=0), index=list(self.strategies))


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    degrees_of_freedom: int
    p_value: float
    mean_ranks: dict
    n_datasets: int

    def rejects(self, alpha=0.05):
        return self.p_value < alpha


@dataclass(frozen=True, eq=False)
class NemenyiResult:
    critical_difference: float
    alpha: float
    mean_ranks: dict
    significant: pd.DataFrame
    cd_groups: tuple

    def is_significant(self, a, b):
        return bool(self.significant.loc[a, b])


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    n_effective: int
    p_value: float
    method: str
    alpha: float = 0.05
    w_plus: float = 0.0
    w_minus: float = 0.0

    @property
    def significant(self):
        return self.p_value < self.alpha


def friedman(matrix):
    """Chi-square form of the Friedman test over average ranks."""
    if not isinstance(matrix, RankMatrix):
        matrix = RankMatrix.from_values(matrix)
    n, k = matrix.values.shape
    if n < 2 or k < 2:
        raise StatisticsError(f"friedman needs at least 2 datasets and 2 strategies, got {n}x{k}")
    mean_ranks = matrix.ranks.mean(axis=0)
    statistic = 12.0 * n / (k * (k + 1)) * (np.sum(mean_ranks ** 2) - k * (k + 1) ** 2 / 4.0)
    statistic = max(float(statistic), 0.0)
    if statistic <= 1e-12:
        statistic = 0.0
    p_value = float(chi2.sf(statistic, k - 1)) if statistic > 0 else 1.0
    result = FriedmanResult(
        statistic=statistic,
        degrees_of_freedom=k - 1,
        p_value=min(max(p_value, 0.0), 1.0),
        mean_ranks=dict(zip(matrix.strategies, (float(rank) for rank in mean_ranks))),
        n_datasets=n,
    )
    logger.info("Friedman over %d datasets and %d strategies: chi2=%.4f, p=%.4g", n, k, statistic, result.p_value)
    return result


def nemenyi_cd(k, n, alpha=0.05):
    if alpha not in NEMENYI_Q:
        raise StatisticsError(f"alpha must be one of {sorted(NEMENYI_Q)}, got {alpha}")
    if not 2 <= k <= 10:
        raise StatisticsError(f"critical difference is tabulated for 2 <= k <= 10, got k={k}")
    if n < 1:
        raise StatisticsError(f"number of datasets must be positive, got {n}")
    return NEMENYI_Q[alpha][k - 2] * math.sqrt(k * (k + 1) / (6.0 * n))


def cd_groups(mean_ranks, critical_difference):
    """Maximal runs of rank-adjacent strategies whose spread is within the CD."""
    ordered = sorted(mean_ranks.items(), key=lambda item: (item[1], list(mean_ranks).index(item[0])))
    groups = []
    reach = -1
    for start in range(len(ordered)):
        end = start
        while end + 1 < len(ordered) and ordered[end + 1][1] - ordered[start][1] <= critical_difference:
            end += 1
        if end > start and end > reach:
            groups.append(tuple(name for name, _ in ordered[start:end + 1]))
            reach = end
    return tuple(groups)


def nemenyi(matrix, alpha=0.05):
    if not isinstance(matrix, RankMatrix):
        matrix = RankMatrix.from_values(matrix)
    cd = nemenyi_cd(matrix.n_strategies, matrix.n_datasets, alpha)
    ranks = matrix.mean_ranks()
    difference = np.abs(ranks.to_numpy()[:, None] - ranks.to_numpy()[None, :])
    significant = pd.DataFrame(difference > cd, index=list(matrix.strategies), columns=list(matrix.strategies))
    mean_ranks = {name: float(rank) for name, rank in ranks.items()}
    return NemenyiResult(
        critical_difference=cd,
        alpha=alpha,
        mean_ranks=mean_ranks,
        significant=significant,
        cd_groups=cd_groups(mean_ranks, cd),
    )


def signed_ranks(a, b):
    """Nonzero differences ``a - b`` and the mid-ranks of their magnitudes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise StatisticsError(f"paired samples must be 1-d with equal lengths, got {a.shape} and {b.shape}")
    if a.size < 1:
        raise StatisticsError("paired samples must not be empty")
    differences = a - b
    differences = differences[np.abs(differences) > ZERO_TOLERANCE]
    return differences, rankdata(np.abs(differences), method='average')


def exact_pvalue(ranks, statistic):
    """
    Two-sided p of ``statistic`` under the null distribution of the
    positive-rank sum, counting sign patterns on doubled (integer) ranks.
    """
    doubled = np.rint(np.asarray(ranks, dtype=float) * 2).astype(np.int64)
    counts = np.zeros(int(doubled.sum()) + 1, dtype=np.int64)
    counts[0] = 1
    for rank in doubled:
        shifted = counts.copy()
        shifted[rank:] += counts[:-rank]
        counts = shifted
    limit = int(round(statistic * 2))
    tail = int(counts[:limit + 1].sum())
    return min(1.0, 2.0 * tail / float(2 ** len(doubled)))


def normal_pvalue(ranks, statistic):
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    _, ties = np.unique(ranks, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(ties ** 3 - ties) / 48.0
    if variance <= 0:
        return 1.0
    z = min((statistic - mean + 0.5) / math.sqrt(variance), 0.0)
    return min(1.0, float(2.0 * norm.cdf(z)))


def wilcoxon_signed_rank(a, b, alpha=0.05, exact_limit=EXACT_LIMIT):
    """
    Two-sided Wilcoxon signed-rank test of paired samples.

    Zero differences are dropped before ranking; W is the smaller of the
    positive and negative rank sums.
    """
    differences, ranks = signed_ranks(a, b)
    n = len(differences)
    if n == 0:
        return WilcoxonResult(statistic=0.0, n_effective=0, p_value=1.0, method=DEGENERATE, alpha=alpha)
    w_plus = float(ranks[differences > 0].sum())
    w_minus = float(ranks[differences < 0].sum())
    statistic = min(w_plus, w_minus)
    if n <= exact_limit:
        p_value, method = exact_pvalue(ranks, statistic), EXACT
    else:
        p_value, method = normal_pvalue(ranks, statistic), NORMAL_APPROX
    return WilcoxonResult(
        statistic=statistic,
        n_effective=n,
        p_value=p_value,
        method=method,
        alpha=alpha,
        w_plus=w_plus,
        w_minus=w_minus,
    )


@dataclass(frozen=True)
class DatasetOutcome:
    dataset: str
    winner: str
    runner_up: str
    result: WilcoxonResult

    @property
    def significant(self):
        return self.result.significant

    @property
    def pair(self):
        return frozenset((self.winner, self.runner_up))


@dataclass(frozen=True)
class BestPairSummary:
    outcomes: tuple
    excluded: tuple
    alpha: float
    strategies: tuple

    def outcome(self, dataset):
        for outcome in self.outcomes:
            if outcome.dataset == dataset:
                return outcome
        raise KeyError(dataset)

    def frequency(self):
        """Winners per strategy, split by significance at ``alpha``."""
        frame = pd.DataFrame(0, index=list(self.strategies), columns=['significant', 'not_significant'])
        for outcome in self.outcomes:
            column = 'significant' if outcome.significant else 'not_significant'
            frame.loc[outcome.winner, column] += 1
        frame.index.name = 'strategy'
        return frame


def paired_scores(table, pairing=PAIR_REPLICATIONS):
    """The table's paired observations for ``pairing``, keyed by (dataset, strategy)."""
    if pairing not in PAIRINGS:
        raise StatisticsError(f"pairing must be one of {PAIRINGS}, got {pairing!r}")
    return table.replication_scores if pairing == PAIR_REPLICATIONS else table.fold_scores


def best_pair_protocol(table, alpha=0.05, strategies=None, pairing=PAIR_REPLICATIONS):
    """
    Per dataset, Wilcoxon-test the two strategies with the highest mean BAC.

    ``pairing`` picks the paired observations: per-replication mean BACs
    (the default) or per-fold scores on the shared fold plan. Ties in mean
    BAC keep column order.
    """
    if strategies is not None:
        table = table.subset(strategies)
    names = list(table.strategies)
    if len(names) < 2:
        raise StatisticsError("the best-pair protocol needs at least 2 strategies")

    observations = paired_scores(table, pairing)
    outcomes, excluded = [], []
    for dataset in table.datasets:
        row = table.scores.loc[dataset]
        ranked = sorted(names, key=lambda name: (-row[name], names.index(name)))
        winner, runner_up = ranked[0], ranked[1]
        if (dataset, winner) not in observations or (dataset, runner_up) not in observations:
            excluded.append((dataset, f'no paired {pairing} scores'))
            continue
        a = np.asarray(observations[(dataset, winner)], dtype=float)
        b = np.asarray(observations[(dataset, runner_up)], dtype=float)
        if len(a) < 2 or len(a) != len(b):
            excluded.append((dataset, f'{min(len(a), len(b))} paired observations'))
            continue
        outcomes.append(DatasetOutcome(dataset, winner, runner_up, wilcoxon_signed_rank(a, b, alpha)))

    for dataset, reason in excluded:
        logger.warning("Best-pair protocol excluded %s: %s", dataset, reason)
    return BestPairSummary(outcomes=tuple(outcomes), excluded=tuple(excluded), alpha=alpha, strategies=tuple(names))


@dataclass(frozen=True)
class HistogramBin:
    lower: float
    upper: float
    count: int
    sign: str
    band: str
    datasets: tuple = ()


def improvement_band(inner_edge):
    edge = round(abs(inner_edge), 9)
    if edge >= 0.1:
        return HIGH
    if edge >= 0.05:
        return MEDIUM
    return LOW


def improvement_histogram(table, a, b, bin_width=0.05):
    """
    Bin the per-dataset differences ``BAC_a - BAC_b``.

    Positive bins are ``((i-1)w, iw]``, negative ones mirror them and exact
    ties get a zero-width bin at 0. The band of a bin follows its edge
    closest to zero.
    """
    for strategy in (a, b):
        if strategy not in table.strategies:
            raise StatisticsError(f"missing strategy column: {strategy}")
    if bin_width <= 0:
        raise StatisticsError(f"bin width must be positive, got {bin_width}")

    differences = table.scores[a] - table.scores[b]
    bins = {}
    for dataset, difference in differences.items():
        if abs(difference) <= ZERO_TOLERANCE:
            key = 0
        else:
            step = math.ceil(round(abs(difference) / bin_width, 9))
            key = step if difference > 0 else -step
        bins.setdefault(key, []).append(str(dataset))

    result = []
    for key in sorted(bins):
        if key == 0:
            lower = upper = 0.0
            sign, band = ZERO, LOW
        elif key > 0:
            lower, upper = round((key - 1) * bin_width, 9), round(key * bin_width, 9)
            sign, band = POSITIVE, improvement_band(lower)
        else:
            lower, upper = round(key * bin_width, 9), round((key + 1) * bin_width, 9)
            sign, band = NEGATIVE, improvement_band(upper)
        result.append(
            HistogramBin(
                lower=lower,
                upper=upper,
                count=len(bins[key]),
                sign=sign,
                band=band,
                datasets=tuple(sorted(bins[key])),
            )
        )
    return result
