import itertools
import math

import numpy as np
import pandas as pd
import pytest
from django.test import SimpleTestCase

from defaults_miner.exceptions import StatisticsError
from defaults_miner.pipeline import DEFAULT_OPT, DEFAULT_WEKA, RANDOM_SEARCH, StrategyTable
from defaults_miner.stats import (
    DEGENERATE,
    EXACT,
    HIGH,
    LOW,
    MEDIUM,
    NEGATIVE,
    NORMAL_APPROX,
    PAIR_FOLDS,
    PAIR_REPLICATIONS,
    POSITIVE,
    ZERO,
    RankMatrix,
    best_pair_protocol,
    cd_groups,
    exact_pvalue,
    friedman,
    improvement_histogram,
    nemenyi,
    nemenyi_cd,
    signed_ranks,
    wilcoxon_signed_rank,
)


def enumerated_pvalue(ranks, statistic):
    """Two-sided p by listing every sign pattern."""
    total = float(np.sum(ranks))
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(ranks)):
        positive = float(np.dot(signs, ranks))
        if min(positive, total - positive) <= statistic:
            hits += 1
    return min(1.0, hits / 2.0 ** len(ranks))


def two_column_table(a_scores, b_scores, a=DEFAULT_OPT, b=RANDOM_SEARCH):
    names = [f"d{i}" for i in range(len(a_scores))]
    return StrategyTable(scores=pd.DataFrame({a: a_scores, b: b_scores}, index=names), fold_scores={})


class FriedmanTest(SimpleTestCase):
    """Test the Friedman rank test."""

    def test_consistent_order(self):
        """Test three strategies in the same order on ten datasets."""
        values = np.tile([0.9, 0.8, 0.7], (10, 1))
        result = friedman(RankMatrix.from_values(values, ('a', 'b', 'c')))

        self.assertAlmostEqual(result.statistic, 20.0)
        self.assertEqual(result.degrees_of_freedom, 2)
        self.assertAlmostEqual(result.p_value, math.exp(-10), delta=1e-12)
        self.assertEqual(result.mean_ranks, {'a': 1.0, 'b': 2.0, 'c': 3.0})
        self.assertTrue(result.rejects(0.05))

    def test_all_tied(self):
        """Test identical columns give statistic 0 and p 1."""
        result = friedman(np.full((6, 4), 0.5))

        self.assertEqual(result.statistic, 0.0)
        self.assertEqual(result.p_value, 1.0)
        self.assertEqual(set(result.mean_ranks.values()), {2.5})

    def test_ties_use_average_ranks(self):
        """Test tied values share the average rank."""
        matrix = RankMatrix.from_values([[0.9, 0.9, 0.1]])

        np.testing.assert_array_equal(matrix.ranks, [[1.5, 1.5, 3.0]])

    def test_too_small(self):
        """Test one dataset is not enough."""
        with self.assertRaises(StatisticsError):
            friedman(np.array([[0.5, 0.6]]))

    def test_non_finite(self):
        """Test missing scores are rejected."""
        with self.assertRaises(StatisticsError):
            RankMatrix.from_values([[0.5, math.nan], [0.4, 0.3]])

    def test_from_table(self):
        """Test a strategy table converts with its labels."""
        matrix = RankMatrix.from_table(two_column_table([0.9, 0.4], [0.5, 0.6]))

        self.assertEqual(matrix.strategies, (DEFAULT_OPT, RANDOM_SEARCH))
        self.assertEqual(matrix.datasets, ('d0', 'd1'))
        self.assertEqual(matrix.mean_ranks().to_dict(), {DEFAULT_OPT: 1.5, RANDOM_SEARCH: 1.5})


class NemenyiTest(SimpleTestCase):
    """Test the Nemenyi critical difference."""

    def test_reference_values(self):
        """Test critical differences for the published comparison sizes."""
        self.assertTrue(0.31 <= nemenyi_cd(5, 375) <= 0.32)
        self.assertTrue(0.24 <= nemenyi_cd(4, 375) <= 0.25)
        self.assertAlmostEqual(nemenyi_cd(2, 100), 0.196, places=9)

    def test_quadrupled_datasets_halve_cd(self):
        """Test CD shrinks with the square root of the dataset count."""
        for k in range(2, 11):
            self.assertAlmostEqual(nemenyi_cd(k, 400), nemenyi_cd(k, 100) / 2)

    def test_alpha_ten_percent(self):
        """Test the 0.10 table is smaller than the 0.05 one."""
        self.assertLess(nemenyi_cd(5, 50, alpha=0.10), nemenyi_cd(5, 50, alpha=0.05))

    def test_limits(self):
        """Test untabulated k or alpha are rejected."""
        with self.assertRaises(StatisticsError):
            nemenyi_cd(11, 50)
        with self.assertRaises(StatisticsError):
            nemenyi_cd(3, 50, alpha=0.01)
        with self.assertRaises(StatisticsError):
            nemenyi_cd(3, 0)

    def test_significance_matrix(self):
        """Test pairs further apart than the CD are flagged, symmetrically."""
        values = np.tile([0.9, 0.8, 0.7], (30, 1))
        result = nemenyi(RankMatrix.from_values(values, ('a', 'b', 'c')))

        self.assertTrue(result.is_significant('a', 'c'))
        self.assertTrue(result.is_significant('c', 'a'))
        self.assertFalse(result.is_significant('a', 'a'))

    def test_groups(self):
        """Test connected groups are maximal runs within the CD."""
        groups = cd_groups({'a': 1.0, 'b': 1.2, 'c': 2.5, 'd': 2.6}, 0.5)

        self.assertEqual(groups, (('a', 'b'), ('c', 'd')))

    def test_single_spanning_group(self):
        """Test close ranks form one group without nested subgroups."""
        self.assertEqual(cd_groups({'a': 1.0, 'b': 1.1, 'c': 1.2}, 0.5), (('a', 'b', 'c'),))


class WilcoxonTest(SimpleTestCase):
    """Test the Wilcoxon signed-rank test."""

    def test_five_positive(self):
        """Test five positive differences give W = 0 and p = 1/16."""
        result = wilcoxon_signed_rank([1, 2, 3, 4, 5], [0, 0, 0, 0, 0])

        self.assertEqual(result.statistic, 0.0)
        self.assertEqual(result.p_value, 0.0625)
        self.assertEqual(result.method, EXACT)
        self.assertEqual((result.w_plus, result.w_minus), (15.0, 0.0))
        self.assertFalse(result.significant)

    def test_zero_differences_dropped(self):
        """Test zero differences leave the sample before ranking."""
        differences, ranks = signed_ranks([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])

        np.testing.assert_array_equal(differences, [1.0, 2.0])
        np.testing.assert_array_equal(ranks, [1.0, 2.0])

    def test_all_zero(self):
        """Test identical samples give a degenerate result with p 1."""
        result = wilcoxon_signed_rank([0.5] * 10, [0.5] * 10)

        self.assertEqual(result.method, DEGENERATE)
        self.assertEqual(result.p_value, 1.0)
        self.assertEqual(result.n_effective, 0)

    def test_ten_folds_significant(self):
        """Test ten consistent fold wins are significant at 0.05."""
        result = wilcoxon_signed_rank(np.linspace(0.8, 0.9, 10), np.linspace(0.7, 0.75, 10))

        self.assertAlmostEqual(result.p_value, 2 / 1024)
        self.assertTrue(result.significant)

    def test_normal_approximation_close_to_exact(self):
        """Test the large-sample approximation stays near the exact value."""
        rng = np.random.default_rng(3)
        differences = np.arange(1, 31) * np.where(rng.random(30) < 0.35, -1.0, 1.0)

        exact = wilcoxon_signed_rank(differences, np.zeros(30), exact_limit=30)
        approx = wilcoxon_signed_rank(differences, np.zeros(30))

        self.assertEqual(exact.method, EXACT)
        self.assertEqual(approx.method, NORMAL_APPROX)
        self.assertAlmostEqual(exact.p_value, approx.p_value, delta=0.02)

    def test_unpaired(self):
        """Test samples of different length are rejected."""
        with self.assertRaises(StatisticsError):
            wilcoxon_signed_rank([1.0, 2.0], [1.0])


@pytest.mark.parametrize('seed', range(200))
def test_exact_pvalue_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 13))
    differences = rng.integers(-4, 5, size=n).astype(float)
    differences[differences == 0] = 1.0
    nonzero, ranks = signed_ranks(differences, np.zeros(n))
    statistic = min(ranks[nonzero > 0].sum(), ranks[nonzero < 0].sum())

    assert exact_pvalue(ranks, statistic) == enumerated_pvalue(ranks, statistic)


class BestPairTest(SimpleTestCase):
    """Test the per-dataset best-pair protocol."""

    def setUp(self):
        scores = pd.DataFrame(
            {
                DEFAULT_OPT: [0.90, 0.70, 0.80],
                RANDOM_SEARCH: [0.80, 0.75, 0.80],
                DEFAULT_WEKA: [0.50, 0.60, 0.60],
            },
            index=['a', 'b', 'c'],
        )
        folds = {}
        for dataset in scores.index:
            for strategy in scores.columns:
                folds[(dataset, strategy)] = tuple(scores.loc[dataset, strategy] + np.linspace(-0.02, 0.02, 10))
        folds[('b', RANDOM_SEARCH)] = tuple(0.75 + np.linspace(-0.001, 0.001, 10))
        replications = {key: tuple(float(np.mean(value)) + np.linspace(-0.01, 0.01, 5)) for key, value in folds.items()}
        self.table = StrategyTable(scores=scores, fold_scores=folds, replication_scores=replications)

    def test_winners(self):
        """Test the two highest strategies are paired and ties keep column order."""
        summary = best_pair_protocol(self.table, pairing=PAIR_FOLDS)

        self.assertEqual(summary.outcome('a').winner, DEFAULT_OPT)
        self.assertEqual(summary.outcome('b').winner, RANDOM_SEARCH)
        self.assertEqual((summary.outcome('c').winner, summary.outcome('c').runner_up), (DEFAULT_OPT, RANDOM_SEARCH))

    def test_significance(self):
        """Test a uniform fold shift is significant and equal folds are not."""
        summary = best_pair_protocol(self.table, pairing=PAIR_FOLDS)

        self.assertTrue(summary.outcome('a').significant)
        self.assertEqual(summary.outcome('c').result.method, DEGENERATE)
        self.assertFalse(summary.outcome('c').significant)

    def test_frequency(self):
        """Test winners are counted by significance."""
        frequency = best_pair_protocol(self.table, pairing=PAIR_FOLDS).frequency()

        self.assertEqual(frequency.loc[DEFAULT_OPT, 'significant'], 1)
        self.assertEqual(frequency.loc[DEFAULT_OPT, 'not_significant'], 1)
        self.assertEqual(frequency['significant'].sum() + frequency['not_significant'].sum(), 3)

    def test_missing_folds_excluded(self):
        """Test datasets without paired fold scores are excluded, not failed."""
        folds = {key: value for key, value in self.table.fold_scores.items() if key[0] != 'a'}
        summary = best_pair_protocol(StrategyTable(scores=self.table.scores, fold_scores=folds), pairing=PAIR_FOLDS)

        self.assertEqual([dataset for dataset, _ in summary.excluded], ['a'])
        self.assertEqual(len(summary.outcomes), 2)

    def test_strategy_subset(self):
        """Test restricting the strategies changes the pairs."""
        summary = best_pair_protocol(self.table, strategies=[DEFAULT_OPT, DEFAULT_WEKA], pairing=PAIR_FOLDS)

        self.assertEqual(summary.outcome('b').runner_up, DEFAULT_WEKA)

    def test_replication_pairing_is_default(self):
        """Test replication means are paired unless folds are asked for."""
        by_replication = best_pair_protocol(self.table)
        by_fold = best_pair_protocol(self.table, pairing=PAIR_FOLDS)

        self.assertEqual(by_replication.outcome('a').result.n_effective, 5)
        self.assertEqual(by_fold.outcome('a').result.n_effective, 10)
        self.assertEqual(by_replication.outcome('a').winner, by_fold.outcome('a').winner)

    def test_pairing_changes_significance(self):
        """Test five replications of a uniform shift fall short where ten folds do not."""
        outcome = best_pair_protocol(self.table, pairing=PAIR_REPLICATIONS).outcome('a')

        self.assertAlmostEqual(outcome.result.p_value, 2 / 32)
        self.assertFalse(best_pair_protocol(self.table).outcome('a').significant)
        self.assertTrue(best_pair_protocol(self.table, pairing=PAIR_FOLDS).outcome('a').significant)

    def test_fold_only_table_excluded_by_replication(self):
        """Test a table without replication scores is excluded under the default pairing."""
        summary = best_pair_protocol(StrategyTable(scores=self.table.scores, fold_scores=self.table.fold_scores))

        self.assertEqual(summary.outcomes, ())
        self.assertEqual([reason for _, reason in summary.excluded], ['no paired replications scores'] * 3)

    def test_single_replication_excluded(self):
        """Test one observation per strategy is too few to pair."""
        replications = {key: value[:1] for key, value in self.table.replication_scores.items()}
        table = StrategyTable(scores=self.table.scores, fold_scores={}, replication_scores=replications)

        self.assertEqual(len(best_pair_protocol(table).excluded), 3)

    def test_unknown_pairing(self):
        """Test an unknown pairing is rejected."""
        with self.assertRaises(StatisticsError):
            best_pair_protocol(self.table, pairing='datasets')


class ImprovementHistogramTest(SimpleTestCase):
    """Test binned per-dataset improvements."""

    def test_bins_and_bands(self):
        """Test positive and negative bins and their bands."""
        bins = improvement_histogram(two_column_table([0.92, 0.70], [0.80, 0.71]), DEFAULT_OPT, RANDOM_SEARCH)

        self.assertEqual(len(bins), 2)
        negative, positive = bins
        self.assertEqual((negative.lower, negative.upper, negative.sign, negative.band), (-0.05, 0.0, NEGATIVE, LOW))
        self.assertEqual((positive.lower, positive.upper, positive.sign, positive.band), (0.1, 0.15, POSITIVE, HIGH))
        self.assertEqual(positive.datasets, ('d0',))

    def test_medium_band(self):
        """Test a bin starting at 0.05 is medium."""
        (only,) = improvement_histogram(two_column_table([0.77], [0.70]), DEFAULT_OPT, RANDOM_SEARCH)

        self.assertEqual((only.lower, only.upper, only.band), (0.05, 0.1, MEDIUM))

    def test_ties(self):
        """Test exact ties get their own zero bin."""
        bins = improvement_histogram(two_column_table([0.7, 0.8], [0.7, 0.8]), DEFAULT_OPT, RANDOM_SEARCH)

        self.assertEqual(len(bins), 1)
        self.assertEqual((bins[0].sign, bins[0].count), (ZERO, 2))

    def test_bin_edge_is_inclusive(self):
        """Test a difference of exactly one bin width closes the first bin."""
        (only,) = improvement_histogram(two_column_table([0.75], [0.70]), DEFAULT_OPT, RANDOM_SEARCH)

        self.assertEqual((only.lower, only.upper), (0.0, 0.05))

    def test_missing_strategy(self):
        """Test an unknown column is reported."""
        with self.assertRaises(StatisticsError):
            improvement_histogram(two_column_table([0.7], [0.6]), DEFAULT_OPT, DEFAULT_WEKA)
