import numpy as np
import pytest
from django.test import SimpleTestCase

from defaults_miner.datasets import (
    MISSING_CATEGORY,
    ColumnKind,
    DataTable,
    load_arff,
    load_csv,
    load_raw,
    preprocess,
    stratified_folds,
)
from defaults_miner.exceptions import ArffError, DatasetError, EmptyFeatureSpaceError, FoldError
from defaults_miner.factories import raw_dataset


def write(path, text):
    path.write_text(text, encoding='utf-8')
    return path


def class_table(counts):
    labels = np.concatenate([np.full(count, index) for index, count in enumerate(counts)])
    return DataTable(
        name='counts',
        features=np.arange(len(labels), dtype=float).reshape(-1, 1),
        labels=labels,
        class_names=tuple(f"c{index}" for index in range(len(counts))),
    )


class TestLoadCsv:
    """Test the delimited-text loader."""

    def test_three_row_file(self, tmp_path):
        path = write(tmp_path / 'tiny.csv', 'x,y\n1,a\n2,b\n3,a\n')
        raw = load_csv(path, 'y', min_class_size=1)

        assert raw.name == 'tiny'
        assert len(raw.feature_columns) == 1
        assert raw.feature_columns[0].kind is ColumnKind.NUMERIC
        assert raw.class_counts() == {'a': 2, 'b': 1}

    def test_missing_token_column_is_kept(self, tmp_path):
        path = write(tmp_path / 'gaps.csv', 'x,gap,y\n1,?,a\n2,?,b\n3,?,a\n4,?,b\n')
        raw = load_csv(path, 'y')

        gap = raw.columns[1]
        assert gap.name == 'gap'
        assert gap.values == (None, None, None, None)

    def test_identifier_column_survives_loading(self, tmp_path):
        rows = '\n'.join(f"{i},{i % 3},{'ab'[i % 2]}" for i in range(1, 11))
        path = write(tmp_path / 'ids.csv', f"id,x,y\n{rows}\n")
        raw = load_csv(path, 'y')

        assert [column.name for column in raw.columns] == ['id', 'x', 'y']

    def test_boolean_and_categorical_kinds(self, tmp_path):
        path = write(tmp_path / 'kinds.csv', 'flag,colour,y\ntrue,red,a\nfalse,blue,b\ntrue,red,a\nfalse,green,b\n')
        raw = load_csv(path, 'y')

        assert raw.columns[0].kind is ColumnKind.BOOLEAN
        assert raw.columns[0].values == (True, False, True, False)
        assert raw.columns[1].kind is ColumnKind.CATEGORICAL

    def test_target_by_index(self, tmp_path):
        path = write(tmp_path / 'index.csv', 'y,x\na,1\nb,2\na,3\nb,4\n')
        raw = load_csv(path, 0)

        assert raw.target.name == 'y'

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match='file not found'):
            load_csv(tmp_path / 'absent.csv', 'y')

    def test_ragged_rows(self, tmp_path):
        path = write(tmp_path / 'ragged.csv', 'x,z,y\n1,2,a\n3\n')
        with pytest.raises(DatasetError, match='ragged rows'):
            load_csv(path, 'y')

    def test_missing_target(self, tmp_path):
        path = write(tmp_path / 'target.csv', 'x,y\n1,a\n2,b\n')
        with pytest.raises(DatasetError, match="'z' not found"):
            load_csv(path, 'z')

    def test_small_class_rejected(self, tmp_path):
        path = write(tmp_path / 'small.csv', 'x,y\n1,a\n2,b\n3,a\n')
        with pytest.raises(DatasetError, match="class 'b' has 1 instances"):
            load_csv(path, 'y', min_class_size=2)

    def test_custom_delimiter_and_token(self, tmp_path):
        path = write(tmp_path / 'semi.csv', 'x;y\nNA;a\n2;b\n3;a\n4;b\n')
        raw = load_csv(path, 'y', missing_token='NA', delimiter=';')

        assert raw.columns[0].values == (None, 2.0, 3.0, 4.0)


ARFF = """@relation toy
@attribute a numeric
@attribute b numeric
@attribute class {pos,neg}
@data
1.0,2.0,pos
2.0,?,neg
3.0,1.0,pos
4.0,0.5,neg
"""


class TestLoadArff:
    """Test the ARFF loader."""

    def test_numeric_with_nominal_class(self, tmp_path):
        raw = load_arff(write(tmp_path / 'toy.arff', ARFF))

        assert [column.kind for column in raw.feature_columns] == [ColumnKind.NUMERIC, ColumnKind.NUMERIC]
        assert raw.target.name == 'class'
        assert raw.class_counts() == {'neg': 2, 'pos': 2}
        assert raw.columns[1].values[1] is None

    def test_string_attribute_rejected(self, tmp_path):
        text = ARFF.replace('@attribute b numeric', '@attribute comment string')
        with pytest.raises(ArffError, match="'comment'"):
            load_arff(write(tmp_path / 'text.arff', text))

    def test_sparse_rows_rejected(self, tmp_path):
        text = ARFF.replace('1.0,2.0,pos', '{0 1.0, 2 pos}')
        with pytest.raises(ArffError, match='sparse ARFF unsupported'):
            load_arff(write(tmp_path / 'sparse.arff', text))

    def test_dispatch_on_suffix(self, tmp_path):
        raw = load_raw(write(tmp_path / 'toy.arff', ARFF), name='renamed')

        assert raw.name == 'renamed'

    def test_delimited_file_needs_target(self, tmp_path):
        with pytest.raises(DatasetError, match='target column is required'):
            load_raw(write(tmp_path / 'plain.csv', 'x,y\n1,a\n'))


class PreprocessTest(SimpleTestCase):
    """Test the encoding pipeline."""

    def test_constant_column_removed(self):
        """Test a single-valued column is dropped and reported."""
        raw = raw_dataset('const', {'c': [5, 5, 5, 5], 'x': [1, 2, 3, 4.5], 'y': ['a', 'b', 'a', 'b']}, 'y')
        table, report = preprocess(raw)

        self.assertEqual(report.removed_constant, ['c'])
        self.assertEqual(table.feature_names, ('x',))

    def test_median_imputation(self):
        """Test numeric gaps are filled with the column median."""
        raw = raw_dataset('gaps', {'x': [1.0, None, 3.0], 'z': [0.5, 1.5, 0.5], 'y': ['a', 'b', 'a']}, 'y')
        _, report = preprocess(raw)

        self.assertIn(('x', 2.0), report.imputed)

    def test_one_hot_rows_sum_to_one(self):
        """Test a 3-category column becomes 3 indicator columns, one hot per row."""
        colours = ['red', 'green', 'blue', 'red', 'blue', 'green', 'red', 'green', 'blue', 'red']
        raw = raw_dataset('hot', {'colour': colours, 'x': [0.1 * i for i in range(10)], 'y': ['a', 'b'] * 5}, 'y')
        table, report = preprocess(raw)

        self.assertEqual(report.one_hot_expansions, [('colour', 3)])
        indicator = [index for index, name in enumerate(table.feature_names) if name.startswith('colour=')]
        self.assertEqual(len(indicator), 3)
        block = table.features[:, indicator]
        recovered = (block == block.max(axis=0)).astype(float)
        np.testing.assert_array_equal(recovered.sum(axis=1), np.ones(10))

    def test_one_hot_columns_in_category_order(self):
        """Test indicator columns follow lexicographic category order."""
        raw = raw_dataset('order', {'c': ['z', 'a', 'm', 'z'], 'y': ['p', 'q', 'p', 'q']}, 'y')
        table, _ = preprocess(raw)

        self.assertEqual(table.feature_names, ('c=a', 'c=m', 'c=z'))

    def test_missing_category(self):
        """Test categorical gaps become their own indicator."""
        raw = raw_dataset('cat', {'c': ['u', None, 'v', 'u'], 'y': ['p', 'q', 'p', 'q']}, 'y')
        table, report = preprocess(raw)

        self.assertIn(('c', MISSING_CATEGORY), report.imputed)
        self.assertIn(f"c={MISSING_CATEGORY}", table.feature_names)

    def test_identifier_removed(self):
        """Test an all-distinct integer column is treated as an identifier."""
        raw = raw_dataset('ids', {'id': [1, 2, 3, 4], 'x': [0.5, 0.5, 1.5, 2.5], 'y': ['a', 'b', 'a', 'b']}, 'y')
        table, report = preprocess(raw)

        self.assertEqual(report.removed_identifier, ['id'])
        self.assertNotIn('id', table.feature_names)

    def test_booleans_mapped(self):
        """Test booleans become a single 0/1 column before scaling."""
        raw = raw_dataset('flags', {'f': [True, False, True, False], 'y': ['a', 'b', 'a', 'b']}, 'y')
        table, _ = preprocess(raw)

        np.testing.assert_allclose(table.features[:, 0], [1.0, -1.0, 1.0, -1.0])

    def test_standardized_columns(self):
        """Test every output column has zero mean and unit population sd."""
        rng = np.random.default_rng(3)
        raw = raw_dataset(
            'scaled',
            {
                'x': rng.normal(10, 4, 30).tolist(),
                'w': rng.uniform(0, 1, 30).tolist(),
                'c': rng.choice(['a', 'b', 'c'], 30).tolist(),
                'y': ['p', 'q', 'r'] * 10,
            },
            'y',
        )
        table, _ = preprocess(raw)

        self.assertTrue(np.all(np.abs(table.features.mean(axis=0)) < 1e-9))
        self.assertTrue(np.all(np.abs(table.features.std(axis=0) - 1.0) < 1e-9))
        self.assertEqual(table.class_names, ('p', 'q', 'r'))

    def test_idempotent(self):
        """Test preprocessing an already encoded table changes nothing."""
        rng = np.random.default_rng(5)
        raw = raw_dataset(
            'first',
            {'x': rng.normal(size=20).tolist(), 'z': rng.normal(size=20).tolist(), 'y': ['a', 'b'] * 10},
            'y',
        )
        table, _ = preprocess(raw)
        again = raw_dataset(
            'second',
            {name: table.features[:, j].tolist() for j, name in enumerate(table.feature_names)}
            | {'y': [table.class_names[label] for label in table.labels]},
            'y',
        )
        second, report = preprocess(again)

        self.assertEqual(report.removed_constant, [])
        self.assertEqual(report.removed_identifier, [])
        self.assertTrue(np.max(np.abs(second.features - table.features)) < 1e-9)

    def test_empty_feature_space(self):
        """Test a dataset left without features is rejected."""
        raw = raw_dataset('empty', {'c': [1, 1, 1, 1], 'y': ['a', 'b', 'a', 'b']}, 'y')

        with self.assertRaises(EmptyFeatureSpaceError):
            preprocess(raw)


class StratifiedFoldsTest(SimpleTestCase):
    """Test fold construction."""

    def per_fold(self, table, folds):
        return np.array([
            [np.sum(table.labels[folds.test_indices(fold)] == c) for c in range(table.n_classes)]
            for fold in range(folds.k)
        ])

    def test_balanced_twenty(self):
        """Test 10 + 10 instances over 10 folds give one of each class per fold."""
        table = class_table([10, 10])
        counts = self.per_fold(table, stratified_folds(table, 10, seed=1))

        np.testing.assert_array_equal(counts, np.ones((10, 2)))

    def test_exact_proportions(self):
        """Test 20 + 10 instances over 10 folds give 2 and 1 per fold."""
        table = class_table([20, 10])
        counts = self.per_fold(table, stratified_folds(table, 10, seed=2))

        np.testing.assert_array_equal(counts[:, 0], np.full(10, 2))
        np.testing.assert_array_equal(counts[:, 1], np.ones(10))

    def test_uneven_class(self):
        """Test 13 + 10 instances stay within one of the proportional share."""
        table = class_table([13, 10])
        counts = self.per_fold(table, stratified_folds(table, 10, seed=3))

        self.assertTrue(set(counts[:, 0]) <= {1, 2})
        np.testing.assert_array_equal(counts[:, 1], np.ones(10))

    def test_small_class(self):
        """Test a class with fewer than k instances is named in the error."""
        table = class_table([12, 4])

        with self.assertRaises(FoldError) as context:
            stratified_folds(table, 5, seed=0)
        self.assertEqual(context.exception.class_name, 'c1')

    def test_deterministic(self):
        """Test the same seed gives the same assignment."""
        table = class_table([15, 11])
        first = stratified_folds(table, 5, seed=9)
        second = stratified_folds(table, 5, seed=9)

        np.testing.assert_array_equal(first.assignment, second.assignment)


@pytest.mark.parametrize('seed', range(100))
def test_fold_partition_rule(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 11))
    counts = rng.integers(k, 4 * k, size=int(rng.integers(2, 5)))
    table = class_table(counts.tolist())
    folds = stratified_folds(table, k, seed)

    assert sorted(np.concatenate([folds.test_indices(f) for f in range(k)]).tolist()) == list(range(table.n_instances))
    for class_index, count in enumerate(counts):
        per_fold = [np.sum(table.labels[folds.test_indices(f)] == class_index) for f in range(k)]
        assert all(abs(n - count / k) < 1 for n in per_fold)


class DataTableTest(SimpleTestCase):
    """Test table validation."""

    def test_read_only(self):
        """Test arrays cannot be modified after construction."""
        table = class_table([3, 3])

        with self.assertRaises(ValueError):
            table.features[0, 0] = 1.0

    def test_label_gap(self):
        """Test labels must cover every class index."""
        with self.assertRaises(DatasetError):
            DataTable(name='gap', features=np.zeros((3, 1)), labels=[0, 2, 0], class_names=('a', 'b', 'c'))

    def test_non_finite(self):
        """Test missing values are rejected."""
        with self.assertRaises(DatasetError):
            DataTable(name='nan', features=[[np.nan], [1.0]], labels=[0, 1], class_names=('a', 'b'))
