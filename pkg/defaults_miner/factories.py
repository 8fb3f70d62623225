import factory
import numpy as np
from factory import fuzzy

from .datasets import Column, ColumnKind, DataTable, RawDataset
from .metalearning import MetaExample, MetaFeatureVector, MetaLabel
from .svm import HPSetting, Provenance


def gaussian_blobs(n_per_class=20, n_classes=2, n_features=2, spread=0.1, distance=5.0, seed=0):
    """Isotropic blobs; class c is centred ``c * distance`` along the first axis."""
    rng = np.random.default_rng(seed)
    centers = np.zeros((n_classes, n_features))
    centers[:, 0] = distance * np.arange(n_classes)
    features = np.vstack([rng.normal(center, spread, size=(n_per_class, n_features)) for center in centers])
    labels = np.repeat(np.arange(n_classes), n_per_class)
    return features, labels


def identical_classes(n_per_class=40, n_features=2, seed=0):
    """Two classes drawn from the same standard normal distribution."""
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(2 * n_per_class, n_features))
    labels = np.repeat([0, 1], n_per_class)
    return features, labels


def duplicated_rows(n_per_class=8, copies=3):
    """
    Distinct grid points, each repeated ``copies`` times with one label.
    Points sit at least 1 apart, so a large gamma memorizes them.
    """
    n_points = 2 * n_per_class
    side = int(np.ceil(np.sqrt(n_points)))
    grid = np.array([(i, j) for i in range(side) for j in range(side)][:n_points], dtype=float)
    point_labels = np.arange(n_points) % 2
    features = np.repeat(grid, copies, axis=0)
    labels = np.repeat(point_labels, copies)
    return features, labels


def checkerboard_clusters(side=4, per_cluster=6, spread=0.05, seed=0):
    """
    Tight clusters on a unit grid labelled like a checkerboard.

    Only a narrow kernel separates neighbouring cells while keeping each
    cluster together, so the best log2 gamma lies around +4.
    """
    rng = np.random.default_rng(seed)
    features, labels = [], []
    for i in range(side):
        for j in range(side):
            features.append(rng.normal((i, j), spread, size=(per_cluster, 2)))
            labels.extend([(i + j) % 2] * per_cluster)
    return np.vstack(features), np.array(labels)


def make_table(name, sample, class_names=None):
    features, labels = sample
    n_classes = int(np.max(labels)) + 1
    return DataTable(
        name=name,
        features=features,
        labels=labels,
        class_names=tuple(class_names or (f"c{index}" for index in range(n_classes))),
    )


def high_gamma_suite(count=12, side=4, per_cluster=6, seed=0):
    """``count`` checkerboard tables keyed by name."""
    return {
        f"grid{index:02d}": make_table(
            f"grid{index:02d}",
            checkerboard_clusters(side, per_cluster, seed=seed + index),
        )
        for index in range(count)
    }


def raw_dataset(name, columns, target):
    """
    A RawDataset from ``{column: values}``; the target column is categorical
    and other columns are numeric unless their values are strings.
    """
    built = []
    for column_name, values in columns.items():
        values = tuple(values)
        if column_name == target or any(isinstance(value, str) for value in values):
            kind = ColumnKind.CATEGORICAL
        elif all(value is None or isinstance(value, bool) for value in values):
            kind = ColumnKind.BOOLEAN
        else:
            kind = ColumnKind.NUMERIC
        built.append(Column(column_name, kind, values))
    return RawDataset(name=name, columns=tuple(built), target_index=list(columns).index(target))


class HPSettingFactory(factory.Factory):
    """Factory for settings inside the log2 box."""

    class Meta:
        model = HPSetting

    log2_cost = fuzzy.FuzzyFloat(-15.0, 15.0)
    log2_gamma = fuzzy.FuzzyFloat(-15.0, 15.0)
    provenance = Provenance.FIXTURE
    origin = factory.Sequence(lambda n: f"setting {n}")


class DataTableFactory(factory.Factory):
    """Factory for Gaussian-blob tables."""

    class Meta:
        model = DataTable

    class Params:
        n_per_class = 20
        n_classes = 2
        n_features = 2
        spread = 0.1
        distance = 5.0
        seed = factory.Sequence(lambda n: n)
        sample = factory.LazyAttribute(
            lambda o: gaussian_blobs(o.n_per_class, o.n_classes, o.n_features, o.spread, o.distance, o.seed)
        )

    name = factory.Sequence(lambda n: f"blobs{n}")
    features = factory.LazyAttribute(lambda o: o.sample[0])
    labels = factory.LazyAttribute(lambda o: o.sample[1])
    class_names = factory.LazyAttribute(lambda o: tuple(f"c{index}" for index in range(o.n_classes)))


def planted_features(nr_inst, nr_attr):
    """Meta-features of a numeric-only dataset with two balanced classes."""
    return MetaFeatureVector(
        nr_inst=nr_inst,
        nr_attr=nr_attr,
        nr_class=2,
        nr_num=nr_attr,
        nr_cat=0,
        nr_bin=0,
        attr_to_inst=nr_attr / nr_inst,
        inst_to_attr=nr_inst / nr_attr,
        cat_to_num=0.0,
        num_to_cat=None,
        freq_class_mean=0.5,
        freq_class_sd=0.0,
    )


class MetaExampleFactory(factory.Factory):
    """
    Meta-examples obeying the planted rule: tuning pays off on datasets
    with at least 358 instances.
    """

    class Meta:
        model = MetaExample

    class Params:
        nr_inst = fuzzy.FuzzyInteger(50, 2000)
        nr_attr = fuzzy.FuzzyInteger(2, 100)

    dataset = factory.Sequence(lambda n: f"meta{n}")
    features = factory.LazyAttribute(lambda o: planted_features(o.nr_inst, o.nr_attr))
    label = factory.LazyAttribute(lambda o: MetaLabel.RS if o.nr_inst >= 358 else MetaLabel.DEFAULT_OPT)


