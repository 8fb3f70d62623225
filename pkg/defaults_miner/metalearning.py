"""
Meta-learning advisor: when do optimized defaults suffice?

Simple dataset characteristics are computed on raw data, each dataset is
labeled by the default.opt vs random.search best-pair outcome, and a small
class-weighted gini tree is induced and rendered as rule paths.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .datasets import ColumnKind
from .evaluation import ConfusionMatrix, balanced_accuracy
from .pipeline import DEFAULT_OPT, RANDOM_SEARCH

logger = logging.getLogger(__name__)

FEATURE_NAMES = (
    'nr_inst',
    'nr_attr',
    'nr_class',
    'nr_num',
    'nr_cat',
    'nr_bin',
    'attr_to_inst',
    'inst_to_attr',
    'cat_to_num',
    'num_to_cat',
    'freq_class_mean',
    'freq_class_sd',
)

GINI_TOLERANCE = 1e-12


class MetaLabel(str, Enum):
    DEFAULT_OPT = 'default_opt'
    RS = 'rs'

    @property
    def index(self):
        return 0 if self is MetaLabel.DEFAULT_OPT else 1


LABELS = (MetaLabel.DEFAULT_OPT, MetaLabel.RS)


@dataclass(frozen=True)
class MetaFeatureVector:
    """Ratios are ``None`` when their denominator is zero."""

    nr_inst: int
    nr_attr: int
    nr_class: int
    nr_num: int
    nr_cat: int
    nr_bin: int
    attr_to_inst: float = None
    inst_to_attr: float = None
    cat_to_num: float = None
    num_to_cat: float = None
    freq_class_mean: float = None
    freq_class_sd: float = None

    def as_dict(self):
        return {name: getattr(self, name) for name in FEATURE_NAMES}

    def to_vector(self):
        return np.array([np.nan if value is None else float(value) for value in self.as_dict().values()])

    @classmethod
    def from_dict(cls, values):
        cleaned = {}
        for name in FEATURE_NAMES:
            value = values.get(name)
            if value is None or (isinstance(value, float) and math.isnan(value)):
                cleaned[name] = None
            elif name.startswith('nr_'):
                cleaned[name] = int(value)
            else:
                cleaned[name] = float(value)
        return cls(**cleaned)


def _ratio(numerator, denominator):
    return numerator / denominator if denominator else None


def extract_metafeatures(raw):
    """General and simple characteristics of a raw (unencoded) dataset."""
    features = raw.feature_columns
    nr_num = sum(1 for column in features if column.kind is ColumnKind.NUMERIC)
    nr_cat = len(features) - nr_num
    nr_bin = sum(1 for column in features if len(set(column.present())) == 2)
    counts = np.array(list(raw.class_counts().values()), dtype=float)
    frequencies = counts / counts.sum()
    nr_inst, nr_attr = raw.n_instances, len(features)
    return MetaFeatureVector(
        nr_inst=nr_inst,
        nr_attr=nr_attr,
        nr_class=len(counts),
        nr_num=nr_num,
        nr_cat=nr_cat,
        nr_bin=nr_bin,
        attr_to_inst=_ratio(nr_attr, nr_inst),
        inst_to_attr=_ratio(nr_inst, nr_attr),
        cat_to_num=_ratio(nr_cat, nr_num),
        num_to_cat=_ratio(nr_num, nr_cat),
        freq_class_mean=1.0 / len(counts),
        freq_class_sd=float(np.std(frequencies, ddof=1)),
    )


def metafeature_frame(vectors):
    """One row per dataset, columns in feature order."""
    rows = [[vector.as_dict()[feature] for feature in FEATURE_NAMES] for vector in vectors.values()]
    frame = pd.DataFrame(rows, index=list(vectors), columns=list(FEATURE_NAMES)).sort_index()
    frame.index.name = 'dataset'
    return frame


@dataclass(frozen=True)
class MetaExample:
    dataset: str
    features: MetaFeatureVector
    label: MetaLabel


def label_for(outcome):
    """``rs`` only when random search won the pair against default.opt significantly."""
    if outcome.winner == RANDOM_SEARCH and outcome.runner_up == DEFAULT_OPT and outcome.significant:
        return MetaLabel.RS
    return MetaLabel.DEFAULT_OPT


def label_meta_examples(outcomes, metafeatures):
    """
    Pair best-pair outcomes with meta-features.

    Returns ``(examples, excluded)``; ``excluded`` lists ``(dataset, reason)``
    for datasets without a default.opt vs random.search result or without
    meta-features.
    """
    by_dataset = {outcome.dataset: outcome for outcome in outcomes}
    examples, excluded = [], []
    for dataset in sorted(set(by_dataset) | set(metafeatures)):
        outcome = by_dataset.get(dataset)
        if outcome is None:
            excluded.append((dataset, 'no best-pair result'))
        elif outcome.pair != frozenset((DEFAULT_OPT, RANDOM_SEARCH)):
            excluded.append((dataset, f'best pair is {outcome.winner} vs {outcome.runner_up}'))
        elif dataset not in metafeatures:
            excluded.append((dataset, 'no meta-features'))
        else:
            examples.append(MetaExample(dataset, metafeatures[dataset], label_for(outcome)))
    for dataset, reason in excluded:
        logger.warning("Meta-dataset excludes %s: %s", dataset, reason)
    return examples, excluded


def build_meta_examples(mf_frame, labels_frame):
    """Join a meta-feature frame (indexed by dataset) with a ``dataset,label`` frame."""
    labels = dict(zip(labels_frame['dataset'].astype(str), labels_frame['label'].astype(str)))
    examples, excluded = [], []
    for dataset in sorted(set(labels) | {str(name) for name in mf_frame.index}):
        if dataset not in labels:
            excluded.append((dataset, 'no label'))
        elif dataset not in mf_frame.index:
            excluded.append((dataset, 'no meta-features'))
        else:
            vector = MetaFeatureVector.from_dict(mf_frame.loc[dataset].to_dict())
            examples.append(MetaExample(dataset, vector, MetaLabel(labels[dataset])))
    for dataset, reason in excluded:
        logger.warning("Meta-dataset excludes %s: %s", dataset, reason)
    return examples, excluded


@dataclass(frozen=True)
class TreeNode:
    counts: tuple
    prediction: MetaLabel
    feature: str = None
    threshold: float = None
    left: 'TreeNode' = None
    right: 'TreeNode' = None

    @property
    def is_leaf(self):
        return self.feature is None

    def to_dict(self):
        node = {'counts': list(self.counts), 'prediction': self.prediction.value}
        if not self.is_leaf:
            node.update(
                feature=self.feature,
                threshold=self.threshold,
                left=self.left.to_dict(),
                right=self.right.to_dict(),
            )
        return node

    @classmethod
    def from_dict(cls, node):
        if node.get('feature') is None:
            return cls(counts=tuple(node['counts']), prediction=MetaLabel(node['prediction']))
        return cls(
            counts=tuple(node['counts']),
            prediction=MetaLabel(node['prediction']),
            feature=node['feature'],
            threshold=float(node['threshold']),
            left=cls.from_dict(node['left']),
            right=cls.from_dict(node['right']),
        )


@dataclass(frozen=True)
class TreeModel:
    """Missing ratios follow the ``>=`` branch of every split."""

    root: TreeNode
    class_weights: tuple
    max_depth: int = 4
    min_leaf: int = 3

    def predict_one(self, features):
        values = features.as_dict() if isinstance(features, MetaFeatureVector) else features
        node = self.root
        while not node.is_leaf:
            value = values.get(node.feature)
            value = math.inf if value is None or math.isnan(value) else value
            node = node.left if value < node.threshold else node.right
        return node.prediction

    def predict(self, vectors):
        return [self.predict_one(vector) for vector in vectors]

    @property
    def depth(self):
        def walk(node):
            return 0 if node.is_leaf else 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    def to_dict(self):
        return {
            'root': self.root.to_dict(),
            'class_weights': {label.value: weight for label, weight in zip(LABELS, self.class_weights)},
            'max_depth': self.max_depth,
            'min_leaf': self.min_leaf,
        }

    @classmethod
    def from_dict(cls, data):
        weights = data.get('class_weights') or {}
        return cls(
            root=TreeNode.from_dict(data['root']),
            class_weights=tuple(float(weights.get(label.value, 1.0)) for label in LABELS),
            max_depth=int(data.get('max_depth', 4)),
            min_leaf=int(data.get('min_leaf', 3)),
        )


def balanced_weights(labels):
    """Inverse-frequency weights ``N / (2 * n_c)``; absent classes get 1."""
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=2)
    return tuple(len(labels) / (2.0 * count) if count else 1.0 for count in counts)


def weighted_gini(counts, weights):
    masses = np.asarray(counts, dtype=float) * weights
    total = masses.sum()
    if total <= 0:
        return 0.0, 0.0
    return 1.0 - float(np.sum((masses / total) ** 2)), float(total)


def split_impurity(left_counts, right_counts, weights):
    left, left_mass = weighted_gini(left_counts, weights)
    right, right_mass = weighted_gini(right_counts, weights)
    return (left * left_mass + right * right_mass) / (left_mass + right_mass)


def candidate_thresholds(values):
    """Midpoints between consecutive distinct finite values."""
    distinct = np.unique(values[np.isfinite(values)])
    return (distinct[:-1] + distinct[1:]) / 2.0


def best_split(x, y, weights, min_leaf=1):
    """
    Lowest weighted-gini split as ``(feature index, threshold, impurity)``,
    or ``None`` when no admissible split strictly lowers the impurity.
    Ties keep the lower feature index, then the lower threshold.
    """
    parent, _ = weighted_gini(np.bincount(y, minlength=2), weights)
    best = None
    for feature in range(x.shape[1]):
        column = x[:, feature]
        for threshold in candidate_thresholds(column):
            goes_left = column < threshold
            n_left = int(goes_left.sum())
            if n_left < min_leaf or len(y) - n_left < min_leaf:
                continue
            impurity = split_impurity(
                np.bincount(y[goes_left], minlength=2),
                np.bincount(y[~goes_left], minlength=2),
                weights,
            )
            if best is None or impurity < best[2] - GINI_TOLERANCE:
                best = (feature, float(threshold), impurity)
    if best is None or best[2] >= parent - GINI_TOLERANCE:
        return None
    return best


def _leaf_prediction(counts, weights):
    masses = np.asarray(counts, dtype=float) * weights
    return LABELS[int(np.argmax(masses))]


def design_matrix(examples):
    x = np.array([example.features.to_vector() for example in examples], dtype=float)
    x[np.isnan(x)] = np.inf
    y = np.array([example.label.index for example in examples], dtype=np.intp)
    return x, y


def train_tree(examples, max_depth=4, min_leaf=3, class_weights=None):
    """
    Greedy CART induction minimizing class-weighted gini.

    ``class_weights`` maps labels to weights; by default classes are
    balanced by inverse frequency.
    """
    if not examples:
        raise ValueError("train_tree needs at least one example")
    if max_depth < 0 or min_leaf < 1:
        raise ValueError(f"invalid tree limits max_depth={max_depth}, min_leaf={min_leaf}")
    x, y = design_matrix(examples)
    if class_weights is None:
        weights = np.array(balanced_weights(y))
    else:
        weights = np.array([float(class_weights.get(label, class_weights.get(label.value, 1.0))) for label in LABELS])

    def grow(rows, depth):
        counts = np.bincount(y[rows], minlength=2)
        node = TreeNode(counts=tuple(int(c) for c in counts), prediction=_leaf_prediction(counts, weights))
        if depth >= max_depth or np.count_nonzero(counts) < 2 or len(rows) < 2 * min_leaf:
            return node
        split = best_split(x[rows], y[rows], weights, min_leaf)
        if split is None:
            return node
        feature, threshold, _ = split
        goes_left = x[rows, feature] < threshold
        return TreeNode(
            counts=node.counts,
            prediction=node.prediction,
            feature=FEATURE_NAMES[feature],
            threshold=threshold,
            left=grow(rows[goes_left], depth + 1),
            right=grow(rows[~goes_left], depth + 1),
        )

    tree = TreeModel(
        root=grow(np.arange(len(y)), 0),
        class_weights=tuple(float(w) for w in weights),
        max_depth=max_depth,
        min_leaf=min_leaf,
    )
    logger.debug("Trained tree of depth %d on %d examples", tree.depth, len(examples))
    return tree


@dataclass(frozen=True)
class LooResult:
    bac: float
    confusion: ConfusionMatrix
    baseline_bac: float
    predictions: tuple


def majority_label(examples):
    counts = np.bincount([example.label.index for example in examples], minlength=2)
    return LABELS[int(np.argmax(counts))]


def _holdout(examples, index, max_depth, min_leaf, class_weights):
    training = examples[:index] + examples[index + 1:]
    tree = train_tree(training, max_depth, min_leaf, class_weights)
    return tree.predict_one(examples[index].features)


def loo_cv(examples, max_depth=4, min_leaf=3, class_weights=None, n_jobs=1):
    """Leave-one-out predictions pooled into one confusion matrix."""
    examples = list(examples)
    if len(examples) < 2:
        raise ValueError("leave-one-out needs at least 2 examples")
    if n_jobs == 1:
        predictions = [_holdout(examples, i, max_depth, min_leaf, class_weights) for i in range(len(examples))]
    else:
        predictions = Parallel(n_jobs=n_jobs)(
            delayed(_holdout)(examples, i, max_depth, min_leaf, class_weights) for i in range(len(examples))
        )
    truth = [example.label.index for example in examples]
    confusion = ConfusionMatrix.from_predictions(truth, [label.index for label in predictions], 2)
    baseline = majority_label(examples)
    baseline_confusion = ConfusionMatrix.from_predictions(truth, [baseline.index] * len(truth), 2)
    result = LooResult(
        bac=balanced_accuracy(confusion),
        confusion=confusion,
        baseline_bac=balanced_accuracy(baseline_confusion),
        predictions=tuple(predictions),
    )
    logger.info("LOO over %d meta-examples: BAC %.4f (baseline %.4f)", len(examples), result.bac, result.baseline_bac)
    return result


@dataclass(frozen=True)
class Rule:
    conditions: tuple
    counts: tuple
    prediction: MetaLabel

    def matches(self, features):
        values = features.as_dict() if isinstance(features, MetaFeatureVector) else features
        for feature, operator, threshold in self.conditions:
            value = values.get(feature)
            value = math.inf if value is None or math.isnan(value) else value
            if (value < threshold) != (operator == '<'):
                return False
        return True


def extract_rules(tree):
    """Every root-to-leaf path, left branches first."""
    model_root = tree.root if isinstance(tree, TreeModel) else tree
    rules = []

    def walk(node, conditions):
        if node.is_leaf:
            rules.append(Rule(tuple(conditions), node.counts, node.prediction))
            return
        walk(node.left, conditions + [(node.feature, '<', node.threshold)])
        walk(node.right, conditions + [(node.feature, '>=', node.threshold)])

    walk(model_root, [])
    return rules


def _indent(depth):
    return '' if depth == 0 else ' ' * (2 + 4 * (depth - 1))


def render_rule(rule):
    lines = [f"{_indent(depth)}{feature} {operator} {threshold:.6g}" for depth, (feature, operator, threshold) in enumerate(rule.conditions)]
    default_opt, rs = rule.counts
    lines.append(f"{_indent(len(rule.conditions))}[{default_opt}/{rs}] (default.opt/RS)")
    return '\n'.join(lines)


def render_rules(rules):
    if isinstance(rules, TreeModel):
        rules = extract_rules(rules)
    return '\n\n'.join(render_rule(rule) for rule in rules) + '\n'
