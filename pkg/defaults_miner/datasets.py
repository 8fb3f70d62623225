"""
Dataset loading, preprocessing and stratified fold construction.

Raw files (CSV or the plain ARFF subset) become ``RawDataset`` objects that
keep column kinds and missing cells. ``preprocess`` turns them into a dense,
standardized ``DataTable`` ready for the SVM, and reports what it changed.
"""
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.io import arff

from .exceptions import ArffError, DatasetError, EmptyFeatureSpaceError, FoldError

logger = logging.getLogger(__name__)

MISSING_CATEGORY = '__missing__'

_BOOLEAN_LITERALS = {'true', 'false', '0', '1'}
_BOOLEAN_WORDS = {'true', 'false'}
_TRUTHY = {'true', '1'}

_ARFF_ATTRIBUTE = re.compile(
    r"""^@attribute\s+('[^']*'|"[^"]*"|\S+)\s+(.+)$""",
    re.IGNORECASE,
)
_UNSUPPORTED_ARFF_KINDS = {'string', 'date', 'relational'}


class ColumnKind(str, Enum):
    NUMERIC = 'numeric'
    CATEGORICAL = 'categorical'
    BOOLEAN = 'boolean'


@dataclass(frozen=True)
class Column:
    """One raw column; ``None`` marks a missing cell."""

    name: str
    kind: ColumnKind
    values: tuple

    def present(self):
        return [value for value in self.values if value is not None]

    @property
    def has_missing(self):
        return any(value is None for value in self.values)


@dataclass(frozen=True)
class RawDataset:
    """
    A classification dataset as read from disk.

    The target column is always categorical and must hold at least two
    distinct labels with no missing cells.
    """

    name: str
    columns: tuple
    target_index: int
    source: str = ''

    def __post_init__(self):
        if not self.columns:
            raise DatasetError(f"{self.name}: no columns")
        lengths = {len(column.values) for column in self.columns}
        if len(lengths) != 1 or 0 in lengths:
            raise DatasetError(f"{self.name}: columns must share one length of at least 1")
        if not 0 <= self.target_index < len(self.columns):
            raise DatasetError(f"{self.name}: target index {self.target_index} out of range")
        target = self.columns[self.target_index]
        if target.kind is not ColumnKind.CATEGORICAL:
            raise DatasetError(f"{self.name}: target column '{target.name}' must be categorical")
        if target.has_missing:
            raise DatasetError(f"{self.name}: target column '{target.name}' has missing labels")
        if len(set(target.values)) < 2:
            raise DatasetError(f"{self.name}: target column '{target.name}' needs at least 2 classes")

    @property
    def target(self):
        return self.columns[self.target_index]

    @property
    def feature_columns(self):
        return [column for index, column in enumerate(self.columns) if index != self.target_index]

    @property
    def n_instances(self):
        return len(self.columns[0].values)

    def class_counts(self):
        """Instance count per class label, in label order."""
        return pd.Series(self.target.values).value_counts().sort_index().to_dict()


@dataclass(frozen=True)
class PreprocessReport:
    removed_constant: list = field(default_factory=list)
    removed_identifier: list = field(default_factory=list)
    imputed: list = field(default_factory=list)
    one_hot_expansions: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class DataTable:
    """
    Dense numeric features plus class indices 0..C-1.

    Arrays are copied on construction and made read-only, so a table can be
    shared freely between folds, threads and worker processes.
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple
    feature_names: tuple = ()

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        labels = np.array(self.labels, dtype=np.intp)
        if features.ndim != 2:
            raise DatasetError(f"{self.name}: features must be a 2-d matrix")
        if features.shape[0] != labels.shape[0]:
            raise DatasetError(f"{self.name}: {features.shape[0]} rows but {labels.shape[0]} labels")
        if not np.isfinite(features).all():
            raise DatasetError(f"{self.name}: features contain missing or infinite values")
        class_names = tuple(str(name) for name in self.class_names)
        if set(np.unique(labels).tolist()) != set(range(len(class_names))):
            raise DatasetError(f"{self.name}: labels must cover 0..{len(class_names) - 1} without gaps")
        feature_names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(features.shape[1]))
        if len(feature_names) != features.shape[1]:
            raise DatasetError(f"{self.name}: {len(feature_names)} feature names for {features.shape[1]} columns")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'class_names', class_names)
        object.__setattr__(self, 'feature_names', feature_names)

    @property
    def n_instances(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    dataset: str
    k: int
    assignment: np.ndarray
    seed: int

    def test_indices(self, fold):
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignment != fold)

    def splits(self):
        """Yield ``(fold, train_indices, test_indices)`` in fold order."""
        for fold in range(self.k):
            yield fold, self.train_indices(fold), self.test_indices(fold)


def check_class_sizes(raw, min_class_size):
    """Reject datasets with a class too small to stratify."""
    for label, count in raw.class_counts().items():
        if count < min_class_size:
            raise DatasetError(
                f"{raw.name}: class '{label}' has {count} instances; "
                f"at least {min_class_size} are needed to stratify"
            )


def _infer_kind(cells):
    present = [cell for cell in cells if cell is not None]
    lowered = {cell.lower() for cell in present}
    if lowered and lowered <= _BOOLEAN_LITERALS and lowered & _BOOLEAN_WORDS:
        return ColumnKind.BOOLEAN
    parsed = pd.to_numeric(pd.Series(present, dtype=object), errors='coerce')
    if parsed.notna().all() and np.isfinite(parsed.to_numpy(dtype=float)).all():
        return ColumnKind.NUMERIC
    return ColumnKind.CATEGORICAL


def _convert(cells, kind):
    if kind is ColumnKind.NUMERIC:
        return tuple(None if cell is None else float(cell) for cell in cells)
    if kind is ColumnKind.BOOLEAN:
        return tuple(None if cell is None else cell.lower() in _TRUTHY for cell in cells)
    return tuple(cells)


def _resolve_target(columns, target):
    if isinstance(target, int) and not isinstance(target, bool):
        if 0 <= target < len(columns):
            return target
    elif target in columns:
        return columns.index(target)
    elif isinstance(target, str) and target.isdigit() and int(target) < len(columns):
        return int(target)
    raise DatasetError(f"target column {target!r} not found")


def load_csv(path, target, missing_token='?', delimiter=',', min_class_size=2, name=None):
    """
    Read a UTF-8 CSV file with a header row.

    Cells equal to ``missing_token`` (or empty) are recorded as missing.
    Column kinds are inferred from the non-missing cells; the target is
    always read as categorical.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{path}: file not found")
    try:
        frame = pd.read_csv(
            path,
            sep=delimiter,
            dtype=str,
            keep_default_na=False,
            index_col=False,
            skipinitialspace=True,
            encoding='utf-8',
        )
    except pd.errors.EmptyDataError as exc:
        raise DatasetError(f"{path}: no header row") from exc
    except pd.errors.ParserError as exc:
        raise DatasetError(f"{path}: ragged rows ({exc})") from exc

    # Only short rows produce NaN once default NA parsing is off.
    if frame.isna().to_numpy().any():
        first = int(np.flatnonzero(frame.isna().any(axis=1).to_numpy())[0])
        raise DatasetError(f"{path}: ragged rows (data row {first + 1} has too few fields)")
    if frame.empty:
        raise DatasetError(f"{path}: no data rows")

    names = [str(column).strip() for column in frame.columns]
    target_index = _resolve_target(names, target)

    columns = []
    for index, column_name in enumerate(frame.columns):
        cells = [
            None if cell.strip() in (missing_token, '') else cell.strip()
            for cell in frame[column_name]
        ]
        kind = ColumnKind.CATEGORICAL if index == target_index else _infer_kind(cells)
        columns.append(Column(names[index], kind, _convert(cells, kind)))

    raw = RawDataset(
        name=name or path.stem,
        columns=tuple(columns),
        target_index=target_index,
        source=str(path),
    )
    check_class_sizes(raw, min_class_size)
    logger.debug("Loaded %s: %d rows, %d columns", raw.name, raw.n_instances, len(columns))
    return raw


def _scan_arff_header(path, text):
    declared = []
    in_data = False
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith('%'):
            continue
        if in_data:
            if stripped.startswith('{'):
                raise ArffError(f"{path}: sparse ARFF unsupported")
            break
        if stripped.lower().startswith('@data'):
            in_data = True
            continue
        match = _ARFF_ATTRIBUTE.match(stripped)
        if match:
            attribute = match.group(1).strip('\'"')
            spec = match.group(2).strip()
            kind = 'nominal' if spec.startswith('{') else spec.split()[0].lower()
            if kind in _UNSUPPORTED_ARFF_KINDS:
                raise ArffError(f"{path}: attribute '{attribute}' has unsupported kind '{kind}'")
            declared.append(attribute)
    if not declared:
        raise ArffError(f"{path}: no @attribute declarations")
    return declared


def _decode(value):
    return value.decode('utf-8') if isinstance(value, bytes) else str(value)


def load_arff(path, target=None, min_class_size=2, name=None):
    """
    Read the plain ARFF subset: numeric and nominal attributes, dense rows.

    The last declared attribute is the target unless ``target`` names another.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{path}: file not found")
    _scan_arff_header(path, path.read_text(encoding='utf-8'))
    try:
        data, meta = arff.loadarff(str(path))
    except (ValueError, NotImplementedError, arff.ParseArffError) as exc:
        raise ArffError(f"{path}: {exc}") from exc

    frame = pd.DataFrame(data)
    names = list(meta.names())
    target_index = len(names) - 1 if target is None else _resolve_target(names, target)

    columns = []
    for index, attribute in enumerate(names):
        type_name = meta[attribute][0]
        if type_name == 'nominal':
            values = tuple(
                None if cell == '?' else cell
                for cell in (_decode(value) for value in frame[attribute])
            )
            kind = ColumnKind.CATEGORICAL
        else:
            numbers = frame[attribute].to_numpy(dtype=float)
            values = tuple(None if np.isnan(value) else float(value) for value in numbers)
            kind = ColumnKind.NUMERIC
            if index == target_index:
                values = tuple(None if value is None else f"{value:g}" for value in values)
                kind = ColumnKind.CATEGORICAL
        columns.append(Column(attribute, kind, values))

    raw = RawDataset(
        name=name or path.stem,
        columns=tuple(columns),
        target_index=target_index,
        source=str(path),
    )
    check_class_sizes(raw, min_class_size)
    logger.debug("Loaded %s: %d rows, %d columns", raw.name, raw.n_instances, len(columns))
    return raw


def load_raw(path, target=None, missing_token='?', delimiter=',', min_class_size=2, name=None):
    """Dispatch on the file suffix: ``.arff`` or delimited text."""
    path = Path(path)
    if path.suffix.lower() == '.arff':
        return load_arff(path, target=target, min_class_size=min_class_size, name=name)
    if target is None:
        raise DatasetError(f"{path}: a target column is required for delimited files")
    return load_csv(
        path,
        target,
        missing_token=missing_token,
        delimiter=delimiter,
        min_class_size=min_class_size,
        name=name,
    )


def _is_identifier(column, n_instances):
    if column.has_missing or len(set(column.values)) != n_instances:
        return False
    if column.kind is ColumnKind.CATEGORICAL:
        return True
    if column.kind is ColumnKind.NUMERIC:
        return all(float(value).is_integer() for value in column.values)
    return False


def preprocess(raw):
    """
    Encode a raw dataset into a standardized ``DataTable``.

    Steps run in a fixed order: drop constant and identifier columns, map
    booleans to 0/1, impute (median or ``__missing__``), one-hot encode in
    lexicographic category order, then standardize with the population
    standard deviation. Columns left with zero spread are dropped as constant.
    """
    report = PreprocessReport()
    n_instances = raw.n_instances
    blocks = []

    for column in raw.feature_columns:
        if len(set(column.present())) <= 1:
            report.removed_constant.append(column.name)
            continue
        if _is_identifier(column, n_instances):
            report.removed_identifier.append(column.name)
            continue

        if column.kind is ColumnKind.CATEGORICAL:
            series = pd.Series(column.values, dtype=object)
            if column.has_missing:
                series = series.fillna(MISSING_CATEGORY)
                report.imputed.append((column.name, MISSING_CATEGORY))
            dummies = pd.get_dummies(series.astype(str), prefix=column.name, prefix_sep='=', dtype=float)
            dummies = dummies[sorted(dummies.columns)]
            report.one_hot_expansions.append((column.name, dummies.shape[1]))
            blocks.append(dummies)
        else:
            series = pd.Series(
                [np.nan if value is None else float(value) for value in column.values],
                dtype=float,
                name=column.name,
            )
            if series.isna().any():
                fill = float(series.median())
                series = series.fillna(fill)
                report.imputed.append((column.name, fill))
            blocks.append(series.to_frame())

    if not blocks:
        raise EmptyFeatureSpaceError(raw.name)

    encoded = pd.concat(blocks, axis=1)
    mean = encoded.mean()
    spread = encoded.std(ddof=0)
    flat = spread <= 1e-12 * np.maximum(1.0, mean.abs())
    for column_name in encoded.columns[flat.to_numpy()]:
        report.removed_constant.append(str(column_name))
    encoded = encoded.loc[:, ~flat.to_numpy()]
    if encoded.shape[1] == 0:
        raise EmptyFeatureSpaceError(raw.name)

    standardized = (encoded - mean[encoded.columns]) / spread[encoded.columns]

    class_names = tuple(sorted(set(raw.target.values)))
    labels = pd.Categorical(raw.target.values, categories=class_names).codes

    table = DataTable(
        name=raw.name,
        features=standardized.to_numpy(dtype=float),
        labels=labels,
        class_names=class_names,
        feature_names=tuple(str(column_name) for column_name in standardized.columns),
    )
    logger.info(
        "Preprocessed %s: %d instances, %d features, %d classes (dropped %d constant, %d identifier)",
        table.name,
        table.n_instances,
        table.n_features,
        table.n_classes,
        len(report.removed_constant),
        len(report.removed_identifier),
    )
    return table, report


def stratified_folds(table, k, seed):
    """
    Assign every instance to one of ``k`` folds.

    Each class is shuffled by ``seed`` and dealt round-robin, continuing
    where the previous class stopped, so per-class fold counts never differ
    from the proportional share by more than one.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    rng = np.random.default_rng(seed)
    assignment = np.empty(table.n_instances, dtype=np.intp)
    offset = 0
    for class_index, class_name in enumerate(table.class_names):
        members = np.flatnonzero(table.labels == class_index)
        if len(members) < k:
            raise FoldError(class_name, len(members), k)
        members = rng.permutation(members)
        assignment[members] = (offset + np.arange(len(members))) % k
        offset = (offset + len(members)) % k
    assignment.setflags(write=False)
    return FoldAssignment(dataset=table.name, k=k, assignment=assignment, seed=seed)
