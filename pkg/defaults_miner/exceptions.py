"""
Error hierarchy for the defaults miner.

Library code raises these; management commands turn them into
``CommandError`` so the CLI exits nonzero with a one-line message.
"""


class DefaultsMinerError(Exception):
    """Base class for every domain error."""


class DatasetError(DefaultsMinerError):
    """A dataset file could not be loaded or preprocessed."""


class ArffError(DatasetError):
    """The ARFF file uses a construct outside the supported subset."""


class EmptyFeatureSpaceError(DatasetError):
    def __init__(self, dataset):
        self.dataset = dataset
        super().__init__(f"{dataset}: empty feature space")


class FoldError(DefaultsMinerError):
    def __init__(self, class_name, count, k):
        self.class_name = class_name
        self.count = count
        self.k = k
        super().__init__(
            f"class '{class_name}' has {count} instances, fewer than k={k} folds"
        )


class SolverError(DefaultsMinerError):
    """Binary SVM training failed for a class pair."""

    def __init__(self, message, label_pair=None):
        self.label_pair = label_pair
        if label_pair is not None:
            message = f"class pair {label_pair}: {message}"
        super().__init__(message)


class EvaluationError(DefaultsMinerError):
    """Cross-validation failed on a dataset, optionally at a given fold."""

    def __init__(self, dataset, message, fold=None):
        self.dataset = dataset
        self.fold = fold
        where = dataset if fold is None else f"{dataset} (fold {fold})"
        super().__init__(f"{where}: {message}")


class OptimizationError(DefaultsMinerError):
    """A swarm run aborted; the partial trace and failing setting are kept."""

    def __init__(self, message, setting=None, trace=None):
        self.setting = setting
        self.trace = trace
        super().__init__(message)


class ConfigurationError(DefaultsMinerError):
    """Invalid configuration values, keyed by field name."""

    def __init__(self, errors):
        self.errors = errors
        lines = []
        for field, messages in errors.items():
            if isinstance(messages, (list, tuple)):
                messages = ' '.join(str(m) for m in messages)
            lines.append(f"{field}: {messages}")
        super().__init__('; '.join(lines))


class ManifestMismatchError(DefaultsMinerError):
    def __init__(self, hashes):
        self.hashes = hashes
        listing = ', '.join(f"{name}={value[:12]}" for name, value in sorted(hashes.items()))
        super().__init__(
            f"artifacts come from different experiments ({listing}); use --force to combine them"
        )


class StatisticsError(DefaultsMinerError):
    """Invalid input to a statistical test."""
