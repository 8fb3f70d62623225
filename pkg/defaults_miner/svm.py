"""
RBF soft-margin SVM trained by sequential minimal optimization.

Multiclass problems are reduced one-vs-one; each binary model votes for one
class of its pair and the lowest class index wins ties.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import SolverError

logger = logging.getLogger(__name__)

LOG2_BOUND = 15.0
DEFAULT_TOL = 1e-3
DEFAULT_MAX_PASSES = 10
MAX_PAIR_UPDATES = 10_000
GRAM_LIMIT = 4_000

# Curvature floor for duplicate points (zero second derivative along the pair).
_MIN_CURVATURE = 1e-12


class Provenance(str, Enum):
    TOOL_DEFAULT = 'tool_default'
    PSO = 'pso'
    RANDOM_SEARCH = 'random_search'
    FIXTURE = 'fixture'


@dataclass(frozen=True)
class HPSetting:
    """A (cost, gamma) point, stored as log2 values."""

    log2_cost: float
    log2_gamma: float
    provenance: Provenance = Provenance.FIXTURE
    origin: str = ''

    def __post_init__(self):
        for name in ('log2_cost', 'log2_gamma'):
            value = float(getattr(self, name))
            if not math.isfinite(value) or abs(value) > LOG2_BOUND:
                raise ValueError(f"{name} must be finite and within [-15, 15], got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'provenance', Provenance(self.provenance))

    @property
    def cost(self):
        return 2.0 ** self.log2_cost

    @property
    def gamma(self):
        return 2.0 ** self.log2_gamma

    @property
    def position(self):
        return np.array([self.log2_cost, self.log2_gamma])

    def __str__(self):
        return f"(log2 C={self.log2_cost:.4f}, log2 gamma={self.log2_gamma:.4f})"


WEKA_DEFAULT = HPSetting(0.0, math.log2(0.01), Provenance.TOOL_DEFAULT, 'weka')


@dataclass(frozen=True)
class HPSpace:
    cost_bounds: tuple = (-LOG2_BOUND, LOG2_BOUND)
    gamma_bounds: tuple = (-LOG2_BOUND, LOG2_BOUND)
    kernel: str = 'rbf'

    def __post_init__(self):
        if self.kernel != 'rbf':
            raise ValueError(f"only the rbf kernel is supported, got {self.kernel!r}")
        for name in ('cost_bounds', 'gamma_bounds'):
            lower, upper = (float(bound) for bound in getattr(self, name))
            if not -LOG2_BOUND <= lower < upper <= LOG2_BOUND:
                raise ValueError(f"{name} must satisfy -15 <= lower < upper <= 15")
            object.__setattr__(self, name, (lower, upper))

    @property
    def lower(self):
        return np.array([self.cost_bounds[0], self.gamma_bounds[0]])

    @property
    def upper(self):
        return np.array([self.cost_bounds[1], self.gamma_bounds[1]])

    @property
    def span(self):
        return self.upper - self.lower

    def contains(self, setting):
        position = setting.position
        return bool(np.all(position >= self.lower) and np.all(position <= self.upper))

    def setting(self, position, provenance, origin=''):
        position = np.clip(np.asarray(position, dtype=float), self.lower, self.upper)
        return HPSetting(float(position[0]), float(position[1]), provenance, origin)


def rbf_kernel(x, z, log2_gamma):
    """exp(-gamma * ||x - z||^2) with gamma = 2 ** log2_gamma."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {z.shape}")
    if not (np.isfinite(x).all() and np.isfinite(z).all()):
        raise ValueError("kernel inputs must be finite")
    return float(np.exp(-(2.0 ** log2_gamma) * np.sum((x - z) ** 2)))


def rbf_matrix(a, b, log2_gamma):
    """Kernel matrix between the rows of ``a`` and the rows of ``b``."""
    return np.exp(-(2.0 ** log2_gamma) * cdist(a, b, 'sqeuclidean'))


class _KernelRows:
    """Full Gram matrix for small problems, rows on demand above GRAM_LIMIT."""

    def __init__(self, features, log2_gamma, gram=None):
        self._features = features
        self._log2_gamma = log2_gamma
        if gram is None and len(features) <= GRAM_LIMIT:
            gram = rbf_matrix(features, features, log2_gamma)
        self._gram = gram

    def row(self, index):
        if self._gram is not None:
            return self._gram[index]
        return rbf_matrix(self._features[index:index + 1], self._features, self._log2_gamma)[0]


@dataclass(frozen=True, eq=False)
class BinarySvmModel:
    """
    A trained two-class model.

    ``dual_coefficients`` hold alpha_i * y_i for the support vectors only;
    the first class of ``label_pair`` is the positive side.
    """

    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    log2_gamma: float
    label_pair: tuple
    log2_cost: float = 0.0
    support_indices: np.ndarray = None
    converged: bool = True
    iterations: int = 0
    objective_trace: tuple = ()

    def decision_function(self, features):
        kernel = rbf_matrix(np.asarray(features, dtype=float), self.support_vectors, self.log2_gamma)
        return kernel @ self.dual_coefficients + self.bias

    def to_dict(self):
        return {
            'label_pair': list(self.label_pair),
            'bias': self.bias,
            'log2_gamma': self.log2_gamma,
            'dual_coefficients': self.dual_coefficients.tolist(),
            'support_vectors': self.support_vectors.tolist(),
            'converged': self.converged,
        }


@dataclass(frozen=True, eq=False)
class OvoSvmModel:
    binaries: tuple
    n_classes: int
    n_features: int

    def __post_init__(self):
        expected = set(combinations(range(self.n_classes), 2))
        pairs = [tuple(binary.label_pair) for binary in self.binaries]
        if len(pairs) != len(expected) or set(pairs) != expected:
            raise SolverError(f"expected one binary model per class pair, got {pairs}")

    @property
    def converged(self):
        return all(binary.converged for binary in self.binaries)

    def to_dict(self):
        return {
            'n_classes': self.n_classes,
            'n_features': self.n_features,
            'binaries': [binary.to_dict() for binary in self.binaries],
        }


def _dual_objective(alpha, labels, gradient):
    # W(alpha) = sum(alpha) - 1/2 alpha' Q alpha, with (Q alpha)_i = y_i * gradient_i + 1.
    return 0.5 * alpha.sum() - 0.5 * float(np.dot(alpha * labels, gradient))


def train_binary_smo(
    features,
    labels,
    hp,
    tol=DEFAULT_TOL,
    max_passes=DEFAULT_MAX_PASSES,
    *,
    label_pair=(0, 1),
    gram=None,
    trace_objective=False,
):
    """
    Solve the soft-margin dual for labels in {+1, -1}.

    Pairs are chosen Platt-style: scan for the next KKT violator after the
    previous one, then pair it with the partner maximizing |E1 - E2|. The run
    stops once the largest violation is within ``tol`` or after
    ``min(max_passes * N, MAX_PAIR_UPDATES)`` pair updates, in which case
    the model is returned flagged as unconverged.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise SolverError("features and labels disagree in length", label_pair)
    if not np.isin(y, (-1.0, 1.0)).all():
        raise SolverError("labels must be +1 or -1", label_pair)
    if not ((y > 0).any() and (y < 0).any()):
        raise SolverError("both labels must be present", label_pair)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")

    n = len(y)
    cost = hp.cost
    kernel = _KernelRows(x, hp.log2_gamma, gram)
    alpha = np.zeros(n)
    # gradient_i = f(x_i) - b - y_i, the error cache without the bias.
    gradient = -y.copy()
    positive = y > 0
    snap = 1e-12 * max(1.0, cost)
    budget = min(max_passes * n, MAX_PAIR_UPDATES)
    objectives = [0.0] if trace_objective else None

    cursor = 0
    updates = 0
    converged = False
    while True:
        below = alpha < cost
        above = alpha > 0
        up = (positive & below) | (~positive & above)
        low = (positive & above) | (~positive & below)
        b_up = gradient[up].min() if up.any() else np.inf
        b_low = gradient[low].max() if low.any() else -np.inf
        if b_low - b_up <= tol:
            converged = True
            break
        if updates >= budget:
            break

        violating = (up & (gradient < b_low - tol)) | (low & (gradient > b_up + tol))
        candidates = np.flatnonzero(violating)
        first = int(candidates[np.searchsorted(candidates, cursor) % len(candidates)])
        cursor = first + 1
        if up[first] and gradient[first] < b_low - tol:
            second = int(np.flatnonzero(low)[np.argmax(gradient[low])])
        else:
            second = int(np.flatnonzero(up)[np.argmin(gradient[up])])

        row_first = kernel.row(first)
        row_second = kernel.row(second)
        curvature = max(row_first[first] + row_second[second] - 2.0 * row_first[second], _MIN_CURVATURE)
        sign = y[first] * y[second]
        alpha_first, alpha_second = alpha[first], alpha[second]
        if sign < 0:
            lower = max(0.0, alpha_second - alpha_first)
            upper = min(cost, cost + alpha_second - alpha_first)
        else:
            lower = max(0.0, alpha_first + alpha_second - cost)
            upper = min(cost, alpha_first + alpha_second)

        new_second = alpha_second + y[second] * (gradient[first] - gradient[second]) / curvature
        new_second = min(max(new_second, lower), upper)
        new_first = alpha_first + sign * (alpha_second - new_second)
        new_first = 0.0 if new_first < snap else cost if new_first > cost - snap else new_first
        new_second = 0.0 if new_second < snap else cost if new_second > cost - snap else new_second

        gradient += (new_first - alpha_first) * y[first] * row_first
        gradient += (new_second - alpha_second) * y[second] * row_second
        alpha[first] = new_first
        alpha[second] = new_second
        updates += 1
        if objectives is not None:
            objectives.append(_dual_objective(alpha, y, gradient))

    if np.isfinite(b_up) and np.isfinite(b_low):
        center = 0.5 * (b_up + b_low)
    else:
        center = b_up if np.isfinite(b_up) else b_low

    support = np.flatnonzero(alpha > 0)
    if not converged:
        logger.debug(
            "SMO for pair %s stopped unconverged after %d updates (gap %.3g)",
            label_pair,
            updates,
            b_low - b_up,
        )
    return BinarySvmModel(
        support_vectors=x[support].copy(),
        dual_coefficients=alpha[support] * y[support],
        bias=float(-center),
        log2_gamma=hp.log2_gamma,
        label_pair=tuple(label_pair),
        log2_cost=hp.log2_cost,
        support_indices=support,
        converged=converged,
        iterations=updates,
        objective_trace=tuple(objectives) if objectives is not None else (),
    )


def fit_ovo(features, labels, n_classes, hp, tol=DEFAULT_TOL, max_passes=DEFAULT_MAX_PASSES, gram=None):
    """
    One binary model per unordered class pair, each on that pair's rows.

    ``gram`` may carry a precomputed kernel matrix over all rows of
    ``features``; pair problems then slice it instead of recomputing.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if n_classes < 2:
        raise SolverError(f"need at least 2 classes, got {n_classes}")
    binaries = []
    for first, second in combinations(range(n_classes), 2):
        rows = np.flatnonzero((labels == first) | (labels == second))
        pair_labels = np.where(labels[rows] == first, 1.0, -1.0)
        pair_gram = gram[np.ix_(rows, rows)] if gram is not None else None
        binaries.append(
            train_binary_smo(
                features[rows],
                pair_labels,
                hp,
                tol,
                max_passes,
                label_pair=(first, second),
                gram=pair_gram,
            )
        )
    return OvoSvmModel(binaries=tuple(binaries), n_classes=n_classes, n_features=features.shape[1])


def train_ovo(table, hp, tol=DEFAULT_TOL, max_passes=DEFAULT_MAX_PASSES):
    return fit_ovo(table.features, table.labels, table.n_classes, hp, tol, max_passes)


def predict(model, features):
    """Majority vote over the pairwise models; ties go to the lowest class index."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != model.n_features:
        raise ValueError(
            f"dimension mismatch: model expects {model.n_features} features, got shape {features.shape}"
        )
    votes = np.zeros((features.shape[0], model.n_classes), dtype=np.intp)
    rows = np.arange(features.shape[0])
    for binary in model.binaries:
        first, second = binary.label_pair
        winners = np.where(binary.decision_function(features) > 0, first, second)
        np.add.at(votes, (rows, winners), 1)
    return votes.argmax(axis=1)
