"""
Shared optimization of SVM defaults across datasets.

The dataset collection is split half/half several times (optimization side
and test side). On each optimization side a sample of ``k`` datasets feeds
repeated swarm runs whose best settings form the pool; the pool is then
judged on the test side against per-dataset random search and the defaults
of common ML tools.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .evaluation import cross_validate, shared_fitness
from .exceptions import DefaultsMinerError, EvaluationError
from .pso import SwarmConfig, pso_run
from .random_search import random_search
from .seeding import derive_seed
from .svm import LOG2_BOUND, WEKA_DEFAULT, HPSetting, HPSpace, Provenance

logger = logging.getLogger(__name__)

DEFAULT_OPT = 'default.opt'
RANDOM_SEARCH = 'random.search'
DEFAULT_MLR = 'default.mlr'
DEFAULT_WEKA = 'default.weka'
DEFAULT_SKL = 'default.skl'
TOOL_STRATEGIES = (DEFAULT_MLR, DEFAULT_WEKA, DEFAULT_SKL)
STRATEGIES = (DEFAULT_OPT, RANDOM_SEARCH) + TOOL_STRATEGIES

ORACLE = 'oracle'
VALIDATION = 'validation'
SELECTIONS = (ORACLE, VALIDATION)


@dataclass(frozen=True)
class ExperimentSeeds:
    """Named streams derived from one master seed."""

    master: int

    @property
    def plan(self):
        return derive_seed(self.master, 'plan')

    @property
    def samples(self):
        return derive_seed(self.master, 'samples')

    @property
    def cv(self):
        return derive_seed(self.master, 'cv')

    def pso(self, replication, run):
        return derive_seed(self.master, 'pso', replication, run)

    def rs(self, dataset):
        return derive_seed(self.master, 'rs', dataset)

    def as_dict(self):
        return {'master': self.master, 'plan': self.plan, 'samples': self.samples, 'cv': self.cv}


@dataclass(frozen=True)
class Replication:
    id: int
    optimization: tuple
    test: tuple


@dataclass(frozen=True)
class ResamplingPlan:
    replications: tuple
    seed: int

    def __post_init__(self):
        for replication in self.replications:
            optimization, test = set(replication.optimization), set(replication.test)
            if optimization & test:
                raise ValueError(f"replication {replication.id}: sides overlap")
            if abs(len(optimization) - len(test)) > 1:
                raise ValueError(f"replication {replication.id}: sides differ by more than one dataset")
        collections = {frozenset(r.optimization) | frozenset(r.test) for r in self.replications}
        if len(collections) > 1:
            raise ValueError("replications split different dataset collections")

    @property
    def datasets(self):
        first = self.replications[0]
        return tuple(sorted(first.optimization + first.test))

    def replication(self, replication_id):
        for replication in self.replications:
            if replication.id == replication_id:
                return replication
        raise KeyError(replication_id)


@dataclass(frozen=True)
class SampleSpec:
    k_values: tuple
    samples: dict
    seed: int

    def sample(self, replication, k):
        return self.samples[replication][k]


@dataclass(frozen=True)
class PoolEntry:
    setting: HPSetting
    fitness: float
    replication: int = None
    pso_seed: int = None
    shared: bool = False


@dataclass(frozen=True)
class SettingsPool:
    """
    Mined settings in descending fitness order.

    ``failures`` lists ``(replication, pso_seed, message)`` for runs that
    aborted; a pool with failures is ``partial``.
    """

    entries: tuple
    sample_k: int = None
    failures: tuple = ()
    plan: ResamplingPlan = None
    traces: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_entries(cls, entries, **kwargs):
        ordered = sorted(enumerate(entries), key=lambda item: (-item[1].fitness, item[0]))
        return cls(entries=tuple(entry for _, entry in ordered), **kwargs)

    @property
    def partial(self):
        return bool(self.failures)

    def indexed(self, replication=None):
        """``(pool index, entry)`` pairs, optionally for one replication."""
        return [
            (index, entry)
            for index, entry in enumerate(self.entries)
            if replication is None or entry.replication == replication
        ]


@dataclass(frozen=True)
class PoolDatasetResult:
    dataset: str
    replication: int
    best_index: int
    best: HPSetting
    mean_bac: float
    per_fold_bac: tuple
    entry_bacs: tuple


@dataclass(frozen=True)
class PoolEvaluation:
    """
    Pool performance per test dataset, one row per (replication, dataset).

    With ``oracle`` selection the best entry is picked on the very folds it
    is scored on; ``validation`` picks per fold on the remaining folds.
    """

    results: tuple
    selection: str
    folds: int
    cv_seed: int
    sample_k: int = None
    strategy: str = DEFAULT_OPT

    @property
    def datasets(self):
        return tuple(sorted({result.dataset for result in self.results}))

    def per_dataset(self):
        """Mean BAC and fold scores per dataset, averaged over replications."""
        summary = {}
        for dataset in self.datasets:
            rows = [result for result in self.results if result.dataset == dataset]
            folds = np.mean([result.per_fold_bac for result in rows], axis=0)
            summary[dataset] = (float(np.mean(folds)), tuple(float(score) for score in folds))
        return summary

    def per_replication(self):
        """Mean BAC per dataset for every replication it was tested in, in plan order."""
        summary = {}
        for result in self.results:
            summary.setdefault(result.dataset, []).append(result.mean_bac)
        return {dataset: tuple(summary[dataset]) for dataset in sorted(summary)}


@dataclass(frozen=True, eq=False)
class StrategyTable:
    """
    Mean BAC per dataset (rows) and strategy (columns), plus the paired
    observations the Wilcoxon tests work on: per-fold scores on the shared
    fold plan and per-replication mean BACs.
    """

    scores: pd.DataFrame
    fold_scores: dict
    replication_scores: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scores.isna().to_numpy().any():
            missing = self.scores.isna().stack()
            dataset, strategy = missing[missing].index[0]
            raise ValueError(f"missing strategy column: {strategy} has no score for {dataset}")

    @property
    def strategies(self):
        return tuple(self.scores.columns)

    @property
    def datasets(self):
        return tuple(self.scores.index)

    def medians(self):
        return self.scores.median(axis=0)

    def folds(self, dataset, strategy):
        return np.asarray(self.fold_scores[(dataset, strategy)], dtype=float)

    def replications(self, dataset, strategy):
        return np.asarray(self.replication_scores[(dataset, strategy)], dtype=float)

    def subset(self, strategies):
        strategies = tuple(strategies)
        missing = [strategy for strategy in strategies if strategy not in self.scores.columns]
        if missing:
            raise ValueError(f"missing strategy column: {', '.join(missing)}")
        return StrategyTable(
            scores=self.scores[list(strategies)],
            fold_scores={key: value for key, value in self.fold_scores.items() if key[1] in strategies},
            replication_scores={key: value for key, value in self.replication_scores.items() if key[1] in strategies},
        )

    def to_long(self):
        long = self.scores.rename_axis('dataset').reset_index().melt(
            id_vars='dataset', var_name='strategy', value_name='bac'
        )
        return long.sort_values(['dataset', 'strategy'], kind='stable').reset_index(drop=True)

    @classmethod
    def from_long(cls, frame, fold_scores=None, replication_scores=None):
        scores = frame.pivot(index='dataset', columns='strategy', values='bac')
        ordered = [strategy for strategy in STRATEGIES if strategy in scores.columns]
        ordered += sorted(column for column in scores.columns if column not in ordered)
        scores = scores[ordered]
        scores.columns.name = None
        return cls(scores=scores, fold_scores=fold_scores or {}, replication_scores=replication_scores or {})


def build_plan(names, replications=5, seed=0):
    """
    Independent half/half splits of the dataset collection.

    With an odd collection the optimization side gets the extra dataset.
    """
    names = list(names)
    unique = sorted(set(names))
    if len(unique) != len(names):
        raise ValueError("dataset names must be unique")
    if len(unique) < 2:
        raise ValueError("a resampling plan needs at least 2 datasets")
    if replications < 1:
        raise ValueError(f"replications must be at least 1, got {replications}")
    rng = np.random.default_rng(seed)
    half = (len(unique) + 1) // 2
    splits = []
    for replication in range(replications):
        order = rng.permutation(len(unique))
        splits.append(
            Replication(
                id=replication,
                optimization=tuple(sorted(unique[index] for index in order[:half])),
                test=tuple(sorted(unique[index] for index in order[half:])),
            )
        )
    return ResamplingPlan(replications=tuple(splits), seed=seed)


def choose_samples(plan, k_values, seed):
    """Nested random samples of the optimization side: each S_k is a prefix of one shuffle."""
    k_values = tuple(sorted(set(int(k) for k in k_values)))
    if not k_values or k_values[0] < 1:
        raise ValueError(f"sample sizes must be positive, got {k_values}")
    rng = np.random.default_rng(seed)
    samples = {}
    for replication in plan.replications:
        available = len(replication.optimization)
        if k_values[-1] > available:
            raise ValueError(
                f"k={k_values[-1]} exceeds the {available} optimization datasets of replication {replication.id}"
            )
        order = rng.permutation(available)
        shuffled = [replication.optimization[index] for index in order]
        samples[replication.id] = {k: tuple(shuffled[:k]) for k in k_values}
    return SampleSpec(k_values=k_values, samples=samples, seed=seed)


class FitnessEvaluator:
    """Picklable shared-fitness callable for swarm workers."""

    def __init__(self, tables, folds, cv_seed):
        self.tables = tuple(tables)
        self.folds = folds
        self.cv_seed = cv_seed

    def __call__(self, setting):
        return shared_fitness(self.tables, setting, self.folds, self.cv_seed)


def _mine_run(replication, pso_seed, tables, swarm, space, folds, cv_seed):
    try:
        trace = pso_run(swarm, space, FitnessEvaluator(tables, folds, cv_seed))
    except DefaultsMinerError as exc:
        return replication, pso_seed, getattr(exc, 'trace', None), str(exc)
    return replication, pso_seed, trace, None


def mine_defaults(plan, samples, sample_k, pso_seeds, swarm, folds, tables, seeds, space=None, n_jobs=1):
    """
    One swarm run per (replication, pso seed) on that replication's S_k.

    Runs are independent joblib jobs; the pool is assembled in a fixed
    order and sorted by descending fitness, so scheduling never changes the
    result. Failed runs are recorded and mark the pool partial.
    """
    space = space or HPSpace()
    jobs = []
    for replication in plan.replications:
        members = samples.sample(replication.id, sample_k)
        missing = [name for name in members if name not in tables]
        if missing:
            raise EvaluationError(missing[0], "no preprocessed table available")
        member_tables = [tables[name] for name in members]
        for pso_seed in pso_seeds:
            run_config = replace(swarm, seed=seeds.pso(replication.id, pso_seed))
            jobs.append((replication.id, pso_seed, member_tables, run_config))

    logger.info("Mining defaults: %d swarm runs on samples of %d datasets", len(jobs), sample_k)
    if n_jobs == 1:
        outcomes = [_mine_run(rep, run, members, config, space, folds, seeds.cv) for rep, run, members, config in jobs]
    else:
        outcomes = Parallel(n_jobs=n_jobs)(
            delayed(_mine_run)(rep, run, members, config, space, folds, seeds.cv)
            for rep, run, members, config in jobs
        )

    entries, failures, traces = [], [], {}
    for replication, pso_seed, trace, error in sorted(outcomes, key=lambda outcome: (outcome[0], outcome[1])):
        if trace is not None:
            traces[(replication, pso_seed)] = trace
        if error is not None:
            logger.warning("Swarm run (replication %s, seed %s) failed: %s", replication, pso_seed, error)
            failures.append((replication, pso_seed, error))
            continue
        setting, value = trace.global_best
        entries.append(
            PoolEntry(
                setting=replace(setting, origin=f'replication {replication}, pso seed {pso_seed}'),
                fitness=value,
                replication=replication,
                pso_seed=pso_seed,
            )
        )
    pool = SettingsPool.from_entries(
        entries,
        sample_k=sample_k,
        failures=tuple(failures),
        plan=plan,
        traces=traces,
    )
    if pool.entries:
        logger.info("Pool of %d settings; best %s with fitness %.4f", len(pool.entries), pool.entries[0].setting, pool.entries[0].fitness)
    return pool


def _pick(candidates, scores):
    # Highest score, then higher pool fitness, then lower pool index.
    return max(range(len(candidates)), key=lambda i: (scores[i], candidates[i][1].fitness, -candidates[i][0]))


def evaluate_pool(pool, tables, folds, seed, selection=ORACLE, replication=None):
    """
    Cross-validate pool entries on every test table and pick one per table.

    ``replication`` restricts the candidates to entries mined in that
    replication; a replication without entries is an error, never a
    reason to borrow settings mined on other splits.
    """
    if selection not in SELECTIONS:
        raise ValueError(f"selection must be one of {SELECTIONS}, got {selection!r}")
    candidates = pool.indexed(replication)
    if not candidates and replication is not None:
        raise EvaluationError(f"replication {replication}", "no pool entries were mined in this replication")
    if not candidates:
        raise ValueError("cannot evaluate an empty pool")

    results = []
    for table in tables:
        runs = [cross_validate(table, entry.setting, folds, seed) for _, entry in candidates]
        fold_matrix = np.array([run.per_fold_bac for run in runs])
        means = [run.mean_bac for run in runs]

        if selection == ORACLE:
            chosen = _pick(candidates, means)
            per_fold = runs[chosen].per_fold_bac
        else:
            picks = []
            per_fold = []
            for fold in range(folds):
                held_out = (fold_matrix.sum(axis=1) - fold_matrix[:, fold]) / (folds - 1)
                pick = _pick(candidates, held_out.tolist())
                picks.append(pick)
                per_fold.append(float(fold_matrix[pick, fold]))
            chosen = max(set(picks), key=lambda pick: (picks.count(pick), -pick))
            per_fold = tuple(per_fold)

        index, entry = candidates[chosen]
        results.append(
            PoolDatasetResult(
                dataset=table.name,
                replication=replication,
                best_index=index,
                best=entry.setting,
                mean_bac=float(np.mean(per_fold)),
                per_fold_bac=tuple(float(score) for score in per_fold),
                entry_bacs=tuple((candidates[i][0], means[i]) for i in range(len(candidates))),
            )
        )
        logger.debug("Pool on %s: entry %d with BAC %.4f", table.name, index, results[-1].mean_bac)

    return PoolEvaluation(
        results=tuple(results),
        selection=selection,
        folds=folds,
        cv_seed=seed,
        sample_k=pool.sample_k,
    )


def evaluate_pool_by_replication(pool, tables, folds, seed, selection=ORACLE):
    """
    Evaluate each replication's entries on that replication's test side.
    Pools without a plan are evaluated once on every table given.
    """
    if pool.plan is None:
        return evaluate_pool(pool, [tables[name] for name in sorted(tables)], folds, seed, selection)
    results = []
    for replication in pool.plan.replications:
        if not pool.indexed(replication.id):
            logger.warning(
                "Replication %d has no pool entries; its %d test datasets are skipped", replication.id, len(replication.test)
            )
            continue
        missing = [name for name in replication.test if name not in tables]
        if missing:
            raise EvaluationError(missing[0], "test dataset not found")
        evaluation = evaluate_pool(
            pool,
            [tables[name] for name in replication.test],
            folds,
            seed,
            selection,
            replication=replication.id,
        )
        results.extend(evaluation.results)
    if not results:
        raise ValueError("no replication of the plan has pool entries")
    logger.info("Pool evaluated on %d (replication, dataset) pairs", len(results))
    return PoolEvaluation(
        results=tuple(results),
        selection=selection,
        folds=folds,
        cv_seed=seed,
        sample_k=pool.sample_k,
    )


def _clamped_log2(value):
    return float(np.clip(math.log2(value), -LOG2_BOUND, LOG2_BOUND))


def tool_defaults(table):
    """
    Documented defaults of three tools, all with cost 1:
    LibSVM/mlr gamma = 1/p, WEKA gamma = 0.01, scikit-learn gamma = 1/(p * Var(X)).
    """
    p = table.n_features
    variance = float(table.features.var())
    scale = 1.0 / (p * variance) if variance > 0 else 1.0
    return {
        DEFAULT_MLR: HPSetting(0.0, _clamped_log2(1.0 / p), Provenance.TOOL_DEFAULT, 'mlr'),
        DEFAULT_WEKA: WEKA_DEFAULT,
        DEFAULT_SKL: HPSetting(0.0, _clamped_log2(scale), Provenance.TOOL_DEFAULT, 'sklearn'),
    }


def compare_strategies(pool_evaluation, rs_results, tables, folds=None, seed=None):
    """
    Assemble the strategy table for the pool's test datasets.

    Tool defaults are cross-validated here with the pool's fold plan;
    random-search results must come from the same plan. Neither depends on
    the replication, so their per-replication means repeat once for every
    replication the dataset was tested in.
    """
    folds = pool_evaluation.folds if folds is None else folds
    seed = pool_evaluation.cv_seed if seed is None else seed
    if folds != pool_evaluation.folds or seed != pool_evaluation.cv_seed:
        raise ValueError("strategies must share the pool evaluation's fold plan")

    rows = {}
    fold_scores = {}
    replication_scores = {}
    by_replication = pool_evaluation.per_replication()
    for dataset, (mean_bac, per_fold) in pool_evaluation.per_dataset().items():
        if dataset not in rs_results:
            raise ValueError(f"missing strategy column: {RANDOM_SEARCH} has no result for {dataset}")
        if dataset not in tables:
            raise EvaluationError(dataset, "test dataset not found")
        rs = rs_results[dataset]
        if rs.cv_seed != seed or rs.folds != folds:
            raise ValueError(f"{dataset}: random search used a different fold plan")

        row = {DEFAULT_OPT: mean_bac, RANDOM_SEARCH: rs.best_bac}
        fold_scores[(dataset, DEFAULT_OPT)] = per_fold
        fold_scores[(dataset, RANDOM_SEARCH)] = tuple(rs.best_folds)
        repeats = len(by_replication[dataset])
        replication_scores[(dataset, DEFAULT_OPT)] = by_replication[dataset]
        replication_scores[(dataset, RANDOM_SEARCH)] = (rs.best_bac,) * repeats
        for strategy, setting in tool_defaults(tables[dataset]).items():
            result = cross_validate(tables[dataset], setting, folds, seed)
            row[strategy] = result.mean_bac
            fold_scores[(dataset, strategy)] = result.per_fold_bac
            replication_scores[(dataset, strategy)] = (result.mean_bac,) * repeats
        rows[dataset] = row

    scores = pd.DataFrame.from_dict(rows, orient='index')[list(STRATEGIES)]
    scores.index.name = None
    table = StrategyTable(scores=scores.sort_index(), fold_scores=fold_scores, replication_scores=replication_scores)
    medians = table.medians()
    logger.info(
        "Strategy medians: %s",
        ', '.join(f"{strategy}={medians[strategy]:.4f}" for strategy in table.strategies),
    )
    return table


@dataclass(frozen=True)
class ExperimentSettings:
    seed: int = 0
    replications: int = 5
    sample_k: int = 51
    pso_seeds: int = 10
    folds: int = 10
    budget: int = 300
    population: int = 10
    max_iterations: int = 30
    informant_count: int = 3
    rs_budget: int = 300
    selection: str = ORACLE
    n_jobs: int = 1
    max_seconds: float = None

    @property
    def swarm(self):
        return SwarmConfig(
            population=self.population,
            max_iterations=self.max_iterations,
            budget_evaluations=self.budget,
            informant_count=self.informant_count,
            max_seconds=self.max_seconds,
        )

    @property
    def pso_seed_list(self):
        return tuple(range(1, self.pso_seeds + 1))


@dataclass(frozen=True)
class ExperimentResult:
    plan: ResamplingPlan
    samples: SampleSpec
    pool: SettingsPool
    pool_evaluation: PoolEvaluation
    rs_results: dict
    table: StrategyTable


def run_random_search(tables, names, budget, folds, seeds, space=None, n_jobs=1):
    space = space or HPSpace()
    return {
        name: random_search(tables[name], space, budget, folds, seeds.rs(name), cv_seed=seeds.cv, n_jobs=n_jobs)
        for name in names
    }


def run_experiment(tables, settings):
    """Plan, mine, evaluate and compare in one call."""
    seeds = ExperimentSeeds(settings.seed)
    plan = build_plan(list(tables), settings.replications, seeds.plan)
    samples = choose_samples(plan, [settings.sample_k], seeds.samples)
    pool = mine_defaults(
        plan,
        samples,
        settings.sample_k,
        settings.pso_seed_list,
        settings.swarm,
        settings.folds,
        tables,
        seeds,
        n_jobs=settings.n_jobs,
    )
    evaluation = evaluate_pool_by_replication(pool, tables, settings.folds, seeds.cv, settings.selection)
    rs_results = run_random_search(tables, evaluation.datasets, settings.rs_budget, settings.folds, seeds, n_jobs=settings.n_jobs)
    table = compare_strategies(evaluation, rs_results, tables)
    return ExperimentResult(
        plan=plan,
        samples=samples,
        pool=pool,
        pool_evaluation=evaluation,
        rs_results=rs_results,
        table=table,
    )
