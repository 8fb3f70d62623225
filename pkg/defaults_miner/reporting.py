"""
Plot-ready exports.

CSV and text artifacts start with a ``# manifest_hash: <hex>`` line when
the experiment is known; JSON artifacts carry the hash as a field.
"""
import logging
from pathlib import Path

import pandas as pd

from .manifest import HASH_PREFIX, text_hash
from .metalearning import label_for, render_rules
from .pipeline import DEFAULT_OPT, RANDOM_SEARCH, STRATEGIES, TOOL_STRATEGIES, StrategyTable
from .serializers import SCHEMA_VERSION, write_json
from .stats import (
    PAIR_REPLICATIONS,
    RankMatrix,
    best_pair_protocol,
    friedman,
    improvement_histogram,
    nemenyi,
    paired_scores,
)

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ['dataset', 'strategy', 'bac']
FOLD_COLUMNS = ['dataset', 'strategy', 'fold', 'bac']
REPLICATION_COLUMNS = ['dataset', 'strategy', 'observation', 'bac']
WILCOXON_COLUMNS = ['strategy', 'tools_significant', 'tools_not_significant', 'all_significant', 'all_not_significant']


def _header(manifest_hash):
    return f"{HASH_PREFIX}{manifest_hash}\n" if manifest_hash else ''


def write_csv(path, frame, manifest_hash=''):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = frame.to_csv(index=False, lineterminator='\n')
    path.write_text(_header(manifest_hash) + body, encoding='utf-8')
    return path


def read_csv(path):
    """``(frame, manifest_hash)``; the hash line is skipped when present."""
    manifest_hash = text_hash(path)
    frame = pd.read_csv(path, skiprows=1 if manifest_hash else 0, encoding='utf-8')
    return frame, manifest_hash


def write_text(path, text, manifest_hash=''):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_header(manifest_hash) + text, encoding='utf-8')
    return path


def read_text(path):
    text = Path(path).read_text(encoding='utf-8')
    if text.startswith(HASH_PREFIX):
        first, _, rest = text.partition('\n')
        return rest, first[len(HASH_PREFIX):].strip()
    return text, ''


def write_artifact(path, data, manifest_hash=''):
    payload = dict(data)
    payload['schema_version'] = SCHEMA_VERSION
    payload['manifest_hash'] = manifest_hash or ''
    return write_json(path, payload)


def pool_frame(pool):
    rows = [
        {
            'rank': rank,
            'log2_cost': entry.setting.log2_cost,
            'log2_gamma': entry.setting.log2_gamma,
            'fitness': entry.fitness,
            'replication': entry.replication,
            'pso_seed': entry.pso_seed,
            'shared': entry.shared,
        }
        for rank, entry in enumerate(pool.entries, start=1)
    ]
    return pd.DataFrame(rows, columns=['rank', 'log2_cost', 'log2_gamma', 'fitness', 'replication', 'pso_seed', 'shared'])


def fold_frame(table):
    rows = [
        {'dataset': dataset, 'strategy': strategy, 'fold': fold, 'bac': float(score)}
        for (dataset, strategy), scores in table.fold_scores.items()
        for fold, score in enumerate(scores)
    ]
    frame = pd.DataFrame(rows, columns=FOLD_COLUMNS)
    return frame.sort_values(['dataset', 'strategy', 'fold'], kind='stable').reset_index(drop=True)


def replication_frame(table):
    rows = [
        {'dataset': dataset, 'strategy': strategy, 'observation': index, 'bac': float(score)}
        for (dataset, strategy), scores in table.replication_scores.items()
        for index, score in enumerate(scores)
    ]
    frame = pd.DataFrame(rows, columns=REPLICATION_COLUMNS)
    return frame.sort_values(['dataset', 'strategy', 'observation'], kind='stable').reset_index(drop=True)


def write_table(path, table, manifest_hash=''):
    """table.csv in long form plus the per-fold and per-replication scores next to it."""
    path = Path(path)
    write_csv(path, table.to_long()[TABLE_COLUMNS], manifest_hash)
    write_csv(path.with_name(f"{path.stem}_folds.csv"), fold_frame(table), manifest_hash)
    write_csv(path.with_name(f"{path.stem}_replications.csv"), replication_frame(table), manifest_hash)
    return path


def _grouped_scores(path, order):
    scores = {}
    if path.exists():
        frame, _ = read_csv(path)
        for (dataset, strategy), group in frame.groupby(['dataset', 'strategy'], sort=True):
            scores[(str(dataset), str(strategy))] = tuple(group.sort_values(order)['bac'].astype(float))
    return scores


def load_table(path):
    """``(StrategyTable, manifest_hash)``; paired scores are read when their files exist."""
    path = Path(path)
    frame, manifest_hash = read_csv(path)
    missing = [column for column in TABLE_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {', '.join(missing)}")
    fold_scores = _grouped_scores(path.with_name(f"{path.stem}_folds.csv"), 'fold')
    replication_scores = _grouped_scores(path.with_name(f"{path.stem}_replications.csv"), 'observation')
    frame['dataset'] = frame['dataset'].astype(str)
    return StrategyTable.from_long(frame, fold_scores, replication_scores), manifest_hash


def violin_frame(table):
    frame = table.to_long()[['strategy', 'dataset', 'bac']]
    return frame.sort_values(['strategy', 'dataset'], kind='stable').reset_index(drop=True)


def histogram_frame(bins):
    return pd.DataFrame(
        [
            {'lower': b.lower, 'upper': b.upper, 'count': b.count, 'sign': b.sign, 'band': b.band}
            for b in bins
        ],
        columns=['lower', 'upper', 'count', 'sign', 'band'],
    )


def friedman_dict(result):
    return {
        'statistic': result.statistic,
        'degrees_of_freedom': result.degrees_of_freedom,
        'p_value': result.p_value,
        'mean_ranks': result.mean_ranks,
        'n_datasets': result.n_datasets,
    }


def nemenyi_dict(result):
    return {
        'critical_difference': result.critical_difference,
        'alpha': result.alpha,
        'mean_ranks': result.mean_ranks,
        'significant': {
            a: {b: bool(result.significant.loc[a, b]) for b in result.significant.columns}
            for a in result.significant.index
        },
        'cd_groups': [list(group) for group in result.cd_groups],
    }


def wilcoxon_summary(tools, everything):
    """
    Best-pair winners of the RS-vs-Tools and the all-strategies scenarios
    side by side. ``tools`` is None when that scenario could not run; its
    columns are then all zero.
    """
    tools_counts = tools.frequency() if tools is not None else pd.DataFrame(columns=['significant', 'not_significant'])
    all_counts = everything.frequency()
    names = [name for name in STRATEGIES if name in all_counts.index or name in tools_counts.index]
    rows = []
    for name in names:
        rows.append(
            {
                'strategy': name,
                'tools_significant': int(tools_counts.loc[name, 'significant']) if name in tools_counts.index else 0,
                'tools_not_significant': int(tools_counts.loc[name, 'not_significant']) if name in tools_counts.index else 0,
                'all_significant': int(all_counts.loc[name, 'significant']) if name in all_counts.index else 0,
                'all_not_significant': int(all_counts.loc[name, 'not_significant']) if name in all_counts.index else 0,
            }
        )
    return pd.DataFrame(rows, columns=WILCOXON_COLUMNS)


def labels_frame(summary):
    rows = [{'dataset': outcome.dataset, 'label': label_for(outcome).value} for outcome in summary.outcomes]
    return pd.DataFrame(rows, columns=['dataset', 'label'])


def write_statistics(directory, table, alpha=0.05, bin_width=0.05, manifest_hash='', pairing=PAIR_REPLICATIONS):
    """
    Friedman, Nemenyi, best-pair summaries, the default.opt vs tools
    histogram and the meta-learning labels for one strategy table.
    ``pairing`` picks the Wilcoxon observations. Returns ``{artifact name: path}``.
    """
    directory = Path(directory)
    written = {}
    matrix = RankMatrix.from_table(table)
    written['friedman'] = write_artifact(directory / 'friedman.json', friedman_dict(friedman(matrix)), manifest_hash)
    written['nemenyi'] = write_artifact(directory / 'nemenyi.json', nemenyi_dict(nemenyi(matrix, alpha)), manifest_hash)

    if paired_scores(table, pairing):
        tools = [RANDOM_SEARCH, *TOOL_STRATEGIES]
        tools_summary = None
        if all(name in table.strategies for name in tools):
            tools_summary = best_pair_protocol(table, alpha, strategies=tools, pairing=pairing)
        summary = wilcoxon_summary(tools_summary, best_pair_protocol(table, alpha, pairing=pairing))
        written['wilcoxon_summary'] = write_csv(directory / 'wilcoxon_summary.csv', summary, manifest_hash)
        if DEFAULT_OPT in table.strategies and RANDOM_SEARCH in table.strategies:
            pair = best_pair_protocol(table, alpha, strategies=[DEFAULT_OPT, RANDOM_SEARCH], pairing=pairing)
            written['labels'] = write_csv(directory / 'labels.csv', labels_frame(pair), manifest_hash)
    else:
        logger.warning("No per-%s scores available; skipping the Wilcoxon summaries", pairing.rstrip('s'))

    references = [name for name in TOOL_STRATEGIES if name in table.strategies]
    if DEFAULT_OPT in table.strategies and references:
        frames = []
        for reference in references:
            frame = histogram_frame(improvement_histogram(table, DEFAULT_OPT, reference, bin_width))
            frame.insert(0, 'reference', reference)
            frames.append(frame)
        written['histogram'] = write_csv(directory / 'histogram.csv', pd.concat(frames, ignore_index=True), manifest_hash)

    logger.info("Statistics for %d datasets written to %s", len(table.datasets), directory)
    return written


def sample_size_frames(evaluations):
    """
    Long ``sample_k, dataset, bac`` rows and a per-size summary, one
    strategy column per sample size for the rank tests.
    """
    rows = []
    for evaluation in evaluations:
        for dataset, (bac, _) in evaluation.per_dataset().items():
            rows.append({'sample_k': evaluation.sample_k, 'dataset': dataset, 'bac': bac})
    long = pd.DataFrame(rows, columns=['sample_k', 'dataset', 'bac'])
    long = long.sort_values(['sample_k', 'dataset'], kind='stable').reset_index(drop=True)
    summary = long.groupby('sample_k')['bac'].agg(['mean', 'median', 'count']).reset_index()
    wide = long.pivot(index='dataset', columns='sample_k', values='bac').dropna()
    wide.columns = [f"k={k}" for k in wide.columns]
    return long, summary, wide


def write_sample_sizes(directory, evaluations, alpha=0.05, manifest_hash=''):
    directory = Path(directory)
    long, summary, wide = sample_size_frames(evaluations)
    written = {
        'sample_sizes': write_csv(directory / 'sample_sizes.csv', long, manifest_hash),
        'sample_sizes_summary': write_csv(directory / 'sample_sizes_summary.csv', summary, manifest_hash),
    }
    if wide.shape[0] >= 2 and wide.shape[1] >= 2:
        matrix = RankMatrix.from_values(wide.to_numpy(), tuple(wide.columns), tuple(wide.index))
        written['sample_sizes_friedman'] = write_artifact(
            directory / 'sample_sizes_friedman.json', friedman_dict(friedman(matrix)), manifest_hash
        )
        written['sample_sizes_nemenyi'] = write_artifact(
            directory / 'sample_sizes_nemenyi.json', nemenyi_dict(nemenyi(matrix, alpha)), manifest_hash
        )
    else:
        logger.warning("Sample-size comparison needs 2 sizes over 2 shared datasets; rank tests skipped")
    return written


def write_rules(path, tree, manifest_hash=''):
    return write_text(path, render_rules(tree), manifest_hash)
