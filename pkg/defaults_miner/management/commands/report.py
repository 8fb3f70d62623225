from pathlib import Path

from defaults_miner.manifest import MANIFEST_NAME, check_hashes, record_stage, text_hash
from defaults_miner.metalearning import label_meta_examples, train_tree
from defaults_miner.pipeline import (
    DEFAULT_OPT,
    RANDOM_SEARCH,
    ExperimentSeeds,
    compare_strategies,
    evaluate_pool_by_replication,
    run_random_search,
)
from defaults_miner.reporting import (
    load_table,
    pool_frame,
    read_text,
    violin_frame,
    write_csv,
    write_rules,
    write_sample_sizes,
    write_statistics,
    write_table,
    write_text,
)
from defaults_miner.serializers import (
    PoolEvaluationSerializer,
    SettingsPoolSerializer,
    TreeSerializer,
    artifact_hash,
    load_file,
)
from defaults_miner.stats import best_pair_protocol, paired_scores

from ._base import ExperimentCommand, dataset_files, load_dataset, logger
from .compare import load_rs_results


class Command(ExperimentCommand):
    help = 'Aggregate pool, strategy table, statistics and rules into one directory'
    stage = 'report'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', required=True, help='report directory')
        parser.add_argument('--pool', help='pool JSON file')
        parser.add_argument(
            '--pool-eval',
            dest='pool_evals',
            action='append',
            default=[],
            help='pool evaluation JSON file; repeat for several sample sizes',
        )
        parser.add_argument('--table', help='strategy table CSV from compare')
        parser.add_argument('--data-dir', dest='data_dir', help='directory of ingested dataset files')
        parser.add_argument('--rs-dir', dest='rs_dir', help='directory of random-search results')
        parser.add_argument('--tree', help='tree JSON file from metalearn')
        parser.add_argument('--rules', help='rules text file from metalearn')
        parser.add_argument('--rs-budget', dest='rs_budget', type=int)
        parser.add_argument('--folds', type=int)
        parser.add_argument('--selection', choices=['oracle', 'validation'])
        parser.add_argument('--alpha', type=float)
        parser.add_argument('--bin-width', dest='bin_width', type=float)
        parser.add_argument('--pairing', choices=['replications', 'folds'], help='Wilcoxon observations')
        parser.add_argument('--max-depth', dest='max_depth', type=int)
        parser.add_argument('--min-leaf', dest='min_leaf', type=int)
        parser.add_argument('--jobs', type=int)
        parser.add_argument('--force', action='store_true', help='combine artifacts from different experiments')

    def collect_hashes(self, options, manifest):
        hashes = {}
        for key in ('pool', 'tree'):
            if options.get(key):
                hashes[options[key]] = artifact_hash(options[key])
        for path in options['pool_evals']:
            hashes[path] = artifact_hash(path)
        for key in ('table', 'rules'):
            if options.get(key):
                hashes[options[key]] = text_hash(options[key])
        if manifest is not None:
            hashes['data'] = manifest.hash
        return hashes

    def run(self, config, options):
        out = Path(options['out'])
        out.mkdir(parents=True, exist_ok=True)
        files = dataset_files(options['data_dir']) if options.get('data_dir') else []
        manifest = self.experiment(config, files, options) if files else None
        rs_results, rs_hashes = load_rs_results(options['rs_dir']) if options.get('rs_dir') else ({}, {})
        hashes = {**self.collect_hashes(options, manifest), **rs_hashes}
        manifest_hash = check_hashes(hashes, force=options['force'])
        if manifest is not None:
            manifest_hash = manifest.hash
        written = []

        datasets = {}
        for path in files:
            table, _, metafeatures = load_dataset(path)
            datasets[table.name] = (table, metafeatures)
        tables = {name: table for name, (table, _) in datasets.items()}
        seeds = ExperimentSeeds(config['seed'])

        pool = load_file(SettingsPoolSerializer, options['pool']) if options.get('pool') else None
        if pool is not None:
            written.append(write_csv(out / 'pool.csv', pool_frame(pool), manifest_hash))

        evaluations = [load_file(PoolEvaluationSerializer, path) for path in options['pool_evals']]
        if not evaluations and pool is not None and tables:
            evaluation = evaluate_pool_by_replication(pool, tables, config['folds'], seeds.cv, config['selection'])
            written.append(self.write(out / 'pool_eval.json', PoolEvaluationSerializer, evaluation, manifest_hash))
            evaluations = [evaluation]

        table = None
        if options.get('table'):
            table, _ = load_table(options['table'])
        elif evaluations and tables:
            evaluation = self.primary_evaluation(evaluations, pool)
            missing = [name for name in evaluation.datasets if name not in rs_results]
            if missing:
                logger.info("Running random search on %d datasets without results", len(missing))
                rs_results.update(
                    run_random_search(tables, missing, config['rs_budget'], evaluation.folds, seeds, n_jobs=config['jobs'])
                )
            table = compare_strategies(evaluation, rs_results, tables)

        if table is not None:
            written.append(write_table(out / 'table.csv', table, manifest_hash))
            written.append(write_csv(out / 'violin.csv', violin_frame(table), manifest_hash))
            statistics = write_statistics(
                out, table, config['alpha'], config['bin_width'], manifest_hash, pairing=config['pairing']
            )
            written.extend(statistics.values())

        if len(evaluations) > 1:
            written.extend(write_sample_sizes(out, evaluations, config['alpha'], manifest_hash).values())

        rules = self.rules(options, config, table, datasets, out, manifest_hash)
        if rules is not None:
            written.append(rules)

        if manifest is not None:
            self.record(manifest, out / MANIFEST_NAME, config, options, inputs=sorted(hashes))
        else:
            existing = self.find_manifest(manifest_hash, options.get('manifest'), out / MANIFEST_NAME)
            if existing is not None:
                record_stage(options.get('manifest') or out / MANIFEST_NAME, existing, self.stage, dict(config))
        self.done(f"report with {len(written)} artifacts written to {out}")

    def primary_evaluation(self, evaluations, pool):
        if pool is not None:
            for evaluation in evaluations:
                if evaluation.sample_k == pool.sample_k:
                    return evaluation
        return evaluations[0]

    def rules(self, options, config, table, datasets, out, manifest_hash):
        if options.get('rules'):
            text, _ = read_text(options['rules'])
            return write_text(out / 'rules.txt', text, manifest_hash)
        if options.get('tree'):
            return write_rules(out / 'rules.txt', load_file(TreeSerializer, options['tree']), manifest_hash)
        if table is None or not paired_scores(table, config['pairing']) or not datasets:
            return None
        if DEFAULT_OPT not in table.strategies or RANDOM_SEARCH not in table.strategies:
            return None
        pair = best_pair_protocol(
            table, config['alpha'], strategies=[DEFAULT_OPT, RANDOM_SEARCH], pairing=config['pairing']
        )
        metafeatures = {name: vector for name, (_, vector) in datasets.items() if vector is not None}
        examples, _ = label_meta_examples(pair.outcomes, metafeatures)
        if not examples:
            logger.warning("No labeled meta-examples; rules skipped")
            return None
        tree = train_tree(examples, config['max_depth'], config['min_leaf'])
        self.write(out / 'tree.json', TreeSerializer, tree, manifest_hash)
        return write_rules(out / 'rules.txt', tree, manifest_hash)
