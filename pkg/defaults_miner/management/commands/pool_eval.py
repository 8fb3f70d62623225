from pathlib import Path

from defaults_miner.manifest import check_hashes
from defaults_miner.pipeline import ExperimentSeeds, evaluate_pool_by_replication
from defaults_miner.serializers import PoolEvaluationSerializer, SettingsPoolSerializer, artifact_hash, load_file

from ._base import ExperimentCommand, dataset_files, load_tables


class Command(ExperimentCommand):
    help = 'Evaluate a settings pool on the test datasets'
    stage = 'pool_eval'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--pool', required=True, help='pool JSON file')
        parser.add_argument('--data-dir', dest='data_dir', required=True, help='directory of ingested dataset files')
        parser.add_argument('--folds', type=int)
        parser.add_argument('--selection', choices=['oracle', 'validation'])
        parser.add_argument('--force', action='store_true', help='accept a pool from another experiment')
        parser.add_argument('--out', required=True, help='pool evaluation JSON file')

    def run(self, config, options):
        files = dataset_files(options['data_dir'])
        manifest = self.experiment(config, files, options)
        check_hashes({'pool': artifact_hash(options['pool']), 'data': manifest.hash}, force=options['force'])
        pool = load_file(SettingsPoolSerializer, options['pool'])
        tables = load_tables(files)

        evaluation = evaluate_pool_by_replication(
            pool,
            tables,
            config['folds'],
            ExperimentSeeds(config['seed']).cv,
            config['selection'],
        )
        out = Path(options['out'])
        self.write(out, PoolEvaluationSerializer, evaluation, manifest.hash)
        self.record(manifest, out, config, options, pool=options['pool'], data_dir=options['data_dir'])
        self.done(f"pool evaluated on {len(evaluation.datasets)} datasets ({evaluation.selection} selection)")
