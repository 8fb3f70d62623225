from pathlib import Path

from defaults_miner.pipeline import ExperimentSeeds
from defaults_miner.random_search import random_search
from defaults_miner.serializers import RsResultSerializer
from defaults_miner.svm import HPSpace

from ._base import ExperimentCommand, load_dataset


class Command(ExperimentCommand):
    help = 'Random-search SVM settings on one dataset'
    stage = 'tune_rs'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--dataset', required=True, help='ingested dataset file')
        parser.add_argument('--budget', dest='rs_budget', type=int, help='number of random draws')
        parser.add_argument('--folds', type=int)
        parser.add_argument('--jobs', type=int)
        parser.add_argument('--out', required=True, help='RsResult JSON file')

    def run(self, config, options):
        path = Path(options['dataset'])
        manifest = self.experiment(config, [path], options)
        table, _, _ = load_dataset(path)
        seeds = ExperimentSeeds(config['seed'])

        result = random_search(
            table,
            HPSpace(),
            config['rs_budget'],
            config['folds'],
            seeds.rs(table.name),
            cv_seed=seeds.cv,
            n_jobs=config['jobs'],
        )
        self.write(options['out'], RsResultSerializer, result, manifest.hash)
        self.record(manifest, options['out'], config, options, dataset=path)
        self.done(f"{table.name}: best {result.best_setting} with BAC {result.best_bac:.4f}")
