from pathlib import Path

from defaults_miner.evaluation import cross_validate
from defaults_miner.pipeline import ExperimentSeeds
from defaults_miner.reporting import write_artifact
from defaults_miner.serializers import CvResultSerializer
from defaults_miner.svm import HPSetting, Provenance, train_ovo

from ._base import ExperimentCommand, load_dataset


class Command(ExperimentCommand):
    help = 'Cross-validate one SVM setting on one dataset'
    stage = 'evaluate'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--dataset', required=True, help='ingested dataset file')
        parser.add_argument('--log2-cost', dest='log2_cost', type=float, required=True)
        parser.add_argument('--log2-gamma', dest='log2_gamma', type=float, required=True)
        parser.add_argument('--folds', type=int)
        parser.add_argument('--out', required=True, help='CvResult JSON file')
        parser.add_argument('--model-out', dest='model_out', help='also write the model trained on all rows')

    def run(self, config, options):
        path = Path(options['dataset'])
        manifest = self.experiment(config, [path], options)
        table, _, _ = load_dataset(path)
        setting = HPSetting(options['log2_cost'], options['log2_gamma'], Provenance.FIXTURE, 'command line')

        result = cross_validate(table, setting, config['folds'], ExperimentSeeds(config['seed']).cv)
        self.write(options['out'], CvResultSerializer, result, manifest.hash)

        if options.get('model_out'):
            model = train_ovo(table, setting)
            write_artifact(options['model_out'], model.to_dict(), manifest.hash)

        self.record(manifest, options['out'], config, options, dataset=path, log2_cost=setting.log2_cost, log2_gamma=setting.log2_gamma)
        self.done(f"{table.name}: mean BAC {result.mean_bac:.4f} over {config['folds']} folds")
