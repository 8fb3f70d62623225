from pathlib import Path

from defaults_miner.datasets import load_raw, preprocess
from defaults_miner.manifest import file_sha256
from defaults_miner.metalearning import extract_metafeatures
from defaults_miner.serializers import DatasetFileSerializer

from ._base import ExperimentCommand, dataset_files


class Command(ExperimentCommand):
    help = 'Load a CSV or ARFF file, preprocess it and write a dataset file'
    stage = 'ingest'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--input', required=True, help='CSV or ARFF source file')
        parser.add_argument('--target', help='target column name or index (ARFF defaults to the last attribute)')
        parser.add_argument('--out', required=True, help='output directory')
        parser.add_argument('--name', help='dataset name (defaults to the file stem)')
        parser.add_argument('--missing-token', dest='missing_token')
        parser.add_argument('--delimiter')
        parser.add_argument('--min-class-size', dest='min_class_size', type=int)

    def run(self, config, options):
        source = Path(options['input'])
        raw = load_raw(
            source,
            target=options.get('target'),
            missing_token=config['missing_token'],
            delimiter=config['delimiter'],
            min_class_size=config['min_class_size'],
            name=options.get('name'),
        )
        table, report = preprocess(raw)
        metafeatures = extract_metafeatures(raw)

        out = Path(options['out']) / f"{table.name}.json"
        self.write(out, DatasetFileSerializer, (table, report, metafeatures, source.name, file_sha256(source)))

        options = {**options, 'manifest': None}
        manifest = self.experiment(config, dataset_files(out.parent), options)
        self.record(manifest, out, config, options, input=source.name, target=options.get('target'))
        self.done(f"{table.name}: {table.n_instances} instances, {table.n_features} features, {table.n_classes} classes")
