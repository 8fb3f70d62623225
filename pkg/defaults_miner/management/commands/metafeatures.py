from pathlib import Path

from defaults_miner.metalearning import metafeature_frame
from defaults_miner.reporting import write_csv

from ._base import ExperimentCommand, dataset_files, load_dataset, logger


class Command(ExperimentCommand):
    help = 'Export the raw-data meta-features of every ingested dataset'
    stage = 'metafeatures'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data-dir', dest='data_dir', required=True, help='directory of ingested dataset files')
        parser.add_argument('--out', required=True, help='meta-feature CSV file')

    def run(self, config, options):
        files = dataset_files(options['data_dir'])
        manifest = self.experiment(config, files, options)
        vectors = {}
        for path in files:
            table, _, metafeatures = load_dataset(path)
            if metafeatures is None:
                logger.warning("%s carries no meta-features; re-ingest it to include them", path)
                continue
            vectors[table.name] = metafeatures

        out = Path(options['out'])
        write_csv(out, metafeature_frame(vectors).reset_index(), manifest.hash)
        self.record(manifest, out, config, options, data_dir=options['data_dir'])
        self.done(f"meta-features of {len(vectors)} datasets written to {out}")
