from pathlib import Path

from defaults_miner.exceptions import DatasetError
from defaults_miner.manifest import MANIFEST_NAME, check_hashes
from defaults_miner.pipeline import compare_strategies
from defaults_miner.reporting import write_statistics, write_table
from defaults_miner.serializers import PoolEvaluationSerializer, RsResultSerializer, artifact_hash, load_file

from ._base import ExperimentCommand, dataset_files, load_tables


def load_rs_results(rs_dir):
    rs_dir = Path(rs_dir)
    if not rs_dir.is_dir():
        raise DatasetError(f"{rs_dir}: not a directory")
    results, hashes = {}, {}
    for path in sorted(rs_dir.glob('*.json')):
        if path.name == MANIFEST_NAME:
            continue
        result = load_file(RsResultSerializer, path)
        results[result.dataset] = result
        hashes[str(path)] = artifact_hash(path)
    return results, hashes


class Command(ExperimentCommand):
    help = 'Compare default.opt, random search and tool defaults on the test datasets'
    stage = 'compare'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--pool-eval', dest='pool_eval', required=True, help='pool evaluation JSON file')
        parser.add_argument('--rs-dir', dest='rs_dir', required=True, help='directory of random-search results')
        parser.add_argument('--data-dir', dest='data_dir', required=True, help='directory of ingested dataset files')
        parser.add_argument('--alpha', type=float)
        parser.add_argument('--bin-width', dest='bin_width', type=float)
        parser.add_argument('--pairing', choices=['replications', 'folds'], help='Wilcoxon observations')
        parser.add_argument('--force', action='store_true', help='combine artifacts from different experiments')
        parser.add_argument('--out', required=True, help='strategy table CSV file')

    def run(self, config, options):
        files = dataset_files(options['data_dir'])
        manifest = self.experiment(config, files, options)
        rs_results, hashes = load_rs_results(options['rs_dir'])
        hashes.update(pool_eval=artifact_hash(options['pool_eval']), data=manifest.hash)
        check_hashes(hashes, force=options['force'])

        evaluation = load_file(PoolEvaluationSerializer, options['pool_eval'])
        tables = load_tables(files)
        table = compare_strategies(evaluation, rs_results, tables)

        out = Path(options['out'])
        write_table(out, table, manifest.hash)
        written = write_statistics(
            out.parent, table, config['alpha'], config['bin_width'], manifest.hash, pairing=config['pairing']
        )
        self.record(manifest, out, config, options, pool_eval=options['pool_eval'], rs_dir=options['rs_dir'])
        medians = ', '.join(f"{name}={value:.4f}" for name, value in table.medians().items())
        self.done(f"{len(table.datasets)} datasets compared ({medians}); wrote {out.name} and {len(written)} summaries")
