from pathlib import Path

from defaults_miner.manifest import MANIFEST_NAME, check_hashes, record_stage
from defaults_miner.metalearning import build_meta_examples, loo_cv, train_tree
from defaults_miner.reporting import read_csv, write_artifact, write_rules
from defaults_miner.serializers import TreeSerializer

from ._base import ExperimentCommand, logger


class Command(ExperimentCommand):
    help = 'Train the tune-or-default decision tree and extract its rules'
    stage = 'metalearn'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--mf', required=True, help='meta-feature CSV file')
        parser.add_argument('--labels', required=True, help='dataset,label CSV file')
        parser.add_argument('--max-depth', dest='max_depth', type=int)
        parser.add_argument('--min-leaf', dest='min_leaf', type=int)
        parser.add_argument('--force', action='store_true', help='combine artifacts from different experiments')
        parser.add_argument('--out', required=True, help='tree JSON file')
        parser.add_argument('--rules', required=True, help='rules text file')

    def run(self, config, options):
        mf_frame, mf_hash = read_csv(options['mf'])
        labels, labels_hash = read_csv(options['labels'])
        manifest_hash = check_hashes({'mf': mf_hash, 'labels': labels_hash}, force=options['force'])
        mf_frame['dataset'] = mf_frame['dataset'].astype(str)
        examples, excluded = build_meta_examples(mf_frame.set_index('dataset'), labels)
        if not examples:
            raise ValueError("no dataset has both meta-features and a label")

        tree = train_tree(examples, config['max_depth'], config['min_leaf'])
        out = Path(options['out'])
        self.write(out, TreeSerializer, tree, manifest_hash)
        write_rules(options['rules'], tree, manifest_hash)

        if len(examples) >= 2:
            loo = loo_cv(examples, config['max_depth'], config['min_leaf'], n_jobs=config['jobs'])
            write_artifact(
                out.with_name('loo.json'),
                {
                    'bac': loo.bac,
                    'baseline_bac': loo.baseline_bac,
                    'confusion': loo.confusion.to_list(),
                    'labels': ['default_opt', 'rs'],
                    'n_examples': len(examples),
                    'excluded': [[dataset, reason] for dataset, reason in excluded],
                },
                manifest_hash,
            )
            summary = f"LOO BAC {loo.bac:.4f} (baseline {loo.baseline_bac:.4f})"
        else:
            summary = 'too few examples for leave-one-out'

        manifest = self.find_manifest(
            manifest_hash,
            options.get('manifest'),
            out.parent / MANIFEST_NAME,
            Path(options['mf']).parent / MANIFEST_NAME,
        )
        if manifest is not None:
            stage_config = {**config, 'mf': options['mf'], 'labels': options['labels']}
            record_stage(options.get('manifest') or out.parent / MANIFEST_NAME, manifest, self.stage, stage_config)
        else:
            logger.info("No manifest matches the inputs; none updated")
        self.done(f"tree of depth {tree.depth} on {len(examples)} meta-examples; {summary}")
