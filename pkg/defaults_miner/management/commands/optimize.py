from pathlib import Path

from defaults_miner.pipeline import ExperimentSeeds, build_plan, choose_samples, mine_defaults
from defaults_miner.pso import SwarmConfig
from defaults_miner.serializers import SettingsPoolSerializer

from ._base import ExperimentCommand, dataset_files, load_tables


class Command(ExperimentCommand):
    help = 'Mine a pool of optimized default settings with repeated swarm runs'
    stage = 'optimize'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data-dir', dest='data_dir', required=True, help='directory of ingested dataset files')
        parser.add_argument('--replications', type=int)
        parser.add_argument('--k', type=int, help='datasets per optimization sample')
        parser.add_argument('--pso-seeds', dest='pso_seeds', type=int, help='swarm runs per replication')
        parser.add_argument('--budget', type=int, help='fitness evaluations per swarm run')
        parser.add_argument('--population', type=int)
        parser.add_argument('--max-iterations', dest='max_iterations', type=int)
        parser.add_argument('--folds', type=int)
        parser.add_argument('--jobs', type=int, help='parallel swarm runs')
        parser.add_argument('--out', required=True, help='pool JSON file')

    def run(self, config, options):
        files = dataset_files(options['data_dir'])
        manifest = self.experiment(config, files, options)
        tables = load_tables(files)
        seeds = ExperimentSeeds(config['seed'])

        plan = build_plan(list(tables), config['replications'], seeds.plan)
        samples = choose_samples(plan, [config['k']], seeds.samples)
        swarm = SwarmConfig(
            population=config['population'],
            max_iterations=config['max_iterations'],
            budget_evaluations=config['budget'],
            informant_count=config['informant_count'],
            max_seconds=config['max_seconds'],
        )
        pool = mine_defaults(
            plan,
            samples,
            config['k'],
            tuple(range(1, config['pso_seeds'] + 1)),
            swarm,
            config['folds'],
            tables,
            seeds,
            n_jobs=config['jobs'],
        )

        out = Path(options['out'])
        self.write(out, SettingsPoolSerializer, pool, manifest.hash)
        traces = out.parent / 'traces'
        traces.mkdir(parents=True, exist_ok=True)
        for (replication, pso_seed), trace in sorted(pool.traces.items()):
            (traces / f"replication{replication}_seed{pso_seed}.jsonl").write_text(trace.to_jsonl(), encoding='utf-8')

        self.record(manifest, out, config, options, data_dir=options['data_dir'], seeds=seeds.as_dict())
        status = 'partial pool' if pool.partial else 'pool'
        self.done(f"{status} of {len(pool.entries)} settings written to {out}")
