"""Shared plumbing for the experiment subcommands."""
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from defaults_miner.conf import CONFIG_KEYS, resolve_config
from defaults_miner.exceptions import DatasetError, DefaultsMinerError, ManifestMismatchError
from defaults_miner.manifest import MANIFEST_NAME, ExperimentManifest, file_sha256, for_files, record_stage
from defaults_miner.serializers import DatasetFileSerializer, dump, load_file, write_json

logger = logging.getLogger('defaults_miner')

VERBOSITY_LEVELS = {0: logging.ERROR, 2: logging.DEBUG, 3: logging.DEBUG}


def dataset_files(data_dir):
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DatasetError(f"{data_dir}: not a directory")
    files = sorted(path for path in data_dir.glob('*.json') if path.name != MANIFEST_NAME)
    if not files:
        raise DatasetError(f"{data_dir}: no dataset files")
    return files


def load_dataset(path):
    """``(table, report, metafeatures)`` from an ingested dataset file."""
    return load_file(DatasetFileSerializer, path)


def load_tables(files):
    tables = {}
    for path in files:
        table, _, _ = load_dataset(path)
        if table.name in tables:
            raise DatasetError(f"{path}: dataset name {table.name!r} appears twice")
        tables[table.name] = table
    return tables


class ExperimentCommand(BaseCommand):
    """
    Base for every subcommand: config resolution, logging verbosity,
    manifest bookkeeping and translation of domain errors.
    """

    stage = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help='key = value file with experiment settings')
        parser.add_argument('--seed', type=int, help='master seed')
        parser.add_argument('--manifest', help='manifest of an existing experiment to join')

    def handle(self, *args, **options):
        self.verbosity = options.get('verbosity', 1)
        level = VERBOSITY_LEVELS.get(self.verbosity)
        if level is not None:
            logger.setLevel(level)
        try:
            flags = {key: options.get(key) for key in CONFIG_KEYS}
            config = resolve_config(flags, options.get('config'))
            self.run(config, options)
        except (DefaultsMinerError, ValueError) as exc:
            raise CommandError(str(exc)) from exc

    def run(self, config, options):
        raise NotImplementedError

    def experiment(self, config, files, options):
        """
        The manifest these files belong to.

        With ``--manifest`` the stored experiment is joined: its master seed
        wins and every file must match its recorded content hash.
        """
        path = options.get('manifest')
        if path and Path(path).exists():
            manifest = ExperimentManifest.load(path)
            for file in files:
                recorded = manifest.dataset_digest(Path(file).stem)
                if recorded is None:
                    raise DatasetError(f"{file}: not part of the experiment in {path}")
                if recorded != file_sha256(file):
                    raise ManifestMismatchError({str(file): file_sha256(file), 'manifest': recorded})
            if options.get('seed') is not None and options['seed'] != manifest.master_seed:
                logger.warning("Ignoring --seed %s; the manifest fixes seed %s", options['seed'], manifest.master_seed)
            config['seed'] = manifest.master_seed
            return manifest
        return for_files(config['seed'], files)

    def record(self, manifest, out, config, options, **extra):
        """Store this stage in the manifest next to ``out`` (or at ``--manifest``)."""
        path = options.get('manifest') or Path(out).parent / MANIFEST_NAME
        stage_config = dict(config)
        stage_config.update({key: str(value) if isinstance(value, Path) else value for key, value in extra.items()})
        return record_stage(path, manifest, self.stage, stage_config)

    def write(self, path, serializer_class, instance, manifest_hash=''):
        written = write_json(path, dump(serializer_class, instance, manifest_hash))
        logger.info("Wrote %s", written)
        return written

    def done(self, message):
        if self.verbosity > 0:
            self.stdout.write(self.style.SUCCESS(message))

    def find_manifest(self, manifest_hash, *candidates):
        """The first existing manifest among ``candidates`` with this hash, or None."""
        for candidate in candidates:
            if candidate and Path(candidate).exists():
                manifest = ExperimentManifest.load(candidate)
                if not manifest_hash or manifest.hash == manifest_hash:
                    return manifest
        return None
