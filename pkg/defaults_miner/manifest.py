"""
Experiment manifests.

A manifest pins the master seed and the content hashes of every dataset in
the experiment; its hash is embedded in every artifact so that ``report``
can refuse to combine outputs of different experiments. Stage configs and
timestamps are recorded too, but only the seed and the datasets define the
experiment's identity.
"""
import hashlib
import logging
import platform
from dataclasses import dataclass, field, replace
from importlib import metadata
from pathlib import Path

from django.utils import timezone

from .exceptions import DatasetError, ManifestMismatchError
from .serializers import SCHEMA_VERSION, canonical_json, read_json, write_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
HASH_PREFIX = '# manifest_hash: '

_PACKAGES = ('numpy', 'scipy', 'pandas', 'django', 'djangorestframework', 'joblib')


def file_sha256(path):
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def tool_versions():
    versions = {'python': platform.python_version()}
    for package in _PACKAGES:
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            versions[package] = 'unknown'
    return versions


@dataclass(frozen=True)
class ExperimentManifest:
    master_seed: int
    datasets: tuple
    stages: dict = field(default_factory=dict)
    tool_versions: dict = field(default_factory=dict)
    timestamps: dict = field(default_factory=dict)

    @property
    def hash(self):
        identity = {
            'master_seed': self.master_seed,
            'datasets': [[name, digest] for name, digest in sorted(self.datasets)],
        }
        return hashlib.sha256(canonical_json(identity).encode('utf-8')).hexdigest()

    def dataset_digest(self, name):
        return dict(self.datasets).get(name)

    def same_experiment(self, other):
        return self.hash == other.hash

    def with_stage(self, stage, config):
        stages = dict(self.stages)
        stages[stage] = config
        timestamps = dict(self.timestamps)
        timestamps[stage] = timezone.now().isoformat()
        return replace(self, stages=stages, timestamps=timestamps, tool_versions=tool_versions())

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'manifest_hash': self.hash,
            'master_seed': self.master_seed,
            'datasets': [{'name': name, 'sha256': digest} for name, digest in sorted(self.datasets)],
            'stages': self.stages,
            'tool_versions': self.tool_versions,
            'timestamps': self.timestamps,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                master_seed=int(data['master_seed']),
                datasets=tuple(sorted((item['name'], item['sha256']) for item in data['datasets'])),
                stages=dict(data.get('stages') or {}),
                tool_versions=dict(data.get('tool_versions') or {}),
                timestamps=dict(data.get('timestamps') or {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"invalid manifest: {exc}") from exc

    @classmethod
    def load(cls, path):
        return cls.from_dict(read_json(path))

    def save(self, path):
        write_json(path, self.to_dict())
        logger.debug("Manifest %s written to %s", self.hash[:12], path)
        return Path(path)


def for_files(master_seed, paths):
    """A manifest identifying the experiment over the given dataset files."""
    return ExperimentManifest(
        master_seed=int(master_seed),
        datasets=tuple(sorted((Path(path).stem, file_sha256(path)) for path in paths)),
    )


def record_stage(path, manifest, stage, config):
    """
    Merge ``stage`` into the manifest stored at ``path``.

    An existing manifest of the same experiment keeps its other stages; one
    of a different experiment is replaced.
    """
    path = Path(path)
    if path.exists():
        existing = ExperimentManifest.load(path)
        if existing.same_experiment(manifest):
            manifest = replace(
                manifest,
                stages={**existing.stages, **manifest.stages},
                timestamps={**existing.timestamps, **manifest.timestamps},
            )
        else:
            logger.warning("Replacing manifest of a different experiment at %s", path)
    manifest = manifest.with_stage(stage, config)
    manifest.save(path)
    return manifest


def text_hash(path):
    """The hash from a leading ``# manifest_hash:`` line, or ''."""
    with open(path, encoding='utf-8') as handle:
        first = handle.readline()
    return first[len(HASH_PREFIX):].strip() if first.startswith(HASH_PREFIX) else ''


def check_hashes(hashes, force=False):
    """
    Require all non-empty hashes in ``{artifact: hash}`` to agree.
    Returns the common hash ('' when no artifact carries one).
    """
    present = {name: value for name, value in hashes.items() if value}
    distinct = set(present.values())
    if len(distinct) > 1:
        if not force:
            raise ManifestMismatchError(present)
        logger.warning("Combining artifacts from %d different experiments (--force)", len(distinct))
    return sorted(distinct)[0] if distinct else ''
