"""
Experiment configuration.

Values are merged from, lowest first: the ``DEFAULTS_MINER`` settings
(which already fold in the environment and ``.env``), a ``--config``
key = value file, the ``DEFAULTS_MINER_SEED`` environment variable and
finally explicit command-line flags.
"""
import logging
from pathlib import Path

from decouple import RepositoryEnv, config
from django.conf import settings

from .exceptions import ConfigurationError
from .serializers import ExperimentConfigSerializer, load

logger = logging.getLogger(__name__)

CONFIG_KEYS = tuple(ExperimentConfigSerializer._declared_fields)


def defaults():
    return {key.lower(): value for key, value in settings.DEFAULTS_MINER.items()}


def read_config_file(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError({'config': [f"File not found: {path}"]})
    values = {key.lower(): value for key, value in RepositoryEnv(str(path)).data.items()}
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigurationError({key: ["Unknown configuration key."] for key in unknown})
    return values


def resolve_config(flags=None, config_file=None):
    """Validated configuration dict; invalid values raise ``ConfigurationError`` naming the field."""
    merged = defaults()
    if config_file:
        merged.update(read_config_file(config_file))
        logger.debug("Loaded configuration file %s", config_file)
    env_seed = config('DEFAULTS_MINER_SEED', default=None)
    if env_seed is not None:
        merged['seed'] = env_seed
    for key, value in (flags or {}).items():
        if key in CONFIG_KEYS and value is not None:
            merged[key] = value
    return load(ExperimentConfigSerializer, merged, error_class=ConfigurationError)
