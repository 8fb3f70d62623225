import json
import math

import pytest
from django.conf import settings
from django.test import SimpleTestCase

from defaults_miner.conf import CONFIG_KEYS, resolve_config
from defaults_miner.exceptions import ConfigurationError, DatasetError, ManifestMismatchError
from defaults_miner.manifest import (
    HASH_PREFIX,
    ExperimentManifest,
    check_hashes,
    for_files,
    record_stage,
    text_hash,
)
from defaults_miner.pipeline import PoolEntry, SettingsPool, build_plan
from defaults_miner.serializers import (
    SettingsPoolSerializer,
    artifact_hash,
    canonical_json,
    dump,
    load,
    load_file,
    load_reference_pool,
    write_json,
)
from defaults_miner.svm import HPSetting, Provenance


def dataset_files(directory, contents):
    paths = []
    for name, text in contents.items():
        path = directory / f"{name}.json"
        path.write_text(text, encoding='utf-8')
        paths.append(path)
    return paths


class CanonicalJsonTest(SimpleTestCase):
    """Test the canonical JSON form."""

    def test_sorted_with_newline(self):
        """Test keys are sorted and the text ends with a newline."""
        text = canonical_json({'b': 1, 'a': [1, 2]})

        self.assertTrue(text.endswith('\n'))
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(canonical_json({'a': [1, 2], 'b': 1}), text)

    def test_nan_rejected(self):
        """Test non-finite numbers cannot be written."""
        with self.assertRaises(ValueError):
            canonical_json({'a': math.nan})


class PoolSchemaTest(SimpleTestCase):
    """Test the pool artifact schema."""

    def setUp(self):
        plan = build_plan(['a', 'b', 'c', 'd'], replications=2, seed=0)
        self.pool = SettingsPool.from_entries(
            [
                PoolEntry(HPSetting(1.0, -2.0, Provenance.PSO, 'run 1'), 0.81, replication=0, pso_seed=1),
                PoolEntry(HPSetting(3.0, 0.5, Provenance.PSO, 'run 2'), 0.84, replication=1, pso_seed=1),
            ],
            sample_k=2,
            failures=((1, 2, 'boom'),),
            plan=plan,
        )

    def test_dump_and_load(self):
        """Test a dumped pool loads back with order, failures and plan."""
        data = json.loads(canonical_json(dump(SettingsPoolSerializer, self.pool, 'abc')))

        self.assertEqual(data['schema_version'], 1)
        self.assertEqual(data['manifest_hash'], 'abc')
        self.assertTrue(data['partial'])

        loaded = load(SettingsPoolSerializer, data)
        self.assertEqual(loaded.entries, self.pool.entries)
        self.assertEqual(loaded.failures, self.pool.failures)
        self.assertEqual(loaded.plan, self.pool.plan)

    def test_future_schema_rejected(self):
        """Test an unknown schema version is refused with the field named."""
        data = dump(SettingsPoolSerializer, self.pool)
        data['schema_version'] = 2

        with self.assertRaisesMessage(DatasetError, 'schema_version'):
            load(SettingsPoolSerializer, data)

    def test_out_of_range_setting(self):
        """Test entries outside the log2 box are refused."""
        data = dump(SettingsPoolSerializer, self.pool)
        data['entries'][0]['log2_gamma'] = 16.0

        with self.assertRaisesMessage(DatasetError, 'log2_gamma'):
            load(SettingsPoolSerializer, data)

    def test_empty_pool(self):
        """Test a pool file needs entries."""
        with self.assertRaises(DatasetError):
            load(SettingsPoolSerializer, {'entries': []})

    def test_reference_pool(self):
        """Test the bundled 23-setting pool."""
        pool = load_reference_pool()

        self.assertEqual(len(pool.entries), 23)
        first = pool.entries[0].setting
        self.assertAlmostEqual(first.log2_cost, -2.19277, places=5)
        self.assertAlmostEqual(first.log2_gamma, 5.793062, places=5)
        self.assertEqual((pool.entries[3].setting.log2_cost, pool.entries[3].setting.log2_gamma), (0.0, -6.6))
        fitnesses = [entry.fitness for entry in pool.entries]
        self.assertEqual(fitnesses, sorted(fitnesses, reverse=True))


class TestArtifactFiles:
    def test_embedded_hash(self, tmp_path):
        path = write_json(tmp_path / 'pool.json', {'manifest_hash': 'f00', 'entries': []})

        assert artifact_hash(path) == 'f00'

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match='not found'):
            load_file(SettingsPoolSerializer, tmp_path / 'absent.json')

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"entries": [', encoding='utf-8')

        with pytest.raises(DatasetError, match='invalid JSON'):
            load_file(SettingsPoolSerializer, path)


class TestResolveConfig:
    @pytest.fixture(autouse=True)
    def clean_env(self, monkeypatch):
        monkeypatch.delenv('DEFAULTS_MINER_SEED', raising=False)

    def test_defaults(self):
        config = resolve_config()

        assert config['folds'] == settings.DEFAULTS_MINER['FOLDS']
        assert config['sample_sizes'] == [11, 31, 51, 71]
        assert config['alpha'] == 0.05
        assert config['pairing'] == 'replications'
        assert set(config) == set(CONFIG_KEYS)

    def test_precedence(self, tmp_path, monkeypatch):
        path = tmp_path / 'experiment.env'
        path.write_text('SEED=5\nFOLDS=5\nSAMPLE_SIZES=3,5\n', encoding='utf-8')

        assert resolve_config(config_file=path)['seed'] == 5
        assert resolve_config(config_file=path)['sample_sizes'] == [3, 5]

        monkeypatch.setenv('DEFAULTS_MINER_SEED', '7')
        assert resolve_config(config_file=path)['seed'] == 7
        assert resolve_config({'seed': 9}, path)['seed'] == 9
        assert resolve_config({'seed': None}, path)['folds'] == 5

    def test_unknown_key(self, tmp_path):
        path = tmp_path / 'experiment.env'
        path.write_text('SEED=5\nSWARM_COLOUR=blue\n', encoding='utf-8')

        with pytest.raises(ConfigurationError) as caught:
            resolve_config(config_file=path)
        assert 'swarm_colour' in caught.value.errors

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match='config'):
            resolve_config(config_file=tmp_path / 'absent.env')

    @pytest.mark.parametrize(
        'flags, field',
        [
            ({'folds': 1}, 'folds'),
            ({'budget': 5, 'population': 10}, 'budget'),
            ({'jobs': 0}, 'jobs'),
            ({'alpha': 0.01}, 'alpha'),
            ({'selection': 'vote'}, 'selection'),
            ({'pairing': 'both'}, 'pairing'),
            ({'bin_width': 0.0}, 'bin_width'),
        ],
    )
    def test_invalid_values_name_the_field(self, flags, field):
        with pytest.raises(ConfigurationError) as caught:
            resolve_config(flags)
        assert field in caught.value.errors
        assert str(caught.value).startswith(field)

    def test_all_cores(self):
        assert resolve_config({'jobs': -1})['jobs'] == -1


class TestManifest:
    def test_hash_ignores_file_order(self, tmp_path):
        paths = dataset_files(tmp_path, {'iris': 'one', 'wine': 'two'})

        assert for_files(3, paths).hash == for_files(3, list(reversed(paths))).hash
        assert for_files(3, paths).hash != for_files(4, paths).hash

    def test_hash_follows_content(self, tmp_path):
        paths = dataset_files(tmp_path, {'iris': 'one'})
        before = for_files(3, paths).hash
        paths[0].write_text('changed', encoding='utf-8')

        assert for_files(3, paths).hash != before

    def test_stages_merge_within_experiment(self, tmp_path):
        paths = dataset_files(tmp_path, {'iris': 'one', 'wine': 'two'})
        target = tmp_path / 'manifest.json'

        record_stage(target, for_files(3, paths), 'tune', {'budget': 300})
        merged = record_stage(target, for_files(3, paths), 'evaluate', {'folds': 10})

        stored = ExperimentManifest.load(target)
        assert set(stored.stages) == {'tune', 'evaluate'}
        assert stored.hash == merged.hash
        assert set(stored.timestamps) == {'tune', 'evaluate'}
        assert 'python' in stored.tool_versions

    def test_other_experiment_replaced(self, tmp_path):
        paths = dataset_files(tmp_path, {'iris': 'one'})
        target = tmp_path / 'manifest.json'

        record_stage(target, for_files(3, paths), 'tune', {})
        record_stage(target, for_files(4, paths), 'evaluate', {})

        stored = ExperimentManifest.load(target)
        assert stored.master_seed == 4
        assert set(stored.stages) == {'evaluate'}

    def test_dataset_digest(self, tmp_path):
        paths = dataset_files(tmp_path, {'iris': 'one'})
        manifest = for_files(0, paths)

        assert len(manifest.dataset_digest('iris')) == 64
        assert manifest.dataset_digest('wine') is None

    def test_invalid_manifest(self):
        with pytest.raises(DatasetError):
            ExperimentManifest.from_dict({'datasets': []})

    def test_text_hash(self, tmp_path):
        stamped = tmp_path / 'rules.txt'
        stamped.write_text(f"{HASH_PREFIX}abc123\nnr_inst < 358\n", encoding='utf-8')
        plain = tmp_path / 'plain.txt'
        plain.write_text('nr_inst < 358\n', encoding='utf-8')

        assert text_hash(stamped) == 'abc123'
        assert text_hash(plain) == ''


class CheckHashesTest(SimpleTestCase):
    """Test combining artifacts across experiments."""

    def test_agreeing(self):
        """Test empty hashes are ignored."""
        self.assertEqual(check_hashes({'pool': 'aaa', 'rs': '', 'table': 'aaa'}), 'aaa')
        self.assertEqual(check_hashes({'pool': ''}), '')

    def test_mismatch(self):
        """Test different experiments are refused by default."""
        with self.assertRaises(ManifestMismatchError) as caught:
            check_hashes({'pool': 'aaa', 'rs': 'bbb'})
        self.assertEqual(caught.exception.hashes, {'pool': 'aaa', 'rs': 'bbb'})
        self.assertIn('--force', str(caught.exception))

    def test_forced(self):
        """Test --force combines them anyway."""
        self.assertEqual(check_hashes({'pool': 'bbb', 'rs': 'aaa'}, force=True), 'aaa')
