"""
JSON artifact schemas.

Every artifact written by the commands goes through one of these
serializers; loading validates the file and rebuilds the frozen domain
objects through ``save()``.
"""
import json
import math
from pathlib import Path

from rest_framework import serializers

from .datasets import DataTable, PreprocessReport
from .evaluation import CvResult, FitnessValue
from .exceptions import ConfigurationError, DatasetError
from .metalearning import FEATURE_NAMES, MetaFeatureVector, TreeModel
from .pipeline import (
    SELECTIONS,
    PoolDatasetResult,
    PoolEntry,
    PoolEvaluation,
    Replication,
    ResamplingPlan,
    SettingsPool,
)
from .random_search import RsResult
from .stats import PAIRINGS
from .svm import LOG2_BOUND, HPSetting, Provenance

SCHEMA_VERSION = 1


def canonical_json(data):
    """Sorted keys, two-space indent, UTF-8 text with a trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + '\n'


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(data), encoding='utf-8')
    return path


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError as exc:
        raise DatasetError(f"{path}: file not found") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


class VersionedSerializer(serializers.Serializer):
    """
    Base for top-level artifacts.
    Adds ``schema_version`` and the optional ``manifest_hash`` on input.
    """

    schema_version = serializers.IntegerField(write_only=True, required=False, default=SCHEMA_VERSION)
    manifest_hash = serializers.CharField(write_only=True, required=False, allow_blank=True, default='')

    def validate_schema_version(self, value):
        if value != SCHEMA_VERSION:
            raise serializers.ValidationError(f"Unsupported schema version {value}; expected {SCHEMA_VERSION}.")
        return value


class HPSettingSerializer(serializers.Serializer):
    log2_cost = serializers.FloatField(min_value=-LOG2_BOUND, max_value=LOG2_BOUND)
    log2_gamma = serializers.FloatField(min_value=-LOG2_BOUND, max_value=LOG2_BOUND)
    provenance = serializers.ChoiceField(choices=[p.value for p in Provenance], default=Provenance.FIXTURE.value)
    origin = serializers.CharField(allow_blank=True, required=False, default='')

    def to_representation(self, instance):
        return {
            'log2_cost': instance.log2_cost,
            'log2_gamma': instance.log2_gamma,
            'provenance': Provenance(instance.provenance).value,
            'origin': instance.origin,
        }

    def create(self, validated_data):
        return HPSetting(
            log2_cost=validated_data['log2_cost'],
            log2_gamma=validated_data['log2_gamma'],
            provenance=Provenance(validated_data['provenance']),
            origin=validated_data.get('origin', ''),
        )


def _setting(data):
    serializer = HPSettingSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


class ReplicationSerializer(serializers.Serializer):
    id = serializers.IntegerField(min_value=0)
    optimization = serializers.ListField(child=serializers.CharField())
    test = serializers.ListField(child=serializers.CharField())


class PlanSerializer(serializers.Serializer):
    seed = serializers.IntegerField(min_value=0)
    replications = ReplicationSerializer(many=True)

    def to_representation(self, instance):
        return {
            'seed': instance.seed,
            'replications': [
                {'id': r.id, 'optimization': list(r.optimization), 'test': list(r.test)}
                for r in instance.replications
            ],
        }

    def create(self, validated_data):
        try:
            return ResamplingPlan(
                replications=tuple(
                    Replication(id=r['id'], optimization=tuple(r['optimization']), test=tuple(r['test']))
                    for r in validated_data['replications']
                ),
                seed=validated_data['seed'],
            )
        except ValueError as exc:
            raise serializers.ValidationError({'replications': [str(exc)]}) from exc


class PoolEntrySerializer(HPSettingSerializer):
    fitness = serializers.FloatField(min_value=0.0, max_value=1.0)
    replication = serializers.IntegerField(required=False, allow_null=True, default=None)
    pso_seed = serializers.IntegerField(required=False, allow_null=True, default=None)
    shared = serializers.BooleanField(required=False, default=False)

    def to_representation(self, instance):
        data = super().to_representation(instance.setting)
        data.update(
            fitness=instance.fitness,
            replication=instance.replication,
            pso_seed=instance.pso_seed,
            shared=instance.shared,
        )
        return data

    def create(self, validated_data):
        return PoolEntry(
            setting=super().create(validated_data),
            fitness=validated_data['fitness'],
            replication=validated_data.get('replication'),
            pso_seed=validated_data.get('pso_seed'),
            shared=validated_data.get('shared', False),
        )


class FailureSerializer(serializers.Serializer):
    replication = serializers.IntegerField()
    pso_seed = serializers.IntegerField()
    message = serializers.CharField()


class SettingsPoolSerializer(VersionedSerializer):
    """pool.json: entries in descending fitness order."""

    sample_k = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    entries = PoolEntrySerializer(many=True)
    failures = FailureSerializer(many=True, required=False, default=list)
    partial = serializers.BooleanField(read_only=True)
    plan = PlanSerializer(required=False, allow_null=True, default=None)

    def validate_entries(self, value):
        if not value:
            raise serializers.ValidationError("A pool needs at least one entry.")
        return value

    def to_representation(self, instance):
        return {
            'sample_k': instance.sample_k,
            'entries': [PoolEntrySerializer(entry).data for entry in instance.entries],
            'failures': [
                {'replication': rep, 'pso_seed': seed, 'message': message}
                for rep, seed, message in instance.failures
            ],
            'partial': instance.partial,
            'plan': PlanSerializer(instance.plan).data if instance.plan is not None else None,
        }

    def create(self, validated_data):
        plan = validated_data.get('plan')
        if plan is not None:
            plan = PlanSerializer().create(plan)
        return SettingsPool.from_entries(
            [PoolEntrySerializer().create(entry) for entry in validated_data['entries']],
            sample_k=validated_data.get('sample_k'),
            failures=tuple(
                (failure['replication'], failure['pso_seed'], failure['message'])
                for failure in validated_data.get('failures', [])
            ),
            plan=plan,
        )


class CvResultSerializer(VersionedSerializer):
    dataset = serializers.CharField()
    hp = HPSettingSerializer()
    per_fold_bac = serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0), min_length=2)
    mean_bac = serializers.FloatField(min_value=0.0, max_value=1.0)
    seed = serializers.IntegerField(min_value=0)
    converged = serializers.BooleanField(default=True)

    def to_representation(self, instance):
        return {
            'dataset': instance.dataset,
            'hp': HPSettingSerializer(instance.hp).data,
            'per_fold_bac': list(instance.per_fold_bac),
            'mean_bac': instance.mean_bac,
            'seed': instance.seed,
            'converged': instance.converged,
        }

    def create(self, validated_data):
        return CvResult(
            dataset=validated_data['dataset'],
            hp=HPSettingSerializer().create(validated_data['hp']),
            per_fold_bac=tuple(validated_data['per_fold_bac']),
            mean_bac=validated_data['mean_bac'],
            seed=validated_data['seed'],
            converged=validated_data['converged'],
        )


class FitnessValueSerializer(VersionedSerializer):
    value = serializers.FloatField(min_value=0.0, max_value=1.0)
    per_dataset = serializers.DictField(child=serializers.FloatField(min_value=0.0, max_value=1.0))

    def to_representation(self, instance):
        return {'value': instance.value, 'per_dataset': dict(instance.per_dataset)}

    def create(self, validated_data):
        return FitnessValue(value=validated_data['value'], per_dataset=tuple(sorted(validated_data['per_dataset'].items())))


class EvaluatedSettingSerializer(HPSettingSerializer):
    bac = serializers.FloatField(min_value=0.0, max_value=1.0)

    def to_representation(self, instance):
        setting, bac = instance
        data = super().to_representation(setting)
        data['bac'] = bac
        return data

    def create(self, validated_data):
        return super().create(validated_data), validated_data['bac']


class RsResultSerializer(VersionedSerializer):
    dataset = serializers.CharField()
    best = EvaluatedSettingSerializer()
    best_folds = serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0))
    all_evaluations = EvaluatedSettingSerializer(many=True)
    budget = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0)
    cv_seed = serializers.IntegerField(min_value=0)
    folds = serializers.IntegerField(min_value=2)

    def validate(self, attrs):
        if len(attrs['all_evaluations']) != attrs['budget']:
            raise serializers.ValidationError(
                {'all_evaluations': [f"{len(attrs['all_evaluations'])} evaluations for budget {attrs['budget']}."]}
            )
        return attrs

    def to_representation(self, instance):
        return {
            'dataset': instance.dataset,
            'best': EvaluatedSettingSerializer(instance.best).data,
            'best_folds': list(instance.best_folds),
            'all_evaluations': [EvaluatedSettingSerializer(item).data for item in instance.all_evaluations],
            'budget': instance.budget,
            'seed': instance.seed,
            'cv_seed': instance.cv_seed,
            'folds': instance.folds,
        }

    def create(self, validated_data):
        serializer = EvaluatedSettingSerializer()
        return RsResult(
            dataset=validated_data['dataset'],
            best=serializer.create(validated_data['best']),
            all_evaluations=tuple(serializer.create(item) for item in validated_data['all_evaluations']),
            budget=validated_data['budget'],
            seed=validated_data['seed'],
            cv_seed=validated_data['cv_seed'],
            folds=validated_data['folds'],
            best_folds=tuple(validated_data['best_folds']),
        )


class PoolDatasetResultSerializer(serializers.Serializer):
    dataset = serializers.CharField()
    replication = serializers.IntegerField(allow_null=True, required=False, default=None)
    best_index = serializers.IntegerField(min_value=0)
    best = HPSettingSerializer()
    mean_bac = serializers.FloatField(min_value=0.0, max_value=1.0)
    per_fold_bac = serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0))
    entry_bacs = serializers.ListField(child=serializers.ListField(), required=False, default=list)

    def to_representation(self, instance):
        return {
            'dataset': instance.dataset,
            'replication': instance.replication,
            'best_index': instance.best_index,
            'best': HPSettingSerializer(instance.best).data,
            'mean_bac': instance.mean_bac,
            'per_fold_bac': list(instance.per_fold_bac),
            'entry_bacs': [[index, bac] for index, bac in instance.entry_bacs],
        }

    def create(self, validated_data):
        return PoolDatasetResult(
            dataset=validated_data['dataset'],
            replication=validated_data.get('replication'),
            best_index=validated_data['best_index'],
            best=HPSettingSerializer().create(validated_data['best']),
            mean_bac=validated_data['mean_bac'],
            per_fold_bac=tuple(validated_data['per_fold_bac']),
            entry_bacs=tuple((int(index), float(bac)) for index, bac in validated_data.get('entry_bacs', [])),
        )


class PoolEvaluationSerializer(VersionedSerializer):
    results = PoolDatasetResultSerializer(many=True)
    selection = serializers.ChoiceField(choices=SELECTIONS)
    folds = serializers.IntegerField(min_value=2)
    cv_seed = serializers.IntegerField(min_value=0)
    sample_k = serializers.IntegerField(min_value=1, allow_null=True, required=False, default=None)

    def to_representation(self, instance):
        return {
            'results': [PoolDatasetResultSerializer(result).data for result in instance.results],
            'selection': instance.selection,
            'folds': instance.folds,
            'cv_seed': instance.cv_seed,
            'sample_k': instance.sample_k,
        }

    def create(self, validated_data):
        serializer = PoolDatasetResultSerializer()
        return PoolEvaluation(
            results=tuple(serializer.create(result) for result in validated_data['results']),
            selection=validated_data['selection'],
            folds=validated_data['folds'],
            cv_seed=validated_data['cv_seed'],
            sample_k=validated_data.get('sample_k'),
        )


class MetaFeatureSerializer(serializers.Serializer):
    nr_inst = serializers.IntegerField(min_value=1)
    nr_attr = serializers.IntegerField(min_value=0)
    nr_class = serializers.IntegerField(min_value=2)
    nr_num = serializers.IntegerField(min_value=0)
    nr_cat = serializers.IntegerField(min_value=0)
    nr_bin = serializers.IntegerField(min_value=0)
    attr_to_inst = serializers.FloatField(allow_null=True, required=False, default=None)
    inst_to_attr = serializers.FloatField(allow_null=True, required=False, default=None)
    cat_to_num = serializers.FloatField(allow_null=True, required=False, default=None)
    num_to_cat = serializers.FloatField(allow_null=True, required=False, default=None)
    freq_class_mean = serializers.FloatField(allow_null=True, required=False, default=None)
    freq_class_sd = serializers.FloatField(allow_null=True, required=False, default=None)

    def to_representation(self, instance):
        return instance.as_dict()

    def validate(self, attrs):
        if attrs['nr_attr'] != attrs['nr_num'] + attrs['nr_cat']:
            raise serializers.ValidationError({'nr_attr': ["Must equal nr_num + nr_cat."]})
        return attrs

    def create(self, validated_data):
        return MetaFeatureVector(**{name: validated_data.get(name) for name in FEATURE_NAMES})


class PreprocessReportSerializer(serializers.Serializer):
    removed_constant = serializers.ListField(child=serializers.CharField(), default=list)
    removed_identifier = serializers.ListField(child=serializers.CharField(), default=list)
    imputed = serializers.ListField(child=serializers.ListField(min_length=2, max_length=2), default=list)
    one_hot_expansions = serializers.ListField(child=serializers.ListField(min_length=2, max_length=2), default=list)

    def to_representation(self, instance):
        return {
            'removed_constant': list(instance.removed_constant),
            'removed_identifier': list(instance.removed_identifier),
            'imputed': [[name, fill] for name, fill in instance.imputed],
            'one_hot_expansions': [[name, count] for name, count in instance.one_hot_expansions],
        }

    def create(self, validated_data):
        return PreprocessReport(
            removed_constant=list(validated_data['removed_constant']),
            removed_identifier=list(validated_data['removed_identifier']),
            imputed=[tuple(item) for item in validated_data['imputed']],
            one_hot_expansions=[(name, int(count)) for name, count in validated_data['one_hot_expansions']],
        )


class DatasetFileSerializer(VersionedSerializer):
    """
    A preprocessed dataset with its provenance and raw meta-features.

    ``save()`` returns ``(table, report, metafeatures)``.
    """

    name = serializers.CharField()
    class_names = serializers.ListField(child=serializers.CharField(), min_length=2)
    feature_names = serializers.ListField(child=serializers.CharField())
    labels = serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=1)
    features = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))
    provenance = PreprocessReportSerializer()
    metafeatures = MetaFeatureSerializer(required=False, allow_null=True, default=None)
    source = serializers.CharField(allow_blank=True, required=False, default='')
    source_sha256 = serializers.CharField(allow_blank=True, required=False, default='')

    def validate(self, attrs):
        if len(attrs['features']) != len(attrs['labels']):
            raise serializers.ValidationError(
                {'features': [f"{len(attrs['features'])} rows for {len(attrs['labels'])} labels."]}
            )
        widths = {len(row) for row in attrs['features']}
        if widths != {len(attrs['feature_names'])}:
            raise serializers.ValidationError({'features': ["Every row must have one value per feature name."]})
        return attrs

    def to_representation(self, instance):
        table, report, metafeatures, source, digest = instance
        return {
            'name': table.name,
            'class_names': list(table.class_names),
            'feature_names': list(table.feature_names),
            'labels': table.labels.tolist(),
            'features': table.features.tolist(),
            'provenance': PreprocessReportSerializer(report).data,
            'metafeatures': metafeatures.as_dict() if metafeatures is not None else None,
            'source': source,
            'source_sha256': digest,
        }

    def create(self, validated_data):
        table = DataTable(
            name=validated_data['name'],
            features=validated_data['features'],
            labels=validated_data['labels'],
            class_names=tuple(validated_data['class_names']),
            feature_names=tuple(validated_data['feature_names']),
        )
        report = PreprocessReportSerializer().create(validated_data['provenance'])
        metafeatures = validated_data.get('metafeatures')
        if metafeatures is not None:
            metafeatures = MetaFeatureSerializer().create(metafeatures)
        return table, report, metafeatures


class TreeSerializer(VersionedSerializer):
    root = serializers.DictField()
    class_weights = serializers.DictField(child=serializers.FloatField(min_value=0.0))
    max_depth = serializers.IntegerField(min_value=0)
    min_leaf = serializers.IntegerField(min_value=1)

    def validate_root(self, value):
        def check(node, path):
            if 'counts' not in node or 'prediction' not in node:
                raise serializers.ValidationError(f"Node {path or 'root'} needs counts and prediction.")
            if node.get('feature') is not None:
                if node['feature'] not in FEATURE_NAMES:
                    raise serializers.ValidationError(f"Unknown feature {node['feature']!r} at {path or 'root'}.")
                for side in ('left', 'right'):
                    if not isinstance(node.get(side), dict):
                        raise serializers.ValidationError(f"Node {path or 'root'} is missing its {side} child.")
                    check(node[side], f"{path}.{side}" if path else side)

        check(value, '')
        return value

    def to_representation(self, instance):
        return instance.to_dict()

    def create(self, validated_data):
        return TreeModel.from_dict(validated_data)


class ExperimentConfigSerializer(serializers.Serializer):
    """Merged experiment configuration; string values from files are coerced."""

    seed = serializers.IntegerField(min_value=0)
    folds = serializers.IntegerField(min_value=2)
    replications = serializers.IntegerField(min_value=1)
    sample_sizes = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=1)
    k = serializers.IntegerField(min_value=1)
    pso_seeds = serializers.IntegerField(min_value=1)
    budget = serializers.IntegerField(min_value=1)
    population = serializers.IntegerField(min_value=2)
    max_iterations = serializers.IntegerField(min_value=1)
    informant_count = serializers.IntegerField(min_value=1)
    rs_budget = serializers.IntegerField(min_value=1)
    jobs = serializers.IntegerField()
    alpha = serializers.ChoiceField(choices=[0.05, 0.10])
    selection = serializers.ChoiceField(choices=SELECTIONS)
    pairing = serializers.ChoiceField(choices=PAIRINGS)
    max_depth = serializers.IntegerField(min_value=0)
    min_leaf = serializers.IntegerField(min_value=1)
    min_class_size = serializers.IntegerField(min_value=1)
    missing_token = serializers.CharField(allow_blank=True, trim_whitespace=False)
    delimiter = serializers.CharField(trim_whitespace=False, max_length=1)
    bin_width = serializers.FloatField(min_value=0.0)
    max_seconds = serializers.FloatField(allow_null=True, required=False, default=None)

    def to_internal_value(self, data):
        data = dict(data)
        if isinstance(data.get('sample_sizes'), str):
            data['sample_sizes'] = [part.strip() for part in data['sample_sizes'].split(',') if part.strip()]
        if data.get('max_seconds') in ('', 'none', 'None'):
            data['max_seconds'] = None
        if 'alpha' in data and data['alpha'] is not None:
            try:
                data['alpha'] = float(data['alpha'])
            except (TypeError, ValueError):
                pass
        return super().to_internal_value(data)

    def validate_jobs(self, value):
        if value == 0 or value < -1:
            raise serializers.ValidationError("Use a positive job count or -1 for all cores.")
        return value

    def validate_bin_width(self, value):
        if value <= 0:
            raise serializers.ValidationError("Ensure this value is greater than 0.")
        return value

    def validate_max_seconds(self, value):
        if value is not None and (value <= 0 or math.isinf(value)):
            raise serializers.ValidationError("Ensure this value is a positive number of seconds.")
        return value

    def validate(self, attrs):
        if attrs['budget'] < attrs['population']:
            raise serializers.ValidationError({'budget': ["Must cover the initial population."]})
        return attrs

    def create(self, validated_data):
        return dict(validated_data)


def load(serializer_class, data, error_class=DatasetError, where=''):
    """Validate ``data`` and rebuild the domain object; field names survive in the message."""
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        if error_class is ConfigurationError:
            raise ConfigurationError(dict(serializer.errors))
        details = '; '.join(f"{field}: {_flatten(messages)}" for field, messages in serializer.errors.items())
        raise error_class(f"{where + ': ' if where else ''}{details}")
    return serializer.save()


def _flatten(messages):
    if isinstance(messages, dict):
        return ' '.join(f"{key}: {_flatten(value)}" for key, value in messages.items())
    if isinstance(messages, (list, tuple)):
        return ' '.join(_flatten(message) for message in messages)
    return str(messages)


def dump(serializer_class, instance, manifest_hash=''):
    """Representation of ``instance`` with the versioning header fields."""
    data = dict(serializer_class(instance).data)
    data['schema_version'] = SCHEMA_VERSION
    data['manifest_hash'] = manifest_hash or ''
    return data


def load_file(serializer_class, path):
    data = read_json(path)
    if not isinstance(data, dict):
        raise DatasetError(f"{path}: expected a JSON object")
    return load(serializer_class, data, where=str(path))


def artifact_hash(path):
    """The ``manifest_hash`` embedded in a JSON artifact, or ''."""
    data = read_json(path)
    return data.get('manifest_hash', '') if isinstance(data, dict) else ''


DATA_DIR = Path(__file__).resolve().parent / 'data'


def load_reference_pool():
    """The published 23-setting pool, ranked by fitness."""
    return load_file(SettingsPoolSerializer, DATA_DIR / 'reference_pool.json')


def load_reference_tree():
    """
    The published rule tree. Only the two documented paths carry real
    counts; the other leaves are placeholders that keep the tree complete.
    """
    return load_file(TreeSerializer, DATA_DIR / 'reference_tree.json')
