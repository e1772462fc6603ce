from django.conf import settings
from rest_framework import serializers

from hybrid.arch import NUM_CLASSES
from train.serializers import TrainConfigSerializer
from unlearn.config import METHOD_IDS
from unlearn.serializers import UnlearnConfigSerializer
from .config import ExperimentConfig


class ArchSerializer(serializers.Serializer):
    layers = serializers.IntegerField(min_value=1, required=False)
    conv_channels = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=2,
                                          max_length=2, required=False)
    head_hidden = serializers.IntegerField(min_value=0, required=False)


class DataSerializer(serializers.Serializer):
    preset = serializers.ChoiceField(choices=sorted(settings.DATA_PRESETS), default='desk')
    per_class = serializers.IntegerField(min_value=1, required=False)
    test_fraction = serializers.FloatField(required=False)
    paths = serializers.DictField(child=serializers.CharField(), required=False)
    checksums = serializers.DictField(child=serializers.CharField(), required=False)

    def validate_test_fraction(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError('Test fraction must lie in (0, 1)')
        return value


class ScenarioSerializer(serializers.Serializer):
    variant = serializers.ChoiceField(choices=['subset', 'full_class'])
    fraction = serializers.FloatField(required=False)
    class_id = serializers.IntegerField(min_value=0, required=False)
    stratified = serializers.BooleanField(default=False)

    def validate(self, data):
        if data['variant'] == 'subset':
            fraction = data.get('fraction')
            if fraction is None or not 0 < fraction < 1:
                raise serializers.ValidationError({'fraction': 'Subset forgetting needs a fraction in (0, 1)'})
        elif data.get('class_id') is None:
            raise serializers.ValidationError({'class_id': 'Full-class forgetting needs a class id'})
        return data


class ExperimentConfigSerializer(serializers.Serializer):
    dataset = serializers.ChoiceField(choices=sorted(settings.ARCH_DEFAULTS))
    arch = ArchSerializer(required=False)
    data = DataSerializer(required=False)
    scenario = ScenarioSerializer()
    methods = serializers.ListField(child=serializers.CharField(), required=False)
    seeds = serializers.ListField(child=serializers.IntegerField(min_value=0), min_length=1, required=False)
    train = TrainConfigSerializer(required=False)
    unlearn = UnlearnConfigSerializer(required=False)
    overrides = serializers.DictField(child=UnlearnConfigSerializer(), required=False)
    output_dir = serializers.CharField(required=False)

    def validate_methods(self, value):
        unknown = [method for method in value if method not in METHOD_IDS]
        if unknown:
            raise serializers.ValidationError(
                f"Unknown methods {', '.join(unknown)}; valid ids: {', '.join(METHOD_IDS)}")
        if not value:
            raise serializers.ValidationError('At least one method is required')
        if len(set(value)) != len(value):
            raise serializers.ValidationError('Methods must not repeat')
        return value

    def validate_seeds(self, value):
        if len(set(value)) != len(value):
            raise serializers.ValidationError('Seeds must not repeat')
        return value

    def validate_overrides(self, value):
        unknown = [method for method in value if method not in METHOD_IDS]
        if unknown:
            raise serializers.ValidationError(f"Overrides name unknown methods: {', '.join(unknown)}")
        return value

    def validate(self, data):
        scenario = data['scenario']
        if scenario['variant'] == 'full_class' and scenario['class_id'] >= NUM_CLASSES[data['dataset']]:
            raise serializers.ValidationError(
                {'scenario': f"class_id must be below {NUM_CLASSES[data['dataset']]} for {data['dataset']}"})
        return data

    def create(self, validated_data):
        return ExperimentConfig.from_validated(validated_data)
