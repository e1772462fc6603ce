from rest_framework import serializers

from .config import KL_DIRECTIONS, MAX_BUDGET, METHOD_IDS, UnlearnConfig


class UnlearnConfigSerializer(serializers.Serializer):
    method = serializers.CharField(required=False)
    max_epochs = serializers.IntegerField(min_value=0, max_value=MAX_BUDGET, required=False)
    patience = serializers.IntegerField(min_value=1, required=False)
    lr = serializers.FloatField(required=False)
    batch_size = serializers.IntegerField(min_value=1, required=False)
    alpha = serializers.FloatField(required=False)
    k = serializers.IntegerField(min_value=1, required=False)
    eps_adv = serializers.FloatField(required=False)
    sigma_noise = serializers.FloatField(min_value=0.0, required=False)
    lambda_fisher = serializers.FloatField(required=False)
    fisher_cap = serializers.FloatField(required=False)
    scrub_max_steps = serializers.IntegerField(min_value=0, required=False)
    ga_clip = serializers.FloatField(required=False)
    kl_direction = serializers.CharField(required=False)

    def validate_method(self, value):
        if value not in METHOD_IDS:
            raise serializers.ValidationError(f"Method must be one of {', '.join(METHOD_IDS)}")
        return value

    def validate_lr(self, value):
        if value <= 0:
            raise serializers.ValidationError('Learning rate must be greater than 0')
        return value

    def validate_alpha(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError('Alpha must lie in (0, 1]')
        return value

    def validate_eps_adv(self, value):
        if value <= 0:
            raise serializers.ValidationError('eps_adv must be greater than 0')
        return value

    def validate_kl_direction(self, value):
        if value not in KL_DIRECTIONS:
            raise serializers.ValidationError(f"kl_direction must be one of {', '.join(KL_DIRECTIONS)}")
        return value

    def validate(self, data):
        for field in ('lambda_fisher', 'fisher_cap', 'ga_clip'):
            if field in data and data[field] <= 0:
                raise serializers.ValidationError({field: f"{field} must be greater than 0"})
        return data

    def create(self, validated_data):
        dataset = self.context.get('dataset', 'iris')
        return UnlearnConfig.for_dataset(dataset, **validated_data)
