from rest_framework import serializers

from .config import OBJECTIVES, TrainConfig


class TrainConfigSerializer(serializers.Serializer):
    max_epochs = serializers.IntegerField(min_value=1, required=False)
    patience = serializers.IntegerField(min_value=1, required=False)
    lr = serializers.FloatField(required=False)
    batch_size = serializers.IntegerField(min_value=1, required=False)
    objective = serializers.CharField(required=False)

    def validate_lr(self, value):
        if value <= 0:
            raise serializers.ValidationError('Learning rate must be greater than 0')
        return value

    def validate_objective(self, value):
        if value not in OBJECTIVES:
            raise serializers.ValidationError(f"Objective must be one of {', '.join(OBJECTIVES)}")
        return value

    def create(self, validated_data):
        dataset = self.context.get('dataset', 'iris')
        return TrainConfig.for_dataset(dataset, **validated_data)
