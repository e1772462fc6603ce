from dataclasses import dataclass, replace

from django.conf import settings

from qunlearn.exceptions import ConfigError, InvalidInputError

OBJECTIVES = ('cross_entropy',)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    patience: int = 10
    lr: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    objective: str = 'cross_entropy'

    def __post_init__(self):
        if self.max_epochs < 1:
            raise InvalidInputError(f"max_epochs must be at least 1, got {self.max_epochs}")
        if self.patience < 1:
            raise InvalidInputError(f"patience must be at least 1, got {self.patience}")
        if not self.lr > 0:
            raise InvalidInputError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise InvalidInputError(f"batch size must be positive, got {self.batch_size}")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}; expected one of {OBJECTIVES}")

    @classmethod
    def for_dataset(cls, dataset: str, **overrides) -> 'TrainConfig':
        defaults = settings.TRAIN_DEFAULTS
        base = cls(max_epochs=defaults['max_epochs'], patience=defaults['patience'], lr=defaults['lr'],
                   batch_size=defaults['batch_size'].get(dataset, 32))
        return replace(base, **overrides)

    def with_seed(self, seed: int) -> 'TrainConfig':
        return replace(self, seed=seed)
