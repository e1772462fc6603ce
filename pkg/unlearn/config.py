from dataclasses import asdict, dataclass, replace
from typing import Optional

from django.conf import settings

from qunlearn.exceptions import ConfigError, InvalidInputError

METHOD_IDS = (
    'GA',
    'Fisher',
    'NegGrad+',
    'CF-k',
    'EU-k',
    'SCRUB',
    'SCRUB+R',
    'Certified',
    'Q-MUL',
    'LCA',
    'ADV-UNIFORM',
)

KL_DIRECTIONS = ('forward', 'reversed')

# every method shares this ceiling
MAX_BUDGET = 25


def check_method(method: str) -> str:
    if method not in METHOD_IDS:
        raise ConfigError(f"unknown unlearning method {method!r}; valid ids: {', '.join(METHOD_IDS)}")
    return method


@dataclass(frozen=True)
class UnlearnConfig:
    """
    Budget and hyperparameters shared by every unlearning method.

    ``alpha = 1`` is accepted so NegGrad+ can degenerate to plain retain
    fine-tuning.
    """
    method: Optional[str] = None
    max_epochs: int = MAX_BUDGET
    patience: int = 5
    lr: float = 5e-4
    batch_size: int = 16
    alpha: float = 0.9
    k: int = 1
    eps_adv: float = 0.1
    sigma_noise: float = 0.01
    lambda_fisher: float = 1e-4
    fisher_cap: float = 1e3
    scrub_max_steps: int = 2
    ga_clip: float = 10.0
    kl_direction: str = 'forward'
    seed: int = 0

    def __post_init__(self):
        if self.method is not None:
            check_method(self.method)
        if not 0 <= self.max_epochs <= MAX_BUDGET:
            raise InvalidInputError(f"max_epochs must lie in [0, {MAX_BUDGET}], got {self.max_epochs}")
        if self.patience < 1:
            raise InvalidInputError(f"patience must be at least 1, got {self.patience}")
        if not self.lr > 0:
            raise InvalidInputError(f"learning rate must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise InvalidInputError(f"batch size must be positive, got {self.batch_size}")
        if not 0 < self.alpha <= 1:
            raise InvalidInputError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.k < 1:
            raise InvalidInputError(f"k must be at least 1, got {self.k}")
        if not self.eps_adv > 0:
            raise InvalidInputError(f"eps_adv must be positive, got {self.eps_adv}")
        if self.sigma_noise < 0:
            raise InvalidInputError(f"sigma_noise must be non-negative, got {self.sigma_noise}")
        if not self.lambda_fisher > 0 or not self.fisher_cap > 0:
            raise InvalidInputError('lambda_fisher and fisher_cap must be positive')
        if self.scrub_max_steps < 0:
            raise InvalidInputError(f"scrub_max_steps must be non-negative, got {self.scrub_max_steps}")
        if not self.ga_clip > 0:
            raise InvalidInputError(f"ga_clip must be positive, got {self.ga_clip}")
        if self.kl_direction not in KL_DIRECTIONS:
            raise ConfigError(f"kl_direction must be one of {KL_DIRECTIONS}, got {self.kl_direction!r}")

    @classmethod
    def for_dataset(cls, dataset: str, **overrides) -> 'UnlearnConfig':
        base = dict(settings.UNLEARN_DEFAULTS)
        base['batch_size'] = settings.TRAIN_DEFAULTS['batch_size'].get(dataset, 32)
        base.update(overrides)
        return cls(**base)

    def with_seed(self, seed: int) -> 'UnlearnConfig':
        return replace(self, seed=seed)

    def method_label(self, method: str) -> str:
        """Report label: CF-k and EU-k carry their k."""
        if method in ('CF-k', 'EU-k'):
            return f"{method}{self.k}"
        return method

    def as_dict(self) -> dict:
        return asdict(self)
