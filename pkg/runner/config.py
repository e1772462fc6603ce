"""Experiment configuration and its stable hash."""
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

from django.conf import settings

from data.sets import ForgetSpec
from hybrid.arch import ArchSpec
from qunlearn.exceptions import InvalidInputError
from train.config import TrainConfig
from unlearn.config import METHOD_IDS, UnlearnConfig, check_method


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    dataset: str
    scenario: ForgetSpec
    methods: Tuple[str, ...] = METHOD_IDS
    seeds: Tuple[int, ...] = field(default_factory=lambda: tuple(settings.DEFAULT_SEEDS))
    train: Optional[TrainConfig] = None
    unlearn: Optional[UnlearnConfig] = None
    arch: Dict = field(default_factory=dict)
    preset: str = 'desk'
    per_class: Optional[int] = None
    test_fraction: Optional[float] = None
    paths: Dict[str, str] = field(default_factory=dict)
    checksums: Dict[str, str] = field(default_factory=dict)
    overrides: Dict[str, Dict] = field(default_factory=dict)
    output_dir: Optional[Path] = None

    def __post_init__(self):
        for method in (*self.methods, *self.overrides):
            check_method(method)
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise InvalidInputError(f"an experiment needs at least one seed and no repeats, got {self.seeds}")
        if self.train is None:
            object.__setattr__(self, 'train', TrainConfig.for_dataset(self.dataset))
        if self.unlearn is None:
            object.__setattr__(self, 'unlearn', UnlearnConfig.for_dataset(self.dataset))
        if self.output_dir is None:
            object.__setattr__(self, 'output_dir', Path(settings.OUTPUT_DIR))
        # ArchSpec construction validates the architecture overrides
        self.arch_spec()
        for method in self.overrides:
            self.unlearn_config(method, self.seeds[0])

    @classmethod
    def from_validated(cls, data: dict) -> 'ExperimentConfig':
        dataset = data['dataset']
        scenario = data['scenario']
        if scenario['variant'] == 'subset':
            forget = ForgetSpec.subset(scenario['fraction'], stratified=scenario.get('stratified', False))
        else:
            forget = ForgetSpec.full_class(scenario['class_id'])
        arch = dict(data.get('arch') or {})
        if 'conv_channels' in arch:
            arch['conv_channels'] = tuple(arch['conv_channels'])
        source = dict(data.get('data') or {})
        return cls(
            dataset=dataset,
            scenario=forget,
            methods=tuple(data.get('methods') or METHOD_IDS),
            seeds=tuple(data.get('seeds') or settings.DEFAULT_SEEDS),
            train=TrainConfig.for_dataset(dataset, **dict(data.get('train') or {})),
            unlearn=UnlearnConfig.for_dataset(dataset, **dict(data.get('unlearn') or {})),
            arch=arch,
            preset=source.get('preset', 'desk'),
            per_class=source.get('per_class'),
            test_fraction=source.get('test_fraction'),
            paths=dict(source.get('paths') or {}),
            checksums=dict(source.get('checksums') or {}),
            overrides={method: dict(values) for method, values in (data.get('overrides') or {}).items()},
            output_dir=Path(data['output_dir']) if data.get('output_dir') else None,
        )

    def arch_spec(self) -> ArchSpec:
        return ArchSpec.for_dataset(self.dataset, **self.arch)

    def samples_per_class(self) -> Optional[int]:
        if self.per_class is not None:
            return self.per_class
        return settings.DATA_PRESETS[self.preset][self.dataset]

    def resolved_test_fraction(self) -> float:
        return settings.TEST_FRACTION if self.test_fraction is None else self.test_fraction

    def forget_spec(self, seed: int) -> ForgetSpec:
        return replace(self.scenario, seed=seed)

    def train_config(self, seed: int) -> TrainConfig:
        return self.train.with_seed(seed)

    def method_overrides(self, method: str) -> dict:
        """The method's defaults from settings, then this experiment's overrides for it."""
        return {**settings.UNLEARN_METHOD_DEFAULTS.get(method, {}), **self.overrides.get(method, {})}

    def unlearn_config(self, method: str, seed: int) -> UnlearnConfig:
        """Shared defaults, then the method's overrides, then the run seed."""
        return replace(self.unlearn, **self.method_overrides(method), seed=seed)

    def with_seeds(self, seeds) -> 'ExperimentConfig':
        return replace(self, seeds=tuple(seeds))

    def with_output_dir(self, output_dir) -> 'ExperimentConfig':
        return replace(self, output_dir=Path(output_dir))

    def canonical(self) -> dict:
        """Every setting that affects results, defaults resolved; ``output_dir`` is left out."""
        spec = self.arch_spec()
        return {
            'dataset': self.dataset,
            'arch': {'qubits': spec.qubits, 'layers': spec.layers, 'conv_channels': list(spec.conv_channels),
                     'head_hidden': spec.head_hidden},
            'data': {'per_class': self.samples_per_class(), 'test_fraction': self.resolved_test_fraction(),
                     'paths': self.paths, 'checksums': self.checksums},
            'scenario': {key: value for key, value in asdict(self.scenario).items() if key != 'seed'},
            'methods': list(self.methods),
            'seeds': list(self.seeds),
            'train': {key: value for key, value in asdict(self.train).items() if key != 'seed'},
            'unlearn': {key: value for key, value in asdict(self.unlearn).items() if key not in ('seed', 'method')},
            'overrides': {method: self.method_overrides(method)
                          for method in sorted({*self.methods, *self.overrides}) if self.method_overrides(method)},
        }

    @property
    def config_hash(self) -> str:
        payload = json.dumps(self.canonical(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()
