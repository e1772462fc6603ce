from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from django.conf import settings

from qunlearn.exceptions import ConfigError, FormatError
from qsim.circuit import CircuitLayout

INPUT_SHAPES = {
    'iris': (4,),
    'mnist': (1, 28, 28),
    'fashion': (1, 28, 28),
}

NUM_CLASSES = {'iris': 3, 'mnist': 10, 'fashion': 10}

# output side first
GROUP_ORDER = ('head', 'vqc', 'proj', 'extractor')


@dataclass(frozen=True)
class TensorSlot:
    shape: Tuple[int, ...]
    kind: str  # 'glorot', 'zeros' or 'rotation'
    fan_in: int = 0
    fan_out: int = 0


@dataclass(frozen=True)
class ArchSpec:
    dataset: str
    qubits: int
    layers: int
    conv_channels: Tuple[int, ...] = field(default=())
    head_hidden: int = 0

    def __post_init__(self):
        if self.dataset not in INPUT_SHAPES:
            raise ConfigError(f"unknown dataset tag {self.dataset!r}; expected one of {sorted(INPUT_SHAPES)}")
        expected_qubits = settings.ARCH_DEFAULTS[self.dataset]['qubits']
        if self.qubits != expected_qubits:
            raise ConfigError(f"{self.dataset} uses a {expected_qubits}-qubit circuit, got {self.qubits}")
        if self.layers < 1:
            raise ConfigError(f"VQC needs at least one layer, got {self.layers}")
        if self.is_image and len(self.conv_channels) != 2:
            raise ConfigError(f"{self.dataset} needs two conv widths, got {self.conv_channels}")
        if not self.is_image and self.conv_channels:
            raise ConfigError('iris has no convolutional extractor')
        if any(c < 1 for c in self.conv_channels) or self.head_hidden < 0:
            raise ConfigError('layer widths must be positive')

    @classmethod
    def for_dataset(cls, dataset: str, layers: Optional[int] = None,
                    conv_channels: Optional[Tuple[int, ...]] = None,
                    head_hidden: Optional[int] = None) -> 'ArchSpec':
        """Spec with project defaults, optionally overriding L and widths."""
        if dataset not in settings.ARCH_DEFAULTS:
            raise ConfigError(f"unknown dataset tag {dataset!r}; expected one of {sorted(settings.ARCH_DEFAULTS)}")
        defaults = settings.ARCH_DEFAULTS[dataset]
        return cls(
            dataset=dataset,
            qubits=defaults['qubits'],
            layers=defaults['layers'] if layers is None else int(layers),
            conv_channels=tuple(defaults['conv_channels'] if conv_channels is None else conv_channels),
            head_hidden=defaults['head_hidden'] if head_hidden is None else int(head_hidden),
        )

    @property
    def is_image(self) -> bool:
        return self.dataset != 'iris'

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return INPUT_SHAPES[self.dataset]

    @property
    def num_classes(self) -> int:
        return NUM_CLASSES[self.dataset]

    @property
    def layout(self) -> CircuitLayout:
        return CircuitLayout(qubits=self.qubits, layers=self.layers)

    @property
    def flat_features(self) -> int:
        if not self.is_image:
            return self.input_shape[0]
        return self.conv_channels[-1] * 7 * 7

    @property
    def tag(self) -> str:
        conv = ','.join(str(c) for c in self.conv_channels)
        return f"{self.dataset};layers={self.layers};conv={conv};hidden={self.head_hidden}"

    @classmethod
    def from_tag(cls, tag: str) -> 'ArchSpec':
        try:
            dataset, *pairs = tag.split(';')
            fields = dict(pair.split('=', 1) for pair in pairs)
            conv = tuple(int(c) for c in fields['conv'].split(',') if c)
            return cls.for_dataset(dataset, layers=int(fields['layers']),
                                   conv_channels=conv, head_hidden=int(fields['hidden']))
        except (KeyError, ValueError) as e:
            raise FormatError(f"malformed spec tag {tag!r}: {str(e)}")

    def tensor_slots(self) -> Dict[str, TensorSlot]:
        slots = {}
        if self.is_image:
            c_in = self.input_shape[0]
            for i, c_out in enumerate(self.conv_channels, start=1):
                slots[f'extractor.conv{i}.kernel'] = TensorSlot((c_out, c_in, 3, 3), 'glorot', c_in * 9, c_out * 9)
                slots[f'extractor.conv{i}.bias'] = TensorSlot((c_out,), 'zeros')
                c_in = c_out
        slots['proj.weight'] = TensorSlot((self.flat_features, self.qubits), 'glorot', self.flat_features, self.qubits)
        slots['proj.bias'] = TensorSlot((self.qubits,), 'zeros')
        slots['vqc.theta'] = TensorSlot((self.layout.n_params,), 'rotation')
        if self.head_hidden:
            h = self.head_hidden
            slots['head.fc1.weight'] = TensorSlot((self.qubits, h), 'glorot', self.qubits, h)
            slots['head.fc1.bias'] = TensorSlot((h,), 'zeros')
            slots['head.fc2.weight'] = TensorSlot((h, self.num_classes), 'glorot', h, self.num_classes)
            slots['head.fc2.bias'] = TensorSlot((self.num_classes,), 'zeros')
        else:
            slots['head.fc.weight'] = TensorSlot((self.qubits, self.num_classes), 'glorot',
                                                 self.qubits, self.num_classes)
            slots['head.fc.bias'] = TensorSlot((self.num_classes,), 'zeros')
        return slots

    def groups(self) -> List[str]:
        present = {name.split('.', 1)[0] for name in self.tensor_slots()}
        return [group for group in GROUP_ORDER if group in present]
