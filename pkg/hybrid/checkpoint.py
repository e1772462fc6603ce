"""
Binary checkpoint container.

Layout, integers little-endian u32 apart from the i64 seed:

    b"QUNL" | version | tag length | tag (utf-8) | init seed (i64, -1 if unknown) |
    tensor count |
    per tensor: name length | name | rank | dims... | float64 payload (<f8)
"""
import struct

import numpy as np

from diffcore.tensor import LayerParams
from qunlearn.exceptions import ConfigError, DimensionError, FormatError
from .arch import ArchSpec
from .model import HybridModel

MAGIC = b'QUNL'
VERSION = 2
_U32 = struct.Struct('<I')
_I64 = struct.Struct('<q')
NO_SEED = -1


def encode(model: HybridModel) -> bytes:
    tag = model.spec.tag.encode('utf-8')
    seed = NO_SEED if model.init_seed is None else model.init_seed
    chunks = [MAGIC, _U32.pack(VERSION), _U32.pack(len(tag)), tag, _I64.pack(seed),
              _U32.pack(len(model.params))]
    for name in model.params:
        value = model.params[name]
        encoded = name.encode('utf-8')
        chunks += [_U32.pack(len(encoded)), encoded, _U32.pack(value.ndim)]
        chunks += [_U32.pack(d) for d in value.shape]
        chunks.append(value.astype('<f8').tobytes())
    return b''.join(chunks)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.blob):
            raise FormatError(f"checkpoint truncated while reading {what}", offset=self.offset)
        chunk = self.blob[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def i64(self, what: str) -> int:
        return _I64.unpack(self.take(8, what))[0]


def decode(blob: bytes) -> HybridModel:
    """
    Rebuild a model from checkpoint bytes.

    Raises:
        FormatError: bad magic, unsupported version, truncation, trailing
            bytes, or tensors that do not fit the embedded spec tag
    """
    reader = _Reader(blob)
    if reader.take(4, 'magic') != MAGIC:
        raise FormatError('not a qunlearn checkpoint (bad magic)', offset=0)
    version = reader.u32('version')
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    tag_offset = reader.offset
    try:
        tag = reader.take(reader.u32('tag length'), 'spec tag').decode('utf-8')
        spec = ArchSpec.from_tag(tag)
    except (UnicodeDecodeError, ConfigError) as e:
        raise FormatError(f"invalid spec tag: {str(e)}", offset=tag_offset)
    seed_offset = reader.offset
    init_seed = reader.i64('init seed')
    if init_seed < NO_SEED:
        raise FormatError(f"invalid init seed {init_seed}", offset=seed_offset)

    params = LayerParams()
    for _ in range(reader.u32('tensor count')):
        name = reader.take(reader.u32('name length'), 'tensor name').decode('utf-8', errors='replace')
        rank = reader.u32(f'rank of {name}')
        shape = tuple(reader.u32(f'dims of {name}') for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64))
        payload = reader.take(8 * count, f'payload of {name}')
        params[name] = np.frombuffer(payload, dtype='<f8').reshape(shape)
    if reader.offset != len(blob):
        raise FormatError(f"{len(blob) - reader.offset} trailing bytes after last tensor", offset=reader.offset)
    try:
        return HybridModel(spec, params, init_seed=None if init_seed == NO_SEED else init_seed)
    except DimensionError as e:
        raise FormatError(f"tensors do not match spec: {str(e)}", offset=tag_offset)
