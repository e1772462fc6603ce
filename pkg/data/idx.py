"""
IDX decoding for the MNIST-family files.

    offset  type     value
    0000    u32 BE   0x00000803 (images) / 0x00000801 (labels)
    0004    u32 BE   item count
    0008    u32 BE   rows        (images only)
    0012    u32 BE   columns     (images only)
    ....    u8       payload
"""
import gzip
import hashlib
import logging
import struct
import zlib
from pathlib import Path
from typing import Optional

import numpy as np

from qunlearn.exceptions import ConfigError, FormatError

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def parse_idx(blob: bytes, raw: bool = False) -> np.ndarray:
    """
    Decode an uncompressed IDX payload.

    Args:
        blob: File contents
        raw: Return images as uint8 without scaling

    Returns:
        np.ndarray: [N, 1, rows, cols] images scaled to [0, 1] (uint8 when
        ``raw``), or a length-N int64 label array

    Raises:
        FormatError: bad magic, truncated header or payload, trailing bytes
    """
    if len(blob) < 4:
        raise FormatError('IDX header truncated', offset=len(blob))
    magic = struct.unpack_from('>I', blob, 0)[0]
    if magic not in (IMAGES_MAGIC, LABELS_MAGIC):
        raise FormatError(f"unsupported IDX magic 0x{magic:08x}", offset=0)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(blob) < header:
        raise FormatError('IDX dimension header truncated', offset=len(blob))
    dims = struct.unpack_from(f'>{ndim}I', blob, 4)
    expected = int(np.prod(dims, dtype=np.int64))
    available = len(blob) - header
    if available < expected:
        raise FormatError(f"IDX payload truncated: expected {expected} bytes, found {available}",
                          offset=len(blob))
    if available > expected:
        raise FormatError(f"{available - expected} trailing bytes after IDX payload", offset=header + expected)

    payload = np.frombuffer(blob, dtype=np.uint8, count=expected, offset=header)
    if magic == LABELS_MAGIC:
        return payload.astype(np.int64)
    images = payload.reshape(dims[0], 1, dims[1], dims[2])
    if raw:
        return images.copy()
    return images / 255.0


def read_verified(path, sha256: Optional[str] = None) -> bytes:
    """
    Bytes of a dataset file, checked against an optional SHA-256.

    Raises:
        ConfigError: the file is missing or its digest differs
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"dataset file not found: {path}")
    stored = path.read_bytes()
    if sha256 is not None:
        digest = hashlib.sha256(stored).hexdigest()
        if digest != sha256.lower():
            raise ConfigError(f"checksum mismatch for {path}: expected {sha256}, got {digest}")
    return stored


def read_idx(path, sha256: Optional[str] = None, raw: bool = False) -> np.ndarray:
    """Read a raw or gzip IDX file, verifying an optional SHA-256 of the file bytes."""
    path = Path(path)
    stored = read_verified(path, sha256)
    blob = stored
    if stored[:2] == b'\x1f\x8b':
        try:
            blob = gzip.decompress(stored)
        except (OSError, EOFError, zlib.error) as e:
            raise FormatError(f"corrupt gzip stream in {path}: {str(e)}", offset=0)
    logger.info(f"Read {path.name} ({len(blob)} bytes)")
    return parse_idx(blob, raw=raw)
