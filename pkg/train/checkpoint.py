import logging
import os
import tempfile
from pathlib import Path

from hybrid import checkpoint as codec
from hybrid.model import HybridModel
from qunlearn.exceptions import ConfigError

logger = logging.getLogger(__name__)


def save_checkpoint(model: HybridModel, path) -> Path:
    """Write ``model`` atomically (temporary file in the same directory, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = codec.encode(model)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(blob)
        os.replace(tmp, path)
    except OSError as e:
        logger.error(f"Failed to write checkpoint {path}: {str(e)}")
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info(f"Saved {model.spec.tag} checkpoint to {path}")
    return path


def load_checkpoint(path) -> HybridModel:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"checkpoint not found: {path}")
    return codec.decode(path.read_bytes())
