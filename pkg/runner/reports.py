"""CSV and JSON reports for a finished experiment."""
import json
import logging
from pathlib import Path
from typing import Iterable, List

import numpy as np
import pandas as pd
from django.core.serializers.json import DjangoJSONEncoder
from django.utils import timezone

import qunlearn
from metrics.report import REPORT_COLUMNS
from .service import RunRecord

logger = logging.getLogger(__name__)

CSV_COLUMNS = ('method', 'seed', *REPORT_COLUMNS, 'wall_s')
FORMATS = ('csv', 'json')

UQI_NOTE = ('uqi = forgetting alignment with the retrain oracle (clamped to [-1, 1]) minus the relative '
            'retain-accuracy drop; it is a reconstruction, not a published formula')


def report_frame(record: RunRecord) -> pd.DataFrame:
    """Per-seed rows followed by one mean row per method (seed = "mean")."""
    rows = []
    for cell in record.cells:
        row = {'method': cell.label, 'seed': cell.seed, 'wall_s': cell.wall_seconds if cell.ok else np.nan}
        for column in REPORT_COLUMNS:
            value = getattr(cell.report, column) if cell.ok else None
            row[column] = np.nan if value is None else value
        rows.append(row)
    frame = pd.DataFrame(rows, columns=list(CSV_COLUMNS))
    numeric = [*REPORT_COLUMNS, 'wall_s']
    frame[numeric] = frame[numeric].astype('float64')

    means = []
    for label in dict.fromkeys(frame['method']):
        per_seed = frame[frame['method'] == label]
        mean = {'method': label, 'seed': 'mean'}
        for column in numeric:
            values = per_seed[column].dropna()
            mean[column] = float(values.mean()) if len(values) else np.nan
        means.append(mean)
    frame = pd.concat([frame.astype({'seed': object}), pd.DataFrame(means, columns=list(CSV_COLUMNS))],
                      ignore_index=True)
    return frame


def _cell_json(cell) -> dict:
    payload = {
        'method': cell.method,
        'label': cell.label,
        'seed': cell.seed,
        'error': cell.error,
        'wall_s': cell.wall_seconds,
        'epochs': cell.epochs,
        'selected_epoch': cell.selected_epoch,
        'hyperparameters': cell.hyperparameters,
        'trace': cell.trace,
    }
    payload['metrics'] = cell.report.as_dict() if cell.ok else None
    return payload


def emit_report(record: RunRecord, out_dir, formats: Iterable[str] = FORMATS) -> List[Path]:
    """
    Write ``results.csv`` and/or ``results.json`` under ``out_dir``.

    Missing values (MIA on full-class runs, failed cells) become empty CSV
    cells and JSON nulls.

    Raises:
        ValueError: unknown format
        OSError: the directory cannot be written
    """
    formats = list(formats)
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if 'csv' in formats:
            path = out_dir / 'results.csv'
            report_frame(record).to_csv(path, index=False, float_format='%.17g', na_rep='')
            written.append(path)
        if 'json' in formats:
            path = out_dir / 'results.json'
            document = {
                'metadata': {
                    'config_hash': record.config_hash,
                    'version': qunlearn.__version__,
                    'timestamp': timezone.now().isoformat(),
                    'wall_s': record.wall_seconds,
                    'uqi': UQI_NOTE,
                },
                'config': record.config,
                'cells': [_cell_json(cell) for cell in record.cells],
                'base_models': record.base_reports,
                'oracles': record.oracle_reports,
            }
            path.write_text(json.dumps(document, cls=DjangoJSONEncoder, indent=2))
            written.append(path)
    except OSError as e:
        logger.error(f"Failed to write reports to {out_dir}: {str(e)}")
        raise
    logger.info(f"Wrote {', '.join(p.name for p in written)} to {out_dir}")
    return written
