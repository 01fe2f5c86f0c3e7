import csv
import json
import logging
import math
import os
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class ArtifactFormat(str, Enum):
    JSONL = "jsonl"
    CSV = "csv"

    @classmethod
    def from_str(cls, value: str) -> 'ArtifactFormat':
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"format must be one of {', '.join(f.value for f in cls)}, got {value!r}")


def format_float(value: float) -> str:
    """17 significant digits; non-finite values become null"""
    if not math.isfinite(value):
        return "null"
    return f"{value:.17g}"


def render_json(value) -> str:
    """JSON text with sorted keys and every float at 17 significant digits"""
    if isinstance(value, Enum):
        value = value.value
    if value is None or isinstance(value, (bool, np.bool_)):
        return json.dumps(None if value is None else bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        return render_json([value.real, value.imag])
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        items = sorted((str(k), v) for k, v in value.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {render_json(v)}" for k, v in items) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(render_json(v) for v in value) + "]"
    return json.dumps(str(value))


def render_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value)) if math.isfinite(value) else "nan"
    return str(value)


class RecordWriter:
    """Writes one artifact: a JSON-lines report or a CSV table.

    The effective configuration goes first, as a {"config": ...} line for
    JSON lines and as a '# key=value; ...' comment for CSV.
    """

    def __init__(self, path: str, header: Optional[Dict] = None):
        self.path = path
        self.header = header or {}
        self.records: List[Dict] = []
        directory = os.path.dirname(os.path.abspath(path))
        try:
            os.makedirs(directory, exist_ok=True)
        except OSError as e:
            raise OSError(f"Cannot create output directory {directory}: {e}") from e

    def add_record(self, record: Dict):
        self.records.append(dict(record))

    def add_records(self, records: Iterable[Dict]):
        for record in records:
            self.add_record(record)

    def header_comment(self) -> str:
        parts = []
        for key, value in sorted(self.header.items()):
            if isinstance(value, (list, tuple)):
                value = ",".join(render_cell(v) for v in value)
            else:
                value = render_cell(value)
            parts.append(f"{key}={value}")
        return "# " + "; ".join(parts)

    def write_jsonl(self, path: Optional[str] = None) -> str:
        path = path or self.path
        try:
            with open(path, 'w', encoding='utf-8', newline='\n') as f:
                f.write(render_json({'config': self.header}) + "\n")
                for record in self.records:
                    f.write(render_json(record) + "\n")
        except OSError as e:
            logger.error(f"Failed to write {path}: {str(e)}")
            raise
        logger.info(f"Wrote {len(self.records)} records to {path}")
        return path

    def write_csv(self, columns: Sequence[str], path: Optional[str] = None) -> str:
        path = path or self.path
        try:
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(self.header_comment() + "\n")
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(columns)
                for record in self.records:
                    writer.writerow([render_cell(record.get(c)) for c in columns])
        except OSError as e:
            logger.error(f"Failed to write {path}: {str(e)}")
            raise
        logger.info(f"Wrote {len(self.records)} rows to {path}")
        return path


def read_jsonl(path: str) -> List[Dict]:
    """Header line first, then the records"""
    with open(path, encoding='utf-8') as f:
        return [json.loads(line) for line in f if line.strip()]


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, encoding='utf-8', newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    return list(csv.DictReader(lines))
