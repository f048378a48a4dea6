"""CSV and JSON writers that stamp every file with its provenance."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__

META_COLUMNS = ("scenario_hash", "seed", "photons", "version")


def provenance(scenario_hash: str, seed: int, photons: int) -> dict:
    return {"scenario_hash": scenario_hash, "seed": int(seed), "photons": int(photons), "version": __version__}


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], meta: Mapping) -> Path:
    """RFC 4180 table; the provenance fields are repeated on every row."""
    path = Path(path)
    tail = [meta[k] for k in META_COLUMNS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(list(columns) + list(META_COLUMNS))
        for row in rows:
            w.writerow([_cell(v) for v in row] + [_cell(v) for v in tail])
    return path


def _plain(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _plain(obj.tolist())
    return obj


def write_json(path, payload: Mapping, meta: Mapping) -> Path:
    path = Path(path)
    doc = {"provenance": dict(meta), **_plain(dict(payload))}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    return path


def read_csv(path):
    """Header and rows as strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
