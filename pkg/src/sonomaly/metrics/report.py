"""Metrics report rows and their CSV / JSON renderings."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

CSV_COLUMNS = [
    "method",
    "snr_db",
    "sample_roc",
    "sample_f1",
    "spect_f1",
    "spect_pro",
    "spect_roc",
    "temp_f1",
    "temp_roc",
    "ff_v1_mean",
    "ff_v1_std",
    "ff_v2_mean",
    "ff_v2_std",
]


@dataclass
class ReportRow:
    method: str
    snr_db: float
    sample_roc: float = math.nan
    sample_f1: float = math.nan
    spect_f1: float = math.nan
    spect_pro: float = math.nan
    spect_roc: float = math.nan
    temp_f1: float = math.nan
    temp_roc: float = math.nan
    ff_v1_mean: float = math.nan
    ff_v1_std: float = math.nan
    ff_v2_mean: float = math.nan
    ff_v2_std: float = math.nan


@dataclass
class MetricsReport:
    rows: list[ReportRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            d = asdict(row)
            writer.writerow(
                [str(d[c]) if c in ("method", "snr_db") else _fmt(d[c]) for c in CSV_COLUMNS]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "metadata": self.metadata,
            "rows": [{k: _json_safe(v) for k, v in asdict(r).items()} for r in self.rows],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: str | Path, stem: str = "report", formats=("csv", "json")) -> dict:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = {}
        if "csv" in formats:
            path = out_dir / f"{stem}.csv"
            path.write_text(self.to_csv())
            written["csv"] = str(path)
        if "json" in formats:
            path = out_dir / f"{stem}.json"
            path.write_text(self.to_json())
            written["json"] = str(path)
        return written

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        payload = json.loads(text)
        rows = [
            ReportRow(**{k: (math.nan if v is None else v) for k, v in r.items()})
            for r in payload.get("rows", [])
        ]
        return cls(rows=rows, metadata=payload.get("metadata", {}))


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return f"{v:.6f}"
    return str(v)


def _json_safe(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v
