"""Run reports and delimited-output emission.

A run produces one `MetricsReport`; `emit_metrics` writes it as a set of
CSV files plus a JSON summary so results can be diffed, plotted, or fed to
other tools. Empty runs still produce files with headers.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import IoFailure

CONTACTS_CSV = "contacts.csv"
UPLOADS_CSV = "uploads.csv"
SERVER_CSV = "server.csv"
TIMING_CSV = "timing.csv"
SUMMARY_JSON = "summary.json"


@dataclass(frozen=True)
class DailyRow:
    day: int
    true_contacts: int
    detected_contacts: int
    false_contacts: int
    new_patients: int
    upload_records: int
    upload_bytes: int
    server_records: int
    download_records: int
    fine_sessions: int
    warnings: int


@dataclass
class MetricsReport:
    strategy: str                          # "filtered" or "upload-all"
    config: dict
    rows: list[DailyRow] = field(default_factory=list)
    timing: Optional[dict] = None
    log_lines: list[str] = field(default_factory=list)

    @property
    def totals(self) -> dict:
        keys = ("true_contacts", "detected_contacts", "false_contacts",
                "new_patients", "upload_records", "upload_bytes",
                "download_records", "fine_sessions", "warnings")
        out = {k: sum(getattr(r, k) for r in self.rows) for k in keys}
        out["days"] = len(self.rows)
        return out


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def emit_metrics(report: MetricsReport, out_dir) -> list[Path]:
    """Write contacts/uploads/server/timing CSVs and summary.json into
    `out_dir`; returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from exc

    paths = []
    rows = report.rows
    specs = [
        (CONTACTS_CSV,
         ["day", "true_contacts", "detected_contacts", "false_contacts",
          "new_patients", "warnings"],
         [[r.day, r.true_contacts, r.detected_contacts, r.false_contacts,
           r.new_patients, r.warnings] for r in rows]),
        (UPLOADS_CSV,
         ["day", "upload_records", "upload_bytes"],
         [[r.day, r.upload_records, r.upload_bytes] for r in rows]),
        (SERVER_CSV,
         ["day", "server_records", "download_records", "fine_sessions"],
         [[r.day, r.server_records, r.download_records, r.fine_sessions]
          for r in rows]),
        (TIMING_CSV,
         ["metric", "value"],
         sorted((k, v) for k, v in (report.timing or {}).items())),
    ]
    for name, header, body in specs:
        path = out / name
        _write_csv(path, header, body)
        paths.append(path)

    summary = {
        "strategy": report.strategy,
        "config": report.config,
        "totals": report.totals,
        "timing": report.timing,
    }
    path = out / SUMMARY_JSON
    try:
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    paths.append(path)
    return paths


def config_dict(config) -> dict:
    """JSON-safe echo of a run configuration."""
    out = {}
    for key, value in dataclasses.asdict(config).items():
        out[key] = list(value) if isinstance(value, tuple) else value
    return out
