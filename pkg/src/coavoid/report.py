"""Figure rendering for emitted metrics.

Reads the delimited output of a simulation (or attack) and renders PNG
figures next to it. Import cost is deferred: matplotlib loads only when a
render function actually runs, and always with the file-only Agg backend.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import IoFailure


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _read_rows(path: Path) -> list[dict]:
    if not path.exists():
        return []
    try:
        with path.open(newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _ints(rows: list[dict], key: str) -> list[int]:
    return [int(row[key]) for row in rows]


def _save(fig, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, dpi=120, bbox_inches="tight")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    finally:
        _plt().close(fig)
    return path


def render_run_figures(metrics_dir, out_dir=None) -> list[Path]:
    """Render contact, upload, and server figures for one metrics
    directory. If a sibling `baseline` directory exists (the layout the
    `sim` command writes), its upload volumes are overlaid."""
    metrics = Path(metrics_dir)
    out = Path(out_dir) if out_dir is not None else metrics / "figures"
    plt = _plt()
    written: list[Path] = []

    filtered_dir = metrics / "filtered" if (metrics / "filtered").is_dir() else metrics
    baseline_dir = metrics / "baseline"
    contacts = _read_rows(filtered_dir / "contacts.csv")
    uploads = _read_rows(filtered_dir / "uploads.csv")
    server = _read_rows(filtered_dir / "server.csv")
    base_uploads = _read_rows(baseline_dir / "uploads.csv")

    if contacts:
        days = _ints(contacts, "day")
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(days, _ints(contacts, "true_contacts"), marker="o",
                label="ground-truth contacts")
        ax.plot(days, _ints(contacts, "detected_contacts"), marker="x",
                linestyle="--", label="detected contacts")
        ax.bar(days, _ints(contacts, "false_contacts"), color="firebrick",
               alpha=0.6, label="false contacts")
        ax.set_xlabel("day index")
        ax.set_ylabel("contacts")
        ax.set_title("Detection vs ground truth")
        ax.legend()
        written.append(_save(fig, out / "contacts.png"))

    if uploads:
        days = _ints(uploads, "day")
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(days, _ints(uploads, "upload_bytes"), marker="o",
                label="filtered uploads")
        if base_uploads:
            ax.plot(_ints(base_uploads, "day"),
                    _ints(base_uploads, "upload_bytes"), marker="s",
                    linestyle=":", label="upload-all baseline")
            ax.set_yscale("symlog")
        ax.set_xlabel("day index")
        ax.set_ylabel("upload bytes")
        ax.set_title("Upload volume per day")
        ax.legend()
        written.append(_save(fig, out / "uploads.png"))

    if server:
        days = _ints(server, "day")
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(days, _ints(server, "server_records"), marker="o",
                label="records on server")
        ax.plot(days, _ints(server, "download_records"), marker="x",
                linestyle="--", label="new records downloaded")
        ax.plot(days, _ints(server, "fine_sessions"), marker="^",
                linestyle=":", label="fine sessions")
        ax.set_xlabel("day index")
        ax.set_ylabel("count")
        ax.set_title("Server-side volumes")
        ax.legend()
        written.append(_save(fig, out / "server.png"))

    return written


def render_attack_figure(report_path, out_dir=None) -> list[Path]:
    """One bar figure summarising an attack run's classification counts."""
    path = Path(report_path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    out = Path(out_dir) if out_dir is not None else path.parent / "figures"
    plt = _plt()
    labels = ["true", "detected", "false", "coarse hits",
              "wormhole suspects", "replay suspects", "fine outside",
              "fine rejections"]
    values = [data.get(k, 0) for k in
              ("true_contacts", "detected_contacts", "false_contacts",
               "coarse_hits", "wormhole_suspects", "replay_suspects",
               "fine_outside", "fine_rejections")]
    fig, ax = plt.subplots(figsize=(7, 4))
    bars = ax.bar(labels, values, color="steelblue")
    ax.bar_label(bars)
    ax.set_ylabel("count")
    ax.set_title(f"Attack outcome: {data.get('kind', 'unknown')}")
    ax.tick_params(axis="x", rotation=30)
    return [_save(fig, out / "attack.png")]
