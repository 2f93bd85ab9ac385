"""Command line interface.

`sim` runs the filtered-upload protocol and the upload-all baseline on the
same world and writes both metric sets plus a combined summary; `attack`
stages a wormhole or replay scenario; `bench` times verification on a
synthesized city-scale dataset; `serve` runs the edge server; `report`
renders figures for output that already exists.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click

from .edgeserver import DEFAULT_PORT, EdgeServer
from .errors import CoavoidError
from .keysched import RETENTION_DAYS
from .report import render_attack_figure, render_run_figures
from .sim.attacks import KINDS, AttackScenario, run_attack
from .sim.bench import BenchConfig, run_bench
from .sim.metrics import emit_metrics
from .sim.run import run, run_baseline, upload_ratio
from .sim.world import SimConfig

_SCENARIO_ALIASES = {"wormhole": "wormhole-cross", **{k: k for k in KINDS}}


def _load_config(path: str | None, **overrides) -> SimConfig:
    """Config file keys mirror SimConfig fields; explicit flags win."""
    data: dict = {}
    if path:
        data = json.loads(Path(path).read_text())
    data.update({k: v for k, v in overrides.items() if v is not None})
    field_names = {f.name for f in dataclasses.fields(SimConfig)}
    scenario_keys = {f.name for f in dataclasses.fields(AttackScenario)}
    unknown = set(data) - field_names - scenario_keys
    if unknown:
        raise click.ClickException(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key not in field_names:
            continue
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    return SimConfig(**kwargs)


def _scenario_from(config_path: str | None, kind: str,
                   **overrides) -> AttackScenario:
    data: dict = {}
    if config_path:
        raw = json.loads(Path(config_path).read_text())
        field_names = {f.name for f in dataclasses.fields(AttackScenario)}
        data = {k: v for k, v in raw.items() if k in field_names}
    data.update({k: v for k, v in overrides.items() if v is not None})
    data["kind"] = kind
    if isinstance(data.get("intervals"), list):
        data["intervals"] = tuple(data["intervals"])
    return AttackScenario(**data)


@click.group()
def main() -> None:
    """Privacy-preserving contact verification toolkit."""


@main.command("sim")
@click.option("--users", type=int, default=None, help="Agent count.")
@click.option("--places", type=int, default=None, help="Visitable sites.")
@click.option("--days", type=int, default=None, help="Simulated days.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--infection-rate", type=float, default=None,
              help="Suspected-to-sick conversion probability.")
@click.option("--resolution", type=int, default=None,
              help="Location cell resolution (0-15).")
@click.option("--suite", type=click.Choice(["ed25519", "pairing"]),
              default=None, help="Announcement signature suite.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON file of configuration overrides.")
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Output directory for CSV metrics and the summary.")
@click.option("--figures/--no-figures", default=False,
              help="Render PNG figures alongside the CSV output.")
@click.option("--timing/--no-timing", default=False,
              help="Record wall-clock timing (non-deterministic fields).")
def sim_command(users, places, days, seed, infection_rate, resolution, suite,
                config_path, out_dir, figures, timing) -> None:
    """Run the protocol and the upload-all baseline on one world."""
    try:
        config = _load_config(config_path, users=users, places=places,
                              days=days, seed=seed,
                              infection_rate=infection_rate,
                              resolution=resolution, suite=suite)
        report = run(config, measure_timing=timing)
        baseline = run_baseline(config)
        out = Path(out_dir)
        emit_metrics(report, out / "filtered")
        emit_metrics(baseline, out / "baseline")
        ratio_records = upload_ratio(report, baseline)
        bytes_f = report.totals["upload_bytes"]
        bytes_b = baseline.totals["upload_bytes"]
        summary = {
            "config": report.config,
            "filtered_totals": report.totals,
            "baseline_totals": baseline.totals,
            "upload_record_ratio": round(ratio_records, 6),
            "upload_byte_ratio": round(bytes_f / bytes_b, 6) if bytes_b else 0.0,
        }
        (out / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n")
        if figures:
            render_run_figures(out)
    except CoavoidError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"patients {report.totals['new_patients']}  "
               f"true {report.totals['true_contacts']}  "
               f"detected {report.totals['detected_contacts']}  "
               f"false {report.totals['false_contacts']}")
    click.echo(f"upload bytes {bytes_f} vs baseline {bytes_b}  "
               f"ratio {summary['upload_byte_ratio']:.4f}")
    click.echo(f"metrics written to {out_dir}")


@main.command("attack")
@click.option("--scenario", "scenario_name",
              type=click.Choice(sorted(_SCENARIO_ALIASES)), required=True,
              help="Attack to stage (wormhole is the cross-cell variant).")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON overrides for world and scenario.")
@click.option("--victims", type=int, default=None, help="Victim count.")
@click.option("--delay-intervals", type=int, default=None,
              help="Replay delay in 15-minute intervals (>= 2).")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Output directory for the report and log.")
@click.option("--figures/--no-figures", default=False,
              help="Render a PNG summary figure.")
def attack_command(scenario_name, config_path, victims, delay_intervals,
                   seed, out_dir, figures) -> None:
    """Stage a relay or replay attack and report what the defences did."""
    kind = _SCENARIO_ALIASES[scenario_name]
    try:
        config = _load_config(config_path, seed=seed)
        if kind == "replay" and delay_intervals is None:
            has_file_delay = bool(config_path) and "delay_intervals" in \
                json.loads(Path(config_path).read_text())
            if not has_file_delay:
                delay_intervals = 2
        scenario = _scenario_from(config_path, kind, victims=victims,
                                  delay_intervals=delay_intervals)
        report = run_attack(config, scenario)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / "attack_report.json"
        report_path.write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        (out / "verification.log").write_text(
            "\n".join(report.log_lines) + ("\n" if report.log_lines else ""))
        if figures:
            render_attack_figure(report_path)
    except CoavoidError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"{report.kind}: detected {report.detected_contacts} "
               f"(false {report.false_contacts}), wormhole suspects "
               f"{report.wormhole_suspects}, replay suspects "
               f"{report.replay_suspects}")
    click.echo(f"report written to {report_path}")


@main.command("bench")
@click.option("--users", type=int, default=10000, show_default=True,
              help="Population size the datasets model.")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--repeats", type=int, default=3, show_default=True,
              help="Timing repetitions; the best run counts.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Optional directory for bench.json.")
def bench_command(users, seed, repeats, out_dir) -> None:
    """Time coarse+fine verification against upload-all scanning."""
    try:
        report = run_bench(BenchConfig(users=users, seed=seed,
                                       repeats=repeats))
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "bench.json").write_text(
                json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    except CoavoidError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"records: filtered {report.filtered_records} vs upload-all "
               f"{report.baseline_records}")
    click.echo(f"verify seconds: {report.filtered_seconds:.4f} vs "
               f"{report.baseline_seconds:.4f}  ratio {report.ratio:.4f}")


@main.command("serve")
@click.option("--port", type=int, default=DEFAULT_PORT, show_default=True)
@click.option("--epoch-seconds", type=float, default=3600.0,
              show_default=True, help="Publish (re-shuffle) period.")
@click.option("--retention-days", type=int, default=RETENTION_DAYS,
              show_default=True)
def serve_command(port, epoch_seconds, retention_days) -> None:
    """Run the record store and relay over TCP until interrupted."""
    server = EdgeServer(port=port, epoch_seconds=epoch_seconds,
                        retention_days=retention_days)
    server.start()
    host, bound_port = server.address
    click.echo(f"serving on {host}:{bound_port} "
               f"(epoch every {epoch_seconds:g}s)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        click.echo("stopped")


@main.command("report")
@click.option("--metrics", "metrics_dir", type=click.Path(exists=True),
              required=True, help="Directory a sim or attack run wrote.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Figure directory (default: <metrics>/figures).")
def report_command(metrics_dir, out_dir) -> None:
    """Render PNG figures for existing delimited output."""
    metrics = Path(metrics_dir)
    try:
        if (metrics / "attack_report.json").exists():
            written = render_attack_figure(metrics / "attack_report.json",
                                           out_dir)
        else:
            written = render_run_figures(metrics, out_dir)
    except CoavoidError as exc:
        raise click.ClickException(str(exc)) from exc
    if not written:
        raise click.ClickException(f"no renderable CSV data in {metrics_dir}")
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
