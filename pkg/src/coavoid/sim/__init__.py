"""Deterministic epidemic simulation and evaluation harness."""

from .attacks import AttackReport, AttackScenario, run_attack
from .bench import BenchConfig, BenchReport, run_bench
from .metrics import DailyRow, MetricsReport, emit_metrics
from .run import run, run_baseline, upload_ratio
from .world import SimConfig, TruthEntry, World, det_rng

__all__ = [
    "AttackReport", "AttackScenario", "BenchConfig", "BenchReport",
    "DailyRow", "MetricsReport", "SimConfig", "TruthEntry", "World",
    "det_rng", "emit_metrics", "run", "run_attack", "run_baseline",
    "run_bench", "upload_ratio",
]
