"""Scenario configuration, simulation drivers, metrics and trace I/O."""
from .config import AlgorithmConfig, DisutilityRule, ScenarioConfig, load_config, save_config
from .metrics import compute_metrics
from .simulation import (
    ConvergenceReport,
    ScenarioInstance,
    SimulationError,
    build_instance,
    empirical_rate,
    run_closed_loop,
    run_offline,
)
from .trace import TRACE_COLUMNS, Trace, read_trace_csv, write_trace_csv
