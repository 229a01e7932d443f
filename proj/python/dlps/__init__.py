"""DRAM power-down and self-refresh simulator."""

from ._core import (
    ConfigError,
    InputError,
    ProtocolViolation,
    compare,
    itt_bounds,
    report_columns,
    run,
    selfrefresh_power,
    standby_power,
    sweep,
    tpde,
    trace_length,
)

__all__ = [
    "ConfigError",
    "InputError",
    "ProtocolViolation",
    "compare",
    "itt_bounds",
    "report_columns",
    "run",
    "selfrefresh_power",
    "standby_power",
    "sweep",
    "tpde",
    "trace_length",
]
