"""Python bindings for the dualcast simulator."""

from ._dualcast import (
    ConfigError,
    DomainError,
    InvalidSpec,
    Result,
    Scenario,
    edges,
    expected_performance,
    run,
    vertex_connectivity,
    worst_case_latency,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "InvalidSpec",
    "Result",
    "Scenario",
    "edges",
    "expected_performance",
    "run",
    "vertex_connectivity",
    "worst_case_latency",
]
