"""ddsim: a simulator for directive-based accelerator data management.

Scenarios declare types with shaped pointer members, deep-copy policies,
simulated memory spaces, and mapping commands; the simulator executes
them against simulated host and device memory and reports present-table
state, attach/detach behaviour, reduction results, and diagnostics.
"""

from .parser import parse_scenario, parse_shape_expr
from .simulator import RunReport, Simulator, run_source

__version__ = "0.1.0"

__all__ = [
    "RunReport",
    "Simulator",
    "parse_scenario",
    "parse_shape_expr",
    "run_source",
    "__version__",
]
