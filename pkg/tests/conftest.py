"""Shared helpers: corpus loading and host-memory round-trip harness."""

from __future__ import annotations

import pathlib

import pytest

from ddsim import ast_nodes as A
from ddsim import run_source
from ddsim.parser import parse_scenario
from ddsim.simulator import RunReport, Simulator

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"

# Corpus scenarios whose data regions are balanced and whose kernels never
# write: host memory must come back bit-identical after the run.
ROUND_TRIP_SCENARIOS = [
    "alias_offset",
    "alias_oob",
    "bottom_up_attach",
    "clean",
    "counters",
    "geometry_default",
    "geometry_exclude",
    "geometry_fixed",
    "map_external",
    "nocreate",
    "team_local",
    "unified_present",
]

EXPECTED_RUN_EXIT = {
    "alias_offset": 0,
    "alias_oob": 0,
    "bottom_up_attach": 0,
    "clean": 0,
    "counters": 0,
    "direction_override": 0,
    "geometry_default": 0,
    "geometry_exclude": 1,
    "geometry_fixed": 0,
    "map_external": 0,
    "nest_illegal": 1,
    "nest_legal": 0,
    "nest_redundant": 0,
    "nocreate": 0,
    "race_disjoint": 0,
    "race_private": 0,
    "race_tmp": 0,
    "reduction_det": 0,
    "team_local": 1,
    "unified_present": 0,
    "update": 0,
}


def scenario_names() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.dds"))


def load_scenario(name: str) -> str:
    return (SCENARIO_DIR / f"{name}.dds").read_text()


def run_scenario(name: str, mode: str = "run", **kw) -> RunReport:
    return run_source(load_scenario(name), name=name, mode=mode, **kw)


def host_snapshot(sim: Simulator) -> dict[int, bytes]:
    """Bytes of every live host allocation, keyed by base address."""
    return {a.base: bytes(a.data)
            for a in sim.mem.host.allocations if a.live}


def run_with_memory_probe(source: str, name: str = "scenario"):
    """Execute a scenario, snapshotting live host memory just before the
    first enter_data and again after the last statement."""
    scenario = parse_scenario(source)
    sim = Simulator(scenario, name=name)
    sim.validate()
    before = None
    for stmt in scenario.statements:
        if before is None and isinstance(stmt, A.EnterData):
            before = host_snapshot(sim)
        sim.step(stmt)
    after = host_snapshot(sim)
    if before is None:
        before = after
    return before, after, sim.report()


@pytest.fixture
def corpus_dir() -> pathlib.Path:
    return SCENARIO_DIR
