"""Scenario execution: validation pass, statement interpreter, run report."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import ast_nodes as A
from .diagnostics import (Diagnostic, check_kernel_access, check_nesting,
                          nesting_from_ast)
from .errors import (DdsimError, NotPresent, ScenarioParseError,
                     SimulationError, UnknownPath, ValidationError)
from .memory import NULL, MemoryManager
from .parser import parse_scenario
from .policy import PolicyRegistry
from .reductions import (BodyAccess, ExecConfig, LoopLevel, LoopSpec,
                         ReductionSpec, detect_races, run_array_reduction,
                         run_scalar_reduction)
from .runtime import DeviceDataEnv
from .typemodel import HostState, TypeRegistry


@dataclass
class AssertionOutcome:
    kind: str
    path: str
    expected: object
    actual: object
    passed: bool

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "path": self.path,
            "expected": self.expected,
            "actual": self.actual,
            "passed": self.passed,
        }


@dataclass
class RunReport:
    scenario: str
    mode: str
    diagnostics: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    reductions: list[dict] = field(default_factory=list)
    races: list[dict] = field(default_factory=list)
    assertions: list[dict] = field(default_factory=list)
    present_table: list[dict] = field(default_factory=list)
    spaces: list[dict] = field(default_factory=list)
    exit_code: int = 0

    def to_dict(self) -> dict:
        doc = {
            "scenario": self.scenario,
            "mode": self.mode,
            "exit_code": self.exit_code,
            "diagnostics": self.diagnostics,
            "assertions": self.assertions,
            "reductions": self.reductions,
            "races": self.races,
        }
        if self.mode == "run":
            doc["events"] = self.events
            doc["present_table"] = self.present_table
            doc["spaces"] = self.spaces
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self, trace: bool = False) -> str:
        lines = [f"scenario: {self.scenario}  mode: {self.mode}  "
                 f"exit: {self.exit_code}"]
        if self.diagnostics:
            lines.append("diagnostics:")
            for d in self.diagnostics:
                lines.append(f"  [{d['severity']}] {d['code']} at {d['path']}: "
                             f"{d['message']}")
        else:
            lines.append("diagnostics: none")
        for a in self.assertions:
            status = "ok" if a["passed"] else "FAILED"
            lines.append(f"assert {a['kind']}({a['path']}) -> {status} "
                         f"(expected {a['expected']}, got {a['actual']})")
        for r in self.reductions:
            lines.append(
                f"reduce {r['op']} gangs={r['gangs']} vlen={r['vlen']} "
                f"det={r['deterministic']} -> {r['value']} "
                f"(oracle {r['oracle']}, bitwise_equal={r['bitwise_equal']})")
        if self.mode == "run":
            lines.append("present table:")
            if self.present_table:
                for row in self.present_table:
                    lines.append(
                        f"  {row['path']}: host {row['host_base']}+"
                        f"{row['length']} -> {row['device_base']} "
                        f"[{row['space']}] ref={row['ref_count']}")
            else:
                lines.append("  empty")
            lines.append("spaces:")
            for s in self.spaces:
                lines.append(f"  {s['name']} ({s['trait']}): "
                             f"{s['allocated']}/{s['capacity']} bytes")
            if trace:
                lines.append("events:")
                for ev in self.events:
                    extras = " ".join(f"{k}={v}" for k, v in ev.items()
                                      if k not in ("op", "path"))
                    lines.append(f"  {ev['op']} {ev['path']} {extras}")
        return "\n".join(lines) + "\n"


class Simulator:
    """One scenario execution context.  Strictly sequential; a fresh
    Simulator per run keeps reports deterministic."""

    def __init__(self, scenario: A.Scenario, name: str = "scenario",
                 mode: str = "run", deterministic_reductions: bool = False):
        self.scenario = scenario
        self.name = name
        self.mode = mode
        self.force_deterministic = deterministic_reductions
        self.mem = MemoryManager()
        self.types = TypeRegistry()
        self.host = HostState(self.types, self.mem)
        self.policies = PolicyRegistry(self.types)
        self.env = DeviceDataEnv(self.mem, self.host, self.policies)
        self.diagnostics: list[Diagnostic] = []
        self.reductions: list[dict] = []
        self.races: list[dict] = []
        self.assertions: list[AssertionOutcome] = []
        self.dev_handles: dict[str, int] = {}
        self._validated = False

    # --- validation ---------------------------------------------------------

    def validate(self) -> None:
        """Register and validate all type and policy declarations.
        Raises ValidationError / ScenarioParseError subclasses."""
        for stmt in self.scenario.statements:
            if isinstance(stmt, A.TypeDecl):
                self.types.register(stmt)
        self.types.validate()
        for stmt in self.scenario.statements:
            if isinstance(stmt, A.PolicyDecl):
                self.policies.declare(stmt)
        # referenced policies must resolve
        for stmt in self.scenario.statements:
            if isinstance(stmt, A.EnterData) and stmt.policy:
                var = next((s for s in self.scenario.statements
                            if isinstance(s, A.VarDecl)
                            and s.name == stmt.path.root), None)
                if var is not None and not stmt.path.steps:
                    self.policies.resolve(self.types.get(var.type_name),
                                          stmt.policy)
        self._validated = True

    # --- execution -------------------------------------------------------------

    def run(self) -> RunReport:
        if not self._validated:
            self.validate()
        for stmt in self.scenario.statements:
            self.step(stmt)
        return self.report()

    def step(self, stmt: A.Statement) -> None:
        try:
            self._execute(stmt)
        except SimulationError as exc:
            self.diagnostics.append(Diagnostic(
                code=exc.code, path=self._stmt_path(stmt),
                message=exc.message, rule="runtime"))

    def _stmt_path(self, stmt: A.Statement) -> str:
        for attr in ("path", "target"):
            if hasattr(stmt, attr):
                return str(getattr(stmt, attr))
        return type(stmt).__name__

    def _execute(self, stmt: A.Statement) -> None:
        if isinstance(stmt, (A.TypeDecl, A.PolicyDecl)):
            return  # handled during validation
        if isinstance(stmt, A.SpaceDecl):
            self.mem.create_space(stmt.name, stmt.trait, stmt.capacity,
                                  stmt.team)
            return
        if isinstance(stmt, A.VarDecl):
            space = self.mem.spaces[stmt.space] if stmt.space else None
            if stmt.space and stmt.space not in self.mem.spaces:
                raise UnknownPath(f"unknown space {stmt.space!r}")
            inst = self.host.instantiate(stmt.name, stmt.type_name, space)
            if space is not None and space.trait == "unified_shared":
                length = self.types.layout(stmt.type_name).total_size
                self.env.register_identity(inst.address, length, space,
                                           ("record", inst.typedef), stmt.name)
            return
        if isinstance(stmt, A.Assign):
            if isinstance(stmt.value, A.AddrExpr):
                base = self.host.resolve(stmt.value.base)
                if base.kind == "pointer":
                    addr = self.mem.read_u64(base.address)
                else:
                    addr = base.address
                self.host.write_value(stmt.target, addr + stmt.value.offset)
            else:
                self.host.write_value(stmt.target, stmt.value.value)
            return
        if isinstance(stmt, A.AllocStmt):
            self.host.alloc_pointee(stmt.path)
            return
        if isinstance(stmt, A.DevAlloc):
            if stmt.space not in self.mem.spaces:
                raise UnknownPath(f"unknown space {stmt.space!r}")
            self.dev_handles[stmt.name] = self.mem.alloc(stmt.space, stmt.size)
            return
        if isinstance(stmt, A.EnterData):
            self.env.enter_data(stmt.path, stmt.motion, stmt.policy)
            return
        if isinstance(stmt, A.ExitData):
            self.env.exit_data(stmt.path, stmt.motion)
            return
        if isinstance(stmt, A.UpdateCmd):
            self.env.update(stmt.path, stmt.direction)
            return
        if isinstance(stmt, A.AttachCmd):
            self.env.attach(stmt.path)
            return
        if isinstance(stmt, A.DetachCmd):
            self.env.detach(stmt.path)
            return
        if isinstance(stmt, A.MapExternal):
            if isinstance(stmt.target, str):
                if stmt.target not in self.dev_handles:
                    raise UnknownPath(f"unknown devalloc handle {stmt.target!r}")
                addr = self.dev_handles[stmt.target]
            else:
                addr = stmt.target
            self.env.map_external(stmt.path, addr)
            return
        if isinstance(stmt, A.KernelBlock):
            accesses = [(a.mode, a.path, a.value) for a in stmt.accesses]
            self.diagnostics.extend(
                check_kernel_access(self.env, accesses, stmt.team))
            return
        if isinstance(stmt, A.ReduceCommand):
            self._run_reduction(stmt)
            return
        if isinstance(stmt, A.NestCheckCmd):
            self.diagnostics.extend(
                check_nesting(nesting_from_ast(stmt.root)))
            return
        if isinstance(stmt, A.LoopCommand):
            self._run_race_check(stmt)
            return
        if isinstance(stmt, A.AssertPresent):
            self._assert_presence(stmt.path, expect_present=True)
            return
        if isinstance(stmt, A.AssertAbsent):
            self._assert_presence(stmt.path, expect_present=False)
            return
        if isinstance(stmt, A.AssertValue):
            actual = self.host.read_value(stmt.path)
            expected = stmt.value.value
            passed = (actual == expected) if not stmt.value.is_real \
                else (float(actual) == float(expected))
            self.assertions.append(AssertionOutcome(
                "value", str(stmt.path), expected, actual, passed))
            return
        raise SimulationError(f"unhandled statement {type(stmt).__name__}")

    def _assert_presence(self, path: A.Path, expect_present: bool) -> None:
        try:
            host_base, _, _ = self.env._target(path)
            present = self.env.entry_covering(host_base) is not None
        except NotPresent:
            present = False
        except SimulationError:
            present = False
        kind = "present" if expect_present else "absent"
        self.assertions.append(AssertionOutcome(
            kind, str(path), expect_present, present,
            present == expect_present))

    def _run_reduction(self, stmt: A.ReduceCommand) -> None:
        deterministic = stmt.deterministic or self.force_deterministic
        config = ExecConfig(stmt.gangs, stmt.vlen, deterministic)
        if stmt.dim is None:
            kind = "real" if any(v.is_real for v in stmt.values) else "int"
            values = [float(v.value) if kind == "real" else int(v.value)
                      for v in stmt.values]
            spec = ReductionSpec(stmt.op, kind)
            result = run_scalar_reduction(config, spec, values)
        else:
            flat = [v for row in stmt.values for v in row]
            kind = "real" if any(v.is_real for v in flat) else "int"
            matrix = [[float(v.value) if kind == "real" else int(v.value)
                       for v in row] for row in stmt.values]
            spec = ReductionSpec(stmt.op, kind, reduce_dim=stmt.dim)
            result = run_array_reduction(config, spec, matrix)
        self.reductions.append({
            "op": stmt.op,
            "gangs": stmt.gangs,
            "vlen": stmt.vlen,
            "deterministic": deterministic,
            "kind": kind,
            "value": result.value,
            "oracle": result.oracle,
            "partials": result.partials,
            "tree_value": result.tree_value,
            "bitwise_equal": result.bitwise_equal,
        })
        regrouped = (not result.bitwise_equal
                     or result.tree_value != result.oracle)
        if not deterministic and regrouped:
            self.diagnostics.append(Diagnostic(
                code="I_NONDETERMINISTIC",
                path=f"reduce({stmt.op})",
                message=(f"gang-order result {result.value!r} and tree "
                         f"combine {result.tree_value!r} differ from or "
                         f"regroup the serial value {result.oracle!r}"),
                rule="bit-reproducible-mode"))

    def _run_race_check(self, stmt: A.LoopCommand) -> None:
        levels = [LoopLevel(lv.parallelism, lv.var, lv.extent,
                            frozenset(lv.private), frozenset(lv.reduction))
                  for lv in stmt.levels]
        accesses = [BodyAccess("write" if a.mode == "writes" else "read",
                               a.var, tuple(a.indices))
                    for a in stmt.accesses]
        report = detect_races(LoopSpec(levels, accesses))
        for f in report.findings:
            self.races.append({
                "variable": f.variable,
                "kind": f.kind,
                "level": f.level,
                "explanation": f.explanation,
            })
            self.diagnostics.append(Diagnostic(
                code="W_RACE", path=f.variable,
                message=f"{f.kind} conflict at {f.level} level: "
                        f"{f.explanation}",
                rule="unprivatized-scalar-race"))

    # --- reporting ------------------------------------------------------------

    def report(self) -> RunReport:
        diags = list(self.env.diagnostics) + self.diagnostics
        if self.mode == "check":
            adjusted = []
            for d in diags:
                if d.code == "E_PARTIAL_DEEPCOPY":
                    d = Diagnostic(d.code, d.path, d.message, d.rule,
                                   severity="warning")
                adjusted.append(d)
            diags = adjusted
        report = RunReport(
            scenario=self.name,
            mode=self.mode,
            diagnostics=[d.as_dict() for d in diags],
            events=list(self.env.events),
            reductions=self.reductions,
            races=self.races,
            assertions=[a.as_dict() for a in self.assertions],
            present_table=self.env.present_table_snapshot(),
            spaces=self.mem.usage_table(),
        )
        report.exit_code = self._exit_code(diags)
        return report

    def _exit_code(self, diags: list[Diagnostic]) -> int:
        if self.mode == "check":
            return 1 if any(d.code == "E_ILLEGAL_NESTING" for d in diags) else 0
        failed = any(not a.passed for a in self.assertions)
        errors = any(d.severity == "error" for d in diags)
        return 1 if failed or errors else 0


def run_source(source: str, name: str = "scenario", mode: str = "run",
               deterministic_reductions: bool = False) -> RunReport:
    """Parse, validate, and execute scenario text.

    Parse or validation failures yield a report with exit code 2 and a
    single diagnostic rather than an exception.
    """
    try:
        scenario = parse_scenario(source)
        sim = Simulator(scenario, name=name, mode=mode,
                        deterministic_reductions=deterministic_reductions)
        sim.validate()
    except (ScenarioParseError, ValidationError) as exc:
        report = RunReport(scenario=name, mode=mode, exit_code=2)
        report.diagnostics = [Diagnostic(
            exc.code, name, str(exc), "scenario-wellformedness").as_dict()]
        return report
    return sim.run()
