"""AST node definitions for the scenario language, plus a canonical printer.

Spans never take part in structural equality (``compare=False``) so that
pretty-print/reparse round trips compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    length: int = 1


_NOSPAN = Span(1, 1, 1)


def _span_field():
    return field(default=_NOSPAN, compare=False)


# --- shape expressions -------------------------------------------------

@dataclass
class IntLit:
    value: int
    span: Span = _span_field()


@dataclass
class MemberRef:
    name: str
    span: Span = _span_field()


@dataclass
class BinOp:
    op: str  # one of + - * /
    left: "ShapeExpr"
    right: "ShapeExpr"
    span: Span = _span_field()


@dataclass
class Paren:
    inner: "ShapeExpr"
    span: Span = _span_field()


ShapeExpr = Union[IntLit, MemberRef, BinOp, Paren]


def shape_to_source(expr: ShapeExpr) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, MemberRef):
        return expr.name
    if isinstance(expr, Paren):
        return f"({shape_to_source(expr.inner)})"
    return f"{shape_to_source(expr.left)}{expr.op}{shape_to_source(expr.right)}"


# --- paths and literals -------------------------------------------------

@dataclass
class MemberStep:
    name: str


@dataclass
class IndexStep:
    index: int


PathStep = Union[MemberStep, IndexStep]


@dataclass
class Path:
    root: str
    steps: list[PathStep] = field(default_factory=list)
    span: Span = _span_field()

    def __str__(self) -> str:
        out = self.root
        for s in self.steps:
            out += f".{s.name}" if isinstance(s, MemberStep) else f"[{s.index}]"
        return out


@dataclass
class Literal:
    value: Union[int, float]
    is_real: bool
    span: Span = _span_field()

    def __str__(self) -> str:
        if self.is_real:
            return repr(float(self.value))
        return str(self.value)


@dataclass
class AddrExpr:
    """Pointer-valued right-hand side: ``path`` optionally offset in bytes."""

    base: Path
    offset: int = 0
    span: Span = _span_field()

    def __str__(self) -> str:
        if self.offset == 0:
            return str(self.base)
        sign = "+" if self.offset >= 0 else "-"
        return f"{self.base} {sign} {abs(self.offset)}"


# --- type declarations --------------------------------------------------

@dataclass
class ScalarK:
    kind: str  # int | real


@dataclass
class InlineArrayK:
    elem: str
    shape: ShapeExpr


@dataclass
class ShapedPtrK:
    elem: str
    shape: ShapeExpr


@dataclass
class AliasPtrK:
    elem: str
    sibling: str


@dataclass
class RecordK:
    type_name: str


@dataclass
class RecordPtrK:
    type_name: str


MemberKindAst = Union[ScalarK, InlineArrayK, ShapedPtrK, AliasPtrK, RecordK, RecordPtrK]


@dataclass
class MemberDecl:
    name: str
    kind: MemberKindAst
    span: Span = _span_field()


@dataclass
class TypeDecl:
    name: str
    members: list[MemberDecl]
    span: Span = _span_field()


@dataclass
class ClauseAst:
    kind: str  # include | exclude | in | out | inout | create | nocreate
    members: list[str]
    span: Span = _span_field()


@dataclass
class PolicyDecl:
    type_name: str
    name: str  # identifier, "default", or "*"
    clauses: list[ClauseAst]
    span: Span = _span_field()


# --- other statements ---------------------------------------------------

@dataclass
class SpaceDecl:
    name: str
    trait: str
    capacity: int
    team: int | None = None
    span: Span = _span_field()


@dataclass
class VarDecl:
    name: str
    type_name: str
    space: str | None = None
    span: Span = _span_field()


@dataclass
class Assign:
    target: Path
    value: Union[Literal, AddrExpr]
    span: Span = _span_field()


@dataclass
class AllocStmt:
    path: Path
    span: Span = _span_field()


@dataclass
class DevAlloc:
    name: str
    space: str
    size: int
    span: Span = _span_field()


@dataclass
class EnterData:
    motion: str  # copyin | copy | create | nocreate
    path: Path
    policy: str | None = None
    span: Span = _span_field()


@dataclass
class ExitData:
    motion: str  # copyout | delete | release
    path: Path
    span: Span = _span_field()


@dataclass
class UpdateCmd:
    direction: str  # host | device
    path: Path
    span: Span = _span_field()


@dataclass
class AttachCmd:
    path: Path
    span: Span = _span_field()


@dataclass
class DetachCmd:
    path: Path
    span: Span = _span_field()


@dataclass
class MapExternal:
    path: Path
    target: Union[int, str]  # literal device address or devalloc handle name
    span: Span = _span_field()


@dataclass
class KernelAccess:
    mode: str  # reads | writes
    path: Path
    value: Literal | None = None
    span: Span = _span_field()


@dataclass
class KernelBlock:
    accesses: list[KernelAccess]
    team: int = 0
    span: Span = _span_field()


@dataclass
class ReduceCommand:
    op: str  # sum | product | max | min
    gangs: int
    vlen: int
    deterministic: bool
    dim: int | None  # None => scalar reduction
    values: list  # flat list of Literal, or list of list of Literal
    span: Span = _span_field()


@dataclass
class NestNodeAst:
    kind: str
    children: list["NestNodeAst"] = field(default_factory=list)
    span: Span = _span_field()


@dataclass
class NestCheckCmd:
    root: NestNodeAst
    span: Span = _span_field()


@dataclass
class LoopLevelAst:
    parallelism: str  # gang | vector | seq
    var: str
    extent: int
    private: list[str] = field(default_factory=list)
    reduction: list[str] = field(default_factory=list)
    span: Span = _span_field()


@dataclass
class LoopAccessAst:
    mode: str  # reads | writes
    var: str
    indices: list[str] = field(default_factory=list)
    span: Span = _span_field()


@dataclass
class LoopCommand:
    levels: list[LoopLevelAst]
    accesses: list[LoopAccessAst]
    span: Span = _span_field()


@dataclass
class AssertPresent:
    path: Path
    span: Span = _span_field()


@dataclass
class AssertAbsent:
    path: Path
    span: Span = _span_field()


@dataclass
class AssertValue:
    path: Path
    value: Literal
    span: Span = _span_field()


Statement = Union[
    TypeDecl, PolicyDecl, SpaceDecl, VarDecl, Assign, AllocStmt, DevAlloc,
    EnterData, ExitData, UpdateCmd, AttachCmd, DetachCmd, MapExternal,
    KernelBlock, ReduceCommand, NestCheckCmd, LoopCommand,
    AssertPresent, AssertAbsent, AssertValue,
]


@dataclass
class Scenario:
    statements: list[Statement]
    span: Span = _span_field()


# --- canonical printer --------------------------------------------------

def _mtype_to_source(kind: MemberKindAst) -> str:
    if isinstance(kind, ScalarK):
        return kind.kind
    if isinstance(kind, InlineArrayK):
        return f"{kind.elem}[{shape_to_source(kind.shape)}]"
    if isinstance(kind, ShapedPtrK):
        return f"ptr {kind.elem}[{shape_to_source(kind.shape)}]"
    if isinstance(kind, AliasPtrK):
        return f"ptr {kind.elem} @ {kind.sibling}"
    if isinstance(kind, RecordK):
        return kind.type_name
    return f"ptr {kind.type_name}"


def _nest_to_source(node: NestNodeAst) -> str:
    if not node.children:
        return node.kind
    inner = " ".join(_nest_to_source(c) for c in node.children)
    return f"{node.kind} {{ {inner} }}"


def stmt_to_source(stmt: Statement) -> str:
    """Render one statement in canonical scenario syntax."""
    if isinstance(stmt, TypeDecl):
        body = " ".join(f"{m.name}: {_mtype_to_source(m.kind)};" for m in stmt.members)
        return f"type {stmt.name} {{ {body} }}"
    if isinstance(stmt, PolicyDecl):
        body = " ".join(f"{c.kind}({', '.join(c.members)});" for c in stmt.clauses)
        return f"policy {stmt.type_name}::{stmt.name} {{ {body} }}"
    if isinstance(stmt, SpaceDecl):
        trait = stmt.trait if stmt.team is None else f"{stmt.trait}({stmt.team})"
        return f"space {stmt.name}: {trait} capacity {stmt.capacity};"
    if isinstance(stmt, VarDecl):
        tail = f" in {stmt.space}" if stmt.space else ""
        return f"var {stmt.name}: {stmt.type_name}{tail};"
    if isinstance(stmt, Assign):
        return f"{stmt.target} = {stmt.value};"
    if isinstance(stmt, AllocStmt):
        return f"alloc {stmt.path};"
    if isinstance(stmt, DevAlloc):
        return f"devalloc {stmt.name} = alloc({stmt.space}, {stmt.size});"
    if isinstance(stmt, EnterData):
        tail = f" policy({stmt.policy})" if stmt.policy else ""
        return f"enter_data {stmt.motion}({stmt.path}){tail};"
    if isinstance(stmt, ExitData):
        return f"exit_data {stmt.motion}({stmt.path});"
    if isinstance(stmt, UpdateCmd):
        return f"update {stmt.direction}({stmt.path});"
    if isinstance(stmt, AttachCmd):
        return f"attach({stmt.path});"
    if isinstance(stmt, DetachCmd):
        return f"detach({stmt.path});"
    if isinstance(stmt, MapExternal):
        return f"map_external({stmt.path}, {stmt.target});"
    if isinstance(stmt, KernelBlock):
        body = " ".join(
            f"{a.mode}({a.path});" if a.value is None else f"{a.mode}({a.path}, {a.value});"
            for a in stmt.accesses
        )
        team = f" team {stmt.team}" if stmt.team else ""
        return f"kernel{team} {{ {body} }}"
    if isinstance(stmt, ReduceCommand):
        parts = [stmt.op, str(stmt.gangs), str(stmt.vlen)]
        spec = ""
        if stmt.deterministic:
            spec += "det "
        if stmt.dim is not None:
            spec += f"dim {stmt.dim} "
            rows = ", ".join("[" + ", ".join(str(v) for v in row) + "]" for row in stmt.values)
            spec += f"[{rows}]"
        else:
            spec += "[" + ", ".join(str(v) for v in stmt.values) + "]"
        return f"reduce({', '.join(parts)}, {spec});"
    if isinstance(stmt, NestCheckCmd):
        return f"nest {_nest_to_source(stmt.root)};"
    if isinstance(stmt, LoopCommand):
        lines = []
        for lv in stmt.levels:
            s = f"{lv.parallelism}({lv.var}, {lv.extent})"
            if lv.private:
                s += f" private({', '.join(lv.private)})"
            if lv.reduction:
                s += f" reduction({', '.join(lv.reduction)})"
            lines.append(s + ";")
        body = " ".join(
            f"{a.mode}({a.var}" + (f"[{', '.join(a.indices)}]" if a.indices else "") + ");"
            for a in stmt.accesses
        )
        return "loop { " + " ".join(lines) + f" body {{ {body} }} }};"
    if isinstance(stmt, AssertPresent):
        return f"assert_present({stmt.path});"
    if isinstance(stmt, AssertAbsent):
        return f"assert_absent({stmt.path});"
    if isinstance(stmt, AssertValue):
        return f"assert_value({stmt.path}, {stmt.value});"
    raise TypeError(f"unknown statement {stmt!r}")


def to_source(scenario: Scenario) -> str:
    """Pretty-print a scenario; the output reparses to an equal AST."""
    return "\n".join(stmt_to_source(s) for s in scenario.statements) + "\n"
