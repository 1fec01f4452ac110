"""Type registry, layouts, host instances and member-path access.

Layout model: scalar and pointer members occupy one 8-byte slot each,
inline arrays occupy count*8 bytes, embedded records occupy the nested
type's size.  Members are laid out in declaration order, so offsets are
a pure function of the declaration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast_nodes as A
from .errors import (DivisionByZero, DuplicateVariable, NegativeShape,
                     NonConstantInlineShape, NullDeref, OutOfBounds,
                     RecursiveType, UnknownPath, UnresolvedMember,
                     UnresolvedType, ValidationError)
from .memory import NULL, MemoryManager, MemorySpace

SLOT = 8

POINTER_KINDS = (A.ShapedPtrK, A.AliasPtrK, A.RecordPtrK)
TRAVERSED_KINDS = (A.ShapedPtrK, A.AliasPtrK, A.RecordK, A.RecordPtrK)


@dataclass
class Member:
    name: str
    kind: A.MemberKindAst


@dataclass
class TypeDef:
    name: str
    members: list[Member]

    def member(self, name: str) -> Member:
        for m in self.members:
            if m.name == name:
                return m
        raise UnresolvedMember(f"type {self.name!r} has no member {name!r}")

    def has_member(self, name: str) -> bool:
        return any(m.name == name for m in self.members)


@dataclass
class Layout:
    total_size: int
    offsets: dict[str, int]
    sizes: dict[str, int]


class TypeRegistry:
    def __init__(self):
        self.types: dict[str, TypeDef] = {}
        self._layouts: dict[str, Layout] = {}

    def register(self, decl: A.TypeDecl) -> TypeDef:
        td = TypeDef(decl.name, [Member(m.name, m.kind) for m in decl.members])
        self.types[decl.name] = td
        return td

    def get(self, name: str) -> TypeDef:
        if name not in self.types:
            raise UnresolvedType(f"unknown type {name!r}")
        return self.types[name]

    # --- validation -----------------------------------------------------

    def validate(self) -> None:
        for td in self.types.values():
            self._validate_type(td)
        self._check_embedding_cycles()

    def _validate_type(self, td: TypeDef) -> None:
        for m in td.members:
            k = m.kind
            if isinstance(k, (A.RecordK, A.RecordPtrK)):
                self.get(k.type_name)
            elif isinstance(k, A.ShapedPtrK):
                self._check_shape_refs(td, m, k.shape)
            elif isinstance(k, A.AliasPtrK):
                if not td.has_member(k.sibling):
                    raise UnresolvedMember(
                        f"alias member {td.name}.{m.name} targets unknown "
                        f"sibling {k.sibling!r}")
                sib = td.member(k.sibling)
                if not isinstance(sib.kind, A.ShapedPtrK):
                    raise ValidationError(
                        f"alias member {td.name}.{m.name} must target a "
                        f"shaped pointer, not {type(sib.kind).__name__}")
            elif isinstance(k, A.InlineArrayK):
                if not isinstance(k.shape, A.IntLit):
                    raise NonConstantInlineShape(
                        f"inline array {td.name}.{m.name} needs a literal shape")

    def _check_shape_refs(self, td: TypeDef, m: Member, expr: A.ShapeExpr) -> None:
        if isinstance(expr, A.MemberRef):
            if not td.has_member(expr.name):
                raise UnresolvedMember(
                    f"shape of {td.name}.{m.name} references unknown "
                    f"member {expr.name!r}")
            ref = td.member(expr.name)
            if not (isinstance(ref.kind, A.ScalarK) and ref.kind.kind == "int"):
                raise ValidationError(
                    f"shape of {td.name}.{m.name} must reference integer "
                    f"scalars; {expr.name!r} is not one")
        elif isinstance(expr, A.BinOp):
            self._check_shape_refs(td, m, expr.left)
            self._check_shape_refs(td, m, expr.right)
        elif isinstance(expr, A.Paren):
            self._check_shape_refs(td, m, expr.inner)

    def _check_embedding_cycles(self) -> None:
        # records may contain themselves only behind a pointer
        state: dict[str, int] = {}

        def visit(name: str) -> None:
            if state.get(name) == 1:
                raise RecursiveType(f"type {name!r} embeds itself by value")
            if state.get(name) == 2:
                return
            state[name] = 1
            for m in self.types[name].members:
                if isinstance(m.kind, A.RecordK):
                    self.get(m.kind.type_name)
                    visit(m.kind.type_name)
            state[name] = 2

        for name in self.types:
            visit(name)

    # --- layout -----------------------------------------------------------

    def layout(self, type_name: str) -> Layout:
        if type_name in self._layouts:
            return self._layouts[type_name]
        td = self.get(type_name)
        offsets: dict[str, int] = {}
        sizes: dict[str, int] = {}
        off = 0
        for m in td.members:
            offsets[m.name] = off
            sizes[m.name] = self._member_size(m)
            off += sizes[m.name]
        lay = Layout(off, offsets, sizes)
        self._layouts[type_name] = lay
        return lay

    def _member_size(self, m: Member) -> int:
        k = m.kind
        if isinstance(k, A.ScalarK) or isinstance(k, POINTER_KINDS):
            return SLOT
        if isinstance(k, A.InlineArrayK):
            if not isinstance(k.shape, A.IntLit):
                raise NonConstantInlineShape(
                    f"inline array member {m.name!r} needs a literal shape")
            return SLOT * k.shape.value
        if isinstance(k, A.RecordK):
            return self.layout(k.type_name).total_size
        raise UnresolvedType(f"cannot size member {m.name!r}")


def compute_layout(td: TypeDef, registry: TypeRegistry) -> Layout:
    """Deterministic layout of a registered type (see module docstring)."""
    if td.name not in registry.types:
        registry.types[td.name] = td
    return registry.layout(td.name)


# --- instances -------------------------------------------------------------


@dataclass
class InstanceView:
    name: str
    typedef: TypeDef
    address: int
    space: MemorySpace


@dataclass
class Resolved:
    """Result of host path resolution.

    address is the final host address; kind is one of 'scalar', 'pointer',
    'record', 'array'.  For scalars elem says int/real; for records
    typedef is set.  pointer_hops lists (slot_host_address, member) pairs
    dereferenced along the way, used by the device-side walker.
    """

    address: int
    kind: str
    elem: str | None = None
    typedef: TypeDef | None = None
    member: Member | None = None
    owner_addr: int = 0
    owner_type: TypeDef | None = None
    length: int = 0


def eval_shape(expr: A.ShapeExpr, instance_addr: int, typedef: TypeDef,
               registry: TypeRegistry, mem: MemoryManager) -> int:
    """Element count of a shape expression against live host values."""

    def ev(e: A.ShapeExpr) -> int:
        if isinstance(e, A.IntLit):
            return e.value
        if isinstance(e, A.MemberRef):
            member = typedef.member(e.name)
            if not (isinstance(member.kind, A.ScalarK) and member.kind.kind == "int"):
                raise UnresolvedMember(
                    f"shape reference {e.name!r} is not an integer scalar")
            off = registry.layout(typedef.name).offsets[e.name]
            return mem.read_i64(instance_addr + off)
        if isinstance(e, A.Paren):
            return ev(e.inner)
        lhs, rhs = ev(e.left), ev(e.right)
        if e.op == "+":
            return lhs + rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "*":
            return lhs * rhs
        if rhs == 0:
            raise DivisionByZero(f"shape divides by zero: {A.shape_to_source(expr)}")
        # integer division truncating toward zero
        return int(lhs / rhs) if (lhs < 0) != (rhs < 0) else lhs // rhs

    count = ev(expr)
    if count < 0:
        raise NegativeShape(
            f"shape {A.shape_to_source(expr)} evaluated to {count}")
    return count


class HostState:
    """Declared variables and their live host-side storage."""

    def __init__(self, registry: TypeRegistry, mem: MemoryManager):
        self.registry = registry
        self.mem = mem
        self.variables: dict[str, InstanceView] = {}

    def instantiate(self, name: str, type_name: str,
                    space: MemorySpace | None = None) -> InstanceView:
        if name in self.variables:
            raise DuplicateVariable(f"variable {name!r} already declared")
        td = self.registry.get(type_name)
        space = space or self.mem.host
        addr = self.mem.alloc(space, self.registry.layout(type_name).total_size)
        inst = InstanceView(name, td, addr, space)
        self.variables[name] = inst
        return inst

    def var(self, name: str) -> InstanceView:
        if name not in self.variables:
            raise UnknownPath(f"unknown variable {name!r}")
        return self.variables[name]

    # --- path resolution ---------------------------------------------------

    def resolve(self, path: A.Path) -> Resolved:
        inst = self.var(path.root)
        mem = self.mem
        reg = self.registry
        cur = Resolved(inst.address, "record", typedef=inst.typedef,
                       length=reg.layout(inst.typedef.name).total_size)
        for step in path.steps:
            if isinstance(step, A.MemberStep):
                if cur.kind == "pointer" and isinstance(cur.member.kind, A.RecordPtrK):
                    # implicit dereference through a record pointer
                    target = mem.read_u64(cur.address)
                    if target == NULL:
                        raise NullDeref(f"{path}: null record pointer")
                    td = reg.get(cur.member.kind.type_name)
                    cur = Resolved(target, "record", typedef=td,
                                   length=reg.layout(td.name).total_size)
                if cur.kind != "record":
                    raise UnknownPath(f"{path}: {step.name!r} applied to non-record")
                td = cur.typedef
                member = td.member(step.name)
                off = reg.layout(td.name).offsets[member.name]
                addr = cur.address + off
                k = member.kind
                if isinstance(k, A.ScalarK):
                    cur = Resolved(addr, "scalar", elem=k.kind, member=member,
                                   owner_addr=cur.address, owner_type=td,
                                   length=SLOT)
                elif isinstance(k, A.InlineArrayK):
                    cur = Resolved(addr, "inline_array", elem=k.elem,
                                   member=member, owner_addr=cur.address,
                                   owner_type=td, length=SLOT * k.shape.value)
                elif isinstance(k, A.RecordK):
                    cur = Resolved(addr, "record", typedef=reg.get(k.type_name),
                                   member=member, owner_addr=cur.address,
                                   owner_type=td,
                                   length=reg.layout(k.type_name).total_size)
                else:
                    cur = Resolved(addr, "pointer", member=member,
                                   owner_addr=cur.address, owner_type=td,
                                   length=SLOT)
            else:  # IndexStep
                idx = step.index
                if cur.kind == "inline_array":
                    count = cur.member.kind.shape.value
                    if idx < 0 or idx >= count:
                        raise OutOfBounds(f"{path}: index {idx} >= {count}")
                    cur = Resolved(cur.address + SLOT * idx, "scalar",
                                   elem=cur.elem, member=cur.member,
                                   owner_addr=cur.owner_addr,
                                   owner_type=cur.owner_type, length=SLOT)
                elif cur.kind == "pointer":
                    k = cur.member.kind
                    base = mem.read_u64(cur.address)
                    if base == NULL:
                        raise NullDeref(f"{path}: null pointer {cur.member.name!r}")
                    count = self.pointee_count(cur)
                    if idx < 0 or idx >= count:
                        raise OutOfBounds(f"{path}: index {idx} >= shape {count}")
                    elem = k.elem if not isinstance(k, A.RecordPtrK) else None
                    if elem is None:
                        td = reg.get(k.type_name)
                        size = reg.layout(td.name).total_size
                        cur = Resolved(base + size * idx, "record", typedef=td,
                                       length=size)
                    else:
                        cur = Resolved(base + SLOT * idx, "scalar", elem=elem,
                                       member=cur.member, length=SLOT)
                else:
                    raise UnknownPath(f"{path}: cannot index a {cur.kind}")
        return cur

    def pointee_count(self, resolved: Resolved) -> int:
        """Element count behind a pointer member, per current host values."""
        k = resolved.member.kind
        if isinstance(k, A.ShapedPtrK):
            return eval_shape(k.shape, resolved.owner_addr, resolved.owner_type,
                              self.registry, self.mem)
        if isinstance(k, A.AliasPtrK):
            sib = resolved.owner_type.member(k.sibling)
            sib_res = Resolved(0, "pointer", member=sib,
                               owner_addr=resolved.owner_addr,
                               owner_type=resolved.owner_type)
            return self.pointee_count(sib_res)
        if isinstance(k, A.RecordPtrK):
            return 1
        raise UnknownPath(f"{resolved.member.name!r} is not a pointer member")

    def pointee_range(self, resolved: Resolved) -> tuple[int, int]:
        """(host_base, byte length) of the array behind a pointer member."""
        base = self.mem.read_u64(resolved.address)
        if base == NULL:
            raise NullDeref(f"null pointer {resolved.member.name!r}")
        count = self.pointee_count(resolved)
        k = resolved.member.kind
        if isinstance(k, A.RecordPtrK):
            size = self.registry.layout(k.type_name).total_size
        else:
            size = SLOT
        return base, count * size

    # --- value access -------------------------------------------------------

    def read_value(self, path: A.Path):
        r = self.resolve(path)
        if r.kind == "scalar":
            return (self.mem.read_f64(r.address) if r.elem == "real"
                    else self.mem.read_i64(r.address))
        if r.kind == "pointer":
            return self.mem.read_u64(r.address)
        raise UnknownPath(f"{path} does not name a scalar or pointer")

    def write_value(self, path: A.Path, value) -> None:
        r = self.resolve(path)
        if r.kind == "scalar":
            if r.elem == "real":
                self.mem.write_f64(r.address, float(value))
            else:
                self.mem.write_i64(r.address, int(value))
        elif r.kind == "pointer":
            self.mem.write_u64(r.address, int(value))
        else:
            raise UnknownPath(f"{path} does not name a scalar or pointer")

    def alloc_pointee(self, path: A.Path) -> int:
        """Evaluate a shaped pointer's shape, allocate the host array and
        store its address in the pointer slot.  Returns the new base."""
        r = self.resolve(path)
        if r.kind != "pointer" or not isinstance(r.member.kind, A.ShapedPtrK):
            raise UnknownPath(f"alloc target {path} is not a shaped pointer")
        count = self.pointee_count(r)
        space = self.mem.space_of(r.owner_addr) or self.mem.host
        base = self.mem.alloc(space, count * SLOT)
        self.mem.write_u64(r.address, base)
        return base
