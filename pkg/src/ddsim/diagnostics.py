"""Coded findings: device access checks and OMP/ACC nesting legality."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast_nodes as A
from .errors import OutOfBounds
from .memory import NULL
from .typemodel import SLOT

SEVERITY_BY_PREFIX = {"E_": "error", "W_": "warning", "I_": "info"}

OMP_KINDS = ("omp_parallel_do", "omp_simd")
ACC_KINDS = ("acc_parallel_loop", "acc_loop_vector", "acc_loop_plain")
ACC_COMPUTE_KINDS = ("acc_parallel_loop",)


def severity_of(code: str) -> str:
    return SEVERITY_BY_PREFIX.get(code[:2], "error")


@dataclass
class Diagnostic:
    code: str
    path: str
    message: str
    rule: str
    severity: str = ""

    def __post_init__(self):
        if not self.severity:
            self.severity = severity_of(self.code)

    def as_dict(self) -> dict:
        return {
            "code": self.code,
            "severity": self.severity,
            "path": self.path,
            "message": self.message,
            "rule": self.rule,
        }


@dataclass
class NestingNode:
    kind: str
    children: list["NestingNode"] = field(default_factory=list)


# --- kernel access checking ---------------------------------------------


def check_kernel_access(env, accesses, team: int = 0) -> list[Diagnostic]:
    """Walk the device copy for each access path; report partial deep
    copies, absent roots, and team-local visibility violations.  In-bounds
    translated writes mutate device bytes."""
    findings: list[Diagnostic] = []
    for mode, path, value in accesses:
        findings.extend(_check_one_access(env, mode, path, value, team))
    return findings


def _team_check(env, dev_addr: int, path: str, team: int,
                findings: list[Diagnostic]) -> None:
    space = env.mem.space_of(dev_addr)
    if space is not None and space.trait == "team_local" and \
            space.team != team:
        findings.append(Diagnostic(
            code="E_FOREIGN_TEAM", path=path,
            message=(f"gang team {team} accesses memory local to "
                     f"team {space.team} (space {space.name!r})"),
            rule="team-local-visibility"))


def _check_one_access(env, mode: str, path: A.Path, value, team: int
                      ) -> list[Diagnostic]:
    findings: list[Diagnostic] = []
    host = env.host
    reg = env.registry
    mem = env.mem
    try:
        inst = host.var(path.root)
    except Exception:
        return [Diagnostic("E_NOT_PRESENT", str(path),
                           f"unknown variable {path.root!r}",
                           "device-presence")]
    dev = env.translate(inst.address)
    if dev is None:
        return [Diagnostic("E_NOT_PRESENT", str(path),
                           f"{path.root!r} has no device copy",
                           "device-presence")]
    cur_host = inst.address
    cur_dev = dev
    td = inst.typedef
    member = None
    elem = None
    prefix = path.root
    steps = list(path.steps)
    i = 0
    while i < len(steps):
        step = steps[i]
        if isinstance(step, A.MemberStep):
            if member is not None and isinstance(member.kind, A.RecordPtrK):
                hop = _hop(env, cur_dev, cur_host, prefix, findings, team)
                if hop is None:
                    return findings
                cur_dev, cur_host = hop
                td = reg.get(member.kind.type_name)
                member = None
            if td is None:
                return findings + [Diagnostic(
                    "E_NOT_PRESENT", str(path),
                    f"{prefix} is not a record", "device-presence")]
            layout = reg.layout(td.name)
            m = td.member(step.name)
            off = layout.offsets[step.name]
            prefix += f".{step.name}"
            k = m.kind
            if isinstance(k, A.RecordK):
                cur_host += off
                cur_dev += off
                td = reg.get(k.type_name)
                member = None
            elif isinstance(k, (A.ShapedPtrK, A.AliasPtrK, A.RecordPtrK)):
                member = m
                cur_host += off
                cur_dev += off
                elem = getattr(k, "elem", None)
            else:  # scalar / inline array slot inside the record bytes
                cur_host += off
                cur_dev += off
                member = m
                elem = getattr(k, "kind", getattr(k, "elem", None))
        else:  # IndexStep
            idx = step.index
            if member is not None and isinstance(
                    member.kind, (A.ShapedPtrK, A.AliasPtrK, A.RecordPtrK)):
                hop = _hop(env, cur_dev, cur_host, prefix, findings, team)
                if hop is None:
                    return findings
                base_dev, base_host = hop
                count = _slot_count(host, member, cur_host, td)
                if idx < 0 or idx >= count:
                    raise OutOfBounds(f"{path}: index {idx} >= shape {count}")
                if isinstance(member.kind, A.RecordPtrK):
                    size = reg.layout(member.kind.type_name).total_size
                    cur_dev = base_dev + size * idx
                    cur_host = base_host + size * idx
                    td = reg.get(member.kind.type_name)
                    member = None
                else:
                    cur_dev = base_dev + SLOT * idx
                    cur_host = base_host + SLOT * idx
                    elem = member.kind.elem
                    member = None
                    td = None
                prefix += f"[{idx}]"
            elif member is not None and isinstance(member.kind, A.InlineArrayK):
                count = member.kind.shape.value
                if idx < 0 or idx >= count:
                    raise OutOfBounds(f"{path}: index {idx} >= {count}")
                cur_dev += SLOT * idx
                cur_host += SLOT * idx
                elem = member.kind.elem
                prefix += f"[{idx}]"
                member = None
                td = None
            else:
                return findings + [Diagnostic(
                    "E_NOT_PRESENT", str(path),
                    f"cannot index {prefix}", "device-presence")]
        i += 1
    # the final device address must itself be mapped
    if env.device_entry_covering(cur_dev) is None:
        findings.append(Diagnostic(
            "E_PARTIAL_DEEPCOPY", prefix,
            f"device address 0x{cur_dev:x} for {prefix} is unmapped",
            "deep-copy-completeness"))
        return findings
    _team_check(env, cur_dev, prefix, team, findings)
    if any(f.severity == "error" for f in findings):
        return findings
    if mode == "writes":
        v = value if value is not None else A.Literal(1, False)
        if elem == "real" or (v.is_real if isinstance(v, A.Literal) else False):
            mem.write_f64(cur_dev, float(v.value))
        else:
            mem.write_i64(cur_dev, int(v.value))
    else:
        mem.read(cur_dev, 8)
    return findings


def _slot_count(host, member, slot_host_addr: int, td) -> int:
    from .typemodel import Resolved
    layout = host.registry.layout(td.name)
    owner = slot_host_addr - layout.offsets[member.name]
    r = Resolved(slot_host_addr, "pointer", member=member,
                 owner_addr=owner, owner_type=td)
    return host.pointee_count(r)


def _hop(env, slot_dev: int, slot_host: int, prefix: str,
         findings: list[Diagnostic], team: int) -> tuple[int, int] | None:
    """Dereference a pointer slot through the device copy.

    Returns (device_target, host_target) or None after recording the
    finding.  The device slot value must land inside a mapped device
    range; a slot still holding a host-range value is a partial deep
    copy."""
    mem = env.mem
    dev_value = mem.read_u64(slot_dev)
    if dev_value == NULL:
        findings.append(Diagnostic(
            "E_NULL_DEREF", prefix,
            f"{prefix} is null on the device", "device-presence"))
        return None
    _team_check(env, slot_dev, prefix, team, findings)
    entry = env.device_entry_covering(dev_value)
    if entry is None:
        findings.append(Diagnostic(
            "E_PARTIAL_DEEPCOPY", prefix,
            (f"device copy of {prefix} holds 0x{dev_value:x}, which is not "
             f"a mapped device address (member not deep-copied)"),
            "deep-copy-completeness"))
        return None
    host_value = mem.read_u64(slot_host)
    return dev_value, host_value


# --- nesting legality ------------------------------------------------------


def check_nesting(tree: NestingNode) -> list[Diagnostic]:
    """Directive nesting rules.

    An OpenMP construct below an OpenACC construct (with no intervening
    ACC compute construct) is illegal; a plain ACC loop immediately under
    an OpenMP parallel loop is legal but redundant; an ACC vector loop
    under OpenMP is plain legal.
    """
    findings: list[Diagnostic] = []

    def visit(node: NestingNode, path: str, acc_above: bool) -> None:
        if node.kind in OMP_KINDS and acc_above:
            findings.append(Diagnostic(
                "E_ILLEGAL_NESTING", path,
                f"OpenMP construct {node.kind!r} nested inside an OpenACC "
                f"construct", "omp-inside-acc"))
        if node.kind == "omp_parallel_do":
            for child in node.children:
                if child.kind == "acc_loop_plain":
                    findings.append(Diagnostic(
                        "W_REDUNDANT_LOOP", f"{path}/{child.kind}",
                        "plain ACC loop immediately under an OpenMP parallel "
                        "loop adds no parallelism level", "redundant-acc-loop"))
        below = acc_above
        if node.kind in ACC_COMPUTE_KINDS:
            below = True
        elif node.kind in ACC_KINDS:
            below = True
        for child in node.children:
            visit(child, f"{path}/{child.kind}", below)

    visit(tree, tree.kind, acc_above=False)
    return findings


def nesting_from_ast(node: A.NestNodeAst) -> NestingNode:
    return NestingNode(node.kind, [nesting_from_ast(c) for c in node.children])
