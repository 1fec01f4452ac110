"""Deep-copy traversal policies: include/exclude and direction resolution.

Precedence is total and deterministic: exclude beats everything, a
direction declared by the member's own type's applicable policy beats the
direction inherited from the parent clause.  ``policy(*)`` clauses for a
type merge before named-policy clauses; later direction clauses win.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast_nodes as A
from .errors import ConflictingClause, UnknownPolicy, UnresolvedMember
from .typemodel import TRAVERSED_KINDS, TypeDef, TypeRegistry

DIRECTIONS = ("in", "out", "inout", "create", "nocreate")
STAR = "*"
DEFAULT = "default"


@dataclass
class PolicyClause:
    kind: str  # include | exclude | in | out | inout | create | nocreate
    members: list[str]


@dataclass
class Policy:
    owner_type: str
    name: str
    clauses: list[PolicyClause] = field(default_factory=list)


@dataclass
class EffectivePolicy:
    """Flattened view of a resolved policy for one type."""

    owner_type: str
    included: set[str] = field(default_factory=set)
    excluded: set[str] = field(default_factory=set)
    directions: dict[str, str] = field(default_factory=dict)

    def traverses(self, member_name: str, default_included: bool) -> bool:
        if member_name in self.excluded:
            return False
        return default_included or member_name in self.included


@dataclass
class EffectiveMemberAction:
    traverse: bool
    direction: str  # in | out | inout | create | nocreate
    origin: str  # "inherited" | "member-policy-override"


class PolicyRegistry:
    def __init__(self, types: TypeRegistry):
        self.types = types
        self.policies: dict[tuple[str, str], Policy] = {}

    def declare(self, decl: A.PolicyDecl) -> Policy:
        td = self.types.get(decl.type_name)
        pol = Policy(decl.type_name, decl.name,
                     [PolicyClause(c.kind, list(c.members)) for c in decl.clauses])
        self._validate(td, pol)
        self.policies[(decl.type_name, decl.name)] = pol
        return pol

    def _validate(self, td: TypeDef, pol: Policy) -> None:
        included: set[str] = set()
        excluded: set[str] = set()
        for clause in pol.clauses:
            for name in clause.members:
                if not td.has_member(name):
                    raise UnresolvedMember(
                        f"policy {pol.owner_type}::{pol.name} names unknown "
                        f"member {name!r}")
            if clause.kind == "include":
                included.update(clause.members)
            elif clause.kind == "exclude":
                excluded.update(clause.members)
        both = included & excluded
        if both:
            raise ConflictingClause(
                f"policy {pol.owner_type}::{pol.name} both includes and "
                f"excludes {sorted(both)}")

    # --- resolution --------------------------------------------------------

    def default_policy(self, td: TypeDef) -> EffectivePolicy:
        """Implicit policy: deep copy of every traversable member, all
        directions inherited."""
        eff = EffectivePolicy(td.name)
        for m in td.members:
            if isinstance(m.kind, TRAVERSED_KINDS):
                eff.included.add(m.name)
        return eff

    def resolve(self, td: TypeDef, requested: str | None) -> EffectivePolicy:
        requested = requested or DEFAULT
        eff = self.default_policy(td)
        clauses: list[PolicyClause] = []
        star = self.policies.get((td.name, STAR))
        if star is not None:
            clauses.extend(star.clauses)
        if requested not in (DEFAULT, STAR):
            named = self.policies.get((td.name, requested))
            if named is None:
                raise UnknownPolicy(
                    f"type {td.name!r} has no policy named {requested!r}")
            clauses.extend(named.clauses)
        elif requested == DEFAULT and (td.name, DEFAULT) in self.policies:
            clauses.extend(self.policies[(td.name, DEFAULT)].clauses)
        for clause in clauses:
            if clause.kind == "include":
                eff.included.update(clause.members)
            elif clause.kind == "exclude":
                eff.excluded.update(clause.members)
            else:
                for name in clause.members:
                    # a direction clause implicitly includes the member
                    eff.included.add(name)
                    eff.directions[name] = clause.kind
        both = eff.included & eff.excluded & {
            n for c in clauses if c.kind == "include" for n in c.members}
        if both:
            raise ConflictingClause(
                f"resolved policy for {td.name!r} both includes and "
                f"excludes {sorted(both)}")
        return eff

    def own_policy(self, td: TypeDef) -> EffectivePolicy:
        """The policy a type applies to itself when reached during a parent's
        traversal: its declared ``default`` policy merged with its ``*``
        clauses, or the implicit default."""
        return self.resolve(td, DEFAULT)

    def member_action(self, td: TypeDef, member_name: str,
                      inherited_direction: str,
                      eff: EffectivePolicy) -> EffectiveMemberAction:
        member = td.member(member_name)
        default_included = isinstance(member.kind, TRAVERSED_KINDS)
        if not eff.traverses(member_name, default_included):
            return EffectiveMemberAction(False, inherited_direction, "inherited")
        override = eff.directions.get(member_name)
        if override is not None:
            return EffectiveMemberAction(True, override, "member-policy-override")
        return EffectiveMemberAction(True, inherited_direction, "inherited")
