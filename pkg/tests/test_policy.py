"""Traversal policies: defaults, clause merging, and direction overrides."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddsim.errors import ConflictingClause, UnknownPolicy, UnresolvedMember
from ddsim.memory import MemoryManager
from ddsim.parser import parse_scenario
from ddsim.policy import PolicyRegistry
from ddsim.typemodel import TypeRegistry

SRC = """
type inner { k: int; m2: ptr real[k]; }
type t {
  n: int;
  data: ptr real[n];
  topo: ptr int[n];
  s: inner;
  link: ptr inner;
}
"""


def build(policy_src: str = ""):
    sc = parse_scenario(SRC + policy_src)
    types = TypeRegistry()
    for stmt in sc.statements:
        if type(stmt).__name__ == "TypeDecl":
            types.register(stmt)
    types.validate()
    reg = PolicyRegistry(types)
    for stmt in sc.statements:
        if type(stmt).__name__ == "PolicyDecl":
            reg.declare(stmt)
    return types, reg


def test_default_policy_includes_every_traversable_member():
    types, reg = build()
    eff = reg.default_policy(types.get("t"))
    assert eff.included == {"data", "topo", "s", "link"}
    assert "n" not in eff.included
    assert eff.directions == {}


def test_named_policy_exclusion():
    types, reg = build("policy t::shallow { exclude(data, topo); }\n")
    eff = reg.resolve(types.get("t"), "shallow")
    assert not eff.traverses("data", True)
    assert not eff.traverses("topo", True)
    assert eff.traverses("s", True)


def test_unknown_policy_name():
    types, reg = build()
    with pytest.raises(UnknownPolicy):
        reg.resolve(types.get("t"), "nope")


def test_policy_naming_unknown_member():
    with pytest.raises(UnresolvedMember):
        build("policy t::bad { exclude(missing); }\n")


def test_explicit_include_exclude_conflict():
    with pytest.raises(ConflictingClause):
        build("policy t::bad { include(data); exclude(data); }\n")


def test_star_clauses_merge_into_named_policies():
    types, reg = build(
        "policy t::* { exclude(topo); }\n"
        "policy t::p { exclude(link); }\n")
    eff = reg.resolve(types.get("t"), "p")
    assert not eff.traverses("topo", True)
    assert not eff.traverses("link", True)
    # the star clause also applies when no policy is requested
    eff_default = reg.resolve(types.get("t"), None)
    assert not eff_default.traverses("topo", True)
    assert eff_default.traverses("link", True)


def test_named_policy_direction_wins_over_star():
    types, reg = build(
        "policy t::* { in(data); }\n"
        "policy t::p { inout(data); }\n")
    eff = reg.resolve(types.get("t"), "p")
    assert eff.directions["data"] == "inout"


def test_direction_clause_implicitly_includes():
    types, reg = build("policy inner::default { inout(m2); }\n")
    eff = reg.own_policy(types.get("inner"))
    assert eff.traverses("m2", True)
    assert eff.directions["m2"] == "inout"


def test_member_direction_override_beats_inherited():
    types, reg = build("policy inner::default { inout(m2); }\n")
    td = types.get("inner")
    act = reg.member_action(td, "m2", "in", reg.own_policy(td))
    assert act.traverse
    assert act.direction == "inout"
    assert act.origin == "member-policy-override"


def test_exclude_beats_direction():
    types, reg = build(
        "policy t::p { exclude(data); }\n")
    td = types.get("t")
    act = reg.member_action(td, "data", "in", reg.resolve(td, "p"))
    assert not act.traverse


MEMBERS = ["data", "topo", "s", "link"]


@given(inc=st.sets(st.sampled_from(MEMBERS)),
       exc=st.sets(st.sampled_from(MEMBERS)))
def test_conflict_iff_intersection(inc, exc):
    """Declaring include(I) and exclude(E) conflicts exactly when I∩E≠∅."""
    lines = []
    if inc:
        lines.append(f"policy t::p {{ include({', '.join(sorted(inc))});")
    else:
        lines.append("policy t::p {")
    if exc:
        lines.append(f"exclude({', '.join(sorted(exc))});")
    lines.append("}")
    src = " ".join(lines) + "\n"
    if inc & exc:
        with pytest.raises(ConflictingClause):
            build(src)
    else:
        types, reg = build(src)
        eff = reg.resolve(types.get("t"), "p")
        for m in MEMBERS:
            assert eff.traverses(m, True) == (m not in exc)
