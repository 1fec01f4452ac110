"""Unprivatized-scalar race rule, checked against a brute-force interleaving
oracle on small loop instances."""

import itertools

from hypothesis import given
from hypothesis import strategies as st

from conftest import run_scenario
from ddsim.reductions import BodyAccess, LoopLevel, LoopSpec, detect_races


def loop(vector_extent=8, private=(), reduction=(), accesses=()):
    return LoopSpec(
        levels=[
            LoopLevel("gang", "k", 4),
            LoopLevel("vector", "i", vector_extent,
                      frozenset(private), frozenset(reduction)),
        ],
        accesses=list(accesses),
    )


def test_shared_scalar_write_is_a_race():
    spec = loop(accesses=[BodyAccess("write", "tmp"),
                          BodyAccess("write", "a", ("i", "k"))])
    findings = detect_races(spec).findings
    assert len(findings) == 1
    f = findings[0]
    assert (f.variable, f.kind, f.level) == ("tmp", "write-write", "vector")


def test_privatized_scalar_is_safe():
    spec = loop(private=("tmp",),
                accesses=[BodyAccess("write", "tmp"),
                          BodyAccess("write", "a", ("i", "k"))])
    assert detect_races(spec).findings == []


def test_disjoint_array_writes_are_safe():
    spec = loop(accesses=[BodyAccess("write", "a", ("i", "k"))])
    assert detect_races(spec).findings == []


def test_array_write_not_indexed_by_vector_var_races():
    spec = loop(accesses=[BodyAccess("write", "a", ("k",))])
    findings = detect_races(spec).findings
    assert [f.variable for f in findings] == ["a"]


def test_reduction_variable_is_safe():
    spec = loop(reduction=("acc",),
                accesses=[BodyAccess("write", "acc")])
    assert detect_races(spec).findings == []


def test_single_lane_vector_cannot_race():
    spec = loop(vector_extent=1, accesses=[BodyAccess("write", "tmp")])
    assert detect_races(spec).findings == []


def test_reads_never_race():
    spec = loop(accesses=[BodyAccess("read", "tmp"),
                          BodyAccess("read", "a", ("i",))])
    assert detect_races(spec).findings == []


def test_one_finding_per_variable():
    spec = loop(accesses=[BodyAccess("write", "tmp"),
                          BodyAccess("write", "tmp"),
                          BodyAccess("write", "u")])
    assert sorted(f.variable for f in detect_races(spec).findings) == \
        ["tmp", "u"]


def test_corpus_scenarios():
    assert [r["variable"] for r in run_scenario("race_tmp").races] == ["tmp"]
    assert run_scenario("race_private").races == []
    assert run_scenario("race_disjoint").races == []


# --- brute-force oracle ---------------------------------------------------
#
# Interpret the loop body concretely: lanes of one gang run in every
# possible order; a variable races iff two different lane orders can leave
# a different final value in some shared location.

def _final_state(order, accesses, vector_var, private, reduction):
    state = {}
    for lane in order:
        for n, acc in enumerate(accesses):
            if acc.mode != "write":
                continue
            if acc.var in private or acc.var in reduction:
                continue
            if acc.indices:
                if vector_var in acc.indices:
                    key = (acc.var, lane)
                else:
                    key = (acc.var, "shared")
            else:
                key = (acc.var, "shared")
            # each lane writes a lane-unique value
            state[key] = (lane, n)
    return state


def _oracle_races(spec: LoopSpec) -> set:
    vector = next(lv for lv in spec.levels if lv.parallelism == "vector")
    lanes = list(range(min(vector.extent, 3)))
    if len(lanes) < 2:
        return set()
    outcomes = {}
    racy = set()
    for order in itertools.permutations(lanes):
        st_ = _final_state(order, spec.accesses, vector.var,
                           vector.private, vector.reduction)
        for key, val in st_.items():
            if key in outcomes and outcomes[key] != val:
                racy.add(key[0])
            outcomes.setdefault(key, val)
    return racy


_access = st.builds(
    BodyAccess,
    st.sampled_from(["read", "write"]),
    st.sampled_from(["tmp", "u", "a"]),
    st.sampled_from([(), ("i",), ("k",), ("i", "k")]),
)


@given(accesses=st.lists(_access, max_size=5),
       private=st.sets(st.sampled_from(["tmp", "u", "a"])),
       extent=st.integers(min_value=1, max_value=4))
def test_detector_matches_interleaving_oracle(accesses, private, extent):
    spec = loop(vector_extent=extent, private=private, accesses=accesses)
    detected = {f.variable for f in detect_races(spec).findings}
    assert detected == _oracle_races(spec)
