"""Present-table mapping runtime: enter/exit, attach/detach, translation,
external mappings, and the host-memory round-trip property."""

import pytest

from conftest import (ROUND_TRIP_SCENARIOS, load_scenario, run_scenario,
                      run_with_memory_probe)
from ddsim.parser import parse_scenario
from ddsim.simulator import Simulator

VEC = """
type vec { n: int; data: ptr real[n]; }
var v: vec;
v.n = 4;
alloc v.data;
v.data[0] = 1.5;
"""


def sim_after(src: str) -> Simulator:
    sim = Simulator(parse_scenario(src))
    sim.validate()
    for stmt in sim.scenario.statements:
        sim.step(stmt)
    return sim


def path(text: str):
    return parse_scenario(f"{text} = 0;").statements[0].target


def slot_addr(sim: Simulator, text: str) -> int:
    return sim.host.resolve(path(text)).address


def device_slot(sim: Simulator, text: str) -> int:
    """Value currently stored in the device copy of a host pointer slot."""
    dev = sim.env.translate(slot_addr(sim, text))
    assert dev is not None
    return sim.mem.read_u64(dev)


def test_enter_maps_parent_and_children():
    sim = sim_after(VEC + "enter_data copyin(v);")
    rec = sim.env.entry_covering(sim.host.var("v").address)
    assert rec is not None and rec.ref_count == 1
    host_data = sim.mem.read_u64(slot_addr(sim, "v.data"))
    child = sim.env.entry_covering(host_data)
    assert child is not None and child.length == 32
    # device copy of the pointer slot holds the child's device base
    assert device_slot(sim, "v.data") == child.device_base


def test_translate_boundaries_are_half_open():
    sim = sim_after(VEC + "enter_data copyin(v);")
    # the data array is the highest-addressed host allocation in this run
    rec = sim.env.entry_covering(sim.mem.read_u64(slot_addr(sim, "v.data")))
    assert sim.env.translate(rec.host_base) == rec.device_base
    last = rec.host_base + rec.length - 1
    assert sim.env.translate(last) == rec.device_base + rec.length - 1
    assert sim.env.translate(rec.host_base + rec.length) is None


def test_nested_enter_increments_refcount():
    sim = sim_after(VEC + "enter_data copyin(v); enter_data copyin(v);")
    rec = sim.env.entry_covering(sim.host.var("v").address)
    assert rec.ref_count == 2
    ops = [e["op"] for e in sim.env.events if e["path"] == "v"]
    assert ops.count("alloc") == 1
    assert "present_inc" in ops


SHALLOW_VEC = VEC.replace(
    "type vec { n: int; data: ptr real[n]; }",
    "type vec { n: int; data: ptr real[n]; }\n"
    "policy vec::shallow { exclude(data); }")


def test_detach_to_zero_restores_saved_host_value():
    sim = sim_after(SHALLOW_VEC +
                    "enter_data copyin(v) policy(shallow);"
                    "enter_data copyin(v.data);"
                    "attach(v.data);"
                    "detach(v.data);")
    # counter back to zero: the device slot holds the host bits again
    assert device_slot(sim, "v.data") == sim.mem.read_u64(
        slot_addr(sim, "v.data"))


def test_attached_slot_differs_from_host_value():
    sim = sim_after(VEC + "enter_data copyin(v);")
    host_value = sim.mem.read_u64(slot_addr(sim, "v.data"))
    assert device_slot(sim, "v.data") != host_value


def test_attach_twice_detach_once_stays_translated():
    sim = sim_after(
        VEC +
        "enter_data copyin(v.data);"
        "enter_data copyin(v);"     # traversal attach (counter 1)
        "attach(v.data);"            # explicit attach (counter 2)
        "detach(v.data);")           # counter back to 1
    child = sim.env.entry_covering(sim.mem.read_u64(slot_addr(sim, "v.data")))
    assert device_slot(sim, "v.data") == child.device_base


def test_counter_sequences_balance():
    report = run_scenario("counters")
    assert report.exit_code == 0
    attaches = sum(1 for e in report.events if e["op"] == "attach")
    detaches = sum(1 for e in report.events if e["op"] == "detach")
    # every attach is eventually undone, including the re-traversal one
    assert attaches == detaches == 3
    restored = [e for e in report.events
                if e["op"] == "detach" and e.get("restored")]
    # the slot is restored exactly when a teardown takes the counter to zero
    assert len(restored) == 2


def test_nocreate_absent_is_noop():
    sim = sim_after(VEC + "enter_data nocreate(v);")
    assert sim.env.entry_covering(sim.host.var("v").address) is None
    assert any(e["op"] == "nocreate_skip" for e in sim.env.events)


def test_reentering_present_struct_retraverses():
    # first mapping skips data; a later default-policy enter attaches it
    src = (VEC.replace("type vec { n: int; data: ptr real[n]; }",
                       "type vec { n: int; data: ptr real[n]; }\n"
                       "policy vec::shallow { exclude(data); }")
           + "enter_data copyin(v) policy(shallow);"
             "enter_data copyin(v.data);"
             "enter_data copyin(v);")
    sim = sim_after(src)
    child = sim.env.entry_covering(sim.mem.read_u64(slot_addr(sim, "v.data")))
    assert device_slot(sim, "v.data") == child.device_base


def test_excluded_member_keeps_raw_host_bytes():
    src = (VEC.replace("type vec { n: int; data: ptr real[n]; }",
                       "type vec { n: int; data: ptr real[n]; }\n"
                       "policy vec::shallow { exclude(data); }")
           + "enter_data copyin(v) policy(shallow);")
    sim = sim_after(src)
    assert device_slot(sim, "v.data") == sim.mem.read_u64(
        slot_addr(sim, "v.data"))
    assert any(e["op"] == "skip_excluded" for e in sim.env.events)


def test_walker_counts_untranslated_slots():
    src = (VEC.replace("type vec { n: int; data: ptr real[n]; }",
                       "type vec { n: int; data: ptr real[n]; }\n"
                       "policy vec::shallow { exclude(data); }")
           + "enter_data copyin(v) policy(shallow);")
    sim = sim_after(src)
    missing = sim.env.untranslated_slots("v")
    assert [p for p, _ in missing] == ["v.data"]
    sim2 = sim_after(VEC + "enter_data copyin(v);")
    assert sim2.env.untranslated_slots("v") == []


def test_alias_translated_by_preserved_offset():
    sim = sim_after("""
type buf { n: int; base: ptr real[n]; view: ptr real @ base; }
var b: buf;
b.n = 8;
alloc b.base;
b.view = b.base + 24;
enter_data copyin(b);
""")
    host_base = sim.mem.read_u64(slot_addr(sim, "b.base"))
    host_view = sim.mem.read_u64(slot_addr(sim, "b.view"))
    dev_base = device_slot(sim, "b.base")
    dev_view = device_slot(sim, "b.view")
    assert dev_view - dev_base == host_view - host_base == 24
    assert not sim.env.diagnostics


def test_alias_out_of_bounds_warns_but_translates():
    report = run_scenario("alias_oob")
    assert report.exit_code == 0
    codes = [d["code"] for d in report.diagnostics]
    assert codes == ["W_ALIAS_OOB"]


def test_overlapping_mapping_rejected():
    sim = sim_after("""
type buf { n: int; base: ptr real[n]; view: ptr real @ base; }
var b: buf;
b.n = 8;
alloc b.base;
b.view = b.base + 16;
enter_data copyin(b.base);
enter_data copyin(b.view);
""")
    assert any(d.code == "E_OVERLAP"
               for d in sim.env.diagnostics + sim.diagnostics)


def test_exit_of_absent_data_is_an_error():
    report = run_scenario("clean", mode="run")
    assert report.exit_code == 0
    sim = sim_after(VEC + "exit_data release(v);")
    codes = [d.code for d in sim.env.diagnostics + sim.diagnostics]
    assert "E_NOT_PRESENT" in codes


def test_delete_unmaps_regardless_of_refcount():
    sim = sim_after(VEC + "enter_data copyin(v); enter_data copyin(v);"
                    "exit_data delete(v);")
    assert sim.env.entry_covering(sim.host.var("v").address) is None


def test_copyout_propagates_to_children():
    sim = sim_after(VEC + "enter_data copyin(v);"
                    "exit_data copyout(v);")
    paths = [e["path"] for e in sim.env.events if e["op"] == "copy_to_host"]
    assert set(paths) == {"v", "v.data"}


def test_release_copies_nothing_back():
    sim = sim_after(VEC + "enter_data copyin(v); exit_data release(v);")
    assert not [e for e in sim.env.events if e["op"] == "copy_to_host"]


def test_map_external_entry_survives_release_unfreed():
    report = run_scenario("map_external")
    assert report.exit_code == 0
    unmaps = {e["path"]: e for e in report.events if e["op"] == "unmap"}
    assert unmaps["v.data"]["freed"] is False
    assert unmaps["v"]["freed"] is True


def test_detach_without_attachment_is_an_error():
    sim = sim_after(SHALLOW_VEC +
                    "enter_data copyin(v) policy(shallow);"
                    "enter_data copyin(v.data);"
                    "detach(v.data);")
    codes = [d.code for d in sim.env.diagnostics + sim.diagnostics]
    assert "E_NO_ATTACHMENT" in codes


def test_update_device_preserves_attachments():
    sim = sim_after(VEC + "enter_data copyin(v);"
                    "v.n = 9;"
                    "update device(v);")
    child = sim.env.entry_covering(sim.mem.read_u64(slot_addr(sim, "v.data")))
    # the refreshed scalar arrived but the pointer slot stayed translated
    dev_rec = sim.env.translate(sim.host.var("v").address)
    assert sim.mem.read_i64(dev_rec) == 9
    assert device_slot(sim, "v.data") == child.device_base


def test_update_host_reverses_pointer_fixup():
    sim = sim_after(VEC + "enter_data copyin(v); update host(v);")
    # host slot must still hold the host pointee address after update host
    host_data = sim.mem.read_u64(slot_addr(sim, "v.data"))
    assert sim.env.entry_covering(host_data).host_base == host_data


@pytest.mark.parametrize("name", ROUND_TRIP_SCENARIOS)
def test_host_memory_round_trip(name):
    before, after, report = run_with_memory_probe(load_scenario(name), name)
    assert before == after
