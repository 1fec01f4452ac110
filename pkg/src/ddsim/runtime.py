"""Device data environment: present table, attachment counters, deep copy.

Traversal follows the declared member order of each type.  Alias pointers
are translated in a second pass over each record so their sibling's slot
is already settled.  Every enter of an entry pushes a traversal record
(children entered, slots attached); every exit pops one and undoes it,
which keeps reference and attachment counters balanced under repeated or
interleaved enter/exit sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ast_nodes as A
from .errors import (AlreadyPresent, BadDeviceRange, NoAttachment, NotLive,
                     NotPresent, NullDeref, OverlappingMapping,
                     UnbalancedExit, UnknownPath)
from .memory import NULL, MemoryManager, MemorySpace
from .policy import EffectivePolicy, PolicyRegistry
from .typemodel import SLOT, HostState, Resolved, TypeDef, eval_shape

ENTER_MOTIONS = ("copyin", "copy", "create", "nocreate")
EXIT_MOTIONS = ("copyout", "delete", "release")

# direction of a member -> (child motion, copy back at final exit)
_DIRECTION_TO_MOTION = {
    "in": ("copyin", False),
    "inout": ("copyin", True),
    "out": ("create", True),
    "create": ("create", False),
    "nocreate": ("nocreate", False),
}

# parent clause motion -> direction inherited by members
_MOTION_TO_DIRECTION = {
    "copyin": "in",
    "copy": "inout",
    "create": "create",
    "nocreate": "nocreate",
}


@dataclass
class TraversalRecord:
    children: list["PresentEntry"] = field(default_factory=list)
    attaches: list[int] = field(default_factory=list)


@dataclass
class PresentEntry:
    host_base: int
    length: int
    device_base: int
    space: MemorySpace
    ref_count: int = 1
    motion_out: bool = False
    external: bool = False
    content: tuple | None = None  # ("record", TypeDef) | ("array", elem)
    path: str = ""
    traversals: list[TraversalRecord] = field(default_factory=list)

    @property
    def host_end(self) -> int:
        return self.host_base + self.length

    @property
    def device_end(self) -> int:
        return self.device_base + self.length


@dataclass
class AttachmentRecord:
    site: int
    counter: int
    saved_host_value: int


class DeviceDataEnv:
    def __init__(self, mem: MemoryManager, host: HostState,
                 policies: PolicyRegistry):
        self.mem = mem
        self.host = host
        self.registry = host.registry
        self.policies = policies
        self.entries: list[PresentEntry] = []
        self.attachments: dict[int, AttachmentRecord] = {}
        self.events: list[dict] = []
        self.diagnostics: list = []  # Diagnostic objects, appended by rules
        self.device_space = mem.device

    # --- events -----------------------------------------------------------

    def _event(self, op: str, path: str, **fields) -> None:
        ev = {"op": op, "path": path}
        for key, value in fields.items():
            ev[key] = f"0x{value:x}" if key.endswith(("base", "site", "value", "addr")) and isinstance(value, int) else value
        self.events.append(ev)

    def _diag(self, diagnostic) -> None:
        self.diagnostics.append(diagnostic)

    # --- present table lookups ---------------------------------------------

    def entry_covering(self, host_addr: int) -> PresentEntry | None:
        for e in self.entries:
            if e.host_base <= host_addr < max(e.host_end, e.host_base + 1):
                return e
        return None

    def entry_at(self, host_base: int) -> PresentEntry | None:
        for e in self.entries:
            if e.host_base == host_base:
                return e
        return None

    def device_entry_covering(self, dev_addr: int) -> PresentEntry | None:
        for e in self.entries:
            if e.device_base <= dev_addr < max(e.device_end, e.device_base + 1):
                return e
        return None

    def translate(self, host_addr: int) -> int | None:
        """Device address for a mapped host address, else None."""
        for e in self.entries:
            if e.host_base <= host_addr < e.host_end:
                return e.device_base + (host_addr - e.host_base)
        return None

    def _overlapping(self, host_base: int, length: int) -> PresentEntry | None:
        end = host_base + length
        for e in self.entries:
            if host_base < e.host_end and e.host_base < end and \
                    not (e.host_base == host_base and e.length == length):
                return e
        return None

    # --- path targets -------------------------------------------------------

    def _target(self, path: A.Path) -> tuple[int, int, tuple]:
        """(host_base, length, content) for a mappable path: a record
        variable/member or the array behind a pointer member."""
        r = self.host.resolve(path)
        if r.kind == "record":
            return r.address, r.length, ("record", r.typedef)
        if r.kind == "pointer":
            base, length = self.host.pointee_range(r)
            k = r.member.kind
            if isinstance(k, A.RecordPtrK):
                return base, length, ("record", self.registry.get(k.type_name))
            return base, length, ("array", k.elem)
        if r.kind == "inline_array":
            raise NotLive(f"{path}: inline arrays map with their parent record")
        raise NotLive(f"{path} does not name a mappable object")

    # --- enter ---------------------------------------------------------------

    def enter_data(self, path: A.Path, motion: str,
                   policy_name: str | None = None) -> PresentEntry | None:
        if motion not in ENTER_MOTIONS:
            raise UnknownPath(f"bad enter motion {motion!r}")
        host_base, length, content = self._target(path)
        eff = None
        if content[0] == "record":
            eff = self.policies.resolve(content[1], policy_name)
        direction = _MOTION_TO_DIRECTION[motion]
        return self._enter(str(path), host_base, length, content, motion,
                           mark_out=(motion == "copy"), direction=direction,
                           eff=eff, parent_trav=None)

    def _enter(self, path: str, host_base: int, length: int, content: tuple,
               motion: str, mark_out: bool, direction: str,
               eff: EffectivePolicy | None,
               parent_trav: TraversalRecord | None) -> PresentEntry | None:
        entry = self.entry_at(host_base)
        if entry is not None and entry.length != length:
            raise OverlappingMapping(
                f"{path}: range 0x{host_base:x}+{length} conflicts with "
                f"existing mapping of length {entry.length}")
        if entry is None and self._overlapping(host_base, length) is not None:
            raise OverlappingMapping(
                f"{path}: range 0x{host_base:x}+{length} overlaps an "
                f"existing mapping")
        if entry is not None:
            entry.ref_count += 1
            self._event("present_inc", path, host_base=host_base,
                        device_base=entry.device_base, length=length,
                        ref_before=entry.ref_count - 1,
                        ref_after=entry.ref_count)
        else:
            if motion == "nocreate":
                self._event("nocreate_skip", path, host_base=host_base,
                            length=length)
                return None
            device_base = self.mem.alloc(self.device_space, length)
            entry = PresentEntry(host_base, length, device_base,
                                 self.device_space, content=content, path=path)
            self.entries.append(entry)
            self._event("alloc", path, host_base=host_base,
                        device_base=device_base, length=length,
                        space=self.device_space.name, ref_before=0, ref_after=1)
            if motion in ("copyin", "copy") and length > 0:
                self.mem.write(device_base, self.mem.read(host_base, length))
                self._event("copy_to_device", path, host_base=host_base,
                            device_base=device_base, length=length)
        if mark_out or motion == "copy":
            entry.motion_out = True
        trav = TraversalRecord()
        entry.traversals.append(trav)
        if parent_trav is not None:
            parent_trav.children.append(entry)
        if content[0] == "record":
            td = content[1]
            if eff is None:
                eff = self.policies.own_policy(td)
            self._traverse_record(path, entry, host_base - entry.host_base,
                                  td, direction, eff, trav)
        return entry

    def _traverse_record(self, path: str, entry: PresentEntry, base_off: int,
                         td: TypeDef, inherited: str, eff: EffectivePolicy,
                         trav: TraversalRecord) -> None:
        layout = self.registry.layout(td.name)
        record_host = entry.host_base + base_off
        alias_members = []
        for m in td.members:
            action = self.policies.member_action(td, m.name, inherited, eff)
            mpath = f"{path}.{m.name}"
            off = base_off + layout.offsets[m.name]
            k = m.kind
            if isinstance(k, A.RecordK):
                sub = self.registry.get(k.type_name)
                if action.traverse:
                    self._traverse_record(mpath, entry, off, sub,
                                          action.direction,
                                          self.policies.own_policy(sub), trav)
                continue
            if isinstance(k, A.AliasPtrK):
                alias_members.append((m, action, mpath, off))
                continue
            if not isinstance(k, (A.ShapedPtrK, A.RecordPtrK)):
                continue
            if not action.traverse:
                self._event("skip_excluded", mpath,
                            host_base=entry.host_base + off)
                continue
            host_ptr = self.mem.read_u64(entry.host_base + off)
            if host_ptr == NULL:
                continue
            if isinstance(k, A.ShapedPtrK):
                count = eval_shape(k.shape, record_host, td, self.registry,
                                   self.mem)
                child_len = count * SLOT
                child_content: tuple = ("array", k.elem)
            else:
                sub = self.registry.get(k.type_name)
                child_len = self.registry.layout(sub.name).total_size
                child_content = ("record", sub)
            child_motion, child_out = _DIRECTION_TO_MOTION[action.direction]
            child = self._enter(mpath, host_ptr, child_len, child_content,
                                child_motion, child_out, action.direction,
                                eff=None, parent_trav=trav)
            if child is not None:
                site = entry.device_base + off
                dev_value = child.device_base + (host_ptr - child.host_base)
                self._attach_site(site, dev_value, host_ptr, mpath, trav)
        for m, action, mpath, off in alias_members:
            if not action.traverse:
                self._event("skip_excluded", mpath,
                            host_base=entry.host_base + off)
                continue
            self._translate_alias(td, m, mpath, entry, base_off, off, trav)

    def _translate_alias(self, td: TypeDef, m, mpath: str,
                         entry: PresentEntry, base_off: int, off: int,
                         trav: TraversalRecord) -> None:
        from .diagnostics import Diagnostic  # local import avoids a cycle

        host_alias = self.mem.read_u64(entry.host_base + off)
        if host_alias == NULL:
            return
        layout = self.registry.layout(td.name)
        sib_off = base_off + layout.offsets[m.kind.sibling]
        host_sib = self.mem.read_u64(entry.host_base + sib_off)
        sib_site = entry.device_base + sib_off
        if sib_site not in self.attachments:
            # sibling untranslated (excluded or null): keep the raw value
            self._event("skip_alias_untranslated", mpath,
                        host_base=entry.host_base + off)
            return
        dev_sib = self.mem.read_u64(sib_site)
        dev_alias = dev_sib + (host_alias - host_sib)
        site = entry.device_base + off
        self._attach_site(site, dev_alias, host_alias, mpath, trav)
        sib_entry = self.device_entry_covering(dev_sib)
        if sib_entry is None or not (
                sib_entry.device_base <= dev_alias < sib_entry.device_end):
            self._diag(Diagnostic(
                code="W_ALIAS_OOB",
                path=mpath,
                message=(f"alias offset {host_alias - host_sib:+d} lands at "
                         f"0x{dev_alias:x}, outside the sibling's mapped "
                         f"device range"),
                rule="alias-offset-preservation"))

    def _attach_site(self, site: int, device_value: int, saved_host: int,
                     path: str, trav: TraversalRecord | None) -> None:
        rec = self.attachments.get(site)
        if rec is None:
            rec = AttachmentRecord(site, 0, saved_host)
            self.attachments[site] = rec
        before = rec.counter
        rec.counter += 1
        self.mem.write_u64(site, device_value)
        if trav is not None:
            trav.attaches.append(site)
        self._event("attach", path, site=site, value=device_value,
                    counter_before=before, counter_after=rec.counter)

    def _detach_site(self, site: int, path: str = "") -> None:
        rec = self.attachments.get(site)
        if rec is None:
            raise NoAttachment(f"no attachment at site 0x{site:x}")
        before = rec.counter
        rec.counter -= 1
        restored = False
        if rec.counter == 0:
            self.mem.write_u64(site, rec.saved_host_value)
            del self.attachments[site]
            restored = True
        self._event("detach", path, site=site, counter_before=before,
                    counter_after=rec.counter, restored=restored)

    # --- exit ------------------------------------------------------------------

    def exit_data(self, path: A.Path, motion: str) -> None:
        if motion not in EXIT_MOTIONS:
            raise UnknownPath(f"bad exit motion {motion!r}")
        host_base, _, _ = self._target(path)
        entry = self.entry_at(host_base)
        if entry is None:
            if motion == "delete":
                self._event("delete_absent", str(path), host_base=host_base)
                return
            raise NotPresent(f"{path} is not present on the device")
        self._exit_entry(entry, motion, str(path))

    def _exit_entry(self, entry: PresentEntry, motion: str, path: str) -> None:
        if motion == "delete":
            while entry.traversals:
                trav = entry.traversals.pop()
                self._undo_traversal(trav, path, copyback=False)
            entry.ref_count = 0
            self._finalize(entry, copyout=False, path=path)
            return
        if entry.ref_count <= 0:
            raise UnbalancedExit(f"{path}: reference count would go negative")
        entry.ref_count -= 1
        trav = entry.traversals.pop() if entry.traversals else TraversalRecord()
        self._event("present_dec", path, host_base=entry.host_base,
                    device_base=entry.device_base,
                    ref_before=entry.ref_count + 1, ref_after=entry.ref_count)
        if entry.ref_count == 0:
            for site in reversed(trav.attaches):
                self._detach_site(site, path)
            self._finalize(
                entry,
                copyout=(motion == "copyout"
                         or (entry.motion_out and motion != "discard")),
                path=path)
            child_motion = {"copyout": "copyout", "discard": "discard"}.get(
                motion, "release")
            for child in reversed(trav.children):
                if child in self.entries:
                    self._exit_entry(child, child_motion, child.path)
        else:
            self._undo_traversal(trav, path, copyback=True)

    def _undo_traversal(self, trav: TraversalRecord, path: str,
                        copyback: bool) -> None:
        for site in reversed(trav.attaches):
            if site in self.attachments:
                self._detach_site(site, path)
        for child in reversed(trav.children):
            if child in self.entries:
                # each traversal holds exactly one reference on each child
                self._exit_entry(child, "release" if copyback else "discard",
                                 child.path)

    def _finalize(self, entry: PresentEntry, copyout: bool, path: str) -> None:
        if copyout and entry.length > 0:
            self.mem.write(entry.host_base,
                           self.mem.read(entry.device_base, entry.length))
            self._event("copy_to_host", path, host_base=entry.host_base,
                        device_base=entry.device_base, length=entry.length)
        # attachment records inside the dying device range are meaningless now
        for site in [s for s in self.attachments
                     if entry.device_base <= s < entry.device_end]:
            del self.attachments[site]
        if not entry.external:
            self.mem.free(entry.space, entry.device_base)
        self.entries.remove(entry)
        self._event("unmap", path, host_base=entry.host_base,
                    device_base=entry.device_base, length=entry.length,
                    freed=not entry.external)

    # --- explicit attach / detach -------------------------------------------------

    def attach(self, path: A.Path) -> None:
        r = self.host.resolve(path)
        if r.kind != "pointer":
            raise UnknownPath(f"attach target {path} is not a pointer member")
        site = self.translate(r.address)
        if site is None:
            raise NotPresent(f"{path}: parent object is not present")
        host_ptr = self.mem.read_u64(r.address)
        if host_ptr == NULL:
            raise NullDeref(f"{path}: attaching a null pointer")
        dev_target = self.translate(host_ptr)
        if dev_target is None:
            raise NotPresent(f"{path}: pointee is not present")
        self._attach_site(site, dev_target, host_ptr, str(path), trav=None)

    def detach(self, path: A.Path) -> None:
        r = self.host.resolve(path)
        if r.kind != "pointer":
            raise UnknownPath(f"detach target {path} is not a pointer member")
        site = self.translate(r.address)
        if site is None:
            raise NotPresent(f"{path}: parent object is not present")
        if site not in self.attachments:
            raise NoAttachment(f"{path}: no attachment record for this slot")
        self._detach_site(site, str(path))

    # --- external mappings ----------------------------------------------------------

    def map_external(self, path: A.Path, device_base: int) -> PresentEntry:
        host_base, length, content = self._target(path)
        if self.entry_covering(host_base) is not None or \
                self._overlapping(host_base, length) is not None:
            raise AlreadyPresent(f"{path} is already present")
        alloc = self.mem.allocation_at(device_base)
        if alloc is None or alloc.size < length:
            raise BadDeviceRange(
                f"0x{device_base:x} is not a live allocation of at least "
                f"{length} bytes")
        space = self.mem.space_of(device_base)
        entry = PresentEntry(host_base, length, device_base, space,
                             external=True, content=content, path=str(path))
        self.entries.append(entry)
        entry.traversals.append(TraversalRecord())
        self._event("map_external", str(path), host_base=host_base,
                    device_base=device_base, length=length, space=space.name)
        return entry

    def register_identity(self, host_base: int, length: int,
                          space: MemorySpace, content: tuple,
                          path: str) -> PresentEntry:
        """Auto-presence for unified_shared allocations: the device range is
        the host-visible range itself and no bytes ever move."""
        entry = PresentEntry(host_base, length, host_base, space,
                             external=True, content=content, path=path)
        entry.traversals.append(TraversalRecord())
        self.entries.append(entry)
        self._event("auto_present", path, host_base=host_base,
                    device_base=host_base, length=length, space=space.name)
        return entry

    # --- update ------------------------------------------------------------------------

    def update(self, path: A.Path, direction: str) -> None:
        r = self.host.resolve(path)
        if r.kind == "pointer":
            host_base, length = self.host.pointee_range(r)
        else:
            host_base, length = r.address, r.length
        entry = self.entry_covering(host_base)
        if entry is None or host_base + length > entry.host_end:
            raise NotPresent(f"{path} is not present on the device")
        dev_base = entry.device_base + (host_base - entry.host_base)
        if length > 0:
            if direction == "device":
                self.mem.write(dev_base, self.mem.read(host_base, length))
                # re-assert translated pointers clobbered by the raw copy
                for site, rec in self.attachments.items():
                    if dev_base <= site < dev_base + length:
                        saved = self.mem.read_u64(
                            entry.host_base + (site - entry.device_base))
                        rec.saved_host_value = saved
                        dev_val = self.translate(saved)
                        if dev_val is not None:
                            self.mem.write_u64(site, dev_val)
            else:
                data = bytearray(self.mem.read(dev_base, length))
                for site, rec in self.attachments.items():
                    if dev_base <= site < dev_base + length:
                        off = site - dev_base
                        data[off:off + 8] = rec.saved_host_value.to_bytes(
                            8, "little")
                self.mem.write(host_base, bytes(data))
        self._event(f"update_{direction}", str(path), host_base=host_base,
                    device_base=dev_base, length=length)

    # --- reachability walker -----------------------------------------------------------

    def untranslated_slots(self, var_name: str) -> list[tuple[str, int]]:
        """Walk the device copy of a variable and report every reachable
        non-null pointer slot whose value lies outside all mapped device
        ranges (i.e. still a raw host address)."""
        inst = self.host.var(var_name)
        found: list[tuple[str, int]] = []
        if self.translate(inst.address) is None:
            raise NotPresent(f"{var_name} is not present on the device")
        self._walk_device_record(var_name, inst.address, inst.typedef, found)
        return found

    def _walk_device_record(self, path: str, host_base: int, td: TypeDef,
                            found: list[tuple[str, int]]) -> None:
        layout = self.registry.layout(td.name)
        dev_base = self.translate(host_base)
        if dev_base is None:
            return
        for m in td.members:
            off = layout.offsets[m.name]
            mpath = f"{path}.{m.name}"
            k = m.kind
            if isinstance(k, A.RecordK):
                self._walk_device_record(mpath, host_base + off,
                                         self.registry.get(k.type_name), found)
                continue
            if not isinstance(k, (A.ShapedPtrK, A.AliasPtrK, A.RecordPtrK)):
                continue
            value = self.mem.read_u64(dev_base + off)
            if value == NULL:
                continue
            child = self.device_entry_covering(value)
            if child is None:
                found.append((mpath, value))
                continue
            if isinstance(k, A.RecordPtrK):
                host_ptr = self.mem.read_u64(host_base + off)
                if host_ptr != NULL:
                    self._walk_device_record(mpath, host_ptr,
                                             self.registry.get(k.type_name),
                                             found)

    def present_table_snapshot(self) -> list[dict]:
        rows = []
        for e in sorted(self.entries, key=lambda e: e.host_base):
            rows.append({
                "path": e.path,
                "host_base": f"0x{e.host_base:x}",
                "length": e.length,
                "device_base": f"0x{e.device_base:x}",
                "space": e.space.name,
                "ref_count": e.ref_count,
                "motion_out": e.motion_out,
                "external": e.external,
            })
        return rows
