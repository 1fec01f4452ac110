"""Simulated host and device memory.

Every space owns a fixed, disjoint slice of the 64-bit simulated address
range.  Allocation is bump-pointer with 8-byte alignment; freed addresses
are never reused within a run, which keeps stale-address bugs
deterministic.  Trait labels (high_bandwidth, team_local, ...) are
placement metadata only and never change allocation results.
"""

from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass, field

from .errors import (CapacityExceeded, DoubleFree, DuplicateSpace,
                     ForeignAddress)

NULL = 0
ALIGN = 8
SPACE_STRIDE = 1 << 40
HOST_SPACE = "host"
DEVICE_SPACE = "device"
HOST_CAPACITY = 1 << 30
DEVICE_CAPACITY = 1 << 30

TRAIT_NAMES = ("default", "large_capacity", "low_latency", "high_bandwidth",
               "team_local", "unified_shared")


def align8(n: int) -> int:
    return (n + ALIGN - 1) & ~(ALIGN - 1)


@dataclass
class Allocation:
    base: int
    size: int
    data: bytearray
    live: bool = True

    @property
    def end(self) -> int:
        return self.base + self.size


@dataclass
class MemorySpace:
    name: str
    trait: str
    capacity: int
    base: int
    team: int | None = None
    allocated: int = 0
    cursor: int = 0
    allocations: list[Allocation] = field(default_factory=list)
    _bases: list[int] = field(default_factory=list)

    def contains(self, addr: int) -> bool:
        return self.base <= addr < self.base + SPACE_STRIDE

    def find(self, addr: int) -> Allocation | None:
        """Allocation whose [base, end) contains addr, live or not."""
        i = bisect.bisect_right(self._bases, addr) - 1
        if i < 0:
            return None
        alloc = self.allocations[i]
        if alloc.base <= addr < max(alloc.end, alloc.base + 1):
            return alloc
        return None


class MemoryManager:
    """Registry of spaces plus raw byte access across all of them."""

    def __init__(self):
        self.spaces: dict[str, MemorySpace] = {}
        self.order: list[str] = []
        self.create_space(HOST_SPACE, "default", HOST_CAPACITY)
        self.create_space(DEVICE_SPACE, "default", DEVICE_CAPACITY)

    # --- spaces -------------------------------------------------------

    def create_space(self, name: str, trait: str, capacity: int,
                     team: int | None = None) -> MemorySpace:
        if name in self.spaces:
            raise DuplicateSpace(f"space {name!r} already exists")
        if capacity <= 0:
            raise CapacityExceeded(f"space {name!r} needs positive capacity")
        base = SPACE_STRIDE * (len(self.order) + 1)
        space = MemorySpace(name, trait, capacity, base, team)
        self.spaces[name] = space
        self.order.append(name)
        return space

    @property
    def host(self) -> MemorySpace:
        return self.spaces[HOST_SPACE]

    @property
    def device(self) -> MemorySpace:
        return self.spaces[DEVICE_SPACE]

    def space_of(self, addr: int) -> MemorySpace | None:
        idx = addr // SPACE_STRIDE - 1
        if 0 <= idx < len(self.order):
            return self.spaces[self.order[idx]]
        return None

    # --- allocation -----------------------------------------------------

    def alloc(self, space: MemorySpace | str, size: int) -> int:
        if isinstance(space, str):
            space = self.spaces[space]
        if size < 0:
            raise CapacityExceeded("negative allocation size")
        rounded = align8(size)
        if space.allocated + rounded > space.capacity:
            raise CapacityExceeded(
                f"space {space.name!r}: {space.allocated}+{rounded} bytes "
                f"exceeds capacity {space.capacity}")
        addr = space.base + space.cursor
        # zero-size allocations still get a unique address
        space.cursor += max(rounded, ALIGN)
        space.allocated += rounded
        alloc = Allocation(addr, rounded, bytearray(rounded))
        space.allocations.append(alloc)
        space._bases.append(addr)
        return addr

    def free(self, space: MemorySpace | str, addr: int) -> None:
        if isinstance(space, str):
            space = self.spaces[space]
        alloc = space.find(addr)
        if alloc is None or alloc.base != addr:
            raise ForeignAddress(f"0x{addr:x} was not allocated in {space.name!r}")
        if not alloc.live:
            raise DoubleFree(f"0x{addr:x} already freed")
        alloc.live = False
        space.allocated -= alloc.size

    def find_alloc(self, addr: int) -> tuple[MemorySpace, Allocation] | None:
        space = self.space_of(addr)
        if space is None:
            return None
        alloc = space.find(addr)
        if alloc is None:
            return None
        return space, alloc

    def allocation_at(self, addr: int) -> Allocation | None:
        """Live allocation whose base is exactly addr."""
        hit = self.find_alloc(addr)
        if hit is None:
            return None
        _, alloc = hit
        if alloc.base == addr and alloc.live:
            return alloc
        return None

    # --- byte access ------------------------------------------------------

    def _locate(self, addr: int, n: int) -> tuple[Allocation, int]:
        hit = self.find_alloc(addr)
        if hit is None:
            raise ForeignAddress(f"0x{addr:x} is not a simulated address")
        _, alloc = hit
        if not alloc.live:
            raise ForeignAddress(f"0x{addr:x} points into freed memory")
        off = addr - alloc.base
        if off + n > alloc.size:
            raise ForeignAddress(f"0x{addr:x}+{n} crosses allocation end")
        return alloc, off

    def read(self, addr: int, n: int) -> bytes:
        alloc, off = self._locate(addr, n)
        return bytes(alloc.data[off:off + n])

    def write(self, addr: int, data: bytes) -> None:
        alloc, off = self._locate(addr, len(data))
        alloc.data[off:off + len(data)] = data

    def read_u64(self, addr: int) -> int:
        return struct.unpack("<Q", self.read(addr, 8))[0]

    def write_u64(self, addr: int, value: int) -> None:
        self.write(addr, struct.pack("<Q", value & (2 ** 64 - 1)))

    def read_i64(self, addr: int) -> int:
        return struct.unpack("<q", self.read(addr, 8))[0]

    def write_i64(self, addr: int, value: int) -> None:
        self.write(addr, struct.pack("<q", value))

    def read_f64(self, addr: int) -> float:
        return struct.unpack("<d", self.read(addr, 8))[0]

    def write_f64(self, addr: int, value: float) -> None:
        self.write(addr, struct.pack("<d", value))

    def usage_table(self) -> list[dict]:
        return [
            {
                "name": s.name,
                "trait": s.trait if s.team is None else f"{s.trait}({s.team})",
                "capacity": s.capacity,
                "allocated": s.allocated,
            }
            for n in self.order
            for s in (self.spaces[n],)
        ]
