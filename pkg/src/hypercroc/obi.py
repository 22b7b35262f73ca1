"""32-bit OBI-style crossbar: memory map, per-target round-robin, bursts.

Timing contract (SoC domain):

* masters post at most one request per port during ``tick``;
* the crossbar arbitrates in ``commit`` of the same edge, one grant per
  target per cycle;
* responses from single-cycle targets are queued during that commit and so
  become visible to the master on the next edge.  An uncontended SRAM read
  posted in cycle N therefore has its data in cycle N + 1.

Bursts to ordinary targets are cracked into single beats, each arbitrated on
its own cycle.  Targets marked ``deferred`` (the HyperBus front) receive the
burst whole through ``accept()`` and answer later through
:meth:`MasterPort.respond`.
"""

from __future__ import annotations

import bisect
from collections import Counter, deque
from dataclasses import dataclass

from .core import BusError
from .kernel import ConfigError

MAX_BURST = 64

# fixed master ids
M_CORE_INSTR = 0
M_CORE_DATA = 1
M_DMA_READ = 2
M_DMA_WRITE = 3
M_USER = 4


@dataclass
class BusTransaction:
    addr: int
    write: bool = False
    byte_enable: int = 0xF
    wdata: int | list = 0
    burst_len: int = 1
    master_id: int = 0
    tag: object = None

    def __post_init__(self):
        if self.burst_len < 1:
            raise ValueError("burst_len must be >= 1")
        if self.burst_len > 1 and self.addr & 3:
            raise ValueError(f"burst at unaligned address {self.addr:#x}")
        if self.write and not self.byte_enable:
            raise ValueError("write with empty byte enable")

    def beat_data(self, i: int) -> int:
        if isinstance(self.wdata, int):
            return self.wdata
        return self.wdata[i]


@dataclass
class BusResponse:
    rdata: int = 0
    error: bool = False
    beats_returned: int = 1
    addr: int = 0
    last: bool = True
    tag: object = None


@dataclass
class MemoryMapEntry:
    name: str
    base: int
    size: int
    target: object
    bursts_allowed: bool = False
    deferred: bool = False
    loadable: bool = False

    @property
    def end(self) -> int:
        return self.base + self.size

    def contains(self, addr: int) -> bool:
        return self.base <= addr < self.base + self.size

    def as_dict(self) -> dict:
        return {"name": self.name, "base": f"{self.base:#010x}", "size": self.size,
                "bursts_allowed": self.bursts_allowed, "loadable": self.loadable}


class MemoryMap:
    def __init__(self):
        self.entries: list[MemoryMapEntry] = []
        self._bases: list[int] = []
        self.frozen = False

    def add(self, name, base, size, target, bursts_allowed=False, deferred=False, loadable=False) -> MemoryMapEntry:
        if self.frozen:
            raise ConfigError("memory map already finalized")
        if size <= 0 or base < 0 or base + size > 1 << 32:
            raise ConfigError(f"{name}: bad window {base:#x}+{size:#x}")
        if size & (size - 1) == 0 and base % size:
            raise ConfigError(f"{name}: base {base:#x} not aligned to size {size:#x}")
        e = MemoryMapEntry(name, base, size, target, bursts_allowed, deferred, loadable)
        for o in self.entries:
            if base < o.end and o.base < e.end:
                raise ConfigError(f"{name} [{base:#x}, {e.end:#x}) overlaps {o.name} [{o.base:#x}, {o.end:#x})")
        i = bisect.bisect(self._bases, base)
        self.entries.insert(i, e)
        self._bases.insert(i, base)
        return e

    def decode(self, addr: int) -> MemoryMapEntry | None:
        i = bisect.bisect(self._bases, addr) - 1
        if i >= 0:
            e = self.entries[i]
            if addr < e.base + e.size:
                return e
        return None

    def by_name(self, name: str) -> MemoryMapEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def as_list(self) -> list[dict]:
        return [e.as_dict() for e in self.entries]


class _Req:
    __slots__ = ("txn", "entry", "beat")

    def __init__(self, txn, entry):
        self.txn = txn
        self.entry = entry
        self.beat = 0


class MasterPort:
    """A master's connection to the crossbar.

    One request slot (posted in tick, consumed by arbitration) and an
    in-order response queue.  A port may have several granted requests in
    flight, but only towards one target at a time so responses stay ordered.
    """

    def __init__(self, xbar: "Crossbar", id: int, name: str):
        self.xbar = xbar
        self.id = id
        self.name = name
        self.cur: _Req | None = None
        self.responses: deque[BusResponse] = deque()
        self.outstanding = 0
        self.out_entry: MemoryMapEntry | None = None
        # deferred targets stop delivering once this many responses queue up
        self.response_capacity = 2

    def can_post(self, addr: int | None = None) -> bool:
        if self.cur is not None:
            return False
        if self.outstanding == 0:
            return True
        return addr is not None and self.xbar.map.decode(addr) is self.out_entry

    def post(self, txn: BusTransaction) -> None:
        if self.cur is not None:
            raise RuntimeError(f"{self.name}: request slot busy")
        txn.master_id = self.id
        entry = self.xbar.map.decode(txn.addr)
        if self.outstanding and entry is not self.out_entry:
            raise RuntimeError(f"{self.name}: outstanding requests to another target")
        self.cur = _Req(txn, entry)

    @property
    def idle(self) -> bool:
        return self.cur is None and self.outstanding == 0 and not self.responses

    def accepts_response(self) -> bool:
        return len(self.responses) < self.response_capacity

    def respond(self, resp: BusResponse) -> None:
        """Delivery path for deferred targets (call from a commit phase)."""
        self.responses.append(resp)
        if resp.last:
            self.outstanding -= 1

    def pop(self) -> BusResponse | None:
        return self.responses.popleft() if self.responses else None


class Crossbar:
    """Crossbar component; register on the SoC domain (commit only)."""

    name = "xbar"

    def __init__(self, sim, memory_map: MemoryMap, max_burst: int = MAX_BURST):
        self.sim = sim
        self.map = memory_map
        self.max_burst = max_burst
        self.ports: list[MasterPort] = []
        self._rr: dict[int, int] = {}
        self._busy_until: dict[int, int] = {}
        self.grant_hooks = []
        self.grants = Counter()  # (master id, target name) -> grants
        self.log = None  # optional list of granted (cycle, master, target, addr, write, burst)

    def add_master(self, id: int, name: str) -> MasterPort:
        if any(p.id == id for p in self.ports):
            raise ConfigError(f"master id {id} already in use")
        p = MasterPort(self, id, name)
        self.ports.append(p)
        self.ports.sort(key=lambda q: q.id)
        return p

    def port(self, id: int) -> MasterPort:
        for p in self.ports:
            if p.id == id:
                return p
        raise KeyError(id)

    def _grant(self, cyc, p, entry, addr, write, burst):
        self.grants[(p.id, entry.name)] += 1
        if self.log is not None:
            self.log.append((cyc, p.id, entry.name, addr, write, burst))
        for h in self.grant_hooks:
            h(cyc, p.id, entry.name, addr, burst)

    def commit(self):
        cyc = self.sim.soc.cycle_count
        contenders: dict[int, list[MasterPort]] = {}
        for p in self.ports:
            req = p.cur
            if req is None:
                continue
            t = req.txn
            e = req.entry
            if e is None or (t.burst_len > 1 and (not e.bursts_allowed or t.burst_len > self.max_burst)):
                p.cur = None
                p.responses.append(BusResponse(0, True, 0, t.addr, True, t.tag))
                continue
            contenders.setdefault(id(e), []).append(p)

        for key, ps in contenders.items():
            if self._busy_until.get(key, -1) > cyc:
                continue
            last = self._rr.get(key, -1)
            order = [p for p in ps if p.id > last] + [p for p in ps if p.id <= last]
            for p in order:
                if self._serve(cyc, key, p):
                    self._rr[key] = p.id
                    break

    def _serve(self, cyc, key, p: MasterPort) -> bool:
        req = p.cur
        t = req.txn
        e = req.entry
        if e.deferred:
            n = t.burst_len
            room = (e.end - t.addr + 3) // 4
            tail_error = n > room
            if tail_error:
                n = room
            if not e.target.accept(t, t.addr - e.base, p, e, n, tail_error):
                return False
            p.cur = None
            p.outstanding += 1
            p.out_entry = e
            if t.write and n > 1:
                # write data occupies the target's request channel one beat per cycle
                self._busy_until[key] = cyc + n
            self._grant(cyc, p, e, t.addr, t.write, t.burst_len)
            return True

        # single-cycle target: one beat per grant, held while the master's
        # response queue is full (rready low)
        if not t.write and not p.accepts_response():
            return False
        i = req.beat
        addr = t.addr + 4 * i if t.burst_len > 1 else t.addr
        self._grant(cyc, p, e, addr, t.write, 1)
        done = i + 1 == t.burst_len
        err = False
        rdata = 0
        if addr >= e.end:
            err = True
        else:
            try:
                rdata = e.target.bus_access(addr - e.base, t.write, t.byte_enable, t.beat_data(i))
            except BusError:
                err = True
        if err:
            p.responses.append(BusResponse(0, True, i, addr, True, t.tag))
            p.cur = None
            return True
        if not t.write:
            p.responses.append(BusResponse(rdata, False, i + 1, addr, done, t.tag))
        elif done:
            p.responses.append(BusResponse(0, False, t.burst_len, t.addr, True, t.tag))
        if done:
            p.cur = None
        else:
            req.beat = i + 1
        return True
