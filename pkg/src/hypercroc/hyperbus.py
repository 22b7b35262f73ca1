"""HyperBus controller, CDC queues, PHY timing and HyperRAM/HyperFlash devices.

The controller is split like the hardware: a front half in the SoC domain
that terminates crossbar requests, and a PHY half in its own clock domain
that runs the protocol cycle by cycle:

    CS_SETUP (1) | CA (3) | LATENCY (k * L) | DATA (ceil(n / 2)) | CS_HOLD (1)

with k = 2 when the device asks for additional latency through RWDS.  Data
moves at two bytes per PHY clock (8-bit DDR bus), which is where the
bandwidth ceiling of 2 * f_phy comes from.  Both halves talk only through
:class:`CdcFifo` instances.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .core import BusError
from .kernel import ConfigError
from .obi import BusResponse

MiB = 1 << 20
RAM = "ram"
FLASH = "flash"
CAPACITY = {RAM: 64 * MiB, FLASH: 512 * MiB}
DEFAULT_FREQ = {RAM: 200_000_000, FLASH: 166_000_000}
DEVICE_ID = {RAM: 0x0C81, FLASH: 0x0001}
DEVICES_PER_PHY = 4
MAX_PHY_FREQ = 200_000_000

SPACE_MEMORY = 0
SPACE_REGISTER = 1

# configuration window of a controller
CFG_LATENCY = 0x00
CFG_MAX_BURST = 0x04
CFG_STATUS = 0x08
CFG_KIND = 0x0C
REG_CS = 0x10
REG_ADDR = 0x14
REG_DATA = 0x18


class DeviceError(Exception):
    pass


def encode_ca(byte_addr: int, read: bool, space: int = SPACE_MEMORY, linear: bool = True) -> int:
    """Pack a 48-bit command/address word; the device addresses 16-bit words."""
    word = byte_addr >> 1
    return (int(read) << 47) | (space << 46) | (int(linear) << 45) | (((word >> 3) & 0x1FFF_FFFF) << 16) | (word & 7)


def decode_ca(ca: int) -> tuple[bool, int, bool, int]:
    """Inverse of :func:`encode_ca`: (read, space, linear, byte address)."""
    word = ((ca >> 16) & 0x1FFF_FFFF) << 3 | (ca & 7)
    return bool(ca >> 47 & 1), ca >> 46 & 1, bool(ca >> 45 & 1), word << 1


def transaction_cycles(nbytes: int, latency: int, extra: bool = False, register: bool = False) -> int:
    """PHY cycles from chip-select assert to release for one transaction."""
    lat = 0 if register else (2 if extra else 1) * latency
    return 1 + 3 + lat + (nbytes + 1) // 2 + 1


@dataclass
class PhyConfig:
    kind: str = RAM
    freq_hz: int | None = None
    latency_count: int = 6
    tcsm_ns: int = 4000
    max_burst_bytes: int = 1024
    rwds_extra_latency_probability: float = 0.0
    seed: int = 0
    cdc_depth: int = 8
    cdc_latency: int = 2
    rx_buffer_bytes: int = 2048
    device_id: int | None = None

    def __post_init__(self):
        if self.kind not in CAPACITY:
            raise ConfigError(f"unknown device kind {self.kind!r}")
        if self.freq_hz is None:
            self.freq_hz = DEFAULT_FREQ[self.kind]
        if not 0 < self.freq_hz <= MAX_PHY_FREQ:
            raise ConfigError(f"PHY frequency must be in (0, 200 MHz], got {self.freq_hz}")
        if not 0.0 <= self.rwds_extra_latency_probability <= 1.0:
            raise ConfigError("rwds_extra_latency_probability must be within [0, 1]")
        if self.max_burst_bytes < 4 or self.max_burst_bytes % 4:
            raise ConfigError("max_burst_bytes must be a positive multiple of 4")

    @property
    def capacity(self) -> int:
        return CAPACITY[self.kind]

    @property
    def span(self) -> int:
        return DEVICES_PER_PHY * self.capacity

    @property
    def period_ps(self) -> int:
        return round(1e12 / self.freq_hz)

    def chunk_limit(self) -> int:
        """Largest burst that fits max_burst, the RX buffer and tCSM with doubled latency."""
        cycles = self.tcsm_ns * 1000 * self.freq_hz // 10**12
        fit = 2 * (cycles - 5 - 2 * self.latency_count)
        lim = min(self.max_burst_bytes, self.rx_buffer_bytes, fit) // 4 * 4
        if lim < 4:
            raise ConfigError("tCSM too short for a single word at this PHY frequency")
        return lim


@dataclass
class HyperTransaction:
    cs: int
    ca: int
    latency_count: int
    extra_latency: bool
    data_bytes: int
    write: bool = False
    space: int = SPACE_MEMORY
    offset: int = 0  # byte offset inside the device
    t_start_ps: int = 0  # PHY edge that asserted chip select
    t_end_ps: int = 0  # PHY edge of the last cycle (chip select release)

    @property
    def phy_cycles_total(self) -> int:
        return transaction_cycles(self.data_bytes, self.latency_count, self.extra_latency,
                                  self.space == SPACE_REGISTER)


class HyperDevice:
    """Sparse-storage HyperRAM or HyperFlash device."""

    PAGE = 1 << 12

    def __init__(self, kind: str = RAM, capacity: int | None = None, latency_count: int = 6,
                 device_id: int | None = None):
        self.kind = kind
        self.capacity = capacity or CAPACITY[kind]
        self.latency_count = latency_count
        self.fill = 0xFF if kind == FLASH else 0x00
        self.pages: dict[int, bytearray] = {}
        self.regs = {0x0: DEVICE_ID[kind] if device_id is None else device_id, 0x1: 0x0000,
                     0x800: 0x8F1F, 0x801: 0xFFC1}

    def _check(self, off, n):
        if off < 0 or off + n > self.capacity:
            raise DeviceError(f"access [{off:#x}, +{n}) outside {self.capacity:#x}-byte device")

    def read(self, off: int, n: int) -> bytes:
        self._check(off, n)
        out = bytearray()
        P = self.PAGE
        while n:
            pg, o = divmod(off, P)
            k = min(n, P - o)
            page = self.pages.get(pg)
            out += page[o:o + k] if page is not None else bytes((self.fill,)) * k
            off += k
            n -= k
        return bytes(out)

    def _store(self, off, data, mask=None):
        P = self.PAGE
        i = 0
        n = len(data)
        while i < n:
            pg, o = divmod(off + i, P)
            k = min(n - i, P - o)
            page = self.pages.get(pg)
            if page is None:
                page = self.pages[pg] = bytearray((self.fill,)) * P
            if mask is None:
                page[o:o + k] = data[i:i + k]
            else:
                for j in range(k):
                    if mask[i + j]:
                        page[o + j] = data[i + j]
            i += k

    def write(self, off: int, data: bytes, mask=None) -> None:
        """Memory-space write; HyperFlash rejects it."""
        self._check(off, len(data))
        if self.kind == FLASH:
            raise DeviceError("memory-space write to HyperFlash")
        self._store(off, data, mask)

    def preload(self, off: int, data: bytes) -> None:
        """Host-side image load, allowed for both kinds."""
        self._check(off, len(data))
        self._store(off, data)

    def reg_read(self, word_addr: int) -> int:
        return self.regs.get(word_addr, 0)

    def reg_write(self, word_addr: int, value: int) -> None:
        if word_addr in (0x0, 0x1):
            return  # id registers are read-only
        self.regs[word_addr] = value & 0xFFFF


def split_burst(addr: int, length: int, cfg: PhyConfig, write: bool = False, rng: random.Random | None = None) -> list[HyperTransaction]:
    """Cut [addr, addr + length) of a PHY span into legal HyperTransactions.

    Chunks never exceed the burst limit and never cross a device boundary;
    the chip select is the index of the device owning the chunk.
    """
    if length < 0:
        raise ValueError("negative length")
    if length == 0:
        return []
    if addr < 0 or addr + length > cfg.span:
        raise BusError(addr if addr >= cfg.span or addr < 0 else cfg.span)
    lim = cfg.chunk_limit()
    cap = cfg.capacity
    out = []
    a = addr
    end = addr + length
    p = cfg.rwds_extra_latency_probability
    while a < end:
        cs, off = divmod(a, cap)
        n = min(lim, end - a, (cs + 1) * cap - a)
        extra = p >= 1.0 or (p > 0.0 and rng is not None and rng.random() < p)
        out.append(HyperTransaction(cs, encode_ca(off, not write), cfg.latency_count, extra, n, write, SPACE_MEMORY, off))
        a += n
    return out


class CdcFifo:
    """Clock-domain-crossing queue.

    An item pushed at time t becomes visible on the ``latency``-th edge of
    the destination domain strictly after t.
    """

    def __init__(self, dst, depth: int = 8, latency: int = 2):
        self.dst = dst
        self.depth = depth
        self.latency = latency
        self.q: deque = deque()

    def __len__(self):
        return len(self.q)

    def full(self) -> bool:
        return len(self.q) >= self.depth

    def push(self, item, t_ps: int) -> None:
        if self.full():
            raise RuntimeError("CDC FIFO overflow")
        if self.q and t_ps < self.q[-1][2]:
            raise RuntimeError("CDC FIFO push out of order")
        self.q.append((self.dst.first_edge_after(t_ps) + self.latency - 1, item, t_ps))

    def ready(self) -> bool:
        """True if the head is visible on the destination edge being processed."""
        return bool(self.q) and self.q[0][0] <= self.dst.cycle_count

    def peek(self):
        return self.q[0][1]

    def pop(self):
        return self.q.popleft()[1]

    def visible(self):
        """(index, item) of every entry visible on the current destination edge."""
        now = self.dst.cycle_count
        for i, (due, item, _) in enumerate(self.q):
            if due > now:
                return
            yield i, item

    def take(self, i):
        item = self.q[i][1]
        del self.q[i]
        return item


class _FReq:
    """A crossbar request as seen by the controller."""

    __slots__ = ("port", "tag", "addr", "write", "nbeats", "tail_error", "segs_left", "space")

    def __init__(self, port, tag, addr, write, nbeats, tail_error, space=SPACE_MEMORY):
        self.port = port
        self.tag = tag
        self.addr = addr
        self.write = write
        self.nbeats = nbeats
        self.tail_error = tail_error
        self.segs_left = 0
        self.space = space


class _Seg:
    __slots__ = ("req", "cs", "off", "n", "write", "space", "data", "mask", "beat0")

    def __init__(self, req, cs, off, n, write, space, data=None, mask=None, beat0=0):
        self.req = req
        self.cs = cs
        self.off = off
        self.n = n
        self.write = write
        self.space = space
        self.data = data
        self.mask = mask
        self.beat0 = beat0


class _Active:
    __slots__ = ("txn", "segs", "total", "cycle", "lat", "start_edge", "rdata", "words", "pushed", "t0")


class HyperBusController:
    """One controller + PHY + four devices.

    ``accept`` is the deferred-target hook called by the crossbar when a
    request to the data window is granted; :attr:`cfg_target` handles the
    configuration window.
    """

    def __init__(self, sim, index: int, cfg: PhyConfig | None = None, domain_id: int | None = None, perf=None):
        self.sim = sim
        self.index = index
        self.cfg = cfg or PhyConfig()
        self.name = f"phy{index}"
        if domain_id is None:
            domain_id = sim.add_domain(self.cfg.freq_hz, self.name)
        self.domain_id = domain_id
        self.phy_domain = sim.domain(domain_id)
        if self.phy_domain.freq_hz != self.cfg.freq_hz:
            raise ConfigError(f"{self.name}: domain frequency {self.phy_domain.freq_hz} != PHY config {self.cfg.freq_hz}")
        self.perf = perf
        self.devices = [HyperDevice(self.cfg.kind, None, self.cfg.latency_count, self.cfg.device_id)
                        for _ in range(DEVICES_PER_PHY)]
        self.rng = random.Random(self.cfg.seed)
        self.req_fifo = CdcFifo(self.phy_domain, self.cfg.cdc_depth, self.cfg.cdc_latency)
        rx_words = self.cfg.rx_buffer_bytes // 4
        # the return path holds read data (bounded by RX credit) and write acks
        self.ret_fifo = CdcFifo(sim.soc, rx_words + 64, self.cfg.cdc_latency)
        self.rx_credit = rx_words
        self.queue: deque[_Seg] = deque()
        self.queue_reqs = 0
        self.queue_limit = self.cfg.cdc_depth
        self.active: _Active | None = None
        self.log: list[tuple[HyperTransaction, int]] = []
        self.txn_hooks = []
        self.cfg_target = _CfgTarget(self)
        self.front = _Front(self)
        self.phy = _Phy(self)
        self.reg_cs = 0
        self.reg_addr = 0
        self.chunk = self.cfg.chunk_limit()
        self.bytes_read = 0
        self.bytes_written = 0

    def register(self):
        self.sim.register(self.front, 0)
        self.sim.register(self.phy, self.domain_id)

    @property
    def busy(self) -> bool:
        return bool(self.active or self.queue or len(self.req_fifo) or len(self.ret_fifo))

    # ----------------------------------------------------- host access
    def _dev_iter(self, off, n):
        cap = self.cfg.capacity
        if off < 0 or off + n > self.cfg.span:
            raise BusError(off)
        while n:
            cs, o = divmod(off, cap)
            k = min(n, cap - o)
            yield self.devices[cs], o, k
            off += k
            n -= k

    def read_bytes(self, off: int, n: int) -> bytes:
        return b"".join(d.read(o, k) for d, o, k in self._dev_iter(off, n))

    def write_bytes(self, off: int, data: bytes) -> None:
        """Host write into the PHY span (preload semantics: works for FLASH too)."""
        i = 0
        for d, o, k in self._dev_iter(off, len(data)):
            d.preload(o, data[i:i + k])
            i += k

    # ------------------------------------------------- crossbar side
    def accept(self, txn, offset, port, entry, nbeats, tail_error) -> bool:
        if self.req_fifo.full():
            return False
        soc = self.sim.soc
        cyc = soc.cycle_count
        burst = txn.burst_len > 1
        off = offset if burst else offset & ~3
        nbytes = 4 * nbeats
        req = _FReq(port, txn.tag, txn.addr if burst else txn.addr & ~3, txn.write, nbeats, tail_error)
        try:
            segs = split_burst(off, nbytes, self.cfg, txn.write)
            if txn.write and self.cfg.kind == FLASH:
                raise DeviceError("write to flash")
        except (BusError, DeviceError):
            self._respond_error(req)
            return True
        data = mask = None
        if txn.write:
            data = bytearray()
            mask = []
            for i in range(nbeats):
                data += (txn.beat_data(i) & 0xFFFF_FFFF).to_bytes(4, "little")
                be = txn.byte_enable
                mask += [be >> j & 1 for j in range(4)]
        pos = 0
        items = []
        for h in segs:
            s = _Seg(req, h.cs, h.offset, h.data_bytes, txn.write, SPACE_MEMORY, beat0=pos // 4)
            if txn.write:
                s.data = bytes(data[pos:pos + h.data_bytes])
                s.mask = None if all(mask[pos:pos + h.data_bytes]) else mask[pos:pos + h.data_bytes]
            pos += h.data_bytes
            items.append(s)
        req.segs_left = len(items)
        # write data crosses the bus one beat per cycle before it is complete
        t = soc.edge_time(cyc + nbeats - 1) if txn.write else soc.edge_time(cyc)
        self.req_fifo.push((req, items), t)
        return True

    def _respond_error(self, req):
        req.port.respond(BusResponse(0, True, 0, req.addr, True, req.tag))

    # -------------------------------------------------- PHY internals
    def _new_txn(self, head: _Seg) -> HyperTransaction:
        p = self.cfg.rwds_extra_latency_probability
        extra = head.space == SPACE_MEMORY and (p >= 1.0 or (p > 0.0 and self.rng.random() < p))
        return HyperTransaction(head.cs, encode_ca(head.off, not head.write, head.space), self.cfg.latency_count,
                                extra, head.n, head.write, head.space, head.off)


class _CfgTarget:
    """Configuration window; REG_DATA accesses become register-space transactions."""

    def __init__(self, ctl: HyperBusController):
        self.ctl = ctl

    def accept(self, txn, offset, port, entry, nbeats, tail_error) -> bool:
        ctl = self.ctl
        off = offset & ~3
        req = _FReq(port, txn.tag, txn.addr & ~3, txn.write, 1, False, SPACE_REGISTER)
        if off == REG_DATA:
            if ctl.req_fifo.full():
                return False
            data = None
            if txn.write:
                data = (txn.beat_data(0) & 0xFFFF).to_bytes(2, "little")
            s = _Seg(req, ctl.reg_cs & 3, (ctl.reg_addr & 0x7FFF_FFFF) << 1, 2, txn.write, SPACE_REGISTER, data)
            req.segs_left = 1
            ctl.req_fifo.push((req, [s]), ctl.sim.now)
            return True
        v = 0
        if txn.write:
            w = txn.beat_data(0)
            if off == CFG_LATENCY and 3 <= w <= 16:
                ctl.cfg.latency_count = w
                ctl.chunk = ctl.cfg.chunk_limit()
            elif off == CFG_MAX_BURST and w >= 4 and w % 4 == 0:
                ctl.cfg.max_burst_bytes = w
                ctl.chunk = ctl.cfg.chunk_limit()
            elif off == REG_CS:
                ctl.reg_cs = w & 3
            elif off == REG_ADDR:
                ctl.reg_addr = w
        else:
            v = {CFG_LATENCY: ctl.cfg.latency_count, CFG_MAX_BURST: ctl.cfg.max_burst_bytes,
                 CFG_STATUS: int(ctl.busy), CFG_KIND: int(ctl.cfg.kind == FLASH),
                 REG_CS: ctl.reg_cs, REG_ADDR: ctl.reg_addr}.get(off, 0)
        port.respond(BusResponse(v, False, 1, txn.addr, True, txn.tag))
        return True


class _Front:
    """SoC-domain half: returns read data and write acks, one word per cycle."""

    def __init__(self, ctl: HyperBusController):
        self.ctl = ctl
        self.name = f"{ctl.name}.front"

    def commit(self):
        ctl = self.ctl
        f = ctl.ret_fifo
        if not f.ready():
            return
        # responses stay in order per master; a master that cannot take one
        # does not block the others (each master has its own return channel)
        blocked = []
        for i, (kind, req, beat, value) in f.visible():
            port = req.port
            if port in blocked:
                continue
            if port.accepts_response():
                f.take(i)
                break
            blocked.append(port)
        else:
            return
        if kind == "data":
            ctl.rx_credit += 1
            last = beat + 1 == req.nbeats
            port.respond(BusResponse(value, False, beat + 1, req.addr + 4 * beat, last and not req.tail_error, req.tag))
            if last and req.tail_error:
                port.respond(BusResponse(0, True, beat + 1, req.addr + 4 * (beat + 1), True, req.tag))
        elif kind == "reg":
            ctl.rx_credit += 1
            port.respond(BusResponse(value, False, 1, req.addr, True, req.tag))
        else:  # write ack
            port.respond(BusResponse(0, req.tail_error, req.nbeats, req.addr, True, req.tag))


class _Phy:
    """PHY-domain half: protocol state machine, one call per PHY clock."""

    def __init__(self, ctl: HyperBusController):
        self.ctl = ctl
        self.name = ctl.name
        self.rd_channel = f"{ctl.name}.read"
        self.wr_channel = f"{ctl.name}.write"

    def tick(self):
        ctl = self.ctl
        fifo = ctl.req_fifo
        while ctl.queue_reqs < ctl.queue_limit and fifo.ready():
            req, segs = fifo.pop()
            ctl.queue.extend(segs)
            ctl.queue_reqs += 1
        a = ctl.active
        if a is None:
            if not ctl.queue or not self._start():
                return
            a = ctl.active
        self._cycle(a)

    def _start(self) -> bool:
        ctl = self.ctl
        q = ctl.queue
        head = q[0]
        segs = [head]
        n = head.n
        if head.space == SPACE_MEMORY:
            # coalesce contiguous requests of the same master and direction
            i = 1
            while i < len(q):
                s = q[i]
                if (s.space != SPACE_MEMORY or s.write != head.write or s.cs != head.cs
                        or s.req.port is not head.req.port or s.off != head.off + n or n + s.n > ctl.chunk):
                    break
                segs.append(s)
                n += s.n
                i += 1
        words = 1 if head.space == SPACE_REGISTER else n // 4
        if not head.write:
            if ctl.rx_credit < words:
                return False
            ctl.rx_credit -= words
        for _ in segs:
            q.popleft()
        txn = ctl._new_txn(head)
        txn.data_bytes = n
        txn.t_start_ps = ctl.sim.now
        a = _Active()
        a.txn = txn
        a.segs = segs
        a.total = txn.phy_cycles_total
        a.cycle = 0
        a.lat = 0 if txn.space == SPACE_REGISTER else (2 if txn.extra_latency else 1) * txn.latency_count
        a.start_edge = ctl.phy_domain.cycle_count
        a.t0 = ctl.sim.now
        a.pushed = 0
        a.rdata = None
        a.words = None
        if not head.write:
            dev = ctl.devices[head.cs]
            if head.space == SPACE_REGISTER:
                a.rdata = dev.reg_read(head.off >> 1)
            else:
                a.rdata = dev.read(head.off, n)
                a.words = [(s.req, s.beat0 + k) for s in segs for k in range(s.n // 4)]
        assert a.total * ctl.phy_domain.period_ps <= ctl.cfg.tcsm_ns * 1000, "tCSM violated"
        ctl.active = a
        return True

    def _cycle(self, a: _Active):
        ctl = self.ctl
        c = a.cycle
        txn = a.txn
        data0 = 4 + a.lat
        j = c - data0
        ndata = (txn.data_bytes + 1) // 2
        if 0 <= j < ndata:
            moved = min(2, txn.data_bytes - 2 * j)
            now = ctl.sim.now
            if ctl.perf is not None and txn.space == SPACE_MEMORY:
                ctl.perf.record(self.wr_channel if txn.write else self.rd_channel, now, moved)
            if not txn.write:
                done = 2 * j + moved
                if txn.space == SPACE_REGISTER:
                    if j == ndata - 1:
                        ctl.ret_fifo.push(("reg", a.segs[0].req, 0, a.rdata), now)
                else:
                    while (a.pushed + 1) * 4 <= done:
                        req, beat = a.words[a.pushed]
                        v = int.from_bytes(a.rdata[4 * a.pushed:4 * a.pushed + 4], "little")
                        ctl.ret_fifo.push(("data", req, beat, v), now)
                        a.pushed += 1
            elif j == ndata - 1:
                self._apply_write(a)
        a.cycle = c + 1
        if a.cycle == a.total:
            self._finish(a)

    def _apply_write(self, a: _Active):
        ctl = self.ctl
        dev = ctl.devices[a.txn.cs]
        if a.txn.space == SPACE_REGISTER:
            dev.reg_write(a.txn.offset >> 1, int.from_bytes(a.segs[0].data, "little"))
            return
        for s in a.segs:
            dev.write(s.off, s.data, s.mask)

    def _finish(self, a: _Active):
        ctl = self.ctl
        txn = a.txn
        now = ctl.sim.now
        txn.t_end_ps = now
        end = ctl.phy_domain.edge_time(a.start_edge + a.total)
        if ctl.perf is not None and txn.space == SPACE_MEMORY:
            ctl.perf.activity(self.wr_channel if txn.write else self.rd_channel, a.t0, end)
        if txn.write:
            ctl.bytes_written += txn.data_bytes if txn.space == SPACE_MEMORY else 0
        else:
            ctl.bytes_read += txn.data_bytes if txn.space == SPACE_MEMORY else 0
        for s in a.segs:
            r = s.req
            r.segs_left -= 1
            if r.segs_left == 0:
                ctl.queue_reqs -= 1
                if r.write:
                    ctl.ret_fifo.push(("ack", r, 0, 0), now)
        ctl.log.append((txn, a.cycle))
        for h in ctl.txn_hooks:
            h(ctl.index, txn, a.cycle)
        ctl.active = None
