"""On-chip memories, minimal peripherals and the user-domain plug-in port.

Crossbar targets implement ``bus_access(offset, write, byte_enable, wdata)``
and return the read word (ignored for writes) or raise :class:`BusError`.
Offsets are relative to the target window; sub-word accesses carry a word
aligned offset plus byte enables.
"""

from __future__ import annotations

from .core import IRQ_TIMER, BusError
from .isa import NOP, enc_jalr, load_address_pair
from .kernel import ConfigError
from .obi import BusTransaction

SRAM_BANK_SIZE = 8 * 1024
ROM_SIZE = 4 * 1024
ROM_STUB_WORDS = 16

_LANE = [0xFF << (8 * i) for i in range(4)]


def lane_mask(be: int) -> int:
    m = 0
    for i in range(4):
        if be >> i & 1:
            m |= _LANE[i]
    return m


class ByteStore:
    """Word-addressed byte array target."""

    writable = True

    def __init__(self, name: str, size: int):
        self.name = name
        self.size = size
        self.data = bytearray(size)

    def bus_access(self, off, write, be, wdata):
        o = off & ~3
        d = self.data
        if write:
            if not self.writable:
                raise BusError(off)
            if be == 0xF:
                d[o:o + 4] = (wdata & 0xFFFF_FFFF).to_bytes(4, "little")
            else:
                for i in range(4):
                    if be >> i & 1:
                        d[o + i] = (wdata >> (8 * i)) & 0xFF
            return 0
        return int.from_bytes(d[o:o + 4], "little")

    # host-side access (loader, tests)
    def read_bytes(self, off: int, n: int) -> bytes:
        if off < 0 or off + n > self.size:
            raise BusError(off)
        return bytes(self.data[off:off + n])

    def write_bytes(self, off: int, data: bytes) -> None:
        if off < 0 or off + len(data) > self.size:
            raise BusError(off)
        self.data[off:off + len(data)] = data

    def fetch16(self, off: int) -> int:
        return self.data[off] | self.data[off + 1] << 8


class SramBank(ByteStore):
    def __init__(self, name: str = "sram", size: int = SRAM_BANK_SIZE):
        super().__init__(name, size)


class BootRom(ByteStore):
    """Read-only boot ROM holding a jump stub to the firmware entry."""

    writable = False

    def __init__(self, entry: int = 0x1000_0000, size: int = ROM_SIZE):
        super().__init__("rom", size)
        self.program_stub(entry)

    def program_stub(self, entry: int) -> None:
        words = list(load_address_pair(5, entry)) + [enc_jalr(0, 5, 0)]
        words += [NOP] * (ROM_STUB_WORDS - len(words))
        for i, w in enumerate(words):
            self.data[4 * i:4 * i + 4] = w.to_bytes(4, "little")


class Console:
    """The character stream shared by SimControl and the UART."""

    def __init__(self, mirror=None, path=None):
        self.buf = bytearray()
        self.mirror = mirror  # e.g. sys.stdout
        self._file = open(path, "wb") if path else None

    def put(self, ch: int) -> None:
        ch &= 0xFF
        self.buf.append(ch)
        if self.mirror is not None:
            out = getattr(self.mirror, "buffer", None)
            if out is not None:
                out.write(bytes((ch,)))
            else:
                self.mirror.write(chr(ch))
            if ch == 0x0A:
                self.mirror.flush()
        if self._file is not None:
            self._file.write(bytes((ch,)))

    def text(self) -> str:
        return self.buf.decode("latin-1")

    def close(self) -> None:
        if self.mirror is not None:
            self.mirror.flush()
        if self._file is not None:
            self._file.close()
            self._file = None


class SimControl:
    """+0 exit (v & 1 -> exit with code v >> 1), +4 putchar."""

    name = "socctrl"

    def __init__(self, sim, console: Console):
        self.sim = sim
        self.console = console
        self.exit_writes: list[int] = []

    def bus_access(self, off, write, be, wdata):
        off &= ~3
        if not write:
            return 0
        if off == 0:
            self.exit_writes.append(wdata)
            if wdata & 1:
                self.sim.request_exit(wdata >> 1)
        elif off == 4:
            self.console.put(wdata)
        return 0


class Uart:
    """Transmit-only UART without baud timing. +0 tx data, +4 status (bit0 ready)."""

    name = "uart"

    def __init__(self, console: Console):
        self.console = console

    def bus_access(self, off, write, be, wdata):
        off &= ~3
        if write:
            if off == 0:
                self.console.put(wdata)
            return 0
        return 1 if off == 4 else 0


class Timer:
    """RISC-V style machine timer counting SoC cycles.

    Registers: mtime lo/hi at 0x0/0x4, mtimecmp lo/hi at 0x8/0xC.  The
    machine-timer interrupt is pending while mtime >= mtimecmp.  The level
    for edge N + 1 is computed during the commit of edge N so the core sees
    the same value whatever the registration order.
    """

    name = "timer"

    def __init__(self, sim, core=None):
        self.sim = sim
        self.core = core
        self.offset = 0
        self.mtimecmp = (1 << 64) - 1

    def mtime(self, cycle: int | None = None) -> int:
        if cycle is None:
            cycle = self.sim.soc.cycle_count
        return (cycle - self.offset) & ((1 << 64) - 1)

    def _update(self):
        if self.core is not None:
            self.core.set_irq(IRQ_TIMER, self.mtime(self.sim.soc.cycle_count + 1) >= self.mtimecmp)

    def commit(self):
        self._update()

    def bus_access(self, off, write, be, wdata):
        off &= ~3
        mt = self.mtime()
        if not write:
            return {0: mt & 0xFFFF_FFFF, 4: mt >> 32, 8: self.mtimecmp & 0xFFFF_FFFF,
                    0xC: self.mtimecmp >> 32}.get(off, 0)
        m = lane_mask(be)
        wdata &= m
        if off in (0, 4):
            sh = 0 if off == 0 else 32
            new = (mt & ~(m << sh)) | (wdata << sh)
            # the write takes effect for the next edge
            self.offset = self.sim.soc.cycle_count + 1 - new
        elif off in (8, 0xC):
            sh = 0 if off == 8 else 32
            self.mtimecmp = (self.mtimecmp & ~(m << sh)) | (wdata << sh)
        self._update()
        return 0


class UserDomainPort:
    """Slave window plus master port of the user domain.

    Without a plug-in, reads return 0, writes are ignored and the master
    port stays silent.
    """

    name = "user"

    def __init__(self, sim, master_port):
        self.sim = sim
        self.master = master_port
        self.plugin = None

    def attach_plugin(self, plugin) -> None:
        if self.plugin is not None:
            raise ConfigError("user domain already has a plug-in attached")
        if self.sim.started:
            raise ConfigError("cannot attach a plug-in after the run started")
        self.plugin = plugin
        plugin.attach(self)

    def bus_access(self, off, write, be, wdata):
        if self.plugin is None:
            return 0
        return self.plugin.bus_access(off, write, be, wdata)

    def tick(self):
        if self.plugin is not None:
            self.plugin.tick()


class ChecksumAccelerator:
    """Example plug-in: additive byte checksum over a memory range.

    Registers: 0x00 SRC, 0x04 LEN, 0x08 CTRL (write 1 to start),
    0x0C STATUS (bit0 busy, bit1 done, bit2 error), 0x10 SUM.
    Data is fetched word by word through the user-domain master port.
    """

    def __init__(self):
        self.port = None
        self.src = 0
        self.length = 0
        self.sum = 0
        self.busy = False
        self.done = False
        self.error = False
        self._next = 0
        self._end = 0
        self._inflight = 0

    def attach(self, udp: UserDomainPort):
        self.port = udp.master

    def bus_access(self, off, write, be, wdata):
        off &= ~3
        if write:
            if off == 0:
                self.src = wdata
            elif off == 4:
                self.length = wdata
            elif off == 8 and wdata & 1 and not self.busy:
                self._start()
            return 0
        if off == 0:
            return self.src
        if off == 4:
            return self.length
        if off == 0xC:
            return int(self.busy) | int(self.done) << 1 | int(self.error) << 2
        if off == 0x10:
            return self.sum
        return 0

    def _start(self):
        self.sum = 0
        self.done = False
        self.error = False
        self._next = self.src & ~3
        self._end = self.src + self.length
        self._inflight = 0
        self.busy = self.length > 0
        self.done = not self.busy

    def tick(self):
        if not self.busy:
            return
        port = self.port
        while port.responses:
            r = port.pop()
            self._inflight -= 1
            if r.error:
                self.error = True
                continue
            a = r.addr & ~3
            for i in range(4):
                if self.src <= a + i < self._end:
                    self.sum = (self.sum + ((r.rdata >> (8 * i)) & 0xFF)) & 0xFFFF_FFFF
        if not self.error and self._next < self._end and port.can_post(self._next):
            port.post(BusTransaction(self._next))
            self._next += 4
            self._inflight += 1
        if self._inflight == 0 and (self._next >= self._end or self.error):
            self.busy = False
            self.done = True
