"""Assembles the HyperCroc SoC from a :class:`RunConfig`."""

from __future__ import annotations

from .config import RunConfig
from .core import IRQ_EXTERNAL, BusError, BusWait, CoreComponent
from .hyperbus import HyperBusController, PhyConfig
from .idma import IDma
from .kernel import ConfigError, Simulator
from .obi import (M_CORE_DATA, M_CORE_INSTR, M_DMA_READ, M_DMA_WRITE, M_USER, BusTransaction, Crossbar,
                  MemoryMap)
from .perf import PerfCounters
from .periph import (ROM_SIZE, SRAM_BANK_SIZE, BootRom, ChecksumAccelerator, Console, SimControl, SramBank, Timer,
                     Uart, UserDomainPort)

PERIPH_SIZE = 0x1000
IDMA_STRIDE = 0x100
HYPER_CFG_STRIDE = 0x100


class CoreBus:
    """Memory interface of the core on top of two crossbar master ports.

    Fetches from single-cycle memories read the target directly, as a
    prefetching fetch unit hides them; fetches from other windows go over
    the instruction port with a one-word buffer.  Loads and stores are
    posted on the data port and the instruction replays until the response
    is back.
    """

    def __init__(self, memory_map: MemoryMap, iport, dport):
        self.map = memory_map
        self.iport = iport
        self.dport = dport
        self.fbuf_addr = None
        self.fbuf = 0
        self.d_inflight = False
        self.i_inflight = False

    def fetch16(self, addr):
        e = self.map.decode(addr)
        if e is None:
            raise BusError(addr)
        t = e.target
        if not e.deferred and hasattr(t, "fetch16"):
            return t.fetch16(addr - e.base)
        wa = addr & ~3
        if self.fbuf_addr != wa:
            p = self.iport
            if self.i_inflight:
                r = p.pop()
                if r is None:
                    raise BusWait(False)
                self.i_inflight = False
                if r.error:
                    raise BusError(addr)
                if r.addr & ~3 != wa:
                    # stale fetch from before a redirect; fetch again
                    return self.fetch16(addr)
                self.fbuf_addr = wa
                self.fbuf = r.rdata
            else:
                if not p.can_post(wa):
                    raise BusWait(False)
                p.post(BusTransaction(wa))
                self.i_inflight = True
                raise BusWait(False)
        return (self.fbuf >> (8 * (addr & 2))) & 0xFFFF

    def _access(self, addr, size, write, value):
        p = self.dport
        sh = 8 * (addr & 3)
        if self.d_inflight:
            r = p.pop()
            if r is None:
                raise BusWait(True)
            self.d_inflight = False
            if r.error:
                raise BusError(addr)
            return (r.rdata >> sh) & ((1 << (8 * size)) - 1)
        if not p.can_post(addr):
            raise BusWait(True)
        be = ((1 << size) - 1) << (addr & 3)
        if write and self.fbuf_addr == addr & ~3:
            self.fbuf_addr = None
        p.post(BusTransaction(addr, write, be, (value << sh) & 0xFFFF_FFFF))
        self.d_inflight = True
        raise BusWait(True)

    def load(self, addr, size):
        return self._access(addr, size, False, 0)

    def store(self, addr, size, value):
        self._access(addr, size, True, value)


class _IrqMux:
    """Level-sensitive OR of the iDMA interrupt lines onto the external irq."""

    def __init__(self, core, dmas):
        self.core = core
        self.dmas = dmas

    def update(self):
        self.core.set_irq(IRQ_EXTERNAL, any(d.irq_pending for d in self.dmas))


class Soc:
    def __init__(self, cfg: RunConfig | None = None, console: Console | None = None):
        cfg = (cfg or RunConfig()).validate()
        self.cfg = cfg
        self.sim = Simulator(cfg.soc_freq_hz, None)
        self.perf = PerfCounters(cfg.soc_freq_hz)
        self.console = console or Console()
        self.map = MemoryMap()
        self.xbar = Crossbar(self.sim, self.map)
        m = self.map

        # PHY domains first so their ids are 1 and 2
        self.phys: list[HyperBusController] = []
        for i in range(cfg.phy_count):
            pc = PhyConfig(kind=getattr(cfg, f"phy{i}_kind"), freq_hz=cfg.phy_freq(i),
                           latency_count=cfg.latency_count, tcsm_ns=cfg.tcsm_ns,
                           max_burst_bytes=cfg.max_burst_bytes,
                           rwds_extra_latency_probability=cfg.rwds_extra_latency_probability,
                           seed=cfg.seed * 2 + i)
            self.phys.append(HyperBusController(self.sim, i, pc, perf=self.perf))

        iport = self.xbar.add_master(M_CORE_INSTR, "core.instr")
        dport = self.xbar.add_master(M_CORE_DATA, "core.data")
        self.bus = CoreBus(m, iport, dport)
        self.core = CoreComponent(self.bus)

        self.rom = BootRom(0)
        m.add("rom", cfg.map_rom, ROM_SIZE, self.rom, bursts_allowed=True)
        self.socctrl = SimControl(self.sim, self.console)
        m.add("socctrl", cfg.map_socctrl, PERIPH_SIZE, self.socctrl)
        self.uart = Uart(self.console)
        m.add("uart", cfg.map_uart, PERIPH_SIZE, self.uart)
        self.timer = Timer(self.sim, self.core)
        m.add("timer", cfg.map_timer, PERIPH_SIZE, self.timer)

        self.srams = []
        for b in range(cfg.sram_banks):
            bank = SramBank(f"sram{b}")
            self.srams.append(bank)
            m.add(f"sram{b}", cfg.map_sram + b * SRAM_BANK_SIZE, SRAM_BANK_SIZE, bank, bursts_allowed=True,
                  loadable=True)

        self.dmas: list[IDma] = []
        n_dma = cfg.phy_count  # one engine per PHY in the dual configuration
        for i in range(n_dma):
            rid, wid = (M_DMA_READ, M_DMA_WRITE) if i == 0 else (5, 6)
            d = IDma(self.sim, i, self.xbar.add_master(rid, f"dma{i}.read"), self.xbar.add_master(wid, f"dma{i}.write"),
                     m, self.perf)
            self.dmas.append(d)
            m.add(f"idma{i}", cfg.map_idma + i * IDMA_STRIDE, IDMA_STRIDE, d)
        self._irq = _IrqMux(self.core, self.dmas)
        for d in self.dmas:
            d.on_irq = self._irq.update

        for i, ctl in enumerate(self.phys):
            base = getattr(cfg, f"map_phy{i}")
            size = cfg.phy_window(i)
            if size > ctl.cfg.span:
                raise ConfigError(f"phy{i} window {size:#x} exceeds the device span {ctl.cfg.span:#x}")
            m.add(f"phy{i}", base, size, ctl, bursts_allowed=True, deferred=True, loadable=True)
            m.add(f"phy{i}cfg", cfg.map_hyper_cfg + i * HYPER_CFG_STRIDE, HYPER_CFG_STRIDE, ctl.cfg_target,
                  deferred=True)

        self.user = UserDomainPort(self.sim, self.xbar.add_master(M_USER, "user"))
        m.add("user", cfg.map_user, cfg.user_size, self.user)
        if cfg.plugin == "checksum":
            self.user.attach_plugin(ChecksumAccelerator())
        m.frozen = True

        # tick order inside the SoC domain does not matter for data paths:
        # every shared resource resolves in commit
        self.sim.register(self.core)
        for d in self.dmas:
            self.sim.register(d)
        self.sim.register(self.user)
        self.sim.register(self.timer)
        self.sim.register(self.xbar)
        for ctl in self.phys:
            ctl.register()
        self.entry = None

    # ------------------------------------------------------ host access
    def _host_target(self, addr, n):
        e = self.map.decode(addr)
        if e is None or addr + n > e.end:
            raise BusError(addr)
        if not hasattr(e.target, "read_bytes"):
            raise BusError(addr)
        return e, addr - e.base

    def read_mem(self, addr: int, n: int) -> bytes:
        out = bytearray()
        while n:
            e = self.map.decode(addr)
            if e is None:
                raise BusError(addr)
            k = min(n, e.end - addr)
            e, off = self._host_target(addr, k)
            out += e.target.read_bytes(off, k)
            addr += k
            n -= k
        return bytes(out)

    def write_mem(self, addr: int, data: bytes) -> None:
        i = 0
        n = len(data)
        while i < n:
            e = self.map.decode(addr + i)
            if e is None:
                raise BusError(addr + i)
            k = min(n - i, e.end - (addr + i))
            e, off = self._host_target(addr + i, k)
            e.target.write_bytes(off, data[i:i + k])
            i += k

    def load_image(self, image) -> None:
        """Stage a :class:`FirmwareImage` and point the boot stub at its entry."""
        for seg in image.segments:
            end = seg.addr + len(seg.data)
            a = seg.addr
            while a < end:
                e = self.map.decode(a)
                if e is None or not e.loadable:
                    raise ConfigError(f"segment at {seg.addr:#x} (+{len(seg.data)}) lands outside loadable memory")
                a = min(end, e.end)
            self.write_mem(seg.addr, seg.data)
        self.set_entry(image.entry)

    def set_entry(self, entry: int) -> None:
        self.entry = entry
        self.rom.program_stub(entry)
        self.core.reset(self.cfg.map_rom)

    def run(self, max_soc_cycles: int | None = None, limit_ps: int | None = None):
        if max_soc_cycles is None and limit_ps is None:
            max_soc_cycles = self.cfg.max_soc_cycles
        return self.sim.run_until(limit_ps, max_soc_cycles)

    @property
    def exit_code(self):
        return self.sim.exit_code
