"""Functional and cycle-count model of a 3-stage Ibex-class RV32IMCB core.

The core talks to memory through a small duck-typed interface::

    fetch16(addr) -> int      # one instruction halfword
    load(addr, size) -> int   # zero-extended value
    store(addr, size, value)

Any of these may raise :class:`BusError` (becomes an access-fault trap) or,
inside the SoC, :class:`BusWait` when the access has been posted to the
crossbar and its response is not back yet.  A waiting instruction has not
modified architectural state, so it is simply replayed on a later cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

from .isa import MASK, Decoded, decode

# mcause values
CAUSE_MISALIGNED_FETCH = 0
CAUSE_FETCH_ACCESS = 1
CAUSE_ILLEGAL = 2
CAUSE_BREAKPOINT = 3
CAUSE_MISALIGNED_LOAD = 4
CAUSE_LOAD_ACCESS = 5
CAUSE_MISALIGNED_STORE = 6
CAUSE_STORE_ACCESS = 7
CAUSE_ECALL_M = 11
INTERRUPT = 0x8000_0000

IRQ_SOFTWARE = 3
IRQ_TIMER = 7
IRQ_EXTERNAL = 11

MSTATUS_MIE = 1 << 3
MSTATUS_MPIE = 1 << 7
MSTATUS_MPP = 3 << 11

CSR_MSTATUS = 0x300
CSR_MISA = 0x301
CSR_MIE = 0x304
CSR_MTVEC = 0x305
CSR_MCOUNTINHIBIT = 0x320
CSR_MSCRATCH = 0x340
CSR_MEPC = 0x341
CSR_MCAUSE = 0x342
CSR_MTVAL = 0x343
CSR_MIP = 0x344
CSR_MCYCLE = 0xB00
CSR_MINSTRET = 0xB02
CSR_MCYCLEH = 0xB80
CSR_MINSTRETH = 0xB82
CSR_CYCLE = 0xC00
CSR_INSTRET = 0xC02
CSR_CYCLEH = 0xC80
CSR_INSTRETH = 0xC82
CSR_MVENDORID = 0xF11
CSR_MARCHID = 0xF12
CSR_MIMPID = 0xF13
CSR_MHARTID = 0xF14

# RV32 + B(1) + C(2) + I(8) + M(12)
MISA_VALUE = (1 << 30) | (1 << 1) | (1 << 2) | (1 << 8) | (1 << 12)


class BusError(Exception):
    """The addressed target does not exist or rejected the access."""

    def __init__(self, addr: int):
        super().__init__(f"bus error at {addr:#010x}")
        self.addr = addr


class BusWait(Exception):
    """The access is in flight; replay the instruction later.

    ``data`` is True for load/store waits and False for instruction fetches.
    """

    def __init__(self, data: bool = True):
        super().__init__("data" if data else "fetch")
        self.data = data


class _Trap(Exception):
    def __init__(self, cause: int, tval: int = 0):
        self.cause = cause
        self.tval = tval


@dataclass
class CoreTiming:
    """Cycle cost per instruction class; loads and stores add bus wait states."""
    alu: int = 1
    branch_taken: int = 2
    branch_not_taken: int = 1
    jump: int = 2
    mul: int = 1
    div: int = 37
    load: int = 1
    store: int = 1
    csr: int = 1
    system: int = 2
    trap: int = 2


@dataclass
class StepResult:
    instr_retired: bool
    cycles_consumed: int
    trap: int | None = None
    pc: int = 0
    instr: Decoded | None = None


class FlatMemory:
    """Sparse little-endian byte memory without timing, for standalone use."""

    PAGE = 4096

    def __init__(self, regions: list[tuple[int, int]] | None = None):
        self.pages: dict[int, bytearray] = {}
        # (base, size) pairs; None means every address is valid
        self.regions = regions

    def _check(self, addr, size):
        if self.regions is None:
            return
        for base, length in self.regions:
            if base <= addr and addr + size <= base + length:
                return
        raise BusError(addr)

    def _page(self, addr):
        key = addr & ~(self.PAGE - 1)
        p = self.pages.get(key)
        if p is None:
            p = self.pages[key] = bytearray(self.PAGE)
        return p

    def read_bytes(self, addr: int, n: int) -> bytes:
        out = bytearray()
        while n:
            off = addr & (self.PAGE - 1)
            chunk = min(n, self.PAGE - off)
            out += self._page(addr)[off:off + chunk]
            addr, n = (addr + chunk) & MASK, n - chunk
        return bytes(out)

    def write_bytes(self, addr: int, data: bytes) -> None:
        i = 0
        while i < len(data):
            off = addr & (self.PAGE - 1)
            chunk = min(len(data) - i, self.PAGE - off)
            self._page(addr)[off:off + chunk] = data[i:i + chunk]
            addr, i = (addr + chunk) & MASK, i + chunk

    def fetch16(self, addr):
        self._check(addr, 2)
        return int.from_bytes(self.read_bytes(addr, 2), "little")

    def load(self, addr, size):
        self._check(addr, size)
        return int.from_bytes(self.read_bytes(addr, size), "little")

    def store(self, addr, size, value):
        self._check(addr, size)
        self.write_bytes(addr, (value & ((1 << (8 * size)) - 1)).to_bytes(size, "little"))


class Core:
    """RV32IMC + Zicsr + Zba/Zbb/Zbs, machine mode only."""

    def __init__(self, mem, timing: CoreTiming | None = None, hart_id: int = 0):
        self.mem = mem
        self.timing = timing or CoreTiming()
        self.hart_id = hart_id
        self.x = [0] * 32
        self.pc = 0
        self.irq_lines = 0
        self.retire_hook = None
        self.reset(0)

    # ------------------------------------------------------------ state

    def reset(self, boot_addr: int) -> None:
        self.pc = boot_addr & MASK
        self.x = [0] * 32
        self.mstatus = MSTATUS_MPP
        self.mie = 0
        self.mtvec = 0
        self.mscratch = 0
        self.mepc = 0
        self.mcause = 0
        self.mtval = 0
        self.mcountinhibit = 0
        self.mcycle = 0
        self.minstret = 0
        self.irq_lines = 0
        self.wfi = False

    @property
    def mip(self) -> int:
        return self.irq_lines

    def raise_irq(self, line: int) -> None:
        self.irq_lines |= 1 << line

    def clear_irq(self, line: int) -> None:
        self.irq_lines &= ~(1 << line)

    def set_irq(self, line: int, level: bool) -> None:
        if level:
            self.irq_lines |= 1 << line
        else:
            self.irq_lines &= ~(1 << line)

    def read_reg(self, i: int) -> int:
        return self.x[i]

    def write_reg(self, i: int, value: int) -> None:
        if i:
            self.x[i] = value & MASK

    # ------------------------------------------------------------- CSRs

    def csr_read(self, num: int) -> int:
        if num == CSR_MSTATUS:
            return self.mstatus | MSTATUS_MPP
        if num == CSR_MISA:
            return MISA_VALUE
        if num == CSR_MIE:
            return self.mie
        if num == CSR_MTVEC:
            return self.mtvec
        if num == CSR_MSCRATCH:
            return self.mscratch
        if num == CSR_MEPC:
            return self.mepc
        if num == CSR_MCAUSE:
            return self.mcause
        if num == CSR_MTVAL:
            return self.mtval
        if num == CSR_MIP:
            return self.mip
        if num == CSR_MCOUNTINHIBIT:
            return self.mcountinhibit
        if num in (CSR_MCYCLE, CSR_CYCLE):
            return self.mcycle & MASK
        if num in (CSR_MCYCLEH, CSR_CYCLEH):
            return (self.mcycle >> 32) & MASK
        if num in (CSR_MINSTRET, CSR_INSTRET):
            return self.minstret & MASK
        if num in (CSR_MINSTRETH, CSR_INSTRETH):
            return (self.minstret >> 32) & MASK
        if num == CSR_MHARTID:
            return self.hart_id
        if num in (CSR_MVENDORID, CSR_MARCHID, CSR_MIMPID):
            return 0
        raise _Trap(CAUSE_ILLEGAL)

    def csr_write(self, num: int, value: int) -> None:
        value &= MASK
        if num == CSR_MSTATUS:
            self.mstatus = (value & (MSTATUS_MIE | MSTATUS_MPIE)) | MSTATUS_MPP
        elif num == CSR_MIE:
            self.mie = value & ((1 << IRQ_SOFTWARE) | (1 << IRQ_TIMER) | (1 << IRQ_EXTERNAL))
        elif num == CSR_MTVEC:
            self.mtvec = value & ~2
        elif num == CSR_MSCRATCH:
            self.mscratch = value
        elif num == CSR_MEPC:
            self.mepc = value & ~1
        elif num == CSR_MCAUSE:
            self.mcause = value
        elif num == CSR_MTVAL:
            self.mtval = value
        elif num == CSR_MCOUNTINHIBIT:
            self.mcountinhibit = value & 0b101
        elif num == CSR_MCYCLE:
            self.mcycle = (self.mcycle & ~MASK) | value
        elif num == CSR_MCYCLEH:
            self.mcycle = (self.mcycle & MASK) | (value << 32)
        elif num == CSR_MINSTRET:
            self.minstret = (self.minstret & ~MASK) | value
        elif num == CSR_MINSTRETH:
            self.minstret = (self.minstret & MASK) | (value << 32)
        elif num in (CSR_MIP, CSR_MISA):
            pass  # read-only bits here; writes ignored
        else:
            # user counters and ids are read-only, the rest does not exist
            raise _Trap(CAUSE_ILLEGAL)

    # ------------------------------------------------------------ traps

    def _enter_trap(self, cause: int, tval: int, epc: int) -> None:
        self.mepc = epc
        self.mcause = cause
        self.mtval = tval & MASK
        mie = self.mstatus & MSTATUS_MIE
        self.mstatus = (MSTATUS_MPIE if mie else 0) | MSTATUS_MPP
        base = self.mtvec & ~3
        if cause & INTERRUPT and self.mtvec & 1:
            self.pc = (base + 4 * (cause & 0x1F)) & MASK
        else:
            self.pc = base

    def pending_interrupt(self) -> int | None:
        if not self.mstatus & MSTATUS_MIE:
            return None
        pend = self.irq_lines & self.mie
        if not pend:
            return None
        for line in (IRQ_EXTERNAL, IRQ_SOFTWARE, IRQ_TIMER):
            if pend & (1 << line):
                return line
        return None

    # -------------------------------------------------------- execution

    def step(self) -> StepResult:
        """Execute one instruction (or take one trap/interrupt).

        Standalone use: cycles are accumulated into ``mcycle`` here.  Inside
        the SoC, :class:`CoreComponent` counts cycles per clock edge instead.
        """
        r = self._step()
        if not self.mcountinhibit & 1:
            self.mcycle += r.cycles_consumed
        return r

    def _step(self) -> StepResult:
        pc = self.pc
        line = self.pending_interrupt()
        if line is not None:
            self.wfi = False
            self._enter_trap(INTERRUPT | line, 0, pc)
            return StepResult(False, self.timing.trap, INTERRUPT | line, pc)
        try:
            if pc & 1:
                raise _Trap(CAUSE_MISALIGNED_FETCH, pc)
            try:
                ins = self.mem.fetch16(pc)
                if ins & 3 == 3:
                    ins |= self.mem.fetch16((pc + 2) & MASK) << 16
            except BusError as e:
                raise _Trap(CAUSE_FETCH_ACCESS, e.addr)
            d = decode(ins)
            cost = self._execute(d, pc)
        except _Trap as t:
            self._enter_trap(t.cause, t.tval, pc)
            return StepResult(False, self.timing.trap, t.cause, pc)
        if not self.mcountinhibit & 4:
            self.minstret += 1
        if self.retire_hook is not None:
            self.retire_hook(pc, d)
        return StepResult(True, cost, None, pc, d)

    def _execute(self, d: Decoded, pc: int) -> int:
        x = self.x
        kind = d.kind
        t = self.timing
        nxt = (pc + d.size) & MASK
        if kind == "rr":
            if d.rd:
                x[d.rd] = d.fn(x[d.rs1], x[d.rs2])
            self.pc = nxt
            return t.div if d.cost == "div" else t.mul if d.cost == "mul" else t.alu
        if kind == "ri":
            if d.rd:
                x[d.rd] = d.fn(x[d.rs1], d.imm)
            self.pc = nxt
            return t.alu
        if kind == "r1":
            if d.rd:
                x[d.rd] = d.fn(x[d.rs1])
            self.pc = nxt
            return t.alu
        if kind == "br":
            if d.fn(x[d.rs1], x[d.rs2]):
                self.pc = (pc + d.imm) & MASK
                return t.branch_taken
            self.pc = nxt
            return t.branch_not_taken
        if kind == "ld":
            size, signed = d.fn
            addr = (x[d.rs1] + d.imm) & MASK
            if addr & (size - 1):
                raise _Trap(CAUSE_MISALIGNED_LOAD, addr)
            try:
                v = self.mem.load(addr, size)
            except BusError:
                raise _Trap(CAUSE_LOAD_ACCESS, addr)
            if signed and v & (1 << (8 * size - 1)):
                v = (v - (1 << (8 * size))) & MASK
            if d.rd:
                x[d.rd] = v
            self.pc = nxt
            return t.load
        if kind == "st":
            size = d.fn
            addr = (x[d.rs1] + d.imm) & MASK
            if addr & (size - 1):
                raise _Trap(CAUSE_MISALIGNED_STORE, addr)
            try:
                self.mem.store(addr, size, x[d.rs2] & ((1 << (8 * size)) - 1))
            except BusError:
                raise _Trap(CAUSE_STORE_ACCESS, addr)
            self.pc = nxt
            return t.store
        if kind == "lui":
            if d.rd:
                x[d.rd] = d.imm
            self.pc = nxt
            return t.alu
        if kind == "auipc":
            if d.rd:
                x[d.rd] = (pc + d.imm) & MASK
            self.pc = nxt
            return t.alu
        if kind == "jal":
            if d.rd:
                x[d.rd] = nxt
            self.pc = (pc + d.imm) & MASK
            return t.jump
        if kind == "jalr":
            target = (x[d.rs1] + d.imm) & ~1 & MASK
            if d.rd:
                x[d.rd] = nxt
            self.pc = target
            return t.jump
        if kind == "csr":
            return self._exec_csr(d, nxt)
        if kind == "fence":
            self.pc = nxt
            return t.alu
        if kind == "sys":
            name = d.name
            if name == "ecall":
                raise _Trap(CAUSE_ECALL_M, 0)
            if name in ("ebreak", "c.ebreak"):
                raise _Trap(CAUSE_BREAKPOINT, pc)
            if name == "mret":
                mpie = self.mstatus & MSTATUS_MPIE
                self.mstatus = (MSTATUS_MIE if mpie else 0) | MSTATUS_MPIE | MSTATUS_MPP
                self.pc = self.mepc
                return t.system
            # wfi
            self.wfi = True
            self.pc = nxt
            return t.alu
        raise _Trap(CAUSE_ILLEGAL, d.raw)

    def _exec_csr(self, d: Decoded, nxt: int) -> int:
        num = d.imm
        name = d.name
        if name.endswith("i"):
            src = d.rs1
        else:
            src = self.x[d.rs1]
        writes = name in ("csrrw", "csrrwi") or d.rs1 != 0
        reads = not (name in ("csrrw", "csrrwi") and d.rd == 0)
        try:
            old = self.csr_read(num) if reads or writes else 0
            if writes:
                if num >> 10 == 3:
                    raise _Trap(CAUSE_ILLEGAL)
                if name.startswith("csrrw"):
                    new = src
                elif name.startswith("csrrs"):
                    new = old | src
                else:
                    new = old & ~src
                self.csr_write(num, new)
        except _Trap:
            raise _Trap(CAUSE_ILLEGAL, d.raw)
        if d.rd:
            self.x[d.rd] = old & MASK
        self.pc = nxt
        return self.timing.csr


class CoreComponent(Core):
    """The core as a SoC-domain component.

    Each ``tick`` is one SoC cycle.  A memory access that is still in flight
    raises :class:`BusWait`; the instruction is replayed once the response is
    back.  When a replayed load or store completes, the next instruction
    issues in the same cycle, so an uncontended single-cycle access costs
    exactly one cycle plus whatever wait states the bus adds.
    """

    name = "core"

    def __init__(self, mem, timing: CoreTiming | None = None, hart_id: int = 0, on_retire=None, on_trap=None):
        super().__init__(mem, timing, hart_id)
        self.on_retire = on_retire
        self.on_trap = on_trap
        self.stall = 0
        self.waiting = False
        self.wait_on_data = False
        self.cycle = 0
        self.stall_cycles = 0

    def reset(self, boot_addr):
        super().reset(boot_addr)
        self.stall = 0
        self.waiting = False

    def pending_interrupt(self):
        # an access on the bus must complete before the core can redirect
        if self.waiting:
            return None
        return super().pending_interrupt()

    def tick(self):
        self.cycle += 1
        if not self.mcountinhibit & 1:
            self.mcycle += 1
        if self.stall:
            self.stall -= 1
            return
        if self.waiting:
            data_wait = self.wait_on_data
            if not self._issue():
                self.stall_cycles += 1
                return
            self.waiting = False
            if not data_wait or self.stall:
                return
        elif self.wfi:
            if not self.irq_lines & self.mie:
                return
            self.wfi = False
        self._issue()

    def _issue(self) -> bool:
        """Run one instruction; False if it is waiting on the bus."""
        try:
            r = self._step()
        except BusWait as w:
            self.waiting = True
            self.wait_on_data = w.data
            return False
        if r.instr_retired:
            if self.on_retire is not None:
                self.on_retire(r)
            cost = r.cycles_consumed
            # a completed memory access already spent its issue cycle
            if r.instr.kind in ("ld", "st"):
                cost = 1
        else:
            if self.on_trap is not None:
                self.on_trap(r)
            cost = r.cycles_consumed
        self.stall = cost - 1
        return True
