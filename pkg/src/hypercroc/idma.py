"""iDMA engine: register front-end, 1D/2D jobs, decoupled read/write streams.

Register map (byte offsets):

    0x00 SRC         0x04 DST         0x08 LENGTH      0x0C SRC_STRIDE
    0x10 DST_STRIDE  0x14 REPS (1)    0x18 CONF        0x1C STATUS
    0x20 NEXT_ID     0x24 DONE_ID

CONF bit 0 enables the completion interrupt, bits 15:8 cap the burst length
in beats (0 means the crossbar maximum).  STATUS bit 0 busy, bit 1 queue
full, bit 2 error (sticky, write 1 to clear), bit 3 interrupt pending.
Reading NEXT_ID snapshots the staged registers into a job and returns its id,
or 0 when two jobs are already pending.  Reading DONE_ID returns the id of
the last finished job and acknowledges the interrupt.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .obi import MAX_BURST, BusTransaction

SRC, DST, LENGTH, SRC_STRIDE, DST_STRIDE, REPS, CONF, STATUS, NEXT_ID, DONE_ID = range(0, 0x28, 4)

QUEUE_DEPTH = 2
BUFFER_BYTES = 256
MAX_OUTSTANDING = 8


@dataclass
class DmaJob:
    src: int
    dst: int
    length: int
    src_stride: int = 0
    dst_stride: int = 0
    reps: int = 1
    burst_cap: int = MAX_BURST
    job_id: int = 0
    irq_en: bool = False
    error: bool = False


class _Op:
    """One bus request of a stream: ``beats`` words starting at ``addr``;
    only bytes [lo, hi) of a single-beat op belong to the stream."""

    __slots__ = ("addr", "beats", "lo", "hi")

    def __init__(self, addr, beats, lo=0, hi=4):
        self.addr = addr
        self.beats = beats
        self.lo = lo
        self.hi = hi

    @property
    def nbytes(self) -> int:
        return 4 * self.beats if self.beats > 1 else self.hi - self.lo

    def __repr__(self):
        return f"_Op({self.addr:#x}, {self.beats}, {self.lo}, {self.hi})"


def plan_stream(addr: int, length: int, burst_beats: int, window_end=None) -> list[_Op]:
    """Split one row into an unaligned head, aligned bursts and a tail.

    ``window_end(a)`` returns the end of the map window containing ``a`` (or
    None when that target does not take bursts), so bursts never cross it.
    """
    ops = []
    end = addr + length
    a = addr
    if a & 3 and a < end:
        w = a & ~3
        hi = min(4, end - w)
        ops.append(_Op(w, 1, a - w, hi))
        a = w + hi
    while end - a >= 4:
        beats = min(burst_beats, (end - a) // 4)
        if window_end is not None:
            lim = window_end(a)
            beats = 1 if lim is None else max(1, min(beats, (lim - a) // 4))
        ops.append(_Op(a, beats))
        a += 4 * beats
    if a < end:
        ops.append(_Op(a, 1, 0, end - a))
    return ops


class IDma:
    """DMA engine with its register target and two crossbar master ports."""

    def __init__(self, sim, index: int, read_port, write_port, memory_map, perf=None, on_irq=None):
        self.sim = sim
        self.index = index
        self.name = f"dma{index}"
        self.rp = read_port
        self.wp = write_port
        self.map = memory_map
        self.perf = perf
        self.on_irq = on_irq
        self.regs = {SRC: 0, DST: 0, LENGTH: 0, SRC_STRIDE: 0, DST_STRIDE: 0, REPS: 1, CONF: 0}
        self.queue: deque[DmaJob] = deque()
        self.next_id = 1
        self.done_id = 0
        self.error = False
        self.irq_pending = False
        self.completed: list[DmaJob] = []
        self.job: DmaJob | None = None
        self.bus_requests = 0
        self._reset_stream()

    # --------------------------------------------------------- registers
    def bus_access(self, off, write, be, wdata):
        off &= ~3
        if write:
            if off in self.regs:
                self.regs[off] = wdata & 0xFFFF_FFFF
            elif off == STATUS and wdata & 4:
                self.error = False
            return 0
        if off in self.regs:
            return self.regs[off]
        if off == STATUS:
            return int(self.busy) | int(len(self.queue) >= QUEUE_DEPTH) << 1 | int(self.error) << 2 \
                | int(self.irq_pending) << 3
        if off == NEXT_ID:
            return self.launch()
        if off == DONE_ID:
            if self.irq_pending:
                self.irq_pending = False
                self._irq_changed()
            return self.done_id
        return 0

    @property
    def busy(self) -> bool:
        return bool(self.queue)

    def launch(self) -> int:
        """Snapshot the staged registers into a new job; 0 if the queue is full."""
        if len(self.queue) >= QUEUE_DEPTH:
            return 0
        r = self.regs
        cap = (r[CONF] >> 8) & 0xFF or MAX_BURST
        job = DmaJob(r[SRC], r[DST], r[LENGTH], r[SRC_STRIDE], r[DST_STRIDE], max(1, r[REPS]),
                     min(cap, MAX_BURST), self.next_id, bool(r[CONF] & 1))
        self.next_id += 1
        self.queue.append(job)
        return job.job_id

    def submit(self, job: DmaJob) -> int:
        """Host-side launch used by tests; same rules as reading NEXT_ID."""
        if len(self.queue) >= QUEUE_DEPTH:
            return 0
        job.job_id = self.next_id
        job.burst_cap = min(job.burst_cap or MAX_BURST, MAX_BURST)
        self.next_id += 1
        self.queue.append(job)
        return job.job_id

    def _irq_changed(self):
        if self.on_irq is not None:
            self.on_irq()

    # ----------------------------------------------------------- engine
    def _reset_stream(self):
        self.rops: deque[_Op] = deque()
        self.wops: deque[_Op] = deque()
        self.rflight: deque[list] = deque()  # [op, beats still expected]
        self.wflight: deque[int] = deque()  # byte count per write in flight
        self.buf = bytearray()
        self.buf_head = 0
        self.t_start = 0
        self.job_error = False

    def _window_end(self, a):
        e = self.map.decode(a)
        if e is None or not e.bursts_allowed:
            return None
        return e.end

    def _write_window_end(self, a):
        # single-cycle targets get one write per buffered word; bursts only
        # pay off towards the HyperBus controller
        e = self.map.decode(a)
        if e is None or not e.deferred or not e.bursts_allowed:
            return None
        return e.end

    def _mapped(self, a, n) -> bool:
        # the range may span adjacent windows (e.g. consecutive SRAM banks)
        end = a + n
        while a < end:
            e = self.map.decode(a)
            if e is None:
                return False
            a = e.end
        return True

    def _start(self, job: DmaJob) -> bool:
        self._reset_stream()
        self.job = job
        self.t_start = self.sim.now
        if job.length == 0:
            return True
        for r in range(job.reps):
            s = (job.src + r * job.src_stride) & 0xFFFF_FFFF
            d = (job.dst + r * job.dst_stride) & 0xFFFF_FFFF
            if not (self._mapped(s, job.length) and self._mapped(d, job.length)):
                job.error = True
                self.rops.clear()
                self.wops.clear()
                return True
            self.rops.extend(plan_stream(s, job.length, job.burst_cap, self._window_end))
            self.wops.extend(plan_stream(d, job.length, job.burst_cap, self._write_window_end))
        return True

    def _finish(self):
        job = self.job
        job.error = job.error or self.job_error
        self.queue.popleft()
        self.done_id = job.job_id
        if job.error:
            self.error = True
        self.completed.append(job)
        if self.perf is not None:
            soc = self.sim.soc
            self.perf.activity(self.name, self.t_start, soc.edge_time(soc.cycle_count + 1))
        if job.irq_en:
            self.irq_pending = True
            self._irq_changed()
        self.job = None

    def _starved(self) -> bool:
        # the realignment stage holds the bytes of a word split across two
        # writes, so a full buffer that still cannot cover the next write
        # takes one more beat instead of deadlocking
        return bool(self.wops) and self._buffered() < self.wops[0].nbytes

    def _buffered(self) -> int:
        return len(self.buf) - self.buf_head

    def _take(self, n) -> bytes:
        h = self.buf_head
        out = bytes(self.buf[h:h + n])
        h += n
        if h > 4096:
            del self.buf[:h]
            h = 0
        self.buf_head = h
        return out

    def tick(self):
        if self.job is None:
            if not self.queue:
                return
            self._start(self.queue[0])
        rp, wp = self.rp, self.wp

        # read responses into the byte buffer while there is room
        while rp.responses and self.rflight:
            ent = self.rflight[0]
            op = ent[0]
            single = op.beats == 1
            n = op.hi - op.lo if single else 4
            if not self.job_error and self._buffered() + n > BUFFER_BYTES and not self._starved():
                break
            r = rp.pop()
            if r.error:
                self.job_error = True
                self.rflight.popleft()
                continue
            if not self.job_error:
                w = r.rdata.to_bytes(4, "little")
                self.buf += w[op.lo:op.hi] if single else w
            ent[1] -= 1
            if ent[1] == 0:
                self.rflight.popleft()

        # write acks
        while wp.responses:
            r = wp.pop()
            n = self.wflight.popleft()
            if r.error:
                self.job_error = True
            elif self.perf is not None:
                self.perf.record(self.name, self.sim.now, n)

        if self.job_error:
            self.rops.clear()
            self.wops.clear()

        # write engine
        if self.wops and len(self.wflight) < MAX_OUTSTANDING:
            op = self.wops[0]
            if self._buffered() >= op.nbytes and wp.can_post(op.addr):
                self.wops.popleft()
                data = self._take(op.nbytes)
                if op.beats == 1:
                    word = int.from_bytes(bytes(op.lo) + data + bytes(4 - op.hi), "little")
                    be = ((1 << (op.hi - op.lo)) - 1) << op.lo
                    t = BusTransaction(op.addr, True, be, word)
                else:
                    words = [int.from_bytes(data[i:i + 4], "little") for i in range(0, len(data), 4)]
                    t = BusTransaction(op.addr, True, 0xF, words, op.beats)
                wp.post(t)
                self.wflight.append(op.nbytes)
                self.bus_requests += 1

        # read engine
        if self.rops and len(self.rflight) < MAX_OUTSTANDING:
            op = self.rops[0]
            if rp.can_post(op.addr):
                self.rops.popleft()
                rp.post(BusTransaction(op.addr, False, 0xF, 0, op.beats))
                self.rflight.append([op, op.beats])
                self.bus_requests += 1

        if not (self.rops or self.wops or self.rflight or self.wflight):
            self._finish()
