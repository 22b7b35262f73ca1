import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercroc.config import RunConfig
from hypercroc.core import BusError
from hypercroc.hyperbus import (CdcFifo, HyperBusController, HyperDevice, DeviceError, PhyConfig, decode_ca,
                                encode_ca, split_burst, transaction_cycles)
from hypercroc.idma import DmaJob
from hypercroc.kernel import Simulator
from hypercroc.obi import BusTransaction
from hypercroc.perf import PerfCounters
from hypercroc.soc import Soc

from test_obi import Driver

MiB = 1 << 20


def formula(n, L, extra=False, register=False):
    # oracle written out from the protocol phases
    lat = 0 if register else (2 if extra else 1) * L
    return 1 + 3 + lat + math.ceil(n / 2) + 1


# ------------------------------------------------------------- CA word
def test_ca_read_addr0():
    # read and linear-burst bits only
    assert encode_ca(0, True) == (1 << 47) | (1 << 45) == 0xA000_0000_0000


def test_ca_write_addr0():
    assert encode_ca(0, False) == 1 << 45 == 0x2000_0000_0000


def test_ca_addr_0x10():
    # byte 0x10 is word 8: lower three word bits 0, upper word address 1
    assert encode_ca(0x10, True) == (1 << 47) | (1 << 45) | (1 << 16) == 0xA000_0001_0000


def test_ca_lower_word_bits():
    assert encode_ca(0x0E, True) & 0xFFFF == 7


def test_ca_register_space_bit():
    assert encode_ca(0, True, 1) == 0xE000_0000_0000


@given(st.integers(0, (1 << 30) - 1).map(lambda a: a * 2), st.booleans(), st.integers(0, 1))
def test_ca_roundtrip_and_reserved_zero(addr, read, space):
    ca = encode_ca(addr, read, space)
    assert ca >> 48 == 0
    assert (ca >> 3) & 0x1FFF == 0
    assert decode_ca(ca) == (read, space, True, addr)


# --------------------------------------------------------- split_burst
def test_split_empty():
    assert split_burst(0, 0, PhyConfig()) == []


def test_split_4096():
    t = split_burst(0, 4096, PhyConfig())
    assert [(x.cs, x.data_bytes) for x in t] == [(0, 1024)] * 4


def test_split_device_boundary():
    t = split_burst(64 * MiB - 512, 1024, PhyConfig())
    assert [(x.cs, x.data_bytes, x.offset) for x in t] == [(0, 512, 64 * MiB - 512), (1, 512, 0)]


def test_split_beyond_span():
    with pytest.raises(BusError):
        split_burst(256 * MiB - 4, 8, PhyConfig())


@given(st.integers(0, 256 * MiB - 1), st.integers(0, 20_000), st.sampled_from([64, 256, 1024]))
def test_split_covers_range(addr, n, mb):
    cfg = PhyConfig(max_burst_bytes=mb)
    n = min(n, cfg.span - addr)
    t = split_burst(addr, n, cfg)
    a = addr
    for x in t:
        assert x.cs * cfg.capacity + x.offset == a
        assert 0 < x.data_bytes <= mb
        assert x.offset + x.data_bytes <= cfg.capacity
        a += x.data_bytes
    assert a == addr + n


# ------------------------------------------------------------- formula
def test_27_cycles():
    assert transaction_cycles(32, 6) == 27 == formula(32, 6)


def test_523_cycles_and_bandwidth():
    c = transaction_cycles(1024, 6)
    assert c == 523
    mbps = 1024 / (c / 200e6) / 1e6
    assert mbps == pytest.approx(391.6, abs=0.05)
    assert abs(mbps - 400) / 400 < 0.05


def test_peak_ceilings():
    # DDR on an 8-bit bus moves two bytes per clock
    assert 2 * 200e6 / 1e6 == 400
    flash = 2 * 166e6 / 1e6
    assert flash == 332
    assert abs(flash - 333) / 333 < 0.01


@given(st.integers(0, 4096), st.integers(1, 16), st.booleans(), st.booleans())
def test_formula_matches_oracle(n, L, extra, reg):
    assert transaction_cycles(n, L, extra, reg) == formula(n, L, extra, reg)


# ------------------------------------------------------------ devices
def test_fill_values():
    assert HyperDevice("flash").read(123, 4) == b"\xff" * 4
    assert HyperDevice("ram").read(123, 4) == b"\x00" * 4


def test_flash_rejects_write():
    with pytest.raises(DeviceError):
        HyperDevice("flash").write(0, b"x")


def test_sparse_storage():
    d = HyperDevice("flash")
    d.preload(512 * MiB - 1, b"\x42")
    d.preload(0, b"\x24")
    assert len(d.pages) == 2
    assert d.read(512 * MiB - 1, 1) == b"\x42"


def test_cdc_visibility():
    sim = Simulator(100_000_000, 200_000_000)
    phy = sim.domain(1)
    f = CdcFifo(phy, 8, 2)
    f.push("x", 10_000)  # SoC edge 1
    # first PHY edge strictly after 10 ns is edge 3 (15 ns); latency 2 -> edge 4
    for k, vis in ((3, False), (4, True)):
        phy.cycle_count = k
        assert f.ready() is vis


# ---------------------------------------------------- controller rigs
class FakePort:
    id = 9

    def __init__(self):
        self.responses = []
        self.outstanding = 0

    def respond(self, r):
        self.responses.append(r)

    def accepts_response(self):
        return True


def phy_rig(L=6, p=0.0, kind="ram", soc=100_000_000, phy=200_000_000, **kw):
    sim = Simulator(soc, None)
    perf = PerfCounters(soc)
    ctl = HyperBusController(sim, 0, PhyConfig(kind=kind, freq_hz=phy, latency_count=L,
                                               rwds_extra_latency_probability=p, **kw), perf=perf)
    ctl.register()
    return sim, ctl, perf


def measured(ctl, txn):
    """PHY edges in [t_start, t_end] counted from the clock, not the state machine."""
    dom = ctl.phy_domain
    return dom.first_edge_after(txn.t_end_ps) - dom.first_edge_after(txn.t_start_ps - 1)


def data_edges(ctl, perf, txn):
    ch = perf.channels[f"phy0.{'write' if txn.write else 'read'}"]
    dom = ctl.phy_domain
    ks = [dom.first_edge_after(t - 1) for t in ch.times if txn.t_start_ps <= t <= txn.t_end_ps]
    return ks, dom.first_edge_after(txn.t_start_ps - 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 256), st.integers(3, 8), st.booleans(), st.booleans())
def test_event_timing_equals_formula(words, L, extra, write):
    sim, ctl, perf = phy_rig(L, 1.0 if extra else 0.0)
    port = FakePort()
    n = 4 * words
    t = BusTransaction(0x100, write, 0xF, [0] * words if write else 0, words)
    assert ctl.accept(t, 0x100, port, None, words, False)
    sim.run_until(limit_ps=200_000_000, stop=lambda: bool(ctl.log) and not ctl.busy)
    (txn, cycles), = ctl.log
    assert txn.extra_latency is extra
    assert measured(ctl, txn) == formula(n, L, extra)
    ks, k0 = data_edges(ctl, perf, txn)
    assert len(ks) == math.ceil(n / 2)
    assert ks[0] - k0 == 4 + (2 if extra else 1) * L
    assert ks == list(range(ks[0], ks[0] + len(ks)))


def _cfg_access(soc, off, write=False, value=0):
    d = Driver(soc.sim, soc.xbar.add_master(7 + len(soc.xbar.ports), "t"),
               [BusTransaction(0x0300_6000 + off, write, 0xF, value)])
    soc.sim.register(d)
    return d


def test_register_read_device_id_no_latency():
    soc = Soc()
    ctl = soc.phys[0]
    ctl.reg_cs = 2
    ctl.reg_addr = 0
    d = _cfg_access(soc, 0x18)
    soc.run(max_soc_cycles=40)
    assert d.got[0][1].rdata == 0x0C81
    (txn, cycles), = ctl.log
    assert txn.space == 1 and txn.cs == 2
    assert measured(ctl, txn) == formula(2, 6, register=True) == 6


def test_register_write_roundtrip():
    sim, ctl, perf = phy_rig()
    ctl.devices[1].reg_write(0x800, 0x1234)
    assert ctl.devices[1].reg_read(0x800) == 0x1234
    ctl.devices[1].reg_write(0, 0x5555)
    assert ctl.devices[1].reg_read(0) == 0x0C81


def test_flash_write_error_response():
    sim, ctl, perf = phy_rig(kind="flash", phy=166_000_000)
    port = FakePort()
    ctl.accept(BusTransaction(0, True, 0xF, 5), 0, port, None, 1, False)
    assert port.responses and port.responses[0].error
    assert not ctl.log


def test_flash_unwritten_reads_ff():
    sim, ctl, perf = phy_rig(kind="flash", phy=166_000_000)
    port = FakePort()
    ctl.accept(BusTransaction(0x400, False, 0xF, 0, 4), 0x400, port, None, 4, False)
    sim.run_until(limit_ps=10_000_000)
    assert [r.rdata for r in port.responses] == [0xFFFF_FFFF] * 4


def test_tcsm_bounds_chunks():
    sim, ctl, perf = phy_rig(tcsm_ns=1000)
    port = FakePort()
    for i in range(4):
        ctl.accept(BusTransaction(1024 * i, False, 0xF, 0, 256), 1024 * i, port, None, 256, False)
    sim.run_until(limit_ps=100_000_000, stop=lambda: len(port.responses) == 1024)
    assert ctl.log
    for txn, _ in ctl.log:
        assert (txn.t_end_ps - txn.t_start_ps) + ctl.phy_domain.period_ps <= 1000_000
        assert txn.data_bytes <= 2 * (200 - 5 - 12)


# ----------------------------------------------------- end-to-end paths
def _latency_oracle(soc_f, phy_f, L, cdc=2):
    """SoC cycles from grant to response visible for one word, from the CDC rule."""
    def first_after(f, t):  # first edge index strictly after t (exact)
        return math.floor(t * f) + 1

    t_grant = Fraction(0)
    k_start = first_after(phy_f, t_grant) + cdc - 1
    n = formula(4, L)
    k_push = k_start + (4 + L) + 2 - 1  # edge of the second data cycle
    t_push = Fraction(k_push, phy_f)
    soc_vis = first_after(soc_f, t_push) + cdc - 1
    return soc_vis + 1, n  # the front answers in commit, the master sees it next edge


def test_single_word_read_latency():
    soc = Soc()
    d = Driver(soc.sim, soc.xbar.add_master(7, "t"), [BusTransaction(0x8000_0000)])
    soc.sim.register(d)
    soc.run(max_soc_cycles=50)
    (pc, _), = d.posted
    (rc, r), = d.got
    expect, _ = _latency_oracle(100_000_000, 200_000_000, 6)
    assert rc - pc == expect == 9


def _soc(phy_f, **kw):
    return Soc(RunConfig(phy0_freq_hz=phy_f, **kw))


def _dma(soc, job, cycles=400_000):
    dma = soc.dmas[0]
    dma.submit(job)
    soc.sim.run_until(max_soc_cycles=soc.sim.soc.cycle_count + cycles, stop=lambda: not dma.busy)
    assert not dma.busy
    return dma.completed[-1]


@pytest.mark.parametrize("phy_f", [100_000_000, 200_000_000, 150_000_000, 166_000_000])
def test_roundtrip_all_ratios(phy_f):
    rng = random.Random(phy_f)
    cases = [(3, 2, 4096), (0, 0, 4096), (1, 7, 1), (2, 0, 2)]
    cases += [(rng.randrange(8), rng.randrange(8), rng.randint(1, 4096)) for _ in range(8)]
    for so, ho, n in cases:
        soc = _soc(phy_f)
        data = rng.randbytes(n)
        soc.write_mem(0x1000_0000 + so, data)
        j1 = _dma(soc, DmaJob(0x1000_0000 + so, 0x8000_1000 + ho, n))
        j2 = _dma(soc, DmaJob(0x8000_1000 + ho, 0x1000_4000 + so, n))
        assert not j1.error and not j2.error
        assert soc.phys[0].read_bytes(0x1000 + ho, n) == data, (so, ho, n)
        assert soc.read_mem(0x1000_4000 + so, n) == data, (so, ho, n)


def _read_bw(mb, p=0.0, n=16 * 1024):
    soc = Soc(RunConfig(max_burst_bytes=mb, rwds_extra_latency_probability=p))
    _dma(soc, DmaJob(0x8000_0000, 0x1000_0000, n, 0, 0, 1))
    rep = {r.channel: r for r in soc.perf.report()}
    return rep["phy0.read"].mb_per_s, soc


def test_bandwidth_monotone_in_burst_length():
    bws = [_read_bw(mb)[0] for mb in (16, 64, 256, 512, 1024)]
    assert bws == sorted(bws)
    assert all(b < 400 for b in bws)


def test_extra_latency_always():
    bw0, soc0 = _read_bw(1024, 0.0)
    bw1, soc1 = _read_bw(1024, 1.0)
    assert all(t.extra_latency for t, _ in soc1.phys[0].log)
    assert not any(t.extra_latency for t, _ in soc0.phys[0].log)
    assert bw1 < bw0


def test_zero_probability_deterministic():
    a = [(t.ca, t.t_start_ps, c) for t, c in _read_bw(256)[1].phys[0].log]
    b = [(t.ca, t.t_start_ps, c) for t, c in _read_bw(256)[1].phys[0].log]
    assert a == b


def test_partial_extra_latency_seeded():
    logs = []
    for _ in range(2):
        _, soc = _read_bw(256, 0.5)
        logs.append([t.extra_latency for t, _ in soc.phys[0].log])
    assert logs[0] == logs[1]
    assert 0 < sum(logs[0]) < len(logs[0])
