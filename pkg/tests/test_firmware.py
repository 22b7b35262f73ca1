from pathlib import Path

import pytest

from hypercroc import isa
from hypercroc.loader import load_firmware
from hypercroc.soc import Soc

FW = Path(__file__).resolve().parents[1] / "src" / "hypercroc" / "firmware"
PROGRAMS = ["hello", "nop_exit", "dma_roundtrip", "bandwidth", "checksum", "timer_irq",
            "rv32ui", "rv32um", "rv32uc", "rv32ub"]


def run(path, **kw):
    soc = Soc()
    soc.load_image(load_firmware(path, **kw))
    res = soc.run(max_soc_cycles=2_000_000)
    return soc, res


@pytest.mark.parametrize("name", PROGRAMS)
def test_bundled_firmware_exits_zero(name):
    soc, res = run(FW / f"{name}.elf")
    assert not res.timed_out
    assert res.exit_code == 0


@pytest.mark.parametrize("name", [p for p in PROGRAMS if p != "checksum"])
def test_bin_matches_elf(name):
    a, ra = run(FW / f"{name}.elf")
    b, rb = run(FW / f"{name}.bin", format="bin", load_addr=0x1000_0000)
    assert (ra.exit_code, ra.soc_cycles) == (rb.exit_code, rb.soc_cycles)


def test_sources_present():
    for name in PROGRAMS:
        assert (FW / f"{name}.S").exists()
    assert (FW / "hypercroc.h").exists() and (FW / "link.ld").exists()


def test_microtests_catch_a_broken_instruction(monkeypatch):
    key = (0x20, 0)
    name, fn, cost = isa.RR_OPS[key]
    assert name == "sub"
    monkeypatch.setitem(isa.RR_OPS, key, (name, lambda a, b: (a - b + 1) & 0xFFFF_FFFF, cost))
    isa.decode.cache_clear()
    try:
        soc, res = run(FW / "rv32ui.elf")
    finally:
        monkeypatch.undo()
        isa.decode.cache_clear()
    assert res.exit_code not in (None, 0)


def test_timer_irq_cause():
    soc, res = run(FW / "timer_irq.elf")
    assert res.exit_code == 0
    assert soc.core.mcause == 0x8000_0007
