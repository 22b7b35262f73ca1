import struct

import pytest

from hypercroc.kernel import ConfigError
from hypercroc.loader import LoadError, load_bin, load_elf, load_firmware
from hypercroc.soc import Soc


def make_elf(segments, entry, cls=1, machine=243, little=True):
    """Minimal ELF with program headers only; segments are (paddr, data, memsz)."""
    e = "<" if little else ">"
    if cls == 1:
        ehsize, phsize = 52, 32
    else:
        ehsize, phsize = 64, 56
    off = ehsize + phsize * len(segments)
    ident = b"\x7fELF" + bytes([cls, 1 if little else 2, 1, 0]) + bytes(8)
    phs = b""
    body = b""
    for paddr, data, memsz in segments:
        if cls == 1:
            phs += struct.pack(e + "IIIIIIII", 1, off + len(body), paddr, paddr, len(data), memsz, 7, 4)
        else:
            phs += struct.pack(e + "IIQQQQQQ", 1, 7, off + len(body), paddr, paddr, len(data), memsz, 4)
        body += data
    if cls == 1:
        hdr = ident + struct.pack(e + "HHIIIIIHHHHHH", 2, machine, 1, entry, ehsize, 0, 0, ehsize, phsize,
                                  len(segments), 40, 0, 0)
    else:
        hdr = ident + struct.pack(e + "HHIQQQIHHHHHH", 2, machine, 1, entry, ehsize, 0, 0, ehsize, phsize,
                                  len(segments), 64, 0, 0)
    return hdr + phs + body


def test_flat_bin(tmp_path):
    p = tmp_path / "a.bin"
    p.write_bytes(bytes(8))
    img = load_firmware(p, "bin", 0x1000_0000)
    assert len(img.segments) == 1 and img.segments[0].addr == 0x1000_0000
    assert img.entry == 0x1000_0000


def test_bin_needs_load_addr():
    with pytest.raises(LoadError):
        load_bin(b"1234", None)


def test_elf_two_segments():
    blob = make_elf([(0x1000_0000, b"\x13\x00\x00\x00", 4), (0x1000_1000, b"\x01\x02", 16)], 0x1000_0000)
    img = load_elf(blob)
    assert img.entry == 0x1000_0000
    assert [(s.addr, len(s.data)) for s in img.segments] == [(0x1000_0000, 4), (0x1000_1000, 16)]
    assert img.segments[1].data == b"\x01\x02" + bytes(14)


def test_elf_entry_override():
    blob = make_elf([(0x1000_0000, b"\x00" * 4, 4)], 0x1000_0000)
    assert load_elf(blob, 0x1000_0002).entry == 0x1000_0002


def test_elf64_rejected():
    blob = make_elf([(0x1000_0000, b"\x00" * 4, 4)], 0x1000_0000, cls=2)
    with pytest.raises(LoadError, match="32-bit"):
        load_elf(blob)


def test_wrong_machine_rejected():
    blob = make_elf([(0x1000_0000, b"\x00" * 4, 4)], 0x1000_0000, machine=62)
    with pytest.raises(LoadError, match="RISC-V"):
        load_elf(blob)


def test_big_endian_rejected():
    blob = make_elf([(0x1000_0000, b"\x00" * 4, 4)], 0x1000_0000, little=False)
    with pytest.raises(LoadError):
        load_elf(blob)


def test_overlapping_segments_rejected():
    blob = make_elf([(0x1000_0000, b"\x00" * 8, 8), (0x1000_0004, b"\x00" * 4, 4)], 0x1000_0000)
    with pytest.raises(LoadError, match="overlap"):
        load_elf(blob)


def test_segment_in_unmapped_space_named():
    img = load_elf(make_elf([(0x4000_0000, b"\x00" * 4, 4)], 0x4000_0000))
    with pytest.raises(ConfigError, match="0x40000000"):
        Soc().load_image(img)


def test_segment_in_peripheral_rejected():
    img = load_elf(make_elf([(0x0300_2000, b"\x00" * 4, 4)], 0x1000_0000))
    with pytest.raises(ConfigError):
        Soc().load_image(img)


def test_hyperram_segment_loads():
    soc = Soc()
    soc.load_image(load_elf(make_elf([(0x8000_0000, b"abcd", 4)], 0x1000_0000)))
    assert soc.read_mem(0x8000_0000, 4) == b"abcd"


def test_garbage_rejected(tmp_path):
    p = tmp_path / "x.elf"
    p.write_bytes(b"\x7fELFjunk")
    with pytest.raises(LoadError):
        load_firmware(p)
