"""Firmware images: 32-bit little-endian RISC-V ELF files or flat binaries."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

from elftools.common.exceptions import ELFError
from elftools.elf.elffile import ELFFile

EM_RISCV = 243


class LoadError(Exception):
    pass


@dataclass
class Segment:
    addr: int
    data: bytes

    @property
    def end(self) -> int:
        return self.addr + len(self.data)


@dataclass
class FirmwareImage:
    segments: list[Segment] = field(default_factory=list)
    entry: int = 0

    def check_overlaps(self) -> None:
        segs = sorted(self.segments, key=lambda s: s.addr)
        for a, b in zip(segs, segs[1:]):
            if b.addr < a.end:
                raise LoadError(f"segments at {a.addr:#x} and {b.addr:#x} overlap")


def _detect(blob: bytes) -> str:
    return "elf" if blob[:4] == b"\x7fELF" else "bin"


def load_elf(blob: bytes, entry: int | None = None) -> FirmwareImage:
    try:
        elf = ELFFile(io.BytesIO(blob))
    except ELFError as e:
        raise LoadError(f"not a valid ELF file: {e}") from None
    if elf.elfclass != 32:
        raise LoadError(f"expected a 32-bit ELF, got ELFCLASS{elf.elfclass}")
    if not elf.little_endian:
        raise LoadError("expected a little-endian ELF")
    mach = elf.header["e_machine"]
    if mach not in ("EM_RISCV", EM_RISCV):
        raise LoadError(f"expected a RISC-V ELF, got machine {mach}")
    img = FirmwareImage(entry=elf.header["e_entry"] if entry is None else entry)
    for i, seg in enumerate(elf.iter_segments()):
        if seg["p_type"] != "PT_LOAD" or seg["p_memsz"] == 0:
            continue
        data = seg.data()
        data += bytes(seg["p_memsz"] - len(data))  # .bss
        img.segments.append(Segment(seg["p_paddr"], bytes(data)))
    if not img.segments:
        raise LoadError("ELF has no loadable segments")
    img.check_overlaps()
    return img


def load_bin(blob: bytes, load_addr: int | None, entry: int | None = None) -> FirmwareImage:
    if load_addr is None:
        raise LoadError("flat binaries need a load address")
    return FirmwareImage([Segment(load_addr, bytes(blob))], load_addr if entry is None else entry)


def load_firmware(path, format: str | None = None, load_addr: int | None = None,
                  entry: int | None = None) -> FirmwareImage:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as e:
        raise LoadError(f"cannot read firmware {path}: {e}") from None
    fmt = format or _detect(blob)
    if fmt == "elf":
        return load_elf(blob, entry)
    if fmt == "bin":
        return load_bin(blob, load_addr, entry)
    raise LoadError(f"unknown firmware format {fmt!r}")
