"""Assemble and link the bundled firmware with clang and ld.lld.

Writes <name>.elf next to each <name>.S and a flat <name>.bin of the SRAM
image for programs that live entirely in SRAM.
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

from elftools.elf.elffile import ELFFile

FW = Path(__file__).resolve().parents[1] / "src" / "hypercroc" / "firmware"
ARCH = "rv32imc_zba_zbb_zbs"


def build(src: Path, tmp: Path) -> Path:
    obj = tmp / (src.stem + ".o")
    elf = FW / (src.stem + ".elf")
    subprocess.run(["clang", "--target=riscv32", f"-march={ARCH}", "-mabi=ilp32", "-mno-relax",
                    "-I", str(FW), "-c", str(src), "-o", str(obj)], check=True)
    subprocess.run(["ld.lld", "-T", str(FW / "link.ld"), "--no-relax", "-o", str(elf), str(obj)], check=True)
    return elf


def write_bin(elf_path: Path) -> bool:
    with open(elf_path, "rb") as fh:
        elf = ELFFile(fh)
        segs = [s for s in elf.iter_segments() if s["p_type"] == "PT_LOAD" and s["p_memsz"]]
        if any(s["p_paddr"] >= 0x8000_0000 for s in segs):
            return False
        base = min(s["p_paddr"] for s in segs)
        end = max(s["p_paddr"] + s["p_filesz"] for s in segs)
        img = bytearray(end - base)
        for s in segs:
            d = s.data()
            img[s["p_paddr"] - base:s["p_paddr"] - base + len(d)] = d
    elf_path.with_suffix(".bin").write_bytes(bytes(img))
    return True


def main():
    for tool in ("clang", "ld.lld"):
        if shutil.which(tool) is None:
            sys.exit(f"{tool} not found")
    with tempfile.TemporaryDirectory() as d:
        for src in sorted(FW.glob("*.S")):
            elf = build(src, Path(d))
            print(f"{elf.name}{' + .bin' if write_bin(elf) else ''}")


if __name__ == "__main__":
    main()
