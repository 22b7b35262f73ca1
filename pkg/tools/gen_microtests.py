"""Generate the rv32-style self-checking micro-tests under src/hypercroc/firmware.

Every case is a short instruction snippet followed by a compare against an
expected value.  Expected values come from executing the same snippet on the
reference interpreter in tests/refsim.py, which shares no code with the
simulator.  A failing test exits with its test number.
"""

import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

import rvgen as g  # noqa: E402
from refsim import RefMachine  # noqa: E402

OUT = ROOT / "src" / "hypercroc" / "firmware"
BASE = 0x1000_0000
DATA = 0x1000_6000
M32 = 0xFFFF_FFFF


class Snip:
    """Parallel asm text and machine words (word, size) for a snippet."""

    def __init__(self):
        self.lines = []
        self.words = []

    def add(self, asm, word, size=4):
        self.lines.append(asm)
        self.words.append((word, size))
        return self

    def label(self, text):
        self.lines.append(text)
        return self

    def li(self, rd, v):
        v &= M32
        lo = v & 0xFFF
        if lo & 0x800:
            lo -= 0x1000
        hi = ((v - lo) >> 12) & 0xFFFFF
        self.add(f"lui x{rd}, {hi:#x}", g.enc_lui(rd, hi))
        self.add(f"addi x{rd}, x{rd}, {lo}", g.enc_i("addi", rd, rd, lo))
        return self


def run_ref(snip, reg):
    code = b"".join(w.to_bytes(n, "little") for w, n in snip.words)
    m = RefMachine(BASE, 0x8000)
    m.mem[:len(code)] = code
    m.pc = BASE
    m.run(BASE + len(code), max_steps=1000)
    return m.r[reg]


def c_jr(rs1):
    return (4 << 13) | (rs1 << 7) | 2


def c_jalr(rs1):
    return (4 << 13) | (1 << 12) | (rs1 << 7) | 2


VECTORS = [(0, 0), (1, 1), (0xFFFFFFFF, 1), (0x80000000, 0xFFFFFFFF), (0x7FFFFFFF, 0x80000000),
           (0x12345678, 0x9ABCDEF0), (0xFFFF0000, 0x0000FFFF), (5, 31), (0xDEADBEEF, 33)]


def vectors(rng, n_rand=4):
    out = list(VECTORS)
    out += [(rng.getrandbits(32), rng.getrandbits(32)) for _ in range(n_rand)]
    return out


def rr_cases(ops, rng):
    cases = []
    for op in ops:
        for a, b in vectors(rng):
            s = Snip().li(1, a).li(2, b).add(f"{op} x3, x1, x2", g.enc_r(op, 3, 1, 2))
            cases.append((f"{op} {a:#x} {b:#x}", s, 3))
    return cases


def ui_cases(rng):
    cases = rr_cases(["add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and"], rng)
    for op in g.I_OPS:
        for a in [0, 1, 0xFFFFFFFF, 0x80000000, 0x7FF, rng.getrandbits(32), rng.getrandbits(32)]:
            for imm in [0, 1, -1, 2047, -2048, rng.randint(-2048, 2047)]:
                s = Snip().li(1, a).add(f"{op} x3, x1, {imm}", g.enc_i(op, 3, 1, imm))
                cases.append((f"{op}", s, 3))
    for op in ("slli", "srli", "srai"):
        for a in [0x80000001, 0xFFFFFFFF, 0x12345678]:
            for sh in [0, 1, 7, 31]:
                s = Snip().li(1, a).add(f"{op} x3, x1, {sh}", g.enc_shift(op, 3, 1, sh))
                cases.append((op, s, 3))
    for imm in [0, 1, 0x80000, 0xFFFFF]:
        cases.append(("lui", Snip().add(f"lui x3, {imm:#x}", g.enc_lui(3, imm)), 3))
        s = Snip().add(f"auipc x3, {imm:#x}", g.enc_auipc(3, imm)).add("auipc x4, 0", g.enc_auipc(4, 0)) \
            .add("sub x3, x3, x4", g.enc_r("sub", 3, 3, 4))
        cases.append(("auipc", s, 3))
    for op in g.BRANCHES:
        for a, b in [(0, 0), (1, 2), (2, 1), (0xFFFFFFFF, 1), (1, 0xFFFFFFFF), (0x80000000, 0x7FFFFFFF), (7, 7)]:
            s = Snip().li(1, a).li(2, b).add("addi x3, x0, 0", g.enc_i("addi", 3, 0, 0)) \
                .add(f"{op} x1, x2, 1f", g.enc_branch(op, 1, 2, 8)).add("addi x3, x0, 1", g.enc_i("addi", 3, 0, 1)) \
                .label("1:")
            cases.append((op, s, 3))
    s = Snip().add("auipc x2, 0", g.enc_auipc(2, 0)).add("jal x1, 1f", g.enc_jal(1, 8)) \
        .add("addi x3, x0, 1", g.enc_i("addi", 3, 0, 1)).label("1:").add("sub x3, x1, x2", g.enc_r("sub", 3, 1, 2))
    cases.append(("jal", s, 3))
    s = Snip().add("auipc x2, 0", g.enc_auipc(2, 0)).add("jalr x1, 12(x2)", g.enc_jalr(1, 2, 12)) \
        .add("addi x3, x0, 1", g.enc_i("addi", 3, 0, 1)).add("sub x3, x1, x2", g.enc_r("sub", 3, 1, 2))
    cases.append(("jalr", s, 3))
    s = Snip().add("auipc x2, 0", g.enc_auipc(2, 0)).add("addi x2, x2, 13", g.enc_i("addi", 2, 2, 13)) \
        .add("jalr x1, -1(x2)", g.enc_jalr(1, 2, -1)).add("addi x3, x0, 1", g.enc_i("addi", 3, 0, 1)) \
        .add("sub x3, x1, x2", g.enc_r("sub", 3, 1, 2))
    cases.append(("jalr lsb", s, 3))
    for word in [0x80FF7F01, 0x12345678]:
        for op, size in [("lb", 1), ("lbu", 1), ("lh", 2), ("lhu", 2), ("lw", 4)]:
            for off in range(0, 4, size):
                s = Snip().li(30, DATA).li(5, word).add("sw x5, 0(x30)", g.enc_store("sw", 5, 30, 0)) \
                    .add(f"{op} x3, {off}(x30)", g.enc_load(op, 3, 30, off))
                cases.append((op, s, 3))
        for op, size in [("sb", 1), ("sh", 2), ("sw", 4)]:
            for off in range(0, 4, size):
                s = Snip().li(30, DATA).li(5, 0xA5A5A5A5).add("sw x5, 0(x30)", g.enc_store("sw", 5, 30, 0)) \
                    .li(6, word).add(f"{op} x6, {off}(x30)", g.enc_store(op, 6, 30, off)) \
                    .add("lw x3, 0(x30)", g.enc_load("lw", 3, 30, 0))
                cases.append((op, s, 3))
    s = Snip().li(1, 123).add("add x0, x1, x1", g.enc_r("add", 0, 1, 1)).add("addi x3, x0, 0", g.enc_i("addi", 3, 0, 0))
    cases.append(("x0", s, 3))
    return cases


def um_cases(rng):
    cases = rr_cases(["mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu"], rng)
    for op in ("div", "divu", "rem", "remu"):
        for a, b in [(100, 7), (-100 & M32, 7), (100, -7 & M32), (0x80000000, 0xFFFFFFFF), (5, 0), (0, 0)]:
            s = Snip().li(1, a).li(2, b).add(f"{op} x3, x1, x2", g.enc_r(op, 3, 1, 2))
            cases.append((op, s, 3))
    return cases


def ub_cases(rng):
    cases = rr_cases(["sh1add", "sh2add", "sh3add", "andn", "orn", "xnor", "min", "minu", "max", "maxu",
                      "rol", "ror", "bclr", "bext", "binv", "bset"], rng)
    vals = [0, 1, 0x80000000, 0xFFFFFFFF, 0x00FF0080, 0x12345678, 0x0000F00F, 0x80008000, rng.getrandbits(32)]
    for op in list(g.UNARY) + ["zext.h"]:
        for a in vals:
            w = g.enc_zext_h(3, 1) if op == "zext.h" else g.enc_unary(op, 3, 1)
            cases.append((op, Snip().li(1, a).add(f"{op} x3, x1", w), 3))
    for op in ("rori", "bclri", "bseti", "binvi", "bexti"):
        for a in vals[:6]:
            for sh in (0, 1, 15, 31):
                cases.append((op, Snip().li(1, a).add(f"{op} x3, x1, {sh}", g.enc_shift(op, 3, 1, sh)), 3))
    return cases


def uc_cases(rng):
    cases = []
    for imm in (-32, -1, 0, 1, 31):
        cases.append(("c.li", Snip().add(f"c.li x3, {imm}", g.c_li(3, imm), 2), 3))
        s = Snip().li(3, 0x1000).add(f"c.addi x3, {imm}", g.c_addi(3, imm), 2) if imm else None
        if s:
            cases.append(("c.addi", s, 3))
    for imm in (1, 31, -32, -1):
        cases.append(("c.lui", Snip().add(f"c.lui x3, {imm & 0xFFFFF:#x}", g.c_lui(3, imm), 2), 3))
    for a, b in [(0x12345678, 0x0F0F0F0F), (0xFFFFFFFF, 1), (0, 0x80000000)]:
        cases.append(("c.mv", Snip().li(1, a).add("c.mv x3, x1", g.c_mv(3, 1), 2), 3))
        cases.append(("c.add", Snip().li(1, a).li(3, b).add("c.add x3, x1", g.c_add(3, 1), 2), 3))
        for op in ("sub", "xor", "or", "and"):
            s = Snip().li(9, a).li(10, b).add(f"c.{op} x9, x10", g.c_alu(op, 9, 10), 2)
            cases.append((f"c.{op}", s, 9))
        for imm in (-32, -1, 0, 15, 31):
            cases.append(("c.andi", Snip().li(9, a).add(f"c.andi x9, {imm}", g.c_andi(9, imm), 2), 9))
        for sh in (1, 4, 31):
            cases.append(("c.slli", Snip().li(3, a).add(f"c.slli x3, {sh}", g.c_slli(3, sh), 2), 3))
            cases.append(("c.srli", Snip().li(9, a).add(f"c.srli x9, {sh}", g.c_srli(9, sh), 2), 9))
            cases.append(("c.srai", Snip().li(9, a).add(f"c.srai x9, {sh}", g.c_srai(9, sh), 2), 9))
    for off in (0, 4, 64, 124):
        s = Snip().li(8, DATA).li(10, 0xCAFEF00D ^ off).add(f"c.sw x10, {off}(x8)", g.c_sw(10, 8, off), 2) \
            .add(f"c.lw x9, {off}(x8)", g.c_lw(9, 8, off), 2)
        cases.append(("c.lw/c.sw", s, 9))
    for off in (0, 8, 128, 252):
        s = Snip().li(2, DATA).li(4, 0x5EED0000 + off).add(f"c.swsp x4, {off}(sp)", g.c_swsp(4, off), 2) \
            .add(f"c.lwsp x3, {off}(sp)", g.c_lwsp(3, off), 2)
        cases.append(("c.lwsp/c.swsp", s, 3))
    for imm in (4, 64, 1020):
        s = Snip().li(2, DATA).add(f"c.addi4spn x9, sp, {imm}", g.c_addi4spn(9, imm), 2) \
            .add("sub x9, x9, sp", g.enc_r("sub", 9, 9, 2))
        cases.append(("c.addi4spn", s, 9))
    for imm in (-512, -16, 16, 496):
        s = Snip().li(2, DATA).add(f"c.addi16sp sp, {imm}", g.c_addi16sp(imm), 2) \
            .add("addi x3, sp, 0", g.enc_i("addi", 3, 2, 0))
        cases.append(("c.addi16sp", s, 3))
    for v in (0, 1, 0x80000000):
        for name, enc in (("c.beqz", g.c_beqz), ("c.bnez", g.c_bnez)):
            s = Snip().li(9, v).add("c.li x3, 0", g.c_li(3, 0), 2).add(f"{name} x9, 1f", enc(9, 4), 2) \
                .add("c.li x3, 1", g.c_li(3, 1), 2).label("1:")
            cases.append((name, s, 3))
    s = Snip().add("c.li x3, 0", g.c_li(3, 0), 2).add("c.j 1f", g.c_j(4), 2).add("c.li x3, 1", g.c_li(3, 1), 2) \
        .label("1:")
    cases.append(("c.j", s, 3))
    s = Snip().add("auipc x5, 0", g.enc_auipc(5, 0)).add("c.jal 1f", g.c_jal(4), 2) \
        .add("c.li x3, 1", g.c_li(3, 1), 2).label("1:").add("sub x3, x1, x5", g.enc_r("sub", 3, 1, 5))
    cases.append(("c.jal", s, 3))
    s = Snip().add("auipc x5, 0", g.enc_auipc(5, 0)).add("addi x6, x5, 12", g.enc_i("addi", 6, 5, 12)) \
        .add("c.jalr x6", c_jalr(6), 2).add("c.li x3, 1", g.c_li(3, 1), 2).add("sub x3, x1, x5", g.enc_r("sub", 3, 1, 5))
    cases.append(("c.jalr", s, 3))
    s = Snip().add("c.li x3, 0", g.c_li(3, 0), 2).add("auipc x5, 0", g.enc_auipc(5, 0)) \
        .add("addi x6, x5, 12", g.enc_i("addi", 6, 5, 12)).add("c.jr x6", c_jr(6), 2).add("c.li x3, 1", g.c_li(3, 1), 2)
    cases.append(("c.jr", s, 3))
    return cases


HEADER = """// Generated by tools/gen_microtests.py; do not edit.
// {title}
// Expected values come from the reference interpreter.  On failure the
// program exits with the number of the failing test (register x28).
#include "hypercroc.h"

.option {rvc}
.section .text.start
.globl _start
_start:
"""

FOOTER = """
    EXIT 0
fail:
    EXIT_REG x28
"""


def emit(name, title, cases, rvc=False):
    out = [HEADER.format(title=title, rvc="rvc" if rvc else "norvc")]
    for n, (desc, snip, reg) in enumerate(cases, 1):
        exp = run_ref(snip, reg)
        out.append(f"    // {n}: {desc}\n")
        out.append(f"    li x28, {n}\n")
        for line in snip.lines:
            out.append(f"    {line}\n" if not line.endswith(":") else f"{line}\n")
        out.append(f"    li x7, {exp:#x}\n")
        out.append(f"    beq x{reg}, x7, 1f\n    j fail\n1:\n")
    out.append(FOOTER)
    (OUT / f"{name}.S").write_text("".join(out))
    return len(cases)


def main():
    rng = random.Random(2024)
    total = 0
    total += emit("rv32ui", "RV32I base integer instructions", ui_cases(rng))
    total += emit("rv32um", "M extension", um_cases(rng))
    total += emit("rv32ub", "Zba/Zbb/Zbs", ub_cases(rng))
    total += emit("rv32uc", "C extension", uc_cases(rng), rvc=True)
    print(f"generated {total} test cases")


if __name__ == "__main__":
    main()
