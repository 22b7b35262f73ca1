"""RV32IMC + Zicsr + Zba/Zbb/Zbs instruction decoding.

Compressed instructions are expanded to their 32-bit equivalents and then go
through the regular decoder, so execution only deals with one encoding.
``decode`` results are cached by instruction bits.
"""

from __future__ import annotations

import functools
from typing import NamedTuple

MASK = 0xFFFF_FFFF


def sext(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


def s32(value: int) -> int:
    return value - (1 << 32) if value & 0x8000_0000 else value


class Decoded(NamedTuple):
    kind: str        # execution class: rr, ri, r1, lui, auipc, jal, jalr, br, ld, st, csr, sys, fence, illegal
    name: str        # mnemonic of the (expanded) instruction
    fn: object       # operation callable for ALU/branch kinds, width/signedness for memory kinds
    rd: int
    rs1: int
    rs2: int
    imm: int
    size: int        # 2 for compressed, 4 otherwise
    cost: str        # timing class: alu, mul, div, branch, jump, load, store, csr, system
    raw: int


# ---------------------------------------------------------------- ALU ops

def _clz(a):
    return 32 - a.bit_length()


def _ctz(a):
    return 32 if a == 0 else (a & -a).bit_length() - 1


def _orc_b(a):
    r = 0
    for i in range(0, 32, 8):
        if (a >> i) & 0xFF:
            r |= 0xFF << i
    return r


def _rev8(a):
    return int.from_bytes(a.to_bytes(4, "little"), "big")


def _rol(a, b):
    b &= 31
    return ((a << b) | (a >> (32 - b))) & MASK


def _ror(a, b):
    b &= 31
    return ((a >> b) | (a << (32 - b))) & MASK


def _sra(a, b):
    return (s32(a) >> (b & 31)) & MASK


def _mulh(a, b):
    return ((s32(a) * s32(b)) >> 32) & MASK


def _mulhsu(a, b):
    return ((s32(a) * b) >> 32) & MASK


def _div(a, b):
    if b == 0:
        return MASK
    sa, sb = s32(a), s32(b)
    if sa == -0x8000_0000 and sb == -1:
        return a
    q = abs(sa) // abs(sb)
    return (-q if (sa < 0) != (sb < 0) else q) & MASK


def _divu(a, b):
    return MASK if b == 0 else a // b


def _rem(a, b):
    if b == 0:
        return a
    sa, sb = s32(a), s32(b)
    if sa == -0x8000_0000 and sb == -1:
        return 0
    r = abs(sa) % abs(sb)
    return (-r if sa < 0 else r) & MASK


def _remu(a, b):
    return a if b == 0 else a % b


RR_OPS = {
    # (funct7, funct3): (name, fn, cost)
    (0x00, 0): ("add", lambda a, b: (a + b) & MASK, "alu"),
    (0x20, 0): ("sub", lambda a, b: (a - b) & MASK, "alu"),
    (0x00, 1): ("sll", lambda a, b: (a << (b & 31)) & MASK, "alu"),
    (0x00, 2): ("slt", lambda a, b: int(s32(a) < s32(b)), "alu"),
    (0x00, 3): ("sltu", lambda a, b: int(a < b), "alu"),
    (0x00, 4): ("xor", lambda a, b: a ^ b, "alu"),
    (0x00, 5): ("srl", lambda a, b: a >> (b & 31), "alu"),
    (0x20, 5): ("sra", _sra, "alu"),
    (0x00, 6): ("or", lambda a, b: a | b, "alu"),
    (0x00, 7): ("and", lambda a, b: a & b, "alu"),
    (0x01, 0): ("mul", lambda a, b: (a * b) & MASK, "mul"),
    (0x01, 1): ("mulh", _mulh, "mul"),
    (0x01, 2): ("mulhsu", _mulhsu, "mul"),
    (0x01, 3): ("mulhu", lambda a, b: (a * b) >> 32, "mul"),
    (0x01, 4): ("div", _div, "div"),
    (0x01, 5): ("divu", _divu, "div"),
    (0x01, 6): ("rem", _rem, "div"),
    (0x01, 7): ("remu", _remu, "div"),
    # Zba
    (0x10, 2): ("sh1add", lambda a, b: ((a << 1) + b) & MASK, "alu"),
    (0x10, 4): ("sh2add", lambda a, b: ((a << 2) + b) & MASK, "alu"),
    (0x10, 6): ("sh3add", lambda a, b: ((a << 3) + b) & MASK, "alu"),
    # Zbb
    (0x20, 7): ("andn", lambda a, b: a & ~b & MASK, "alu"),
    (0x20, 6): ("orn", lambda a, b: (a | ~b) & MASK, "alu"),
    (0x20, 4): ("xnor", lambda a, b: ~(a ^ b) & MASK, "alu"),
    (0x05, 4): ("min", lambda a, b: a if s32(a) < s32(b) else b, "alu"),
    (0x05, 5): ("minu", lambda a, b: a if a < b else b, "alu"),
    (0x05, 6): ("max", lambda a, b: a if s32(a) > s32(b) else b, "alu"),
    (0x05, 7): ("maxu", lambda a, b: a if a > b else b, "alu"),
    (0x30, 1): ("rol", _rol, "alu"),
    (0x30, 5): ("ror", _ror, "alu"),
    # Zbs
    (0x24, 1): ("bclr", lambda a, b: a & ~(1 << (b & 31)) & MASK, "alu"),
    (0x24, 5): ("bext", lambda a, b: (a >> (b & 31)) & 1, "alu"),
    (0x34, 1): ("binv", lambda a, b: a ^ (1 << (b & 31)), "alu"),
    (0x14, 1): ("bset", lambda a, b: a | (1 << (b & 31)), "alu"),
}

RI_OPS = {
    0: ("addi", lambda a, i: (a + i) & MASK),
    2: ("slti", lambda a, i: int(s32(a) < i)),
    3: ("sltiu", lambda a, i: int(a < (i & MASK))),
    4: ("xori", lambda a, i: (a ^ i) & MASK),
    6: ("ori", lambda a, i: (a | i) & MASK),
    7: ("andi", lambda a, i: a & i & MASK),
}

# shift-immediate group keyed by (funct3, imm[11:5])
SHIFT_IMM_OPS = {
    (1, 0x00): ("slli", lambda a, s: (a << s) & MASK),
    (5, 0x00): ("srli", lambda a, s: a >> s),
    (5, 0x20): ("srai", _sra),
    (1, 0x24): ("bclri", lambda a, s: a & ~(1 << s) & MASK),
    (1, 0x14): ("bseti", lambda a, s: a | (1 << s)),
    (1, 0x34): ("binvi", lambda a, s: a ^ (1 << s)),
    (5, 0x24): ("bexti", lambda a, s: (a >> s) & 1),
    (5, 0x30): ("rori", _ror),
}

# unary Zbb ops keyed by (funct3, imm[11:0])
UNARY_OPS = {
    (1, 0x600): ("clz", _clz),
    (1, 0x601): ("ctz", _ctz),
    (1, 0x602): ("cpop", lambda a: bin(a).count("1")),
    (1, 0x604): ("sext.b", lambda a: sext(a, 8) & MASK),
    (1, 0x605): ("sext.h", lambda a: sext(a, 16) & MASK),
    (5, 0x287): ("orc.b", _orc_b),
    (5, 0x698): ("rev8", _rev8),
}

BRANCH_OPS = {
    0: ("beq", lambda a, b: a == b),
    1: ("bne", lambda a, b: a != b),
    4: ("blt", lambda a, b: s32(a) < s32(b)),
    5: ("bge", lambda a, b: s32(a) >= s32(b)),
    6: ("bltu", lambda a, b: a < b),
    7: ("bgeu", lambda a, b: a >= b),
}

# funct3 -> (name, bytes, signed)
LOAD_OPS = {0: ("lb", 1, True), 1: ("lh", 2, True), 2: ("lw", 4, False), 4: ("lbu", 1, False), 5: ("lhu", 2, False)}
STORE_OPS = {0: ("sb", 1), 1: ("sh", 2), 2: ("sw", 4)}
CSR_OPS = {1: "csrrw", 2: "csrrs", 3: "csrrc", 5: "csrrwi", 6: "csrrsi", 7: "csrrci"}
SYSTEM_OPS = {0x0000_0073: "ecall", 0x0010_0073: "ebreak", 0x3020_0073: "mret", 0x1050_0073: "wfi"}


def _illegal(raw, size):
    return Decoded("illegal", "illegal", None, 0, 0, 0, 0, size, "system", raw)


def _decode32(ins: int, size: int, raw: int) -> Decoded:
    opc = ins & 0x7F
    rd = (ins >> 7) & 31
    f3 = (ins >> 12) & 7
    rs1 = (ins >> 15) & 31
    rs2 = (ins >> 20) & 31
    f7 = ins >> 25
    if opc == 0x33:
        op = RR_OPS.get((f7, f3))
        if op is None:
            if f7 == 0x04 and f3 == 4 and rs2 == 0:
                return Decoded("r1", "zext.h", lambda a: a & 0xFFFF, rd, rs1, 0, 0, size, "alu", raw)
            return _illegal(raw, size)
        return Decoded("rr", op[0], op[1], rd, rs1, rs2, 0, size, op[2], raw)
    if opc == 0x13:
        imm = sext(ins >> 20, 12)
        if f3 in RI_OPS:
            name, fn = RI_OPS[f3]
            return Decoded("ri", name, fn, rd, rs1, 0, imm, size, "alu", raw)
        uop = UNARY_OPS.get((f3, ins >> 20))
        if uop is not None:
            return Decoded("r1", uop[0], uop[1], rd, rs1, 0, 0, size, "alu", raw)
        sop = SHIFT_IMM_OPS.get((f3, f7))
        if sop is not None:
            return Decoded("ri", sop[0], sop[1], rd, rs1, 0, rs2, size, "alu", raw)
        return _illegal(raw, size)
    if opc == 0x03:
        op = LOAD_OPS.get(f3)
        if op is None:
            return _illegal(raw, size)
        return Decoded("ld", op[0], (op[1], op[2]), rd, rs1, 0, sext(ins >> 20, 12), size, "load", raw)
    if opc == 0x23:
        op = STORE_OPS.get(f3)
        if op is None:
            return _illegal(raw, size)
        imm = sext(((ins >> 25) << 5) | ((ins >> 7) & 31), 12)
        return Decoded("st", op[0], op[1], 0, rs1, rs2, imm, size, "store", raw)
    if opc == 0x63:
        op = BRANCH_OPS.get(f3)
        if op is None:
            return _illegal(raw, size)
        imm = (((ins >> 31) & 1) << 12) | (((ins >> 7) & 1) << 11) | (((ins >> 25) & 0x3F) << 5) | (((ins >> 8) & 0xF) << 1)
        return Decoded("br", op[0], op[1], 0, rs1, rs2, sext(imm, 13), size, "branch", raw)
    if opc == 0x37:
        return Decoded("lui", "lui", None, rd, 0, 0, ins & 0xFFFF_F000, size, "alu", raw)
    if opc == 0x17:
        return Decoded("auipc", "auipc", None, rd, 0, 0, ins & 0xFFFF_F000, size, "alu", raw)
    if opc == 0x6F:
        imm = (((ins >> 31) & 1) << 20) | (((ins >> 21) & 0x3FF) << 1) | (((ins >> 20) & 1) << 11) | (((ins >> 12) & 0xFF) << 12)
        return Decoded("jal", "jal", None, rd, 0, 0, sext(imm, 21), size, "jump", raw)
    if opc == 0x67 and f3 == 0:
        return Decoded("jalr", "jalr", None, rd, rs1, 0, sext(ins >> 20, 12), size, "jump", raw)
    if opc == 0x0F and f3 in (0, 1):
        return Decoded("fence", "fence.i" if f3 else "fence", None, 0, 0, 0, 0, size, "alu", raw)
    if opc == 0x73:
        if f3 == 0:
            name = SYSTEM_OPS.get(ins)
            if name is None:
                return _illegal(raw, size)
            return Decoded("sys", name, None, 0, 0, 0, 0, size, "system", raw)
        name = CSR_OPS.get(f3)
        if name is None:
            return _illegal(raw, size)
        return Decoded("csr", name, None, rd, rs1, 0, ins >> 20, size, "csr", raw)
    return _illegal(raw, size)


# ------------------------------------------------------ compressed expansion

def _r(opc, rd, f3, rs1, rs2, f7):
    return opc | (rd << 7) | (f3 << 12) | (rs1 << 15) | (rs2 << 20) | (f7 << 25)


def _i(opc, rd, f3, rs1, imm):
    return opc | (rd << 7) | (f3 << 12) | (rs1 << 15) | ((imm & 0xFFF) << 20)


def _s(opc, f3, rs1, rs2, imm):
    return opc | ((imm & 0x1F) << 7) | (f3 << 12) | (rs1 << 15) | (rs2 << 20) | (((imm >> 5) & 0x7F) << 25)


def _b(f3, rs1, rs2, imm):
    return (0x63 | (((imm >> 11) & 1) << 7) | (((imm >> 1) & 0xF) << 8) | (f3 << 12) | (rs1 << 15)
            | (rs2 << 20) | (((imm >> 5) & 0x3F) << 25) | (((imm >> 12) & 1) << 31))


def _j(rd, imm):
    return (0x6F | (rd << 7) | (((imm >> 12) & 0xFF) << 12) | (((imm >> 11) & 1) << 20)
            | (((imm >> 1) & 0x3FF) << 21) | (((imm >> 20) & 1) << 31))


def _bit(h, i):
    return (h >> i) & 1


def _bits(h, hi, lo):
    return (h >> lo) & ((1 << (hi - lo + 1)) - 1)


def _cj_imm(h):
    imm = (_bit(h, 12) << 11) | (_bit(h, 11) << 4) | (_bits(h, 10, 9) << 8) | (_bit(h, 8) << 10) \
        | (_bit(h, 7) << 6) | (_bit(h, 6) << 7) | (_bits(h, 5, 3) << 1) | (_bit(h, 2) << 5)
    return sext(imm, 12)


def expand_compressed(h: int) -> int | None:
    """Return the 32-bit equivalent of compressed instruction ``h``, or None if illegal."""
    quad = h & 3
    f3 = h >> 13
    if quad == 0:
        rdp = _bits(h, 4, 2) + 8
        rs1p = _bits(h, 9, 7) + 8
        if f3 == 0:
            imm = (_bits(h, 12, 11) << 4) | (_bits(h, 10, 7) << 6) | (_bit(h, 6) << 2) | (_bit(h, 5) << 3)
            if imm == 0:
                return None
            return _i(0x13, rdp, 0, 2, imm)
        off = (_bits(h, 12, 10) << 3) | (_bit(h, 6) << 2) | (_bit(h, 5) << 6)
        if f3 == 2:
            return _i(0x03, rdp, 2, rs1p, off)
        if f3 == 6:
            return _s(0x23, 2, rs1p, rdp, off)
        return None
    if quad == 1:
        rd = _bits(h, 11, 7)
        imm6 = sext((_bit(h, 12) << 5) | _bits(h, 6, 2), 6)
        if f3 == 0:
            return _i(0x13, rd, 0, rd, imm6)
        if f3 == 1:
            return _j(1, _cj_imm(h))
        if f3 == 2:
            return _i(0x13, rd, 0, 0, imm6)
        if f3 == 3:
            if rd == 2:
                imm = (_bit(h, 12) << 9) | (_bit(h, 6) << 4) | (_bit(h, 5) << 6) | (_bits(h, 4, 3) << 7) | (_bit(h, 2) << 5)
                if imm == 0:
                    return None
                return _i(0x13, 2, 0, 2, sext(imm, 10))
            if imm6 == 0:
                return None
            return 0x37 | (rd << 7) | ((imm6 & 0xFFFFF) << 12)
        if f3 == 4:
            rdp = _bits(h, 9, 7) + 8
            f2 = _bits(h, 11, 10)
            if f2 in (0, 1):
                if _bit(h, 12):
                    return None
                shamt = _bits(h, 6, 2)
                return _r(0x13, rdp, 5, rdp, shamt, 0x20 if f2 else 0)
            if f2 == 2:
                return _i(0x13, rdp, 7, rdp, imm6)
            if _bit(h, 12):
                return None
            rs2p = _bits(h, 4, 2) + 8
            sel = _bits(h, 6, 5)
            f3r, f7 = ((0, 0x20), (4, 0), (6, 0), (7, 0))[sel]
            return _r(0x33, rdp, f3r, rdp, rs2p, f7)
        if f3 == 5:
            return _j(0, _cj_imm(h))
        rs1p = _bits(h, 9, 7) + 8
        off = (_bit(h, 12) << 8) | (_bits(h, 11, 10) << 3) | (_bits(h, 6, 5) << 6) | (_bits(h, 4, 3) << 1) | (_bit(h, 2) << 5)
        return _b(0 if f3 == 6 else 1, rs1p, 0, sext(off, 9))
    if quad == 2:
        rd = _bits(h, 11, 7)
        rs2 = _bits(h, 6, 2)
        if f3 == 0:
            if _bit(h, 12):
                return None
            return _r(0x13, rd, 1, rd, rs2, 0)
        if f3 == 2:
            if rd == 0:
                return None
            off = (_bit(h, 12) << 5) | (_bits(h, 6, 4) << 2) | (_bits(h, 3, 2) << 6)
            return _i(0x03, rd, 2, 2, off)
        if f3 == 4:
            if not _bit(h, 12):
                if rs2 == 0:
                    if rd == 0:
                        return None
                    return _i(0x67, 0, 0, rd, 0)
                return _r(0x33, rd, 0, 0, rs2, 0)
            if rs2 == 0:
                if rd == 0:
                    return 0x0010_0073
                return _i(0x67, 1, 0, rd, 0)
            return _r(0x33, rd, 0, rd, rs2, 0)
        if f3 == 6:
            off = (_bits(h, 12, 9) << 2) | (_bits(h, 8, 7) << 6)
            return _s(0x23, 2, 2, rs2, off)
        return None
    return None


@functools.lru_cache(maxsize=1 << 16)
def decode(ins: int) -> Decoded:
    """Decode a 16-bit (low two bits != 0b11) or 32-bit instruction word."""
    if ins & 3 != 3:
        h = ins & 0xFFFF
        full = expand_compressed(h)
        if full is None:
            return _illegal(h, 2)
        d = _decode32(full, 2, h)
        return d._replace(name="c." + d.name) if d.kind != "illegal" else d
    return _decode32(ins, 4, ins)


def is_nop(d: Decoded) -> bool:
    return d.name in ("addi", "c.addi") and d.rd == 0 and d.rs1 == 0 and d.imm == 0


# ------------------------------------------------ tiny encoder for boot code

def enc_lui(rd: int, imm20: int) -> int:
    return 0x37 | (rd << 7) | ((imm20 & 0xFFFFF) << 12)


def enc_addi(rd: int, rs1: int, imm: int) -> int:
    return _i(0x13, rd, 0, rs1, imm)


def enc_jalr(rd: int, rs1: int, imm: int = 0) -> int:
    return _i(0x67, rd, 0, rs1, imm)


def load_address_pair(rd: int, value: int) -> tuple[int, int]:
    """``lui``/``addi`` words that materialize a 32-bit constant."""
    lo = sext(value & 0xFFF, 12)
    hi = ((value - lo) >> 12) & 0xFFFFF
    return enc_lui(rd, hi), enc_addi(rd, rd, lo)


NOP = 0x0000_0013
