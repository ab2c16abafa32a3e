"""Value semantics shared by the interpreter, the static evaluator and the
emitted simulator: 32-bit operators and the pure builtin functions."""

from __future__ import annotations

MASK = 0xFFFFFFFF


def to_signed(v: int, width: int = 32) -> int:
    v &= (1 << width) - 1
    return v - (1 << width) if v >> (width - 1) else v


def _lsl(a, b):
    return (a << b) & MASK if b < 32 else 0


def _lsr(a, b):
    return a >> b if b < 32 else 0


def _asr(a, b):
    return (to_signed(a) >> min(b, 31)) & MASK


def _ror(a, b):
    b &= 31
    return ((a >> b) | (a << (32 - b))) & MASK if b else a


BINOPS = {
    "+": lambda a, b: (a + b) & MASK,
    "-": lambda a, b: (a - b) & MASK,
    "*": lambda a, b: (a * b) & MASK,
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "EOR": lambda a, b: a ^ b,
    "LSL": _lsl, "<<": _lsl,
    "LSR": _lsr, ">>": _lsr,
    "ASR": _asr,
    "ROR": _ror,
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "<": lambda a, b: int(a < b),
    ">": lambda a, b: int(a > b),
    "<=": lambda a, b: int(a <= b),
    ">=": lambda a, b: int(a >= b),
}

UNOPS = {
    "not": lambda a: int(not a),
    "NOT": lambda a: ~a & MASK,
    "-": lambda a: -a & MASK,
}


def bits(v: int, hi: int, lo: int) -> int:
    return (v >> lo) & ((1 << (hi - lo + 1)) - 1)


# Flag helpers take an optional width so tests can check them exhaustively
# on small words against plain integer arithmetic.

def carry_add(*xs: int, width: int = 32) -> int:
    return int(sum(xs) >> width != 0)


def overflow_add(*xs: int, width: int = 32) -> int:
    s = sum(to_signed(x, width) for x in xs)
    return int(not -(1 << (width - 1)) <= s < (1 << (width - 1)))


def borrow_sub(a: int, *xs: int, width: int = 32) -> int:
    return int(a - sum(xs) < 0)


def carry_sub(a: int, *xs: int, width: int = 32) -> int:
    return 1 - borrow_sub(a, *xs, width=width)


def overflow_sub(a: int, *xs: int, width: int = 32) -> int:
    s = to_signed(a, width) - sum(to_signed(x, width) for x in xs)
    return int(not -(1 << (width - 1)) <= s < (1 << (width - 1)))


def signed_sat(v: int, n: int) -> int:
    lo, hi = -(1 << (n - 1)), (1 << (n - 1)) - 1
    return max(lo, min(hi, v)) & MASK


def sign_extend(v: int, n: int) -> int:
    v &= (1 << n) - 1
    return (v - (1 << n)) & MASK if v >> (n - 1) else v


PURE_FUNCS = {
    "CarryFromAdd2": carry_add,
    "CarryFromAdd3": carry_add,
    "OverflowFromAdd2": overflow_add,
    "OverflowFromAdd3": overflow_add,
    "CarryFromSub2": carry_sub,
    "CarryFromSub3": carry_sub,
    "BorrowFromSub2": borrow_sub,
    "BorrowFromSub3": borrow_sub,
    "OverflowFromSub2": overflow_sub,
    "OverflowFromSub3": overflow_sub,
    "SignedSatAdd2": lambda a, b, n: signed_sat(to_signed(a) + to_signed(b), n),
    "SignedSatSub2": lambda a, b, n: signed_sat(to_signed(a) - to_signed(b), n),
    "NbOfSetBitsIn": lambda v: bin(v).count("1"),
    "SignExtend": sign_extend,
    "ZeroExtend": lambda v: v & MASK,
}

# Functions whose result is always 0 or 1.
BOOLEAN_FUNCS = frozenset({
    "ConditionPassed", "CurrentModeHasSPSR", "CarryFrom", "OverflowFrom", "BorrowFrom",
    "CarryFromAdd2", "CarryFromAdd3", "OverflowFromAdd2", "OverflowFromAdd3",
    "CarryFromSub2", "CarryFromSub3", "BorrowFromSub2", "BorrowFromSub3",
    "OverflowFromSub2", "OverflowFromSub3",
})

COND_NAMES = ["EQ", "NE", "CS", "CC", "MI", "PL", "VS", "VC",
              "HI", "LS", "GE", "LT", "GT", "LE", "", "NV"]
ALWAYS = 14


def condition_passed(cond: int, n: int, z: int, c: int, v: int) -> int:
    base = cond >> 1
    if base == 0:
        r = z
    elif base == 1:
        r = c
    elif base == 2:
        r = n
    elif base == 3:
        r = v
    elif base == 4:
        r = c and not z
    elif base == 5:
        r = n == v
    elif base == 6:
        r = not z and n == v
    else:
        return 1  # AL, and the unconditional space
    return int(bool(r) != bool(cond & 1))


# CONDITION_TABLE[cond][n<<3 | z<<2 | c<<1 | v]
CONDITION_TABLE = tuple(
    tuple(bool(condition_passed(c, f >> 3 & 1, f >> 2 & 1, f >> 1 & 1, f & 1)) for f in range(16))
    for c in range(16))
