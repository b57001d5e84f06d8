"""Exact field arithmetic for GF(2), GF(p), and the rationals.

Field elements are plain Python values in canonical form: the ints 0/1
for GF(2), reduced residues in [0, p) for GF(p), and normalized
`fractions.Fraction` (positive denominator) for the rationals.  Because
canonical form is unique, equality of elements is equality of values.

A `FieldContext` owns the semantics and routes every scalar operation,
so an optional `OpCounter` can meter the exact number of field
additions, multiplications, and inversions an algorithm performs.
Conjugation is the identity on all three shipped fields but is kept as
an explicit operation so that conjugate-symmetric formulas are written
once.

Counting conventions:
  * sub and neg count as one add, div as one mul plus one inv.
  * Matrix kernels meter semantically: a classical (m, k, n) product
    counts m*k*n muls and m*n*(k-1) adds no matter how it is computed.
  * GF(2) rows are bit-packed; one 64-bit word XOR counts as 64 adds,
    so a packed row operation of width w counts 64*ceil(w/64).
"""

from __future__ import annotations

from fractions import Fraction

try:
    from gmpy2 import mpq as _ratio  # GMP-backed exact rationals
except ImportError:  # pragma: no cover - gmpy2 is a soft dependency
    _ratio = Fraction


class ExactLinAlgError(Exception):
    """Base class for errors raised by this package."""


class DivisionByZero(ExactLinAlgError, ZeroDivisionError):
    pass


class CounterDisabled(ExactLinAlgError):
    pass


class DimensionMismatch(ExactLinAlgError):
    pass


class SingularDiagonal(ExactLinAlgError):
    def __init__(self, index):
        super().__init__(f"zero diagonal entry at index {index}")
        self.index = index


class ZeroPivot(ExactLinAlgError):
    pass


class SingularPivot(ExactLinAlgError):
    pass


class ResidualLeakage(ExactLinAlgError):
    pass


class ZeroB11(ExactLinAlgError):
    pass


class NotInSpan(ExactLinAlgError):
    pass


class InconsistentSystem(ExactLinAlgError):
    pass


class InternalInvariantViolation(ExactLinAlgError):
    pass


class UnorderedField(ExactLinAlgError):
    pass


class ParseError(ExactLinAlgError, ValueError):
    pass


class EntryOutOfField(ExactLinAlgError, ValueError):
    pass


GF2 = "gf2"
GFP = "gfp"
RATIONAL = "rational"

WORD_BITS = 64


def packed_ops(width: int) -> int:
    """Semantic op count of one packed GF(2) row operation of `width` columns."""
    if width <= 0:
        return 0
    return WORD_BITS * ((width + WORD_BITS - 1) // WORD_BITS)


def _is_prime(n: int) -> bool:
    # Deterministic Miller-Rabin; bases 2,3,5,7 are exact below 3,215,031,751.
    if n < 2:
        return False
    for p in (2, 3, 5, 7):
        if n % p == 0:
            return n == p
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class OpCounter:
    """Mutable tally of field operations. Single-writer per counter."""

    __slots__ = ("add", "mul", "inv")

    def __init__(self):
        self.add = 0
        self.mul = 0
        self.inv = 0

    def reset(self):
        self.add = 0
        self.mul = 0
        self.inv = 0

    def snapshot(self) -> dict:
        return {"add": self.add, "mul": self.mul, "inv": self.inv}


class FieldContext:
    """One of GF(2), GF(p) with p prime below 2**31, or the rationals."""

    __slots__ = ("kind", "p", "counter")

    def __init__(self, kind: str, p: int | None = None):
        if kind not in (GF2, GFP, RATIONAL):
            raise ValueError(f"unknown field kind {kind!r}")
        if kind == GFP:
            if p is None or p < 2 or p >= (1 << 31):
                raise ValueError("GF(p) modulus must satisfy 2 <= p < 2**31")
            if not _is_prime(p):
                raise ValueError(f"GF(p) modulus {p} is not prime")
        elif p is not None:
            raise ValueError("modulus only applies to GF(p)")
        self.kind = kind
        self.p = p
        self.counter = None

    @classmethod
    def gf2(cls) -> "FieldContext":
        return cls(GF2)

    @classmethod
    def gfp(cls, p: int) -> "FieldContext":
        return cls(GFP, p)

    @classmethod
    def rational(cls) -> "FieldContext":
        return cls(RATIONAL)

    def __repr__(self):
        if self.kind == GFP:
            return f"FieldContext(GF({self.p}))"
        return f"FieldContext({self.kind})"

    def __eq__(self, other):
        return (
            isinstance(other, FieldContext)
            and self.kind == other.kind
            and self.p == other.p
        )

    def __hash__(self):
        return hash((self.kind, self.p))

    # -- counter ------------------------------------------------------

    def enable_counter(self) -> OpCounter:
        self.counter = OpCounter()
        return self.counter

    def disable_counter(self):
        self.counter = None

    def count_ops(self, add: int = 0, mul: int = 0, inv: int = 0):
        c = self.counter
        if c is not None:
            c.add += add
            c.mul += mul
            c.inv += inv

    # -- canonical values ----------------------------------------------

    @property
    def zero(self):
        return _ratio(0) if self.kind == RATIONAL else 0

    @property
    def one(self):
        return _ratio(1) if self.kind == RATIONAL else 1

    def el(self, value):
        """Canonicalize an int, "p/q" string, or rational into this field."""
        if self.kind == RATIONAL:
            if isinstance(value, str):
                return _ratio(Fraction(value))
            return _ratio(value)
        if isinstance(value, str):
            value = int(value)
        elif value is not None and getattr(value, "denominator", 1) != 1:
            raise EntryOutOfField(f"{value} is not an element of {self!r}")
        if self.kind == GF2:
            return int(value) & 1
        return int(value) % self.p

    # -- arithmetic ----------------------------------------------------

    def add(self, a, b):
        c = self.counter
        if c is not None:
            c.add += 1
        if self.kind == GF2:
            return a ^ b
        if self.kind == GFP:
            return (a + b) % self.p
        return a + b

    def sub(self, a, b):
        c = self.counter
        if c is not None:
            c.add += 1
        if self.kind == GF2:
            return a ^ b
        if self.kind == GFP:
            return (a - b) % self.p
        return a - b

    def neg(self, a):
        c = self.counter
        if c is not None:
            c.add += 1
        if self.kind == GF2:
            return a
        if self.kind == GFP:
            return (-a) % self.p
        return -a

    def mul(self, a, b):
        c = self.counter
        if c is not None:
            c.mul += 1
        if self.kind == GF2:
            return a & b
        if self.kind == GFP:
            return a * b % self.p
        return a * b

    def inv(self, a):
        if self.is_zero(a):
            raise DivisionByZero("inversion of zero")
        c = self.counter
        if c is not None:
            c.inv += 1
        if self.kind == GF2:
            return 1
        if self.kind == GFP:
            return pow(a, self.p - 2, self.p)
        return 1 / a

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def conj(self, a):
        # Identity on all shipped fields; kept explicit for the
        # conjugate-symmetric formulas.
        return a

    def is_zero(self, a) -> bool:
        return a == 0

    def is_ordered(self) -> bool:
        return self.kind == RATIONAL


def op_count_snapshot(ctx: FieldContext) -> dict:
    """Monotone {add, mul, inv} counts since the last reset."""
    if ctx.counter is None:
        raise CounterDisabled("op counter is not enabled on this context")
    return ctx.counter.snapshot()
