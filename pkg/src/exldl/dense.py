"""Dense exact matrices, permutations, fast multiplication, triangular kernels.

Storage is chosen per field: GF(2) matrices keep one arbitrary-precision
int per row (bit j = column j), so row addition is a single word-parallel
XOR; GF(p) matrices are int64 numpy arrays with reduced residues; rational
matrices are lists of exact-rational rows.  All other modules stay generic over
the field and only go through this API.

Multiplication uses Strassen recursion above a configurable cutoff
(7 multiplies per level, zero-padding odd dimensions, rectangles tiled
into near-square blocks) and classical kernels below it.  Over an exact
field the result is bit-identical regardless of the cutoff.
"""

from __future__ import annotations

import numpy as np

from .fields import (
    GF2,
    GFP,
    RATIONAL,
    DimensionMismatch,
    FieldContext,
    SingularDiagonal,
    packed_ops,
)

DEFAULT_CUTOFF_SCALAR = 64
DEFAULT_CUTOFF_GF2 = 256

LOWER = "lower"
LOWER_UNIT = "lower_unit"
UPPER = "upper"
UPPER_UNIT = "upper_unit"

LEFT = "left"
RIGHT = "right"


class Permutation:
    """Permutation as a position -> index array with cached inverse."""

    __slots__ = ("fwd", "_inv")

    def __init__(self, fwd):
        fwd = tuple(fwd)
        n = len(fwd)
        seen = [False] * n
        for v in fwd:
            if not 0 <= v < n or seen[v]:
                raise ValueError("not a permutation")
            seen[v] = True
        self.fwd = fwd
        self._inv = None

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(range(n))

    @classmethod
    def transposition(cls, n: int, i: int, j: int) -> "Permutation":
        fwd = list(range(n))
        fwd[i], fwd[j] = fwd[j], fwd[i]
        return cls(fwd)

    @property
    def n(self) -> int:
        return len(self.fwd)

    @property
    def inv(self):
        if self._inv is None:
            inv = [0] * len(self.fwd)
            for pos, idx in enumerate(self.fwd):
                inv[idx] = pos
            self._inv = tuple(inv)
        return self._inv

    def inverse(self) -> "Permutation":
        return Permutation(self.inv)

    def is_identity(self) -> bool:
        return all(i == v for i, v in enumerate(self.fwd))

    def __eq__(self, other):
        return isinstance(other, Permutation) and self.fwd == other.fwd

    def __repr__(self):
        return f"Permutation({list(self.fwd)})"


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Composition with permute(permute(A,p,p), q, q) == permute(A, compose(p,q), ..)."""
    if p.n != q.n:
        raise DimensionMismatch("permutation sizes differ")
    return Permutation(p.fwd[j] for j in q.fwd)


def _gf2_mask(ncols: int) -> int:
    return (1 << ncols) - 1


class DenseMatrix:
    """Row-major exact matrix over one FieldContext."""

    __slots__ = ("ctx", "nrows", "ncols", "_d")

    def __init__(self, ctx: FieldContext, nrows: int, ncols: int, data):
        self.ctx = ctx
        self.nrows = nrows
        self.ncols = ncols
        self._d = data

    # -- constructors ---------------------------------------------------

    @classmethod
    def zeros(cls, ctx: FieldContext, nrows: int, ncols: int) -> "DenseMatrix":
        if ctx.kind == GF2:
            return cls(ctx, nrows, ncols, [0] * nrows)
        if ctx.kind == GFP:
            return cls(ctx, nrows, ncols, np.zeros((nrows, ncols), dtype=np.int64))
        zero = ctx.zero
        return cls(ctx, nrows, ncols, [[zero] * ncols for _ in range(nrows)])

    @classmethod
    def identity(cls, ctx: FieldContext, n: int) -> "DenseMatrix":
        out = cls.zeros(ctx, n, n)
        for i in range(n):
            out.set(i, i, ctx.one)
        return out

    @classmethod
    def from_rows(cls, ctx: FieldContext, rows) -> "DenseMatrix":
        rows = [list(r) for r in rows]
        nrows = len(rows)
        ncols = len(rows[0]) if rows else 0
        out = cls.zeros(ctx, nrows, ncols)
        for i, row in enumerate(rows):
            if len(row) != ncols:
                raise DimensionMismatch("ragged rows")
            for j, v in enumerate(row):
                out.set(i, j, ctx.el(v))
        return out

    # -- element access --------------------------------------------------

    def get(self, i: int, j: int):
        if self.ctx.kind == GF2:
            return (self._d[i] >> j) & 1
        if self.ctx.kind == GFP:
            return int(self._d[i, j])
        return self._d[i][j]

    def set(self, i: int, j: int, v):
        if self.ctx.kind == GF2:
            if v:
                self._d[i] |= 1 << j
            else:
                self._d[i] &= ~(1 << j)
        elif self.ctx.kind == GFP:
            self._d[i, j] = v
        else:
            self._d[i][j] = v

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def copy(self) -> "DenseMatrix":
        if self.ctx.kind == GF2:
            return DenseMatrix(self.ctx, self.nrows, self.ncols, list(self._d))
        if self.ctx.kind == GFP:
            return DenseMatrix(self.ctx, self.nrows, self.ncols, self._d.copy())
        return DenseMatrix(self.ctx, self.nrows, self.ncols, [list(r) for r in self._d])

    def to_lists(self):
        return [[self.get(i, j) for j in range(self.ncols)] for i in range(self.nrows)]

    def __eq__(self, other):
        if not isinstance(other, DenseMatrix):
            return NotImplemented
        if self.ctx != other.ctx or self.shape != other.shape:
            return False
        if self.ctx.kind == GF2:
            return self._d == other._d
        if self.ctx.kind == GFP:
            return bool(np.array_equal(self._d, other._d))
        return self._d == other._d

    def is_zero(self) -> bool:
        if self.ctx.kind == GF2:
            return all(r == 0 for r in self._d)
        if self.ctx.kind == GFP:
            return not self._d.any()
        return all(all(v == 0 for v in row) for row in self._d)

    def __repr__(self):
        return f"DenseMatrix({self.ctx!r}, {self.nrows}x{self.ncols})"

    # -- slicing / assembly ----------------------------------------------

    def block(self, r0: int, r1: int, c0: int, c1: int) -> "DenseMatrix":
        nr, nc = r1 - r0, c1 - c0
        if self.ctx.kind == GF2:
            mask = _gf2_mask(nc)
            rows = [(r >> c0) & mask for r in self._d[r0:r1]]
            return DenseMatrix(self.ctx, nr, nc, rows)
        if self.ctx.kind == GFP:
            return DenseMatrix(self.ctx, nr, nc, self._d[r0:r1, c0:c1].copy())
        return DenseMatrix(
            self.ctx, nr, nc, [row[c0:c1] for row in self._d[r0:r1]]
        )

    def take_rows(self, idx) -> "DenseMatrix":
        idx = list(idx)
        if self.ctx.kind == GF2:
            return DenseMatrix(self.ctx, len(idx), self.ncols, [self._d[i] for i in idx])
        if self.ctx.kind == GFP:
            if not idx:
                return DenseMatrix.zeros(self.ctx, 0, self.ncols)
            return DenseMatrix(self.ctx, len(idx), self.ncols, self._d[idx, :].copy())
        return DenseMatrix(self.ctx, len(idx), self.ncols, [list(self._d[i]) for i in idx])

    def take_cols(self, idx) -> "DenseMatrix":
        idx = list(idx)
        if self.ctx.kind == GF2:
            rows = []
            for r in self._d:
                acc = 0
                for jj, j in enumerate(idx):
                    if (r >> j) & 1:
                        acc |= 1 << jj
                rows.append(acc)
            return DenseMatrix(self.ctx, self.nrows, len(idx), rows)
        if self.ctx.kind == GFP:
            if not idx:
                return DenseMatrix.zeros(self.ctx, self.nrows, 0)
            return DenseMatrix(self.ctx, self.nrows, len(idx), self._d[:, idx].copy())
        return DenseMatrix(
            self.ctx, self.nrows, len(idx), [[row[j] for j in idx] for row in self._d]
        )

    def set_block(self, r0: int, c0: int, m: "DenseMatrix"):
        if self.ctx.kind == GF2:
            mask = _gf2_mask(m.ncols) << c0
            for i in range(m.nrows):
                self._d[r0 + i] = (self._d[r0 + i] & ~mask) | (m._d[i] << c0)
        elif self.ctx.kind == GFP:
            self._d[r0 : r0 + m.nrows, c0 : c0 + m.ncols] = m._d
        else:
            for i in range(m.nrows):
                self._d[r0 + i][c0 : c0 + m.ncols] = list(m._d[i])

    def pad(self, nrows: int, ncols: int) -> "DenseMatrix":
        out = DenseMatrix.zeros(self.ctx, nrows, ncols)
        out.set_block(0, 0, self)
        return out

    # -- elementwise ------------------------------------------------------

    def add(self, other: "DenseMatrix") -> "DenseMatrix":
        self._binop_check(other)
        ctx = self.ctx
        if ctx.kind == GF2:
            ctx.count_ops(add=self.nrows * packed_ops(self.ncols))
            rows = [a ^ b for a, b in zip(self._d, other._d)]
            return DenseMatrix(ctx, self.nrows, self.ncols, rows)
        ctx.count_ops(add=self.nrows * self.ncols)
        if ctx.kind == GFP:
            return DenseMatrix(
                ctx, self.nrows, self.ncols, (self._d + other._d) % ctx.p
            )
        rows = [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self._d, other._d)]
        return DenseMatrix(ctx, self.nrows, self.ncols, rows)

    def sub(self, other: "DenseMatrix") -> "DenseMatrix":
        self._binop_check(other)
        ctx = self.ctx
        if ctx.kind == GF2:
            ctx.count_ops(add=self.nrows * packed_ops(self.ncols))
            rows = [a ^ b for a, b in zip(self._d, other._d)]
            return DenseMatrix(ctx, self.nrows, self.ncols, rows)
        ctx.count_ops(add=self.nrows * self.ncols)
        if ctx.kind == GFP:
            return DenseMatrix(
                ctx, self.nrows, self.ncols, (self._d - other._d) % ctx.p
            )
        rows = [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self._d, other._d)]
        return DenseMatrix(ctx, self.nrows, self.ncols, rows)

    def neg(self) -> "DenseMatrix":
        ctx = self.ctx
        if ctx.kind == GF2:
            return self.copy()
        ctx.count_ops(add=self.nrows * self.ncols)
        if ctx.kind == GFP:
            return DenseMatrix(ctx, self.nrows, self.ncols, (-self._d) % ctx.p)
        rows = [[-a for a in row] for row in self._d]
        return DenseMatrix(ctx, self.nrows, self.ncols, rows)

    def scale(self, c) -> "DenseMatrix":
        ctx = self.ctx
        if ctx.kind == GF2:
            if c & 1:
                return self.copy()
            return DenseMatrix.zeros(ctx, self.nrows, self.ncols)
        ctx.count_ops(mul=self.nrows * self.ncols)
        if ctx.kind == GFP:
            return DenseMatrix(ctx, self.nrows, self.ncols, (self._d * c) % ctx.p)
        rows = [[a * c for a in row] for row in self._d]
        return DenseMatrix(ctx, self.nrows, self.ncols, rows)

    def scale_rows(self, factors) -> "DenseMatrix":
        """New matrix with row i multiplied by factors[i]."""
        ctx = self.ctx
        if ctx.kind == GF2:
            rows = [r if f & 1 else 0 for r, f in zip(self._d, factors)]
            return DenseMatrix(ctx, self.nrows, self.ncols, rows)
        ctx.count_ops(mul=self.nrows * self.ncols)
        if ctx.kind == GFP:
            f = np.array(list(factors), dtype=np.int64).reshape(-1, 1)
            return DenseMatrix(ctx, self.nrows, self.ncols, (self._d * f) % ctx.p)
        rows = [[a * f for a in row] for row, f in zip(self._d, factors)]
        return DenseMatrix(ctx, self.nrows, self.ncols, rows)

    def conj_transpose(self) -> "DenseMatrix":
        ctx = self.ctx
        if ctx.kind == GF2:
            cols = [0] * self.ncols
            for i, row in enumerate(self._d):
                r = row
                bit = 1 << i
                while r:
                    lsb = r & -r
                    cols[lsb.bit_length() - 1] |= bit
                    r ^= lsb
            return DenseMatrix(ctx, self.ncols, self.nrows, cols)
        if ctx.kind == GFP:
            return DenseMatrix(ctx, self.ncols, self.nrows, self._d.T.copy())
        rows = [[self._d[i][j] for i in range(self.nrows)] for j in range(self.ncols)]
        return DenseMatrix(ctx, self.ncols, self.nrows, rows)

    def _binop_check(self, other: "DenseMatrix"):
        if self.ctx != other.ctx:
            raise DimensionMismatch("mixed field contexts")
        if self.shape != other.shape:
            raise DimensionMismatch(f"shape {self.shape} vs {other.shape}")


def hstack(blocks) -> DenseMatrix:
    blocks = [b for b in blocks]
    ctx = blocks[0].ctx
    nrows = blocks[0].nrows
    ncols = sum(b.ncols for b in blocks)
    out = DenseMatrix.zeros(ctx, nrows, ncols)
    c = 0
    for b in blocks:
        if b.nrows != nrows:
            raise DimensionMismatch("hstack row mismatch")
        out.set_block(0, c, b)
        c += b.ncols
    return out


def vstack(blocks) -> DenseMatrix:
    blocks = [b for b in blocks]
    ctx = blocks[0].ctx
    ncols = blocks[0].ncols
    nrows = sum(b.nrows for b in blocks)
    out = DenseMatrix.zeros(ctx, nrows, ncols)
    r = 0
    for b in blocks:
        if b.ncols != ncols:
            raise DimensionMismatch("vstack column mismatch")
        out.set_block(r, 0, b)
        r += b.nrows
    return out


def permute(a: DenseMatrix, p: Permutation, q: Permutation) -> DenseMatrix:
    """result[i][j] = a[p.fwd[i]][q.fwd[j]]."""
    if p.n != a.nrows or q.n != a.ncols:
        raise DimensionMismatch("permutation sizes do not match matrix")
    return a.take_rows(p.fwd).take_cols(q.fwd)


# -- multiplication ---------------------------------------------------------


def default_cutoff(ctx: FieldContext) -> int:
    return DEFAULT_CUTOFF_GF2 if ctx.kind == GF2 else DEFAULT_CUTOFF_SCALAR


def matmul(a: DenseMatrix, b: DenseMatrix, cutoff: int | None = None) -> DenseMatrix:
    """Exact product, Strassen above the cutoff, classical below."""
    if a.ctx != b.ctx:
        raise DimensionMismatch("mixed field contexts")
    if a.ncols != b.nrows:
        raise DimensionMismatch(f"inner dims {a.ncols} vs {b.nrows}")
    if cutoff is None:
        cutoff = default_cutoff(a.ctx)
    return _mm(a, b, cutoff)


def _mm(a: DenseMatrix, b: DenseMatrix, cutoff: int) -> DenseMatrix:
    m, k, n = a.nrows, a.ncols, b.ncols
    if min(m, k, n) == 0:
        return DenseMatrix.zeros(a.ctx, m, n)
    if min(m, k, n) <= cutoff:
        return _mm_classical(a, b)
    # Tile rectangles into near-square halves along the largest dimension.
    if max(m, k, n) >= 2 * min(m, k, n):
        if m >= k and m >= n:
            h = m // 2
            return vstack([_mm(a.block(0, h, 0, k), b, cutoff),
                           _mm(a.block(h, m, 0, k), b, cutoff)])
        if n >= m and n >= k:
            h = n // 2
            return hstack([_mm(a, b.block(0, k, 0, h), cutoff),
                           _mm(a, b.block(0, k, h, n), cutoff)])
        h = k // 2
        return _mm(a.block(0, m, 0, h), b.block(0, h, 0, n), cutoff).add(
            _mm(a.block(0, m, h, k), b.block(h, k, 0, n), cutoff))
    if m % 2 or k % 2 or n % 2:
        m2, k2, n2 = m + m % 2, k + k % 2, n + n % 2
        c = _mm(a.pad(m2, k2), b.pad(k2, n2), cutoff)
        return c.block(0, m, 0, n)
    return _mm_strassen(a, b, cutoff)


def _mm_strassen(a: DenseMatrix, b: DenseMatrix, cutoff: int) -> DenseMatrix:
    m, k, n = a.nrows, a.ncols, b.ncols
    mh, kh, nh = m // 2, k // 2, n // 2
    a11 = a.block(0, mh, 0, kh)
    a12 = a.block(0, mh, kh, k)
    a21 = a.block(mh, m, 0, kh)
    a22 = a.block(mh, m, kh, k)
    b11 = b.block(0, kh, 0, nh)
    b12 = b.block(0, kh, nh, n)
    b21 = b.block(kh, k, 0, nh)
    b22 = b.block(kh, k, nh, n)
    p1 = _mm(a11.add(a22), b11.add(b22), cutoff)
    p2 = _mm(a21.add(a22), b11, cutoff)
    p3 = _mm(a11, b12.sub(b22), cutoff)
    p4 = _mm(a22, b21.sub(b11), cutoff)
    p5 = _mm(a11.add(a12), b22, cutoff)
    p6 = _mm(a21.sub(a11), b11.add(b12), cutoff)
    p7 = _mm(a12.sub(a22), b21.add(b22), cutoff)
    c11 = p1.add(p4).sub(p5).add(p7)
    c12 = p3.add(p5)
    c21 = p2.add(p4)
    c22 = p1.sub(p2).add(p3).add(p6)
    out = DenseMatrix.zeros(a.ctx, m, n)
    out.set_block(0, 0, c11)
    out.set_block(0, nh, c12)
    out.set_block(mh, 0, c21)
    out.set_block(mh, nh, c22)
    return out


def _mm_classical(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    ctx = a.ctx
    m, k, n = a.nrows, a.ncols, b.ncols
    if ctx.kind == GF2:
        brows = b._d
        rows = []
        used = 0
        for r in a._d:
            acc = 0
            rr = r
            while rr:
                lsb = rr & -rr
                acc ^= brows[lsb.bit_length() - 1]
                rr ^= lsb
                used += 1
            rows.append(acc)
        w = packed_ops(n)
        ctx.count_ops(add=used * w, mul=used * w)
        return DenseMatrix(ctx, m, n, rows)
    ctx.count_ops(mul=m * k * n, add=m * n * (k - 1) if k >= 1 else 0)
    if ctx.kind == GFP:
        p = ctx.p
        # Chunk the inner dimension so int64 accumulation cannot overflow.
        chunk = max(1, (1 << 62) // ((p - 1) * (p - 1) + 1))
        if k <= chunk:
            return DenseMatrix(ctx, m, n, (a._d @ b._d) % p)
        acc = np.zeros((m, n), dtype=np.int64)
        for k0 in range(0, k, chunk):
            k1 = min(k, k0 + chunk)
            acc = (acc + a._d[:, k0:k1] @ b._d[k0:k1, :]) % p
        return DenseMatrix(ctx, m, n, acc)
    bt = [[b._d[t][j] for t in range(k)] for j in range(n)]
    zero = ctx.zero
    rows = []
    for arow in a._d:
        rows.append(
            [sum((x * y for x, y in zip(arow, bcol) if x and y), zero) for bcol in bt]
        )
    return DenseMatrix(ctx, m, n, rows)


# -- triangular kernels ------------------------------------------------------

_TRI_BASE = 16


def _is_lower(shape: str) -> bool:
    return shape in (LOWER, LOWER_UNIT)


def _is_unit(shape: str) -> bool:
    return shape in (LOWER_UNIT, UPPER_UNIT)


def tri_invert(l: DenseMatrix, shape: str, cutoff: int | None = None) -> DenseMatrix:
    """Exact inverse of a triangular matrix of the stated shape."""
    n = l.nrows
    if l.ncols != n:
        raise DimensionMismatch("triangular inverse needs a square matrix")
    if n <= _TRI_BASE:
        return _tri_invert_base(l, shape)
    h = n // 2
    if _is_lower(shape):
        l11, l21, l22 = l.block(0, h, 0, h), l.block(h, n, 0, h), l.block(h, n, h, n)
        i11 = tri_invert(l11, shape, cutoff)
        i22 = tri_invert(l22, shape, cutoff)
        x21 = matmul(i22, matmul(l21, i11, cutoff), cutoff).neg()
        out = DenseMatrix.zeros(l.ctx, n, n)
        out.set_block(0, 0, i11)
        out.set_block(h, 0, x21)
        out.set_block(h, h, i22)
        return out
    u11, u12, u22 = l.block(0, h, 0, h), l.block(0, h, h, n), l.block(h, n, h, n)
    i11 = tri_invert(u11, shape, cutoff)
    i22 = tri_invert(u22, shape, cutoff)
    x12 = matmul(i11, matmul(u12, i22, cutoff), cutoff).neg()
    out = DenseMatrix.zeros(l.ctx, n, n)
    out.set_block(0, 0, i11)
    out.set_block(0, h, x12)
    out.set_block(h, h, i22)
    return out


def _tri_invert_base(l: DenseMatrix, shape: str) -> DenseMatrix:
    ctx = l.ctx
    n = l.nrows
    lower = _is_lower(shape)
    unit = _is_unit(shape)
    dinv = []
    for i in range(n):
        d = l.get(i, i)
        if ctx.is_zero(d):
            raise SingularDiagonal(i)
        dinv.append(ctx.one if unit else ctx.inv(d))
    out = DenseMatrix.zeros(ctx, n, n)
    order = range(n) if lower else range(n - 1, -1, -1)
    for j in range(n):
        # solve l x = e_j by substitution
        x = [ctx.zero] * n
        x[j] = dinv[j]
        for i in order:
            if (lower and i <= j) or (not lower and i >= j):
                continue
            s = ctx.zero
            rng = range(j, i) if lower else range(i + 1, j + 1)
            for t in rng:
                if not ctx.is_zero(x[t]):
                    s = ctx.add(s, ctx.mul(l.get(i, t), x[t]))
            if not ctx.is_zero(s):
                x[i] = ctx.mul(ctx.neg(s), dinv[i])
        for i in range(n):
            if not ctx.is_zero(x[i]):
                out.set(i, j, x[i])
    return out


def tri_solve(
    l: DenseMatrix, b: DenseMatrix, side: str, shape: str, cutoff: int | None = None
) -> DenseMatrix:
    """X with l X = b (side=left) or X l = b (side=right), exact."""
    n = l.nrows
    if l.ncols != n:
        raise DimensionMismatch("triangular solve needs a square matrix")
    if side == LEFT:
        if b.nrows != n:
            raise DimensionMismatch("rhs rows do not match")
    else:
        if b.ncols != n:
            raise DimensionMismatch("rhs cols do not match")
    if n == 0:
        return b.copy()
    if n <= _TRI_BASE:
        return _tri_solve_base(l, b, side, shape)
    h = n // 2
    lower = _is_lower(shape)
    if side == LEFT:
        if lower:
            l11, l21, l22 = l.block(0, h, 0, h), l.block(h, n, 0, h), l.block(h, n, h, n)
            x1 = tri_solve(l11, b.block(0, h, 0, b.ncols), side, shape, cutoff)
            x2 = tri_solve(
                l22,
                b.block(h, n, 0, b.ncols).sub(matmul(l21, x1, cutoff)),
                side,
                shape,
                cutoff,
            )
            return vstack([x1, x2])
        u11, u12, u22 = l.block(0, h, 0, h), l.block(0, h, h, n), l.block(h, n, h, n)
        x2 = tri_solve(u22, b.block(h, n, 0, b.ncols), side, shape, cutoff)
        x1 = tri_solve(
            u11,
            b.block(0, h, 0, b.ncols).sub(matmul(u12, x2, cutoff)),
            side,
            shape,
            cutoff,
        )
        return vstack([x1, x2])
    if lower:
        l11, l21, l22 = l.block(0, h, 0, h), l.block(h, n, 0, h), l.block(h, n, h, n)
        x2 = tri_solve(l22, b.block(0, b.nrows, h, n), side, shape, cutoff)
        x1 = tri_solve(
            l11,
            b.block(0, b.nrows, 0, h).sub(matmul(x2, l21, cutoff)),
            side,
            shape,
            cutoff,
        )
        return hstack([x1, x2])
    u11, u12, u22 = l.block(0, h, 0, h), l.block(0, h, h, n), l.block(h, n, h, n)
    x1 = tri_solve(u11, b.block(0, b.nrows, 0, h), side, shape, cutoff)
    x2 = tri_solve(
        u22,
        b.block(0, b.nrows, h, n).sub(matmul(x1, u12, cutoff)),
        side,
        shape,
        cutoff,
    )
    return hstack([x1, x2])


def _tri_solve_base(l: DenseMatrix, b: DenseMatrix, side: str, shape: str) -> DenseMatrix:
    ctx = l.ctx
    n = l.nrows
    lower = _is_lower(shape)
    unit = _is_unit(shape)
    dinv = []
    for i in range(n):
        d = l.get(i, i)
        if ctx.is_zero(d):
            raise SingularDiagonal(i)
        dinv.append(ctx.one if unit else ctx.inv(d))
    out = b.copy()
    if side == LEFT:
        rows = range(n) if lower else range(n - 1, -1, -1)
        for i in rows:
            rng = range(i) if lower else range(i + 1, n)
            for c in range(b.ncols):
                s = out.get(i, c)
                for t in rng:
                    lv = l.get(i, t)
                    if not ctx.is_zero(lv):
                        s = ctx.sub(s, ctx.mul(lv, out.get(t, c)))
                if not unit:
                    s = ctx.mul(s, dinv[i])
                out.set(i, c, s)
        return out
    # right: X l = b, solve column by column of X
    cols = range(n - 1, -1, -1) if lower else range(n)
    for j in cols:
        rng = range(j + 1, n) if lower else range(j)
        for r in range(b.nrows):
            s = out.get(r, j)
            for t in rng:
                lv = l.get(t, j)
                if not ctx.is_zero(lv):
                    s = ctx.sub(s, ctx.mul(out.get(r, t), lv))
            if not unit:
                s = ctx.mul(s, dinv[j])
            out.set(r, j, s)
    return out
