"""Rank-revealing dense factorizations over an exact field.

Provides the symmetric elimination primitives (vertex and edge
elimination), a recursive rank-revealing LU with row and column
pivoting, a recursive LDL with symmetric pivoting that reduces to
matrix multiplication, and inertia extraction from the block diagonal.

Conventions: an LDL result satisfies, entrywise and exactly,
    A[P.fwd[i]][P.fwd[j]] == (L D L^H)[i][j]
with L unit-diagonal lower-trapezoidal (n x r, reduced form) and D a
list of 1x1 blocks and antidiagonal 2x2 blocks.  An LU result satisfies
    A[P.fwd[i]][Q.fwd[j]] == (L U)[i][j]
with the first r entries of P.fwd strictly increasing (pivot rows keep
their original relative order) and U upper-trapezoidal with nonzero
diagonal.  Pivot tie-breaking is always lowest-index-first, so results
are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dense import (
    LEFT,
    LOWER_UNIT,
    RIGHT,
    UPPER,
    DenseMatrix,
    Permutation,
    compose,
    hstack,
    matmul,
    permute,
    tri_solve,
    vstack,
)
from .fields import (
    FieldContext,
    InternalInvariantViolation,
    SingularPivot,
    UnorderedField,
    ZeroPivot,
)

SCALAR = "scalar"
ANTIDIAG = "antidiag"


@dataclass(frozen=True)
class DBlock:
    """1x1 block Scalar(d) or 2x2 antidiagonal block with a21 = conj(a12)."""

    kind: str
    d: object = None
    a12: object = None
    a21: object = None

    @classmethod
    def scalar(cls, d) -> "DBlock":
        if d == 0:
            raise ValueError("scalar D block must be nonzero")
        return cls(SCALAR, d=d)

    @classmethod
    def antidiag(cls, a12, a21) -> "DBlock":
        if a12 == 0 or a21 == 0:
            raise ValueError("antidiagonal D block entries must be nonzero")
        return cls(ANTIDIAG, a12=a12, a21=a21)

    @property
    def size(self) -> int:
        return 1 if self.kind == SCALAR else 2


def d_size(blocks) -> int:
    return sum(b.size for b in blocks)


def d_dense(ctx: FieldContext, blocks) -> DenseMatrix:
    r = d_size(blocks)
    out = DenseMatrix.zeros(ctx, r, r)
    off = 0
    for b in blocks:
        if b.kind == SCALAR:
            out.set(off, off, b.d)
        else:
            out.set(off, off + 1, b.a12)
            out.set(off + 1, off, b.a21)
        off += b.size
    return out


def d_inverse(ctx: FieldContext, blocks):
    out = []
    for b in blocks:
        if b.kind == SCALAR:
            out.append(DBlock.scalar(ctx.inv(b.d)))
        else:
            out.append(DBlock.antidiag(ctx.inv(b.a21), ctx.inv(b.a12)))
    return out


def d_mul_left(ctx: FieldContext, blocks, m: DenseMatrix) -> DenseMatrix:
    """D @ m for block-diagonal D."""
    order = []
    factors = []
    off = 0
    for b in blocks:
        if b.kind == SCALAR:
            order.append(off)
            factors.append(b.d)
        else:
            order.append(off + 1)
            factors.append(b.a12)
            order.append(off)
            factors.append(b.a21)
        off += b.size
    if off != m.nrows:
        raise ValueError("D size does not match matrix rows")
    return m.take_rows(order).scale_rows(factors)


def d_solve_left(ctx: FieldContext, blocks, m: DenseMatrix) -> DenseMatrix:
    return d_mul_left(ctx, d_inverse(ctx, blocks), m)


def d_mul_right(ctx: FieldContext, m: DenseMatrix, blocks) -> DenseMatrix:
    # m @ D = (D^H m^H)^H and D^H = D for legal blocks.
    return d_mul_left(ctx, blocks, m.conj_transpose()).conj_transpose()


def d_solve_right(ctx: FieldContext, m: DenseMatrix, blocks) -> DenseMatrix:
    return d_mul_right(ctx, m, d_inverse(ctx, blocks))


@dataclass
class LDLResult:
    P: Permutation
    L: DenseMatrix
    D: list
    r: int

    def d_dense(self) -> DenseMatrix:
        return d_dense(self.L.ctx, self.D)


@dataclass
class LUResult:
    P: Permutation
    Q: Permutation
    L: DenseMatrix
    U: DenseMatrix
    r: int


def unreduced_ldl(res: LDLResult, n: int):
    """Pad a reduced LDL back to the square n x n form (L, D as matrices)."""
    ctx = res.L.ctx
    lfull = DenseMatrix.identity(ctx, n)
    lfull.set_block(0, 0, res.L)
    for i in range(res.r):
        lfull.set(i, i, ctx.one)
    dfull = DenseMatrix.zeros(ctx, n, n)
    dfull.set_block(0, 0, res.d_dense())
    return lfull, dfull


# -- elimination primitives ---------------------------------------------------


def vertex_eliminate(a: DenseMatrix, i: int):
    """Rank-1 symmetric elimination pivoting on a nonzero diagonal entry.

    Returns (l, d, s): the full elimination column over the original
    index set (unit at i), the pivot, and the Schur complement over the
    remaining indices in original order.
    """
    ctx = a.ctx
    n = a.nrows
    d = a.get(i, i)
    if ctx.is_zero(d):
        raise ZeroPivot(f"zero diagonal pivot at {i}")
    dinv = ctx.inv(d)
    col = a.block(0, n, i, i + 1)
    l = col.scale(dinv)
    rest = [t for t in range(n) if t != i]
    lr = l.take_rows(rest)
    cr = col.take_rows(rest).conj_transpose()
    s = a.take_rows(rest).take_cols(rest).sub(matmul(lr, cr))
    return l, d, s


@dataclass
class EdgeElimination:
    pivots: tuple  # indices in elimination order
    cols: DenseMatrix  # n x 2 over the original index set, column c unit at pivots[c]
    blocks: list  # one antidiagonal block, or two scalars when a diagonal pivot exists
    s: DenseMatrix  # Schur complement over remaining indices, original order


def edge_eliminate(a: DenseMatrix, i: int, j: int) -> EdgeElimination:
    """Rank-2 symmetric elimination on the pivot pair (i, j).

    A genuinely antidiagonal step needs both diagonal entries zero;
    otherwise the pair is normalized into the equivalent two vertex
    eliminations so antidiagonal D blocks only arise from zero-diagonal
    pivots.
    """
    ctx = a.ctx
    n = a.nrows
    aii, ajj = a.get(i, i), a.get(j, j)
    aij, aji = a.get(i, j), a.get(j, i)
    det = ctx.sub(ctx.mul(aii, ajj), ctx.mul(aij, aji))
    if ctx.is_zero(det):
        raise SingularPivot(f"singular 2x2 pivot at ({i}, {j})")
    if not ctx.is_zero(aii) or not ctx.is_zero(ajj):
        first, second = (i, j) if not ctx.is_zero(aii) else (j, i)
        l1, d1, s1 = vertex_eliminate(a, first)
        rest1 = [t for t in range(n) if t != first]
        k1 = rest1.index(second)
        l2s, d2, s = vertex_eliminate(s1, k1)
        l2 = DenseMatrix.zeros(ctx, n, 1)
        for t, v in zip(rest1, l2s.to_lists()):
            l2.set(t, 0, v[0])
        cols = hstack([l1, l2])
        blocks = [DBlock.scalar(d1), DBlock.scalar(d2)]
        return EdgeElimination((first, second), cols, blocks, s)
    u = a.block(0, n, i, i + 1)
    v = a.block(0, n, j, j + 1)
    c1 = v.scale(ctx.inv(aji))
    c2 = u.scale(ctx.inv(aij))
    rest = [t for t in range(n) if t not in (i, j)]
    ur, vr = u.take_rows(rest), v.take_rows(rest)
    s = a.take_rows(rest).take_cols(rest)
    s = s.sub(matmul(ur.scale(ctx.inv(aji)), vr.conj_transpose()))
    s = s.sub(matmul(vr.scale(ctx.inv(aij)), ur.conj_transpose()))
    return EdgeElimination((i, j), hstack([c1, c2]), [DBlock.antidiag(aij, aji)], s)


# -- base-case LDL ------------------------------------------------------------


def base_ldl(a: DenseMatrix) -> LDLResult:
    """Direct LDL by pivot search: first nonzero diagonal entry, else first
    nonzero sub-diagonal in column-major order."""
    ctx = a.ctx
    n = a.nrows
    cols = {}  # pivot order position -> {original index: value}
    blocks = []
    order = []
    ids = list(range(n))
    cur = a
    while ids:
        m = len(ids)
        piv = None
        for t in range(m):
            if not ctx.is_zero(cur.get(t, t)):
                piv = t
                break
        if piv is not None:
            l, d, s = vertex_eliminate(cur, piv)
            k = len(order)
            cols[k] = {ids[t]: l.get(t, 0) for t in range(m) if not ctx.is_zero(l.get(t, 0))}
            blocks.append(DBlock.scalar(d))
            order.append(ids[piv])
            ids = ids[:piv] + ids[piv + 1 :]
            cur = s
            continue
        pair = None
        for jj in range(m):
            for ii in range(jj + 1, m):
                if not ctx.is_zero(cur.get(ii, jj)):
                    pair = (jj, ii)
                    break
            if pair:
                break
        if pair is None:
            break  # zero matrix; remaining indices are rank-deficient
        jj, ii = pair
        ee = edge_eliminate(cur, jj, ii)
        k = len(order)
        for c in (0, 1):
            cols[k + c] = {
                ids[t]: ee.cols.get(t, c)
                for t in range(m)
                if not ctx.is_zero(ee.cols.get(t, c))
            }
        blocks.extend(ee.blocks)
        order.extend(ids[t] for t in ee.pivots)
        ids = [ids[t] for t in range(m) if t not in (jj, ii)]
        cur = ee.s
    r = len(order)
    fwd = order + ids
    pos = {v: t for t, v in enumerate(fwd)}
    l = DenseMatrix.zeros(ctx, n, r)
    for k in range(r):
        for idx, val in cols[k].items():
            l.set(pos[idx], k, val)
    return LDLResult(Permutation(fwd), l, blocks, r)


# -- fast LU -------------------------------------------------------------------


def fast_lu(a: DenseMatrix, cutoff: int | None = None) -> LUResult:
    """Rank-revealing P A Q^T = L U by recursive row splitting."""
    ctx = a.ctx
    m, n = a.nrows, a.ncols
    if m == 1:
        j = None
        for t in range(n):
            if not ctx.is_zero(a.get(0, t)):
                j = t
                break
        if j is None:
            return LUResult(
                Permutation.identity(1),
                Permutation.identity(n),
                DenseMatrix.zeros(ctx, 1, 0),
                DenseMatrix.zeros(ctx, 0, n),
                0,
            )
        q = Permutation.transposition(n, 0, j)
        u = a.take_cols(q.fwd)
        return LUResult(
            Permutation.identity(1),
            q,
            DenseMatrix.identity(ctx, 1),
            u,
            1,
        )
    m1 = m // 2
    top = fast_lu(a.block(0, m1, 0, n), cutoff)
    r1 = top.r
    a2q = a.block(m1, m, 0, n).take_cols(top.Q.fwd)
    u1a = top.U.block(0, r1, 0, r1)
    b1 = tri_solve(u1a, a2q.block(0, m - m1, 0, r1), RIGHT, UPPER, cutoff)
    b2 = a2q.block(0, m - m1, r1, n).sub(matmul(b1, top.U.block(0, r1, r1, n), cutoff))
    bot = fast_lu(b2, cutoff)
    r2 = bot.r
    pfwd = (
        [top.P.fwd[t] for t in range(r1)]
        + [m1 + bot.P.fwd[t] for t in range(m - m1)]
        + [top.P.fwd[t] for t in range(r1, m1)]
    )
    qfwd = [top.Q.fwd[j] for j in range(r1)] + [
        top.Q.fwd[r1 + bot.Q.fwd[j]] for j in range(n - r1)
    ]
    b1p = b1.take_rows(bot.P.fwd)
    lmid = hstack([b1p, bot.L])
    ltop = hstack([top.L.block(0, r1, 0, r1), DenseMatrix.zeros(ctx, r1, r2)])
    lbot = hstack(
        [top.L.block(r1, m1, 0, r1), DenseMatrix.zeros(ctx, m1 - r1, r2)]
    )
    l = vstack([ltop, lmid, lbot])
    # Pivot rows stay first in original order; sort the pivoted-out rows back
    # into original order as well (their L rows carry no shape constraint).
    r = r1 + r2
    sigma = list(range(r)) + sorted(range(r, m), key=lambda t: pfwd[t])
    pfwd = [pfwd[t] for t in sigma]
    l = l.take_rows(sigma)
    utop = hstack([u1a, top.U.block(0, r1, r1, n).take_cols(bot.Q.fwd)])
    ubot = hstack([DenseMatrix.zeros(ctx, r2, r1), bot.U])
    u = vstack([utop, ubot])
    return LUResult(Permutation(pfwd), Permutation(qfwd), l, u, r)


# -- fast LDL ------------------------------------------------------------------


def fast_ldl(a: DenseMatrix, cutoff: int | None = None) -> LDLResult:
    """Rank-revealing P^T A P = L D L^H for an H-symmetric matrix.

    Recursion: factor the leading block of size n - floor(n/3), move its
    full-rank part first, take the Schur complement, and either recurse
    on it directly or (when the leading block is rank-deficient) bring
    the independent columns of its off-diagonal block forward with an LU
    before recursing on the bordered core.
    """
    ctx = a.ctx
    n = a.nrows
    if a.ncols != n:
        raise ValueError("LDL needs a square matrix")
    if n <= 3:
        return base_ldl(a)
    s = n // 3
    n1 = n - s
    top = fast_ldl(a.block(0, n1, 0, n1), cutoff)
    r1 = top.r
    ord1 = (
        [top.P.fwd[t] for t in range(r1)]
        + list(range(n1, n))
        + [top.P.fwd[t] for t in range(r1, n1)]
    )
    pt1 = Permutation(ord1)
    at = permute(a, pt1, pt1)
    l11 = top.L.block(0, r1, 0, r1)
    d1 = top.D
    c = at.block(0, r1, r1, n)
    w = tri_solve(l11, c, LEFT, LOWER_UNIT, cutoff)
    v = d_solve_left(ctx, d1, w)
    bmat = at.block(r1, n, r1, n).sub(matmul(w.conj_transpose(), v, cutoff))
    if 3 * r1 >= n:
        res2 = fast_ldl(bmat, cutoff)
        blk = Permutation(list(range(r1)) + [r1 + t for t in res2.P.fwd])
        p = compose(pt1, blk)
        l21 = v.conj_transpose().take_rows(res2.P.fwd)
        l = vstack(
            [
                hstack([l11, DenseMatrix.zeros(ctx, r1, res2.r)]),
                hstack([l21, res2.L]),
            ]
        )
        return LDLResult(p, l, list(d1) + list(res2.D), r1 + res2.r)
    q = n - r1 - s
    b12 = bmat.block(0, s, s, n - r1)
    lu12 = fast_lu(b12, cutoff)
    rb = lu12.r
    pivcols = [lu12.Q.fwd[t] for t in range(rb)]
    tailcols = [lu12.Q.fwd[t] for t in range(rb, q)]
    bsel = b12.take_cols(pivcols)
    dim2 = s + rb
    bt = DenseMatrix.zeros(ctx, dim2, dim2)
    bt.set_block(0, 0, bmat.block(0, s, 0, s))
    bt.set_block(0, s, bsel)
    bt.set_block(s, 0, bsel.conj_transpose())
    res2 = fast_ldl(bt, cutoff)
    r2 = res2.r
    mid = list(range(r1, r1 + s)) + [r1 + s + cidx for cidx in pivcols]
    mid_perm = [mid[res2.P.fwd[t]] for t in range(dim2)]
    ordfinal = list(range(r1)) + mid_perm + [r1 + s + cidx for cidx in tailcols]
    p = compose(pt1, Permutation(ordfinal))
    ahat = permute(a, p, p)
    dim3 = q - rb
    a12h = ahat.block(0, r1, r1, r1 + dim2)
    a13h = ahat.block(0, r1, r1 + dim2, n)
    l21 = d_solve_left(ctx, d1, tri_solve(l11, a12h, LEFT, LOWER_UNIT, cutoff)).conj_transpose()
    l31 = d_solve_left(ctx, d1, tri_solve(l11, a13h, LEFT, LOWER_UNIT, cutoff)).conj_transpose()
    l22 = res2.L
    lt22 = l22.block(0, r2, 0, r2)
    rblk = ahat.block(r1, r1 + dim2, r1 + dim2, n)
    r2blk = rblk.sub(matmul(d_mul_right(ctx, l21, d1), l31.conj_transpose(), cutoff))
    t = tri_solve(lt22, r2blk.block(0, r2, 0, dim3), LEFT, LOWER_UNIT, cutoff)
    t = d_solve_left(ctx, res2.D, t)
    l32 = t.conj_transpose()
    check = matmul(d_mul_right(ctx, l22.block(r2, dim2, 0, r2), res2.D), t, cutoff)
    if check != r2blk.block(r2, dim2, 0, dim3):
        raise InternalInvariantViolation("inconsistent rows in bordered LDL branch")
    res33 = ahat.block(r1 + dim2, n, r1 + dim2, n)
    res33 = res33.sub(matmul(d_mul_right(ctx, l31, d1), l31.conj_transpose(), cutoff))
    res33 = res33.sub(matmul(d_mul_right(ctx, l32, res2.D), l32.conj_transpose(), cutoff))
    if not res33.is_zero():
        raise InternalInvariantViolation("nonzero trailing residual in bordered LDL branch")
    r = r1 + r2
    l = vstack(
        [
            hstack([l11, DenseMatrix.zeros(ctx, r1, r2)]),
            hstack([l21, l22]),
            hstack([l31, l32]),
        ]
    )
    return LDLResult(p, l, list(d1) + list(res2.D), r)


# -- natural-order LDL (fill measurements) --------------------------------------


def natural_order_ldl(a: DenseMatrix) -> LDLResult:
    """LDL eliminating indices in their given order (no fill-avoiding pivoting).

    At each step the leading active index is eliminated: by a vertex
    elimination when its diagonal is nonzero, otherwise by an edge
    elimination with the first later index coupled to it.  Indices with
    an entirely zero row are skipped to the tail.
    """
    ctx = a.ctx
    n = a.nrows
    ids = list(range(n))
    cur = a
    order = []
    tail = []
    cols = {}
    blocks = []
    while ids:
        m = len(ids)
        if not ctx.is_zero(cur.get(0, 0)):
            l, d, s = vertex_eliminate(cur, 0)
            k = len(order)
            cols[k] = {
                ids[t]: l.get(t, 0) for t in range(m) if not ctx.is_zero(l.get(t, 0))
            }
            blocks.append(DBlock.scalar(d))
            order.append(ids[0])
            ids = ids[1:]
            cur = s
            continue
        partner = None
        for t in range(1, m):
            if not ctx.is_zero(cur.get(t, 0)):
                partner = t
                break
        if partner is None:
            tail.append(ids[0])
            ids = ids[1:]
            rest = list(range(1, m))
            cur = cur.take_rows(rest).take_cols(rest)
            continue
        ee = edge_eliminate(cur, 0, partner)
        k = len(order)
        for cdx in (0, 1):
            cols[k + cdx] = {
                ids[t]: ee.cols.get(t, cdx)
                for t in range(m)
                if not ctx.is_zero(ee.cols.get(t, cdx))
            }
        blocks.extend(ee.blocks)
        order.extend(ids[t] for t in ee.pivots)
        ids = [ids[t] for t in range(m) if t not in (0, partner)]
        cur = ee.s
    r = len(order)
    fwd = order + tail
    pos = {vid: t for t, vid in enumerate(fwd)}
    l = DenseMatrix.zeros(ctx, n, r)
    for k in range(r):
        for idx, val in cols[k].items():
            l.set(pos[idx], k, val)
    return LDLResult(Permutation(fwd), l, blocks, r)


# -- inertia -------------------------------------------------------------------


def inertia_from_D(blocks, n: int, ctx: FieldContext):
    """(positive, negative, zero) eigenvalue counts read off D; rationals only."""
    if not ctx.is_ordered():
        raise UnorderedField("inertia needs an ordered field")
    pos = neg = 0
    for b in blocks:
        if b.kind == SCALAR:
            if b.d > 0:
                pos += 1
            else:
                neg += 1
        else:
            pos += 1
            neg += 1
    return pos, neg, n - d_size(blocks)
