"""Saddle-point partial LDL via constraint complementation.

A saddle system is the block matrix [[A, B^H], [B, 0]] with H-symmetric
A; the zero block is implicit and never stored.  A partial LDL of it is
the tuple (P, Q, Y, L, U, D, r) with r = rank(B), D a diagonal r-vector,
L unit-diagonal lower-trapezoidal, Y lower-trapezoidal with zero
diagonal, and U upper-trapezoidal with nonzero diagonal, satisfying,
with V = Y - diag(D) on the leading r rows,

    P-permuted A   =  V L^H + L V^H + L D L^H  +  residual,
    Q,P-permuted B =  U^H L^H,

where the residual is nonzero only in its trailing (n-r) x (n-r) block.
Two constructions are provided: direct cross-boundary edge elimination
(one constraint pivot at a time) and the LU-based null-space route in
the style of Schilders' factorization.  Both verify against the same
oracle and complete to a full LDL of the whole (n+m) system.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dense import (
    LEFT,
    LOWER_UNIT,
    RIGHT,
    UPPER_UNIT,
    DenseMatrix,
    Permutation,
    hstack,
    matmul,
    permute,
    tri_solve,
    vstack,
)
from .factor import DBlock, LDLResult, fast_ldl, fast_lu
from .fields import DimensionMismatch, ResidualLeakage, ZeroB11


@dataclass
class SaddleSystem:
    A: DenseMatrix
    B: DenseMatrix

    def __post_init__(self):
        if self.A.nrows != self.A.ncols:
            raise DimensionMismatch("A block must be square")
        if self.B.ncols != self.A.nrows:
            raise DimensionMismatch("B block must have as many columns as A")
        if self.A.ctx != self.B.ctx:
            raise DimensionMismatch("mixed field contexts")

    @property
    def n(self) -> int:
        return self.A.nrows

    @property
    def m(self) -> int:
        return self.B.nrows

    def dense(self) -> DenseMatrix:
        """Materialize the full (n+m) saddle matrix (tests and completion)."""
        ctx = self.A.ctx
        n, m = self.n, self.m
        out = DenseMatrix.zeros(ctx, n + m, n + m)
        out.set_block(0, 0, self.A)
        out.set_block(0, n, self.B.conj_transpose())
        out.set_block(n, 0, self.B)
        return out


@dataclass
class PartialLDL:
    P: Permutation  # n
    Q: Permutation  # m
    Y: DenseMatrix  # n x r, lower-trapezoidal, zero diagonal
    L: DenseMatrix  # n x r, lower-trapezoidal, unit diagonal
    U: DenseMatrix  # r x m, upper-trapezoidal, nonzero diagonal
    D: list  # diagonal r-vector
    r: int


def _scale_cols(m: DenseMatrix, factors) -> DenseMatrix:
    """m @ diag(factors)."""
    ctx = m.ctx
    return (
        m.conj_transpose()
        .scale_rows([ctx.conj(f) for f in factors])
        .conj_transpose()
    )


def gamma_eliminate_partial(system: SaddleSystem) -> PartialLDL:
    """Partial LDL by repeated cross-boundary edge elimination.

    Pivots on the first nonzero of the (current) constraint block in
    row-major order; each step eliminates one constraint row paired with
    one A column, updating both blocks by the rank-2 Schur complement.
    """
    ctx = system.A.ctx
    n, m = system.n, system.m
    aw = system.A.to_lists()
    bw = system.B.to_lists()
    act_a = list(range(n))
    act_b = list(range(m))
    piv_a, piv_b = [], []
    dvals = []
    ycols, lcols, urows = [], [], []
    while True:
        pivot = None
        for bi in act_b:
            for aj in act_a:
                if bw[bi][aj] != 0:
                    pivot = (bi, aj)
                    break
            if pivot:
                break
        if pivot is None:
            break
        bi, aj = pivot
        b11 = bw[bi][aj]
        a11 = aw[aj][aj]
        b11i = ctx.inv(b11)
        b11ci = ctx.inv(ctx.conj(b11))
        dvals.append(ctx.neg(a11))
        ycols.append({u: aw[u][aj] for u in act_a if u != aj and aw[u][aj] != 0})
        lcols.append(
            {u: ctx.mul(ctx.conj(bw[bi][u]), b11ci) for u in act_a if bw[bi][u] != 0}
        )
        urows.append({v: ctx.conj(bw[v][aj]) for v in act_b if bw[v][aj] != 0})
        acol = {u: aw[u][aj] for u in act_a}
        brow = {u: bw[bi][u] for u in act_a}
        # A' = A - acol b11^-1 brow - brow^H (b11^*)^-1 acol^H
        #        + brow^H a11 (b11^* b11)^-1 brow
        gamma = ctx.mul(a11, ctx.mul(b11ci, b11i))
        for u in act_a:
            au = acol[u]
            buc = ctx.conj(brow[u])
            row = aw[u]
            for w in act_a:
                val = row[w]
                val = ctx.sub(val, ctx.mul(au, ctx.mul(b11i, brow[w])))
                val = ctx.sub(val, ctx.mul(buc, ctx.mul(b11ci, ctx.conj(acol[w]))))
                val = ctx.add(val, ctx.mul(buc, ctx.mul(gamma, brow[w])))
                row[w] = val
        for v in act_b:
            f = ctx.mul(bw[v][aj], b11i)
            if f != 0:
                row = bw[v]
                for w in act_a:
                    row[w] = ctx.sub(row[w], ctx.mul(f, brow[w]))
        piv_a.append(aj)
        piv_b.append(bi)
        act_a.remove(aj)
        act_b.remove(bi)
    r = len(piv_a)
    pfwd = piv_a + act_a
    qfwd = piv_b + act_b
    apos = {v: i for i, v in enumerate(pfwd)}
    bpos = {v: i for i, v in enumerate(qfwd)}
    y = DenseMatrix.zeros(ctx, n, r)
    l = DenseMatrix.zeros(ctx, n, r)
    u = DenseMatrix.zeros(ctx, r, m)
    for k in range(r):
        for idx, val in ycols[k].items():
            y.set(apos[idx], k, val)
        for idx, val in lcols[k].items():
            l.set(apos[idx], k, val)
        for idx, val in urows[k].items():
            u.set(k, bpos[idx], val)
    return PartialLDL(Permutation(pfwd), Permutation(qfwd), y, l, u, dvals, r)


def schilders_partial_ldl(
    system: SaddleSystem, cutoff: int | None = None, use_solves: bool = True
) -> PartialLDL:
    """Partial LDL from a rank-revealing LU of B^H (null-space construction).

    The diagonal D is the negation of the diagonal of W = L1^-1 A11 L1^-H
    and Y comes from the lower-triangular part of W, diagonal included.
    `use_solves` picks triangular solves over explicit triangular
    inversion; both produce identical exact results.
    """
    ctx = system.A.ctx
    n = system.n
    lu = fast_lu(system.B.conj_transpose(), cutoff)
    r = lu.r
    ap = permute(system.A, lu.P, lu.P)
    a11 = ap.block(0, r, 0, r)
    a21 = ap.block(r, n, 0, r)
    l1 = lu.L.block(0, r, 0, r)
    l2 = lu.L.block(r, n, 0, r)
    if use_solves:
        wa = tri_solve(l1, a11, LEFT, LOWER_UNIT, cutoff)
        w = tri_solve(l1.conj_transpose(), wa, RIGHT, UPPER_UNIT, cutoff)
    else:
        from .dense import tri_invert

        l1i = tri_invert(l1, LOWER_UNIT, cutoff)
        w = matmul(matmul(l1i, a11, cutoff), l1i.conj_transpose(), cutoff)
    dvals = [ctx.neg(w.get(i, i)) for i in range(r)]
    wl = DenseMatrix.zeros(ctx, r, r)
    for i in range(r):
        for j in range(i + 1):
            wl.set(i, j, w.get(i, j))
    y1 = matmul(l1, wl, cutoff)
    for i in range(r):
        y1.set(i, i, ctx.add(y1.get(i, i), dvals[i]))
    # Y2 = (A21 - L2 ((Y1^H - D) + D L1^H)) L1^-H
    t = y1.conj_transpose()
    for i in range(r):
        t.set(i, i, ctx.sub(t.get(i, i), dvals[i]))
    dl1h = l1.conj_transpose().scale_rows(dvals)
    y2 = a21.sub(matmul(l2, t.add(dl1h), cutoff))
    y2 = tri_solve(l1.conj_transpose(), y2, RIGHT, UPPER_UNIT, cutoff)
    y = vstack([y1, y2])
    return PartialLDL(lu.P, lu.Q, y, lu.L, lu.U, dvals, r)


def residual_schur(system: SaddleSystem, f: PartialLDL) -> DenseMatrix:
    """Trailing (n-r) x (n-r) H-symmetric block of the partial-LDL residual.

    Raises ResidualLeakage if the residual has support outside that block.
    """
    ctx = system.A.ctx
    n, r = system.n, f.r
    ap = permute(system.A, f.P, f.P)
    v = f.Y.copy()
    for i in range(r):
        v.set(i, i, ctx.sub(v.get(i, i), f.D[i]))
    lh = f.L.conj_transpose()
    resid = ap.sub(matmul(v, lh))
    resid = resid.sub(matmul(f.L, v.conj_transpose()))
    resid = resid.sub(matmul(_scale_cols(f.L, f.D), lh))
    for i in range(n):
        for j in range(n):
            if (i < r or j < r) and resid.get(i, j) != 0:
                raise ResidualLeakage(f"partial LDL residual leaks at ({i}, {j})")
    return resid.block(r, n, r, n)


def skeleton_to_ldl_columns(k: DenseMatrix, a11, b11, n_rows_a: int):
    """Convert one rank-2 elimination skeleton into two unit-diagonal L
    columns and matching D block(s).

    `k` is the skeleton with rows ordered [pivot A row, other A rows...,
    pivot B row, other B rows...] (`n_rows_a` rows on the A side):
    column 0 holds [a11, A column below the pivot, current B column] and
    column 1 holds [1, paired elimination column, 0].  Returned columns
    are in the shifted row order [pivot A, pivot B, other A..., other
    B...].  A zero a11 yields one antidiagonal block; otherwise the pair
    reduces to two scalar blocks through the 2x2 factorization of the
    pivot block.
    """
    ctx = k.ctx
    if ctx.is_zero(b11):
        raise ZeroB11("skeleton conversion needs a nonzero constraint pivot")
    rows = k.nrows
    shift = [0, n_rows_a] + list(range(1, n_rows_a)) + list(range(n_rows_a + 1, rows))
    ks = k.take_rows(shift)
    kcol1 = ks.block(0, rows, 0, 1)
    kcol2 = ks.block(0, rows, 1, 2)
    if ctx.is_zero(a11):
        c2 = kcol1.scale(ctx.inv(b11))
        return hstack([kcol2, c2]), [DBlock.antidiag(ctx.conj(b11), b11)]
    c2 = kcol1.sub(kcol2.scale(a11)).scale(ctx.inv(b11))
    beta = ctx.mul(b11, ctx.inv(ctx.conj(a11)))
    c1 = kcol2.add(c2.scale(beta))
    d2 = ctx.neg(ctx.mul(b11, ctx.mul(ctx.inv(ctx.conj(a11)), ctx.conj(b11))))
    return hstack([c1, c2]), [DBlock.scalar(ctx.conj(a11)), DBlock.scalar(d2)]


def partial_skeleton(f: PartialLDL, k: int, ctx):
    """Skeleton matrix, current pivot values, and row identities of pair k.

    Rows cover the still-active part of the system at step k: A rows at
    permuted positions k.., then constraint rows at permuted positions
    k..; returns (K, a11, b11).
    """
    n = f.L.nrows
    m = f.U.ncols
    na = n - k
    nb = m - k
    kmat = DenseMatrix.zeros(ctx, na + nb, 2)
    a11 = ctx.neg(f.D[k])
    kmat.set(0, 0, a11)
    kmat.set(0, 1, ctx.one)
    for t in range(k + 1, n):
        kmat.set(t - k, 0, f.Y.get(t, k))
        kmat.set(t - k, 1, f.L.get(t, k))
    for t in range(k, m):
        kmat.set(na + t - k, 0, ctx.conj(f.U.get(k, t)))
    b11 = ctx.conj(f.U.get(k, k))
    return kmat, a11, b11


def complete_saddle_ldl(system: SaddleSystem, f: PartialLDL) -> LDLResult:
    """Full LDL of the (n+m) saddle matrix: convert each constraint pair
    through the skeleton form, then append the LDL of the residual Schur
    complement."""
    ctx = system.A.ctx
    n, m, r = system.n, system.m, f.r
    resid = residual_schur(system, f)
    res2 = fast_ldl(resid)
    fwd = []
    for k in range(r):
        fwd.append(f.P.fwd[k])
        fwd.append(n + f.Q.fwd[k])
    fwd += [f.P.fwd[r + res2.P.fwd[t]] for t in range(n - r)]
    fwd += [n + f.Q.fwd[t] for t in range(r, m)]
    pos = {v: i for i, v in enumerate(fwd)}
    rank = 2 * r + res2.r
    l = DenseMatrix.zeros(ctx, n + m, rank)
    blocks = []
    for k in range(r):
        kmat, a11, b11 = partial_skeleton(f, k, ctx)
        cols, blks = skeleton_to_ldl_columns(kmat, a11, b11, n - k)
        blocks.extend(blks)
        row_ids = (
            [f.P.fwd[k], n + f.Q.fwd[k]]
            + [f.P.fwd[t] for t in range(k + 1, n)]
            + [n + f.Q.fwd[t] for t in range(k + 1, m)]
        )
        for local, gid in enumerate(row_ids):
            for c in (0, 1):
                v = cols.get(local, c)
                if not ctx.is_zero(v):
                    l.set(pos[gid], 2 * k + c, v)
    for t in range(n - r):
        gid = f.P.fwd[r + res2.P.fwd[t]]
        for c in range(res2.r):
            v = res2.L.get(t, c)
            if not ctx.is_zero(v):
                l.set(pos[gid], 2 * r + c, v)
    blocks.extend(res2.D)
    return LDLResult(Permutation(fwd), l, blocks, rank)
