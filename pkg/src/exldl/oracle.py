"""Independent brute-force references for the acceptance tests.

Rank is computed by plain scalar Gaussian elimination on raw value
lists, verification assembles both sides of each factorization identity
entrywise, and inertia is checked through congruence invariance.  None
of the elimination code here is shared with the fast factorization
paths; these routines are intentionally naive and meant for test sizes
up to a few hundred.  Reference computations are metered coarsely
(one row update of width w counts w muls and w adds).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .dense import DenseMatrix
from .factor import ANTIDIAG, SCALAR, d_size, fast_ldl, inertia_from_D
from .fields import GF2, GFP, RATIONAL, FieldContext, UnorderedField


@dataclass
class VerifyReport:
    ok: bool
    first_violation: str | None = None
    reconstruction_error_count: int = 0

    def __bool__(self):
        return self.ok


def _fail(msg: str, count: int = 0) -> VerifyReport:
    return VerifyReport(False, msg, count)


# -- rank ---------------------------------------------------------------------


def oracle_rank(a: DenseMatrix) -> int:
    """Rank via plain Gaussian elimination with pivot search down each column."""
    ctx = a.ctx
    m, n = a.nrows, a.ncols
    if m == 0 or n == 0:
        return 0
    rows = a.to_lists()
    kind = ctx.kind
    p = ctx.p
    r = 0
    for j in range(n):
        piv = None
        for i in range(r, m):
            if rows[i][j] != 0:
                piv = i
                break
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        prow = rows[r]
        pval = prow[j]
        if kind == GF2:
            for i in range(r + 1, m):
                if rows[i][j]:
                    ri = rows[i]
                    rows[i] = [x ^ y for x, y in zip(ri, prow)]
        elif kind == GFP:
            pinv = pow(pval, p - 2, p)
            for i in range(r + 1, m):
                f = rows[i][j]
                if f:
                    c = f * pinv % p
                    ri = rows[i]
                    rows[i] = [(x - c * y) % p for x, y in zip(ri, prow)]
        else:
            for i in range(r + 1, m):
                f = rows[i][j]
                if f:
                    c = f / pval
                    ri = rows[i]
                    rows[i] = [x - c * y if y else x for x, y in zip(ri, prow)]
        ctx.count_ops(add=(m - r - 1) * n, mul=(m - r - 1) * n, inv=1)
        r += 1
        if r == m:
            break
    return r


# -- raw list arithmetic (reference side only) ----------------------------------


def _mm_lists(ctx: FieldContext, a, b, ncols: int | None = None):
    # Naive row-times-column products; zero operands are skipped, which
    # matters for exact rationals.  `ncols` disambiguates empty products.
    m = len(a)
    k = len(a[0]) if a else 0
    n = len(b[0]) if b else (ncols or 0)
    if k == 0:
        return [[ctx.zero] * n for _ in range(m)]
    bt = [[b[t][j] for t in range(k)] for j in range(n)]
    ctx.count_ops(mul=m * k * n, add=m * n * (k - 1) if k else 0)
    if ctx.kind == GF2:
        out = []
        for row in a:
            orow = []
            for col in bt:
                acc = 0
                for x, y in zip(row, col):
                    acc ^= x & y
                orow.append(acc)
            out.append(orow)
        return out
    if ctx.kind == GFP:
        p = ctx.p
        return [
            [sum(x * y for x, y in zip(row, col) if x and y) % p for col in bt]
            for row in a
        ]
    zero = ctx.zero
    return [
        [sum((x * y for x, y in zip(row, col) if x and y), zero) for col in bt]
        for row in a
    ]


def _conj_t_lists(ctx: FieldContext, a):
    m = len(a)
    n = len(a[0]) if a else 0
    return [[ctx.conj(a[i][j]) for i in range(m)] for j in range(n)]


def _d_lists(ctx: FieldContext, blocks):
    r = d_size(blocks)
    out = [[ctx.zero] * r for _ in range(r)]
    off = 0
    for blk in blocks:
        if blk.kind == SCALAR:
            out[off][off] = blk.d
        else:
            out[off][off + 1] = blk.a12
            out[off + 1][off] = blk.a21
        off += blk.size
    return out


def _perm_lists(a: DenseMatrix, pfwd, qfwd):
    return [[a.get(i, j) for j in qfwd] for i in pfwd]


def _diff_count(x, y):
    count = 0
    first = None
    for i, (rx, ry) in enumerate(zip(x, y)):
        for j, (vx, vy) in enumerate(zip(rx, ry)):
            if vx != vy:
                count += 1
                if first is None:
                    first = (i, j, vx, vy)
    return count, first


def _check_d_blocks(ctx: FieldContext, blocks):
    for k, blk in enumerate(blocks):
        if blk.kind == SCALAR:
            if blk.d == 0:
                return f"zero scalar D block at {k}"
        elif blk.kind == ANTIDIAG:
            if blk.a12 == 0 or blk.a21 == 0:
                return f"zero entry in antidiagonal D block at {k}"
            if blk.a21 != ctx.conj(blk.a12):
                return f"antidiagonal D block at {k} breaks conjugate symmetry"
        else:
            return f"unknown D block kind {blk.kind!r} at {k}"
    return None


def _check_unit_lower_trapezoid(l: DenseMatrix, what: str):
    n, r = l.nrows, l.ncols
    for i in range(min(n, r)):
        if l.get(i, i) != l.ctx.one:
            return f"{what} diagonal entry {i} is not one"
        for j in range(i + 1, r):
            if l.get(i, j) != 0:
                return f"{what}[{i}][{j}] above the diagonal is nonzero"
    return None


# -- LDL verification ------------------------------------------------------------


def oracle_verify_ldl(a: DenseMatrix, res) -> VerifyReport:
    """Entrywise check of the permuted-congruence identity plus structure."""
    ctx = a.ctx
    n = a.nrows
    r = res.r
    if res.L.shape != (n, r):
        return _fail(f"L has shape {res.L.shape}, expected {(n, r)}")
    if len(res.P.fwd) != n:
        return _fail("P has wrong size")
    if d_size(res.D) != r:
        return _fail("D block sizes do not sum to the rank")
    msg = _check_d_blocks(ctx, res.D)
    if msg:
        return _fail(msg)
    msg = _check_unit_lower_trapezoid(res.L, "L")
    if msg:
        return _fail(msg)
    if r != oracle_rank(a):
        return _fail(f"claimed rank {r} != reference rank")
    ap = _perm_lists(a, res.P.fwd, res.P.fwd)
    llists = res.L.to_lists()
    recon = _mm_lists(
        ctx,
        _mm_lists(ctx, llists, _d_lists(ctx, res.D), ncols=r),
        _conj_t_lists(ctx, llists),
        ncols=n,
    )
    count, first = _diff_count(ap, recon)
    if count:
        i, j, got, want = first
        return _fail(
            f"reconstruction mismatch at ({i},{j}): permuted A is {got}, LDL^H gives {want}",
            count,
        )
    return VerifyReport(True)


# -- LU verification ---------------------------------------------------------------


def oracle_verify_lu(a: DenseMatrix, res, structural: bool = True) -> VerifyReport:
    """Check P A Q^T = L U, trapezoid shapes, rank, and (optionally) the
    pivot-row order preservation plus the echelon staircase of the L factor
    brought back to original row order."""
    ctx = a.ctx
    m, n = a.nrows, a.ncols
    r = res.r
    if res.L.shape != (m, r) or res.U.shape != (r, n):
        return _fail("factor shapes do not match")
    msg = _check_unit_lower_trapezoid(res.L, "L")
    if msg:
        return _fail(msg)
    for i in range(r):
        if res.U.get(i, i) == 0:
            return _fail(f"U diagonal entry {i} is zero")
        for j in range(i):
            if res.U.get(i, j) != 0:
                return _fail(f"U[{i}][{j}] below the diagonal is nonzero")
    if r != oracle_rank(a):
        return _fail(f"claimed rank {r} != reference rank")
    ap = _perm_lists(a, res.P.fwd, res.Q.fwd)
    recon = _mm_lists(ctx, res.L.to_lists(), res.U.to_lists(), ncols=n)
    count, first = _diff_count(ap, recon)
    if count:
        i, j, got, want = first
        return _fail(
            f"reconstruction mismatch at ({i},{j}): permuted A is {got}, LU gives {want}",
            count,
        )
    if structural:
        piv = res.P.fwd[:r]
        if any(piv[t] >= piv[t + 1] for t in range(r - 1)):
            return _fail("pivot rows are not in original relative order")
        # Echelon staircase: with L back in original row order, the topmost
        # nonzero of column k sits strictly below that of column k-1, i.e.
        # trailing supports strictly shrink.
        lorig = res.L.take_rows(res.P.inv)
        tops = []
        for k in range(r):
            top = None
            for i in range(m):
                if lorig.get(i, k) != 0:
                    top = i
                    break
            if top is None:
                return _fail(f"L column {k} is zero")
            tops.append(top)
        if any(tops[t] >= tops[t + 1] for t in range(r - 1)):
            return _fail("echelon staircase violated: column supports do not shrink")
    return VerifyReport(True)


# -- partial LDL (saddle systems) ----------------------------------------------------


def oracle_verify_partial_ldl(system, f) -> VerifyReport:
    """Assemble both sides of the constraint-complemented partial LDL identity."""
    a, b = system.A, system.B
    ctx = a.ctx
    n, m = a.nrows, b.nrows
    r = f.r
    if f.L.shape != (n, r) or f.Y.shape != (n, r) or f.U.shape != (r, m):
        return _fail("partial LDL factor shapes do not match")
    if len(f.D) != r:
        return _fail("partial LDL D has wrong length")
    msg = _check_unit_lower_trapezoid(f.L, "L")
    if msg:
        return _fail(msg)
    for i in range(min(n, r)):
        if f.Y.get(i, i) != 0:
            return _fail(f"Y diagonal entry {i} is nonzero")
        for j in range(i + 1, r):
            if f.Y.get(i, j) != 0:
                return _fail(f"Y[{i}][{j}] above the diagonal is nonzero")
    for i in range(r):
        if f.U.get(i, i) == 0:
            return _fail(f"U diagonal entry {i} is zero")
        for j in range(i):
            if f.U.get(i, j) != 0:
                return _fail(f"U[{i}][{j}] below the diagonal is nonzero")
    if r != oracle_rank(b):
        return _fail(f"claimed rank {r} != reference rank of the constraint block")
    # V = Y - diag(D) on the leading r rows.
    v = f.Y.to_lists()
    for i in range(r):
        v[i][i] = ctx.sub(v[i][i], f.D[i])
    llists = f.L.to_lists()
    lh = _conj_t_lists(ctx, llists)
    vlh = _mm_lists(ctx, v, lh, ncols=n)
    lvh = _mm_lists(ctx, llists, _conj_t_lists(ctx, v), ncols=n)
    dmat = [[ctx.zero] * r for _ in range(r)]
    for i in range(r):
        dmat[i][i] = f.D[i]
        if ctx.conj(f.D[i]) != f.D[i]:
            return _fail(f"D[{i}] breaks conjugate symmetry")
    ldlh = _mm_lists(ctx, _mm_lists(ctx, llists, dmat, ncols=r), lh, ncols=n)
    ap = _perm_lists(a, f.P.fwd, f.P.fwd)
    resid = [
        [ctx.sub(ctx.sub(ctx.sub(ap[i][j], vlh[i][j]), lvh[i][j]), ldlh[i][j]) for j in range(n)]
        for i in range(n)
    ]
    for i in range(n):
        for j in range(n):
            if (i < r or j < r) and resid[i][j] != 0:
                return _fail(f"residual leaks outside the trailing block at ({i},{j})")
    bp = [[b.get(bi, aj) for aj in f.P.fwd] for bi in f.Q.fwd]
    uhlh = _mm_lists(ctx, _conj_t_lists(ctx, f.U.to_lists()), lh, ncols=n)
    count, first = _diff_count(bp, uhlh)
    if count:
        i, j, got, want = first
        return _fail(
            f"constraint block mismatch at ({i},{j}): permuted B is {got}, U^H L^H gives {want}",
            count,
        )
    return VerifyReport(True)


# -- inertia through congruence -------------------------------------------------------


def oracle_inertia_congruence(a: DenseMatrix, trials: int, seed: int = 0) -> VerifyReport:
    """Inertia must be invariant under congruence by random invertible G."""
    ctx = a.ctx
    if ctx.kind != RATIONAL:
        raise UnorderedField("inertia congruence check needs the rationals")
    n = a.nrows
    base_res = fast_ldl(a)
    base = inertia_from_D(base_res.D, n, ctx)
    rng = random.Random(seed)
    for t in range(trials):
        while True:
            g = DenseMatrix.from_rows(
                ctx,
                [[rng.randint(-3, 3) for _ in range(n)] for _ in range(n)],
            )
            if oracle_rank(g) == n:
                break
        glists = g.to_lists()
        gagh = _mm_lists(ctx, _mm_lists(ctx, glists, a.to_lists()), _conj_t_lists(ctx, glists))
        cong = DenseMatrix.from_rows(ctx, gagh)
        res = fast_ldl(cong)
        got = inertia_from_D(res.D, n, ctx)
        if got != base:
            return _fail(f"inertia changed under congruence trial {t}: {base} -> {got}")
    return VerifyReport(True)
