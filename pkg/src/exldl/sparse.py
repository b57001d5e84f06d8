"""Treewidth-bounded sparse LDL/LU with vertex peeling.

The factorization is returned as a transcript: the ordered sequence of
elimination and peeling transformations (indices refer to the
post-ordered vertex positions) together with the reduced block diagonal.
Writing B for the product of the transformation matrices, the defining
identity is  A = B D B^H  with B a permuted unit-lower-trapezoidal
n x rank matrix; the permutation is recoverable from the pivot order.
A vertex is peeled when its remaining border column is a linear
combination of other active columns; every vertex ends up either as an
elimination pivot or peeled, so the peel count is n - rank(A).

The tree engine is the multifrontal realization: each bag materializes
only its dense frontal block plus the carried constraint rows, indexed
by a global-to-local map; children pass their interface Schur
complements and delayed constraint rows upward, and each bag runs the
four-phase substep (peel dependent constraint rows, complement the
constraints against the to-be-eliminated columns, factor the remaining
local block, peel or carry what is left).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dense import (
    LEFT,
    LOWER_UNIT,
    RIGHT,
    UPPER,
    UPPER_UNIT,
    DenseMatrix,
    Permutation,
    hstack,
    matmul,
    tri_solve,
    vstack,
)
from .factor import (
    ANTIDIAG,
    SCALAR,
    DBlock,
    LDLResult,
    LUResult,
    d_size,
    d_solve_left,
    d_solve_right,
    fast_lu,
)
from .fields import (
    GF2,
    GFP,
    FieldContext,
    InconsistentSystem,
    InternalInvariantViolation,
    NotInSpan,
    packed_ops,
)
from .saddle import (
    SaddleSystem,
    partial_skeleton,
    residual_schur,
    schilders_partial_ldl,
    skeleton_to_ldl_columns,
)
from .treedec import NormalizedTD, greedy_td, normalize_td

L_TIMES = "L_times"
LH_TIMES = "Lh_times"
SOLVE_L = "solve_L"


# -- sparse symmetric storage ---------------------------------------------------


class SparseSym:
    """H-symmetric sparse matrix; upper triangle stored, lower implied."""

    __slots__ = ("ctx", "n", "rows")

    def __init__(self, ctx: FieldContext, n: int):
        self.ctx = ctx
        self.n = n
        self.rows = [dict() for _ in range(n)]

    @classmethod
    def from_entries(cls, ctx, n, entries) -> "SparseSym":
        """entries: iterable of (i, j, value); (i, j) and (j, i) may not both
        be given with conflicting values."""
        out = cls(ctx, n)
        for i, j, v in entries:
            out.set(i, j, ctx.el(v))
        return out

    def set(self, i, j, v):
        if i > j:
            i, j, v = j, i, self.ctx.conj(v)
        if self.ctx.is_zero(v):
            self.rows[i].pop(j, None)
        else:
            self.rows[i][j] = v

    def get(self, i, j):
        if i > j:
            return self.ctx.conj(self.rows[j].get(i, self.ctx.zero))
        return self.rows[i].get(j, self.ctx.zero)

    def edges(self):
        for i in range(self.n):
            for j in self.rows[i]:
                if j != i:
                    yield (i, j)

    def nnz(self) -> int:
        total = 0
        for i in range(self.n):
            for j in self.rows[i]:
                total += 1 if j == i else 2
        return total

    def densify(self) -> DenseMatrix:
        out = DenseMatrix.zeros(self.ctx, self.n, self.n)
        for i in range(self.n):
            for j, v in self.rows[i].items():
                out.set(i, j, v)
                if j != i:
                    out.set(j, i, self.ctx.conj(v))
        return out

    def relabel(self, order: Permutation) -> "SparseSym":
        """New matrix with entry (p, q) = self[order.fwd[p]][order.fwd[q]]."""
        pos = order.inv
        out = SparseSym(self.ctx, self.n)
        for i in range(self.n):
            for j, v in self.rows[i].items():
                out.set(pos[i], pos[j], v)
        return out


# -- transforms and transcript ----------------------------------------------------


@dataclass(frozen=True)
class VertexElim:
    pivot: int
    col: tuple  # ((index, value), ...) off-diagonal entries
    block: DBlock  # scalar


@dataclass(frozen=True)
class EdgeElim:
    pivots: tuple  # (first, second)
    col1: tuple  # off-diagonal entries of the first pivot's column
    col2: tuple
    block: DBlock  # antidiagonal


@dataclass(frozen=True)
class Peel:
    target: int
    coeffs: tuple  # ((index, value), ...) support on still-active vertices


@dataclass(frozen=True)
class Permute:
    mapping: tuple  # ((index, new position), ...) bookkeeping only


def _offdiag_count(tf) -> int:
    if isinstance(tf, VertexElim):
        return len(tf.col)
    if isinstance(tf, EdgeElim):
        return len(tf.col1) + len(tf.col2)
    if isinstance(tf, Peel):
        return len(tf.coeffs)
    return 0


class Transcript:
    """Ordered transformation sequence with the reduced block diagonal."""

    def __init__(self, ctx: FieldContext, n: int):
        self.ctx = ctx
        self.n = n
        self.transforms = []

    def append(self, tf):
        self.transforms.append(tf)

    @property
    def pivot_order(self):
        out = []
        for tf in self.transforms:
            if isinstance(tf, VertexElim):
                out.append(tf.pivot)
            elif isinstance(tf, EdgeElim):
                out.extend(tf.pivots)
        return out

    @property
    def dblocks(self):
        return [
            tf.block
            for tf in self.transforms
            if isinstance(tf, (VertexElim, EdgeElim))
        ]

    @property
    def peeled(self):
        return [tf.target for tf in self.transforms if isinstance(tf, Peel)]

    @property
    def rank(self) -> int:
        return d_size(self.dblocks)

    @property
    def peel_count(self) -> int:
        return len(self.peeled)

    def max_offdiag(self) -> int:
        return max((_offdiag_count(tf) for tf in self.transforms), default=0)

    def kind_histogram(self) -> dict:
        hist = {"vertex_elim": 0, "edge_elim": 0, "peel": 0, "permute": 0}
        names = {VertexElim: "vertex_elim", EdgeElim: "edge_elim", Peel: "peel", Permute: "permute"}
        for tf in self.transforms:
            hist[names[type(tf)]] += 1
        return hist

    def homogeneous_blocks(self) -> int:
        """Number of maximal runs of same-class transforms (eliminations,
        peels, permutations)."""

        def cls(tf):
            if isinstance(tf, (VertexElim, EdgeElim)):
                return "elim"
            if isinstance(tf, Peel):
                return "peel"
            return "perm"

        runs = 0
        prev = None
        for tf in self.transforms:
            c = cls(tf)
            if c != prev:
                runs += 1
                prev = c
        return runs

    def nnz(self) -> int:
        return sum(_offdiag_count(tf) for tf in self.transforms) + self.rank


# -- row kits for transcript application ------------------------------------------


class _RowKit:
    """Per-field row vector helpers used by transcript application."""

    def __init__(self, ctx: FieldContext, width: int):
        self.ctx = ctx
        self.width = width
        self.kind = ctx.kind

    def zero(self):
        if self.kind == GF2:
            return 0
        if self.kind == GFP:
            return np.zeros(self.width, dtype=np.int64)
        return [self.ctx.zero] * self.width

    def from_matrix_row(self, m: DenseMatrix, i: int):
        if self.kind == GF2:
            return m._d[i]
        if self.kind == GFP:
            return m._d[i].copy()
        return list(m._d[i])

    def add_scaled(self, dst, src, c):
        ctx = self.ctx
        if self.kind == GF2:
            ctx.count_ops(add=packed_ops(self.width), mul=packed_ops(self.width))
            return dst ^ src if (c & 1) else dst
        ctx.count_ops(add=self.width, mul=self.width)
        if self.kind == GFP:
            return (dst + c * src) % ctx.p
        return [a + c * b for a, b in zip(dst, src)]

    def is_equal(self, a, b) -> bool:
        if self.kind == GF2:
            return a == b
        if self.kind == GFP:
            return bool(np.array_equal(a, b))
        return a == b

    def emit(self, rows_in_order) -> DenseMatrix:
        out = DenseMatrix.zeros(self.ctx, len(rows_in_order), self.width)
        if self.kind == GF2:
            out._d = list(rows_in_order)
        elif self.kind == GFP:
            for i, r in enumerate(rows_in_order):
                out._d[i, :] = r
        else:
            out._d = [list(r) for r in rows_in_order]
        return out


def apply_transcript(t: Transcript, x: DenseMatrix, mode: str) -> DenseMatrix:
    """Multiply by the transformation product, one transform at a time.

    L_times: (prod Q_i) x, taking x over pivot positions to vertex rows.
    Lh_times: (prod Q_i)^H x, taking x over vertex rows to pivot positions.
    solve_L: solve (prod Q_i) y = x; raises InconsistentSystem when x is
    not in the range.
    """
    ctx = t.ctx
    kit = _RowKit(ctx, x.ncols)
    pivots = t.pivot_order
    if mode == L_TIMES:
        if x.nrows != len(pivots):
            raise ValueError("input rows must match the rank")
        state = {pid: kit.from_matrix_row(x, k) for k, pid in enumerate(pivots)}
        for tf in reversed(t.transforms):
            if isinstance(tf, VertexElim):
                prow = state[tf.pivot]
                for idx, val in tf.col:
                    state[idx] = kit.add_scaled(state[idx], prow, val)
            elif isinstance(tf, EdgeElim):
                p1, p2 = tf.pivots
                for prow, col in ((state[p1], tf.col1), (state[p2], tf.col2)):
                    for idx, val in col:
                        state[idx] = kit.add_scaled(state[idx], prow, val)
            elif isinstance(tf, Peel):
                acc = kit.zero()
                for idx, val in tf.coeffs:
                    acc = kit.add_scaled(acc, state[idx], ctx.conj(val))
                state[tf.target] = acc
        return kit.emit([state.get(v, kit.zero()) for v in range(t.n)])
    if mode == LH_TIMES:
        if x.nrows != t.n:
            raise ValueError("input rows must match the dimension")
        state = {v: kit.from_matrix_row(x, v) for v in range(t.n)}
        out = {}
        for tf in t.transforms:
            if isinstance(tf, VertexElim):
                acc = state[tf.pivot]
                for idx, val in tf.col:
                    acc = kit.add_scaled(acc, state[idx], ctx.conj(val))
                out[tf.pivot] = acc
                state.pop(tf.pivot)
            elif isinstance(tf, EdgeElim):
                for piv, col in zip(tf.pivots, (tf.col1, tf.col2)):
                    acc = state[piv]
                    for idx, val in col:
                        acc = kit.add_scaled(acc, state[idx], ctx.conj(val))
                    out[piv] = acc
                for piv in tf.pivots:
                    state.pop(piv)
            elif isinstance(tf, Peel):
                trow = state.pop(tf.target)
                for idx, val in tf.coeffs:
                    state[idx] = kit.add_scaled(state[idx], trow, val)
        return kit.emit([out[pid] for pid in pivots])
    if mode == SOLVE_L:
        if x.nrows != t.n:
            raise ValueError("input rows must match the dimension")
        state = {v: kit.from_matrix_row(x, v) for v in range(t.n)}
        for tf in t.transforms:
            if isinstance(tf, VertexElim):
                prow = state[tf.pivot]
                for idx, val in tf.col:
                    state[idx] = kit.add_scaled(state[idx], prow, ctx.neg(val))
            elif isinstance(tf, EdgeElim):
                p1, p2 = tf.pivots
                for prow, col in ((state[p1], tf.col1), (state[p2], tf.col2)):
                    for idx, val in col:
                        state[idx] = kit.add_scaled(state[idx], prow, ctx.neg(val))
            elif isinstance(tf, Peel):
                acc = kit.zero()
                for idx, val in tf.coeffs:
                    acc = kit.add_scaled(acc, state[idx], ctx.conj(val))
                if not kit.is_equal(acc, state[tf.target]):
                    raise InconsistentSystem(
                        f"row {tf.target} is not a consistent combination"
                    )
                state.pop(tf.target)
        return kit.emit([state[pid] for pid in pivots])
    raise ValueError(f"unknown mode {mode!r}")


def transcript_reconstruct(t: Transcript) -> DenseMatrix:
    """Materialize B D B^H; equals the factored matrix exactly."""
    from .factor import d_dense

    b = apply_transcript(t, DenseMatrix.identity(t.ctx, t.rank), L_TIMES)
    return matmul(matmul(b, d_dense(t.ctx, t.dblocks)), b.conj_transpose())


def explicit_ldl_from_transcript(t: Transcript, a: SparseSym) -> LDLResult:
    """Explicit reduced LDL: the pivot block is read off the transforms and
    the peeled rows are recovered by triangular solves against the pivot
    factor (one right-hand side per peeled vertex)."""
    ctx = t.ctx
    pivots = t.pivot_order
    r = len(pivots)
    pos = {pid: k for k, pid in enumerate(pivots)}
    l1 = DenseMatrix.identity(ctx, r)
    k = 0
    for tf in t.transforms:
        if isinstance(tf, VertexElim):
            for idx, val in tf.col:
                if idx in pos:
                    l1.set(pos[idx], k, val)
            k += 1
        elif isinstance(tf, EdgeElim):
            for c, col in enumerate((tf.col1, tf.col2)):
                for idx, val in col:
                    if idx in pos:
                        l1.set(pos[idx], k + c, val)
            k += 2
    peeled = t.peeled
    if peeled:
        rhs = DenseMatrix.zeros(ctx, len(peeled), r)
        for i, v in enumerate(peeled):
            for j, pid in enumerate(pivots):
                rhs.set(i, j, a.get(v, pid))
        xd = tri_solve(l1.conj_transpose(), rhs, RIGHT, UPPER_UNIT)
        x = d_solve_right(ctx, xd, t.dblocks)
        l = vstack([l1, x])
    else:
        l = l1
    return LDLResult(Permutation(pivots + peeled), l, list(t.dblocks), r)


# -- standalone peeling -------------------------------------------------------------


def peel_vertex(a_block: DenseMatrix, target: int, basis_cols) -> Peel:
    """Peel `target` out of a dense block: certify that its column lies in
    the span of `basis_cols` (via an LU of those columns) and return the
    combination as a peeling transform."""
    ctx = a_block.ctx
    basis = list(basis_cols)
    tcol = a_block.block(0, a_block.nrows, target, target + 1)
    if not basis:
        if not tcol.is_zero():
            raise NotInSpan(f"column {target} is nonzero with an empty basis")
        return Peel(target, ())
    m = a_block.take_cols(basis)
    lu = fast_lu(m)
    r = lu.r
    tp = tcol.take_rows(lu.P.fwd)
    if r == 0:
        if not tcol.is_zero():
            raise NotInSpan(f"column {target} is not spanned")
        return Peel(target, ())
    w = tri_solve(lu.L.block(0, r, 0, r), tp.block(0, r, 0, 1), LEFT, LOWER_UNIT)
    if matmul(lu.L.block(r, a_block.nrows, 0, r), w) != tp.block(r, a_block.nrows, 0, 1):
        raise NotInSpan(f"column {target} is not spanned")
    z = tri_solve(lu.U.block(0, r, 0, r), w, LEFT, UPPER)
    coeffs = []
    for s in range(r):
        v = z.get(s, 0)
        if not ctx.is_zero(v):
            coeffs.append((basis[lu.Q.fwd[s]], v))
    return Peel(target, tuple(coeffs))


# -- the tree engine ----------------------------------------------------------------


def _solve_dependent_coeffs(lu, t_index):
    """x with (pivot columns) x = (column at Q position t_index), from the
    factors of a rank-revealing LU."""
    r = lu.r
    ucol = lu.U.block(0, r, t_index, t_index + 1)
    x = tri_solve(lu.U.block(0, r, 0, r), ucol, LEFT, UPPER)
    return x


def _substep(
    ctx,
    transcript: Transcript,
    af: DenseMatrix,
    fids: list,
    brows: DenseMatrix,
    b_ids: list,
    gamma: int,
    cutoff,
):
    """One bag: peel dependent constraint rows, complement the constraints
    against the to-be-eliminated columns, factor the remaining local block,
    peel or carry the leftovers.  Returns (S over the last `gamma` ids in
    their given order, carried rows as (ids, DenseMatrix over interface))."""
    nf = len(fids)
    e = nf - gamma
    iface = fids[e:]

    # -- step 1: peel linearly dependent constraint rows
    k = len(b_ids)
    if k:
        lu = fast_lu(brows.conj_transpose(), cutoff)
        rb = lu.r
        if rb < k:
            piv_rows = [lu.Q.fwd[t] for t in range(rb)]
            piv_ids = [b_ids[t] for t in piv_rows]
            for t in range(rb, k):
                x = _solve_dependent_coeffs(lu, t)
                coeffs = tuple(
                    (piv_ids[s], x.get(s, 0))
                    for s in range(rb)
                    if not ctx.is_zero(x.get(s, 0))
                )
                transcript.append(Peel(b_ids[lu.Q.fwd[t]], coeffs))
            keep = sorted(piv_rows)
            brows = brows.take_rows(keep)
            b_ids = [b_ids[t] for t in keep]
            k = rb

    # -- step 2: constraint complementation against the eliminable columns.
    # The pivotable rows are found by an LU of the eliminable part; the
    # complementation itself runs on the extended bordered system where the
    # unpivoted constraint rows join the symmetric side as border vertices,
    # so every transform column and every Schur update (interface entries
    # of pivot rows included) is exact.
    r1 = 0
    if k and e:
        b1ext = hstack(
            [brows.block(0, k, 0, e), DenseMatrix.zeros(ctx, k, gamma)]
        )
        lu1 = fast_lu(b1ext.conj_transpose(), cutoff)
        r1 = lu1.r
    if r1:
        beta = sorted(lu1.Q.fwd[t] for t in range(r1))
        unpiv = [t for t in range(k) if t not in set(beta)]
        ku = len(unpiv)
        next_ids = list(fids) + [b_ids[t] for t in unpiv]
        na = nf + ku
        a_ext = DenseMatrix.zeros(ctx, na, na)
        a_ext.set_block(0, 0, af)
        bun = brows.take_rows(unpiv)
        a_ext.set_block(nf, 0, bun)
        a_ext.set_block(0, nf, bun.conj_transpose())
        b_ext = hstack([brows.take_rows(beta), DenseMatrix.zeros(ctx, r1, ku)])
        system = SaddleSystem(a_ext, b_ext)
        f = schilders_partial_ldl(system, cutoff)
        if f.r != r1:
            raise InternalInvariantViolation("complementation rank drifted")
        if any(f.P.fwd[t] >= e for t in range(r1)):
            raise InternalInvariantViolation(
                "complementation pivot outside the eliminable block"
            )
        beta_ids = [b_ids[t] for t in beta]
        for i in range(r1):
            kmat, a11, b11 = partial_skeleton(f, i, ctx)
            cols, blks = skeleton_to_ldl_columns(kmat, a11, b11, na - i)
            row_ids = (
                [next_ids[f.P.fwd[i]], beta_ids[f.Q.fwd[i]]]
                + [next_ids[f.P.fwd[s]] for s in range(i + 1, na)]
                + [beta_ids[f.Q.fwd[s]] for s in range(i + 1, r1)]
            )
            c1 = tuple(
                (row_ids[s], cols.get(s, 0))
                for s in range(len(row_ids))
                if s != 0 and not ctx.is_zero(cols.get(s, 0))
            )
            c2 = tuple(
                (row_ids[s], cols.get(s, 1))
                for s in range(len(row_ids))
                if s != 1 and not ctx.is_zero(cols.get(s, 1))
            )
            if len(blks) == 1:
                transcript.append(EdgeElim((row_ids[0], row_ids[1]), c1, c2, blks[0]))
            else:
                transcript.append(VertexElim(row_ids[0], c1, blks[0]))
                transcript.append(VertexElim(row_ids[1], c2, blks[1]))
        resid = residual_schur(system, f)
        resid_ids = [next_ids[f.P.fwd[t]] for t in range(r1, na)]
    else:
        resid = af
        resid_ids = list(fids)

    # -- step 3: factor the remaining eliminable block
    eset = set(fids[:e])
    iset = set(iface)
    elim_loc, ifc_loc, b_loc = [], [], []
    for t, rid in enumerate(resid_ids):
        if rid in eset:
            elim_loc.append(t)
        elif rid in iset:
            ifc_loc.append(t)
        else:
            b_loc.append(t)
    # the non-pivot tail of the LU keeps original order, so the interface
    # comes back in the caller's order; later slices rely on it
    if [resid_ids[t] for t in ifc_loc] != list(iface):
        raise InternalInvariantViolation("interface order not preserved")
    if b_loc:
        if not resid.take_rows(b_loc).take_cols(b_loc + elim_loc).is_zero():
            raise InternalInvariantViolation(
                "constraint rows keep eliminable or mutual couplings"
            )
        bt2 = resid.take_rows(b_loc).take_cols(ifc_loc)
        bt2_ids = [resid_ids[t] for t in b_loc]
    elif r1:
        bt2 = DenseMatrix.zeros(ctx, 0, gamma)
        bt2_ids = []
    else:
        bt2 = brows.block(0, k, e, nf)
        bt2_ids = list(b_ids)
    y11 = resid.take_rows(elim_loc).take_cols(elim_loc)
    y12 = resid.take_rows(elim_loc).take_cols(ifc_loc)
    a22 = resid.take_rows(ifc_loc).take_cols(ifc_loc)
    ifc_ids = [resid_ids[t] for t in ifc_loc]
    elim_ids = [resid_ids[t] for t in elim_loc]
    from .factor import fast_ldl

    res3 = fast_ldl(y11, cutoff)
    ell = res3.r
    n1 = len(elim_ids)
    elim_p1 = [elim_ids[res3.P.fwd[t]] for t in range(n1)]
    l1 = res3.L
    c = y12.take_rows(res3.P.fwd)
    c1 = c.block(0, ell, 0, len(ifc_ids))
    c2 = c.block(ell, n1, 0, len(ifc_ids))
    if ell:
        tmat = tri_solve(l1.block(0, ell, 0, ell), c1, LEFT, LOWER_UNIT)
        u2 = d_solve_left(ctx, res3.D, tmat)
        xifc = u2.conj_transpose()
        z12 = c2.sub(matmul(l1.block(ell, n1, 0, ell), tmat, cutoff))
        s_ifc = a22.sub(matmul(tmat.conj_transpose(), u2, cutoff))
    else:
        xifc = DenseMatrix.zeros(ctx, len(ifc_ids), 0)
        z12 = c2
        s_ifc = a22
    pos = 0
    for blk in res3.D:
        if blk.kind == SCALAR:
            col = tuple(
                (elim_p1[t], l1.get(t, pos))
                for t in range(pos + 1, n1)
                if not ctx.is_zero(l1.get(t, pos))
            ) + tuple(
                (ifc_ids[t], xifc.get(t, pos))
                for t in range(len(ifc_ids))
                if not ctx.is_zero(xifc.get(t, pos))
            )
            transcript.append(VertexElim(elim_p1[pos], col, blk))
        else:
            cc = []
            for cdx in (0, 1):
                cc.append(
                    tuple(
                        (elim_p1[t], l1.get(t, pos + cdx))
                        for t in range(pos + 2, n1)
                        if not ctx.is_zero(l1.get(t, pos + cdx))
                    )
                    + tuple(
                        (ifc_ids[t], xifc.get(t, pos + cdx))
                        for t in range(len(ifc_ids))
                        if not ctx.is_zero(xifc.get(t, pos + cdx))
                    )
                )
            transcript.append(
                EdgeElim((elim_p1[pos], elim_p1[pos + 1]), cc[0], cc[1], blk)
            )
        pos += blk.size

    # -- step 4: peel dependents among leftover rows, carry the rest
    leftover_elim = elim_p1[ell:]
    gcols = hstack([bt2.conj_transpose(), z12.conj_transpose()])
    gids = bt2_ids + leftover_elim
    carried_ids = []
    if gids:
        if gcols.nrows == 0:
            # no interface: every leftover row is entirely zero
            for gid in gids:
                transcript.append(Peel(gid, ()))
            fmat = DenseMatrix.zeros(ctx, 0, gamma)
        else:
            lu4 = fast_lu(gcols, cutoff)
            r4 = lu4.r
            piv = [lu4.Q.fwd[t] for t in range(r4)]
            piv_ids = [gids[t] for t in piv]
            for t in range(r4, len(gids)):
                x = _solve_dependent_coeffs(lu4, t)
                coeffs = tuple(
                    (piv_ids[s], x.get(s, 0))
                    for s in range(r4)
                    if not ctx.is_zero(x.get(s, 0))
                )
                transcript.append(Peel(gids[lu4.Q.fwd[t]], coeffs))
            keep = sorted(piv)
            carried_ids = [gids[t] for t in keep]
            fmat = gcols.take_cols(keep).conj_transpose()
    else:
        fmat = DenseMatrix.zeros(ctx, 0, gamma)

    # reorder the interface block back to the caller's order
    want = {v: t for t, v in enumerate(ifc_ids)}
    sel = [want[v] for v in iface]
    s_out = s_ifc.take_rows(sel).take_cols(sel)
    f_out = fmat.take_cols(sel) if fmat.nrows else DenseMatrix.zeros(ctx, 0, gamma)
    return s_out, f_out, carried_ids


def tree_ldl_substep(a: DenseMatrix, b: DenseMatrix, gamma: int, cutoff=None):
    """Public substep: local indices 0..dim(a)-1, constraint rows get ids
    above them.  Returns (transform list, S, F)."""
    t = Transcript(a.ctx, a.nrows + b.nrows)
    fids = list(range(a.nrows))
    b_ids = list(range(a.nrows, a.nrows + b.nrows))
    s, f, _ = _substep(a.ctx, t, a, fids, b, b_ids, gamma, cutoff)
    return t.transforms, s, f


def tree_ldl(a: SparseSym, ntd: NormalizedTD, gamma: int = 0, cutoff=None):
    """Factor a post-ordered sparse symmetric matrix along the tree.

    `a` is indexed by post-order positions (use `sparse_ldl` for original
    labels); `gamma` trailing positions are left untouched.  Returns the
    transcript plus the interface Schur complement and carried full-rank
    constraint rows (both empty when gamma = 0).
    """
    ctx = a.ctx
    n = a.n
    td = ntd.td
    pos = ntd.order.inv
    bag_pos = [sorted(pos[v] for v in b) for b in td.bags]
    transcript = Transcript(ctx, n)
    root_iface = bag_pos[td.root][len(bag_pos[td.root]) - gamma :] if gamma else []

    def frontal(node, iface):
        ids = bag_pos[node]
        iset = set(iface)
        nf = len(ids)
        out = DenseMatrix.zeros(ctx, nf, nf)
        for li, u in enumerate(ids):
            for lj in range(li, nf):
                v = ids[lj]
                if u in iset and v in iset:
                    continue
                val = a.get(u, v)
                if not ctx.is_zero(val):
                    out.set(li, lj, val)
                    if lj != li:
                        out.set(lj, li, ctx.conj(val))
        return out

    def rec(node, iface):
        ids = bag_pos[node]
        nf = len(ids)
        loc = {v: t for t, v in enumerate(ids)}
        af = frontal(node, iface)
        rows_mats = []
        rows_ids = []
        for child in td.children[node]:
            child_iface = sorted(set(bag_pos[node]) & set(bag_pos[child]))
            s_c, b_c, bid_c = rec(child, child_iface)
            for t in range(len(child_iface)):
                for s in range(len(child_iface)):
                    v = s_c.get(t, s)
                    if not ctx.is_zero(v):
                        li, lj = loc[child_iface[t]], loc[child_iface[s]]
                        af.set(li, lj, ctx.add(af.get(li, lj), v))
            if b_c.nrows:
                ext = DenseMatrix.zeros(ctx, b_c.nrows, nf)
                for s in range(len(child_iface)):
                    ext.set_block(0, loc[child_iface[s]], b_c.block(0, b_c.nrows, s, s + 1))
                rows_mats.append(ext)
                rows_ids.extend(bid_c)
        if rows_mats:
            brows = vstack(rows_mats)
        else:
            brows = DenseMatrix.zeros(ctx, 0, nf)
        # interface columns must come last in the frontal ordering
        eset = set(iface)
        order = [t for t, v in enumerate(ids) if v not in eset] + [
            t for t, v in enumerate(ids) if v in eset
        ]
        if order != list(range(nf)):
            af = af.take_rows(order).take_cols(order)
            brows = brows.take_cols(order)
            ids = [ids[t] for t in order]
        s_out, f_out, carried = _substep(
            ctx, transcript, af, ids, brows, rows_ids, len(iface), cutoff
        )
        return s_out, f_out, carried

    s, f, carried = rec(td.root, root_iface)
    if gamma == 0:
        if f.nrows or carried:
            raise InternalInvariantViolation("constraint rows survived the root")
    return transcript, s, f


@dataclass
class SparseLDLOutcome:
    transcript: Transcript
    order: Permutation  # post-order used (position -> original vertex)
    ntd: NormalizedTD
    rank: int
    peel_count: int
    explicit: LDLResult | None  # in original labels, when recovered


EXPLICIT_CORANK_FACTOR = 4


def sparse_ldl(
    a: SparseSym,
    td=None,
    tau: int | None = None,
    cutoff=None,
    explicit: bool | None = None,
) -> SparseLDLOutcome:
    """Full pipeline: tree decomposition (greedy if absent), normalization,
    tree factorization, and explicit recovery when the corank allows."""
    if td is None:
        td = greedy_td(a.n, a.edges())
    ntd = normalize_td(td, tau)
    apos = a.relabel(ntd.order)
    transcript, _, _ = tree_ldl(apos, ntd, 0, cutoff)
    r = transcript.rank
    corank = a.n - r
    threshold = EXPLICIT_CORANK_FACTOR * max(ntd.td.max_bag(), 1)
    want_explicit = explicit if explicit is not None else corank <= threshold
    if explicit is None and corank > threshold:
        warnings.warn(
            f"corank {corank} above the recovery threshold {threshold}; "
            "returning the implicit transcript only",
            stacklevel=2,
        )
    result = None
    if want_explicit:
        res_pos = explicit_ldl_from_transcript(transcript, apos)
        fwd = [ntd.order.fwd[p] for p in res_pos.P.fwd]
        result = LDLResult(Permutation(fwd), res_pos.L, res_pos.D, res_pos.r)
    return SparseLDLOutcome(transcript, ntd.order, ntd, r, transcript.peel_count, result)


# -- sparse LU through the symmetric embedding ------------------------------------


@dataclass
class SparseLUOutcome:
    transcript: Transcript
    order: Permutation
    ntd: NormalizedTD
    rank: int
    row_peels: int
    col_peels: int
    explicit: LUResult | None


def sparse_lu(
    b: DenseMatrix,
    td=None,
    tau: int | None = None,
    cutoff=None,
    explicit: bool | None = None,
) -> SparseLUOutcome:
    """Peeled implicit LU of a sparse rectangular matrix.

    Works on the H-symmetric bipartite embedding [[0, B^H], [B, 0]]
    (column vertices 0..n-1, row vertices n..n+m-1): every elimination is
    then an edge elimination across the bipartition and every peel stays
    on one side.  The explicit P B Q^T = L U is extracted when the corank
    permits."""
    ctx = b.ctx
    m, n = b.nrows, b.ncols
    emb = SparseSym(ctx, n + m)
    for i in range(m):
        for j in range(n):
            v = b.get(i, j)
            if not ctx.is_zero(v):
                emb.set(j, n + i, ctx.conj(v))
    if td is None:
        td = greedy_td(n + m, emb.edges())
    ntd = normalize_td(td, tau)
    apos = emb.relabel(ntd.order)
    transcript, _, _ = tree_ldl(apos, ntd, 0, cutoff)
    pos2orig = ntd.order.fwd

    def is_row_vertex(p):
        return pos2orig[p] >= n

    pairs = []
    for tf in transcript.transforms:
        if isinstance(tf, VertexElim):
            raise InternalInvariantViolation("vertex elimination on a zero-diagonal embedding")
        if isinstance(tf, EdgeElim):
            if is_row_vertex(tf.pivots[0]) == is_row_vertex(tf.pivots[1]):
                raise InternalInvariantViolation("elimination does not cross the bipartition")
            pairs.append(tf)
    r = len(pairs)
    row_peels = sum(1 for p in transcript.peeled if is_row_vertex(p))
    col_peels = transcript.peel_count - row_peels
    corank = max(m, n) - r
    threshold = EXPLICIT_CORANK_FACTOR * max(ntd.td.max_bag(), 1)
    want_explicit = explicit if explicit is not None else corank <= threshold
    if explicit is None and corank > threshold:
        warnings.warn(
            f"corank {corank} above the recovery threshold {threshold}; "
            "returning the implicit transcript only",
            stacklevel=2,
        )
    lures = None
    if want_explicit:
        expl = explicit_ldl_from_transcript(transcript, apos)
        vrow = {pid: t for t, pid in enumerate(expl.P.fwd)}
        pfwd, qfwd, lcols, urows = [], [], [], []
        for k, tf in enumerate(pairs):
            p1, p2 = tf.pivots
            blk = tf.block
            if is_row_vertex(p1):
                rowv, colv = p1, p2
                rcol, ccol, factor = 2 * k, 2 * k + 1, blk.a21
            else:
                rowv, colv = p2, p1
                rcol, ccol, factor = 2 * k + 1, 2 * k, blk.a12
            pfwd.append(pos2orig[rowv] - n)
            qfwd.append(pos2orig[colv])
            lcols.append(rcol)
            urows.append((ccol, factor))
        for p in transcript.peeled:
            if is_row_vertex(p):
                pfwd.append(pos2orig[p] - n)
            else:
                qfwd.append(pos2orig[p])
        lmat = DenseMatrix.zeros(ctx, m, r)
        umat = DenseMatrix.zeros(ctx, r, n)
        for i, orig_row in enumerate(pfwd):
            erow = vrow[ntd.order.inv[n + orig_row]]
            for k in range(r):
                v = expl.L.get(erow, lcols[k])
                if not ctx.is_zero(v):
                    lmat.set(i, k, v)
        for j, orig_col in enumerate(qfwd):
            erow = vrow[ntd.order.inv[orig_col]]
            for k in range(r):
                ccol, factor = urows[k]
                v = expl.L.get(erow, ccol)
                if not ctx.is_zero(v):
                    umat.set(k, j, ctx.mul(factor, ctx.conj(v)))
        lures = LUResult(Permutation(pfwd), Permutation(qfwd), lmat, umat, r)
    return SparseLUOutcome(
        transcript, ntd.order, ntd, r, row_peels, col_peels, lures
    )
