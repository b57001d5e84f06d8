import itertools
import random

import pytest

from exldl.dense import DenseMatrix, matmul, permute
from exldl.factor import (
    DBlock,
    base_ldl,
    d_dense,
    edge_eliminate,
    fast_ldl,
    fast_lu,
    inertia_from_D,
    natural_order_ldl,
    unreduced_ldl,
    vertex_eliminate,
)
from exldl.fields import SingularPivot, UnorderedField, ZeroPivot
from exldl.oracle import oracle_rank, oracle_verify_ldl, oracle_verify_lu

from conftest import GF2, GF7, QQ, rand_matrix, rand_symmetric


def reconstruct_ldl(res, n):
    l, d = res.L, res.d_dense()
    return matmul(matmul(l, d), l.conj_transpose())


# -- elimination primitives ------------------------------------------------


def test_vertex_eliminate_1x1_gf2():
    a = DenseMatrix.from_rows(GF2, [[1]])
    l, d, s = vertex_eliminate(a, 0)
    assert l.to_lists() == [[1]]
    assert d == 1
    assert s.shape == (0, 0)


def test_vertex_eliminate_gf7_hand():
    a = DenseMatrix.from_rows(GF7, [[2, 1], [1, 3]])
    l, d, s = vertex_eliminate(a, 0)
    assert d == 2
    assert l.to_lists() == [[1], [4]]
    assert s.to_lists() == [[6]]


def test_vertex_eliminate_diagonal():
    a = DenseMatrix.from_rows(GF7, [[2, 0, 0], [0, 3, 0], [0, 0, 5]])
    l, d, s = vertex_eliminate(a, 0)
    assert l.to_lists() == [[1], [0], [0]]
    assert s.to_lists() == [[3, 0], [0, 5]]


def test_vertex_eliminate_zero_pivot():
    a = DenseMatrix.from_rows(GF7, [[0, 1], [1, 3]])
    with pytest.raises(ZeroPivot):
        vertex_eliminate(a, 0)


def test_edge_eliminate_gf2_all_ones_offdiag():
    a = DenseMatrix.from_rows(GF2, [[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    ee = edge_eliminate(a, 0, 1)
    assert ee.cols.to_lists() == [[1, 0], [0, 1], [1, 1]]
    assert len(ee.blocks) == 1
    assert ee.blocks[0].kind == "antidiag"
    assert (ee.blocks[0].a12, ee.blocks[0].a21) == (1, 1)
    assert ee.s.to_lists() == [[0]]


def test_edge_eliminate_antidiag_2x2():
    for ctx in (GF2, GF7, QQ):
        a = DenseMatrix.from_rows(ctx, [[0, 1], [1, 0]])
        ee = edge_eliminate(a, 0, 1)
        assert ee.cols == DenseMatrix.identity(ctx, 2)
        assert ee.blocks[0].kind == "antidiag"
        assert ee.s.shape == (0, 0)


def test_edge_eliminate_singular_pivot():
    a = DenseMatrix.from_rows(GF7, [[0, 0], [0, 0]])
    with pytest.raises(SingularPivot):
        edge_eliminate(a, 0, 1)


def test_zero_diag_pivot_inverse_structure():
    # [[0, a12],[a21, a22]]^(-1) has a zero (2,2) entry.
    ctx = GF7
    a12, a21, a22 = 3, 3, 5
    det = ctx.sub(ctx.mul(0, a22), ctx.mul(a12, a21))
    dinv = ctx.inv(det)
    b22 = ctx.mul(dinv, 0)  # cofactor of a22 position is a11 = 0
    assert ctx.is_zero(b22)


def test_edge_eliminate_normalizes_nonzero_diagonal(rng):
    # One nonzero diagonal entry: the pair becomes two scalar blocks.
    a = DenseMatrix.from_rows(GF7, [[0, 2, 1], [2, 3, 0], [1, 0, 4]])
    ee = edge_eliminate(a, 0, 1)
    assert [b.kind for b in ee.blocks] == ["scalar", "scalar"]
    assert ee.pivots == (1, 0)
    # reconstruction over the involved rows
    n = 3
    d = d_dense(GF7, ee.blocks)
    contrib = matmul(matmul(ee.cols, d), ee.cols.conj_transpose())
    rest = [2]
    for ri, r in enumerate(rest):
        for ci, c in enumerate(rest):
            assert GF7.sub(a.get(r, c), contrib.get(r, c)) == ee.s.get(ri, ci)


# -- base and fast LDL -------------------------------------------------------


def all_symmetric_gf2(n):
    pos = [(i, j) for i in range(n) for j in range(i, n)]
    for bits in itertools.product([0, 1], repeat=len(pos)):
        a = DenseMatrix.zeros(GF2, n, n)
        for (i, j), b in zip(pos, bits):
            if b:
                a.set(i, j, 1)
                a.set(j, i, 1)
        yield a


def test_base_ldl_exhaustive_gf2_3x3():
    for a in all_symmetric_gf2(3):
        res = base_ldl(a)
        rep = oracle_verify_ldl(a, res)
        assert rep.ok, rep.first_violation


def test_base_ldl_trivial_cases():
    assert base_ldl(DenseMatrix.from_rows(GF7, [[0]])).r == 0
    res = base_ldl(DenseMatrix.from_rows(GF7, [[0, 0], [0, 5]]))
    assert res.r == 1
    assert res.P.fwd[0] == 1
    assert res.D[0].d == 5


def test_fast_ldl_zero_matrix(ctx):
    for n in (1, 4, 9):
        res = fast_ldl(DenseMatrix.zeros(ctx, n, n))
        assert res.r == 0
        assert oracle_verify_ldl(DenseMatrix.zeros(ctx, n, n), res).ok


def test_fast_ldl_antidiag_gf2():
    a = DenseMatrix.from_rows(GF2, [[0, 1], [1, 0]])
    res = fast_ldl(a)
    assert res.r == 2
    assert res.P.is_identity()
    assert res.L == DenseMatrix.identity(GF2, 2)
    assert res.D[0].kind == "antidiag"


def test_fast_ldl_gf7_3x3():
    a = DenseMatrix.from_rows(GF7, [[2, 1, 0], [1, 3, 1], [0, 1, 1]])
    res = fast_ldl(a)
    assert res.r == 3
    assert oracle_verify_ldl(a, res).ok


def test_fast_ldl_random_all_fields(ctx, rng):
    for n in (4, 5, 7, 10, 13):
        a = rand_symmetric(ctx, rng, n)
        res = fast_ldl(a)
        rep = oracle_verify_ldl(a, res)
        assert rep.ok, rep.first_violation


def test_fast_ldl_planted_rank_gf2():
    from conftest import planted_symmetric

    rng = random.Random(4)
    a = planted_symmetric(GF2, rng, 60, 40)
    res = fast_ldl(a)
    assert res.r == oracle_rank(a)
    assert oracle_verify_ldl(a, res).ok


def test_fast_ldl_rank_deficient_all_fields(ctx, rng):
    from conftest import planted_symmetric

    for n, k in ((8, 3), (12, 7), (15, 1)):
        a = planted_symmetric(ctx, rng, n, k)
        res = fast_ldl(a)
        rep = oracle_verify_ldl(a, res)
        assert rep.ok, rep.first_violation


def test_unreduced_roundtrip(rng):
    a = rand_symmetric(GF7, rng, 9)
    res = fast_ldl(a)
    lfull, dfull = unreduced_ldl(res, 9)
    recon = matmul(matmul(lfull, dfull), lfull.conj_transpose())
    assert recon == permute(a, res.P, res.P)


# -- fast LU -------------------------------------------------------------------


def test_fast_lu_zero(ctx):
    for m, n in ((1, 1), (3, 5), (4, 2)):
        a = DenseMatrix.zeros(ctx, m, n)
        res = fast_lu(a)
        assert res.r == 0
        assert res.P.is_identity() and res.Q.is_identity()


def test_fast_lu_single_pivot():
    a = DenseMatrix.from_rows(GF7, [[0, 1], [0, 0]])
    res = fast_lu(a)
    assert res.r == 1
    assert res.Q.fwd == (1, 0)
    assert res.L.to_lists() == [[1], [0]]
    assert res.U.to_lists() == [[1, 0]]
    assert oracle_verify_lu(a, res).ok


def test_fast_lu_planted_rank_gf2():
    rng = random.Random(11)
    while True:
        g = rand_matrix(GF2, rng, 20, 12)
        h = rand_matrix(GF2, rng, 12, 30)
        if oracle_rank(g) == 12 and oracle_rank(h) == 12:
            break
    a = matmul(g, h)
    res = fast_lu(a)
    assert res.r == 12
    assert oracle_verify_lu(a, res).ok


def test_fast_lu_random_all_fields(ctx, rng):
    for m, n in ((1, 1), (2, 3), (7, 7), (10, 4), (5, 12), (16, 16)):
        a = rand_matrix(ctx, rng, m, n)
        res = fast_lu(a)
        rep = oracle_verify_lu(a, res)
        assert rep.ok, rep.first_violation


def test_fast_lu_structure_row_order(rng):
    # duplicated rows exercise the pivot-order and staircase checks
    base = rand_matrix(GF7, rng, 4, 6)
    rows = base.to_lists()
    a = DenseMatrix.from_rows(GF7, [rows[0], rows[0], rows[1], rows[2], rows[1], rows[3]])
    res = fast_lu(a)
    rep = oracle_verify_lu(a, res)
    assert rep.ok, rep.first_violation
    piv = res.P.fwd[: res.r]
    assert list(piv) == sorted(piv)


# -- inertia ---------------------------------------------------------------------


def test_inertia_direct():
    blocks = [DBlock.scalar(QQ.el(3)), DBlock.scalar(QQ.el(-2))]
    assert inertia_from_D(blocks, 3, QQ) == (1, 1, 1)
    blocks = [DBlock.antidiag(QQ.el(1), QQ.el(1))]
    assert inertia_from_D(blocks, 2, QQ) == (1, 1, 0)


def test_inertia_unordered_field():
    with pytest.raises(UnorderedField):
        inertia_from_D([DBlock.scalar(1)], 1, GF7)


def test_inertia_congruence_invariance(rng):
    from exldl.oracle import oracle_inertia_congruence

    a = rand_symmetric(QQ, rng, 8)
    rep = oracle_inertia_congruence(a, trials=4, seed=3)
    assert rep.ok, rep.first_violation


# -- natural order LDL -------------------------------------------------------------


def test_natural_order_ldl_reconstructs(rng):
    a = rand_symmetric(GF7, rng, 8)
    res = natural_order_ldl(a)
    rep = oracle_verify_ldl(a, res)
    assert rep.ok, rep.first_violation
