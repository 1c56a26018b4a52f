import numpy as np
import pytest

from sela.checkpoint import CheckpointStore
from sela.ffield import make_fft_prime
from sela.krylov import (
    RankResult,
    block_rank,
    block_sequence,
    block_y,
    expected_iterations,
    integer_rank,
    scalar_minpoly,
    sequence_length_for,
)
from sela.sparse import DenseOperator, SparseIntMatrix, precondition, reduce_mod
from oracles import berkowitz_charpoly, random_sparse, rank_mod_p

P = make_fft_prime(17, 16)


def _sparse_eye(n):
    return SparseIntMatrix.from_triples(n, n, [(i, i, 1) for i in range(n)])


def _poly_divides(f, g, p):
    """True iff f | g over F_p (ascending coefficient lists)."""
    g = [int(x) % p for x in g]
    f = [int(x) % p for x in f]
    while len(g) >= len(f):
        if g[-1] == 0:
            g.pop()
            continue
        coef = g[-1] * pow(f[-1], -1, p) % p
        shift = len(g) - len(f)
        for i, c in enumerate(f):
            g[i + shift] = (g[i + shift] - coef * c) % p
        g.pop()
    return not any(g)


# -- scalar Wiedemann --------------------------------------------------------

def test_scalar_minpoly_identity():
    op = DenseOperator(np.eye(6), P)
    rng = np.random.default_rng(0)
    u = rng.integers(0, P.p, size=6)
    v = rng.integers(0, P.p, size=6)
    assert list(scalar_minpoly(u, v, op, 14)) == [P.p - 1, 1]  # x - 1


def test_scalar_minpoly_zero():
    op = DenseOperator(np.zeros((5, 5)), P)
    rng = np.random.default_rng(1)
    u = rng.integers(1, P.p, size=5)
    v = rng.integers(1, P.p, size=5)
    assert list(scalar_minpoly(u, v, op, 12)) == [0, 1]  # x


def test_scalar_minpoly_divides_charpoly():
    rng = np.random.default_rng(2)
    dense = rng.integers(-4, 5, size=(12, 12))
    op = DenseOperator(dense, P)
    u = rng.integers(0, P.p, size=12)
    v = rng.integers(0, P.p, size=12)
    mp_seq = scalar_minpoly(u, v, op, 2 * 12 + 2)
    char_desc = berkowitz_charpoly(dense)
    char_asc = [int(c) % P.p for c in reversed(char_desc)]
    assert _poly_divides(list(mp_seq), char_asc, P.p)


# -- block sequences ---------------------------------------------------------

def test_block_sequence_identity_operator():
    op = DenseOperator(np.eye(7), P)
    seq = block_sequence(op, s=3, length=6, seed=5)
    Y = block_y(7, 3, P, 5)
    expect = Y.T @ Y % P.p
    for i in range(6):
        assert np.array_equal(seq.terms[i], expect)


def test_block_sequence_symmetric_terms():
    rng = np.random.default_rng(3)
    mm = reduce_mod(random_sparse(rng, 10, 10, 40), P)
    op = precondition(mm, seed=9)
    seq = block_sequence(op, s=3, length=8, seed=1)
    assert seq.symmetric
    for i in range(8):
        assert np.array_equal(seq.terms[i], seq.terms[i].T)


def test_block_sequence_matches_dense_oracle():
    rng = np.random.default_rng(4)
    dense = rng.integers(0, P.p, size=(20, 20), dtype=np.int64)
    op = DenseOperator(dense, P)
    seq = block_sequence(op, s=2, length=10, seed=7)
    Y = block_y(20, 2, P, 7)
    V = Y.astype(object)
    for i in range(10):
        expect = (Y.T.astype(object) @ V) % P.p
        assert np.array_equal(seq.terms[i].astype(object), expect)
        V = (dense.astype(object) @ V) % P.p


def test_block_sequence_checkpointed_equals_memory(tmp_path):
    rng = np.random.default_rng(5)
    mm = reduce_mod(random_sparse(rng, 12, 12, 50), P)
    op = precondition(mm, seed=2)
    plain = block_sequence(op, s=4, length=9, seed=3)
    store = CheckpointStore(tmp_path / "ck", state_every=2)
    stored = block_sequence(op, s=4, length=9, seed=3, store=store)
    assert np.array_equal(plain.terms, stored.terms)


def test_block_sequence_worker_count_invariance(tmp_path):
    rng = np.random.default_rng(6)
    mm = reduce_mod(random_sparse(rng, 15, 15, 60), P)
    op = precondition(mm, seed=4)
    base = block_sequence(op, s=5, length=8, seed=11)
    for w in (2, 3):
        store = CheckpointStore(tmp_path / f"w{w}")
        multi = block_sequence(op, s=5, length=8, seed=11, store=store, workers=w)
        assert np.array_equal(base.terms, multi.terms)


def test_block_sequence_resume_from_partial(tmp_path):
    rng = np.random.default_rng(7)
    mm = reduce_mod(random_sparse(rng, 10, 10, 45), P)
    op = precondition(mm, seed=6)
    store = CheckpointStore(tmp_path / "ck", state_every=1)
    short = block_sequence(op, s=3, length=4, seed=8, store=store)
    full_fresh = block_sequence(op, s=3, length=9, seed=8)
    resumed = block_sequence(op, s=3, length=9, seed=8, store=store)
    assert np.array_equal(resumed.terms[:4], short.terms)
    assert np.array_equal(resumed.terms, full_fresh.terms)


# -- ranks -------------------------------------------------------------------

def test_block_rank_identity():
    assert block_rank(_sparse_eye(5), s=2).rank == 5


def test_block_rank_zero_matrix():
    z = SparseIntMatrix.from_triples(4, 6, [])
    assert block_rank(z, s=2).rank == 0


def test_block_rank_matches_dense_oracle():
    rng = np.random.default_rng(8)
    for trial in range(15):
        rows = int(rng.integers(5, 40))
        cols = int(rng.integers(5, 40))
        m = random_sparse(rng, rows, cols, int(rng.integers(5, 4 * min(rows, cols))))
        expect = rank_mod_p(m.to_dense(), P.p)
        got = block_rank(m, s=int(rng.integers(1, 5)), seed=trial)
        assert got.rank == expect, f"trial {trial}"


def test_block_rank_transpose_invariant():
    rng = np.random.default_rng(9)
    for trial in range(5):
        m = random_sparse(rng, 25, 35, 80)
        a = block_rank(m, s=3, seed=trial).rank
        b = block_rank(m.transpose(), s=3, seed=trial + 100).rank
        assert a == b


def test_block_rank_never_exceeds_dimensions():
    rng = np.random.default_rng(10)
    for trial in range(10):
        m = random_sparse(rng, 12, 9, 30)
        res = block_rank(m, s=2, seed=trial)
        assert res.rank <= 9
        assert res.rank == res.degree - res.codegree


def test_sequence_length_halves_when_s_doubles():
    for n in (64, 100, 257):
        lengths = [sequence_length_for(n, s) for s in (1, 2, 4, 8)]
        for a, b in zip(lengths, lengths[1:]):
            assert b - 2 <= (a - 2) / 2 + 1
        assert lengths[0] == 2 * n + 2


def test_integer_rank_diag():
    m = SparseIntMatrix.from_triples(3, 3, [(0, 0, 1), (1, 1, 2), (2, 2, 3)])
    res = integer_rank(m, trials=2, s=2, seed=0)
    assert res.rank == 3 and res.trials == 2 and len(res.primes) == 2


def test_integer_rank_recovers_from_bad_prime():
    # p * I is invisible mod p but full rank over the integers
    n = 4
    m = SparseIntMatrix.from_triples(n, n, [(i, i, P.p) for i in range(n)])
    assert block_rank(m, prime=P, s=2).rank == 0
    res = integer_rank(m, trials=2, s=2, seed=1)
    assert res.rank == n


# -- planning helper ---------------------------------------------------------

@pytest.mark.parametrize(
    "r,p,expect",
    [(1033568, 50, 41345), (0, 7, 2), (59, 30, 6), (960, 30, 66)],
)
def test_expected_iterations(r, p, expect):
    assert expected_iterations(r, p) == expect


def test_rank_result_str():
    text = str(RankResult(5, (65537,), 5, 0, 1))
    assert "rank 5" in text and "65537" in text
