import io

import numpy as np
import pytest

from sela.ffield import make_fft_prime
from sela.sparse import (
    DimensionError,
    SmsParseError,
    SparseIntMatrix,
    precondition,
    read_sms,
    reduce_mod,
    write_sms,
)
from oracles import rank_mod_p, random_sparse

P = make_fft_prime(17, 16)


def test_read_identity():
    m = read_sms("2 2 M\n1 1 1\n2 2 1\n0 0 0\n")
    assert (m.rows, m.cols, m.nnz) == (2, 2, 2)
    assert np.array_equal(m.to_dense(), np.eye(2, dtype=np.int64))


def test_read_zero_matrix():
    m = read_sms("3 4 M\n0 0 0\n")
    assert (m.rows, m.cols, m.nnz) == (3, 4, 0)


def test_read_crlf_and_bytes():
    m = read_sms(b"2 2 M\r\n1 2 -3\r\n0 0 0\r\n")
    assert m.nnz == 1 and m.values[0] == -3


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("2 2\n0 0 0\n", "header"),
        ("2 2 X\n1 1 1\n0 0 0\n", "header"),
        ("2 2 M\n3 1 1\n0 0 0\n", "out of range"),
        ("2 2 M\n1 1 1\n", "terminator"),
        ("2 2 M\n1 1 9223372036854775807\n0 0 0\n", "63 bits"),
        ("2 2 M\n1 1 1\n1 1 2\n0 0 0\n", "duplicate"),
        ("2 2 M\n1 1 0\n0 0 0\n", "zero"),
        ("2 2 M\n1 1\n0 0 0\n", "i j v"),
    ],
)
def test_read_errors(text, fragment):
    with pytest.raises(SmsParseError) as err:
        read_sms(text)
    assert fragment in str(err.value)


def test_parse_error_names_line():
    with pytest.raises(SmsParseError) as err:
        read_sms("2 2 M\n1 1 1\n5 5 1\n0 0 0\n")
    assert err.value.line == 3


def test_roundtrip_identity():
    m = read_sms("2 2 M\n1 1 1\n2 2 1\n0 0 0\n")
    buf = io.BytesIO()
    write_sms(m, buf)
    assert read_sms(buf.getvalue()) == m


def test_roundtrip_random_and_byte_stable():
    rng = np.random.default_rng(0)
    m = random_sparse(rng, 50, 70, 500)
    buf = io.BytesIO()
    write_sms(m, buf)
    again = read_sms(buf.getvalue())
    assert again == m
    buf2 = io.BytesIO()
    write_sms(again, buf2)
    assert buf.getvalue() == buf2.getvalue()


def test_zero_dimension_matrices_legal():
    m = read_sms("0 5 M\n0 0 0\n")
    assert m.rows == 0 and m.cols == 5
    assert m.digest() != 0


def test_reduce_mod_identity():
    m = read_sms("2 2 M\n1 1 1\n2 2 1\n0 0 0\n")
    assert np.array_equal(reduce_mod(m, P).to_dense(), np.eye(2, dtype=np.int64))


def test_reduce_mod_drops_multiples_of_p():
    m = SparseIntMatrix.from_triples(2, 2, [(0, 0, P.p), (1, 1, 3)])
    mm = reduce_mod(m, P)
    assert mm.nnz == 1


def test_reduce_mod_matches_dense():
    rng = np.random.default_rng(1)
    m = random_sparse(rng, 20, 30, 200, lo=-10 ** 9, hi=10 ** 9)
    assert np.array_equal(reduce_mod(m, P).to_dense(), m.to_dense() % P.p)


def test_apply_identity_and_zero():
    rng = np.random.default_rng(2)
    v = rng.integers(0, P.p, size=4, dtype=np.int64)
    eye = reduce_mod(
        SparseIntMatrix.from_triples(4, 4, [(i, i, 1) for i in range(4)]), P
    )
    assert np.array_equal(eye.apply(v), v)
    zero = reduce_mod(SparseIntMatrix.from_triples(3, 4, []), P)
    assert np.array_equal(zero.apply(v), np.zeros(3, dtype=np.int64))


def test_apply_matches_dense_product():
    rng = np.random.default_rng(3)
    m = random_sparse(rng, 30, 40, 300)
    mm = reduce_mod(m, P)
    v = rng.integers(0, P.p, size=40, dtype=np.int64)
    w = rng.integers(0, P.p, size=30, dtype=np.int64)
    assert np.array_equal(mm.apply(v), mm.to_dense() @ v % P.p)
    assert np.array_equal(mm.apply_transpose(w), mm.to_dense().T @ w % P.p)


def test_apply_dimension_mismatch():
    mm = reduce_mod(SparseIntMatrix.from_triples(3, 4, [(0, 0, 1)]), P)
    with pytest.raises(DimensionError):
        mm.apply(np.zeros(3, dtype=np.int64))


def test_apply_linearity():
    rng = np.random.default_rng(4)
    mm = reduce_mod(random_sparse(rng, 25, 25, 120), P)
    for _ in range(10):
        u = rng.integers(0, P.p, size=25, dtype=np.int64)
        v = rng.integers(0, P.p, size=25, dtype=np.int64)
        alpha = int(rng.integers(0, P.p))
        lhs = mm.apply((alpha * u + v) % P.p)
        rhs = (alpha * mm.apply(u) + mm.apply(v)) % P.p
        assert np.array_equal(lhs, rhs)


def test_wide_modulus_apply_falls_back():
    f = make_fft_prime(40, 20)
    assert f.p >= (1 << 31)
    rng = np.random.default_rng(5)
    m = random_sparse(rng, 10, 12, 40, lo=-10 ** 9, hi=10 ** 9)
    mm = reduce_mod(m, f)
    v = rng.integers(0, 10 ** 9, size=12, dtype=np.int64)
    expect = np.array(
        [sum(int(a) * int(b) for a, b in zip(row, v)) % f.p for row in mm.to_dense()],
        dtype=np.int64,
    )
    assert np.array_equal(mm.apply(v), expect)


def test_precondition_identity_with_unit_diagonal():
    eye = reduce_mod(
        SparseIntMatrix.from_triples(4, 4, [(i, i, 1) for i in range(4)]), P
    )
    op = precondition(eye, seed=0)
    op.diag[:] = 1
    v = np.arange(4, dtype=np.int64)
    assert np.array_equal(op.apply(v), v)


def test_precondition_is_definitional_composition():
    rng = np.random.default_rng(6)
    mm = reduce_mod(random_sparse(rng, 15, 10, 60), P)
    op = precondition(mm, seed=42)
    for _ in range(5):
        v = rng.integers(0, P.p, size=10, dtype=np.int64)
        step = op.diag * v % P.p
        step = mm.apply(step)
        step = mm.apply_transpose(step)
        step = op.diag * step % P.p
        assert np.array_equal(op.apply(v), step)


def test_precondition_symmetry_inner_products():
    rng = np.random.default_rng(7)
    mm = reduce_mod(random_sparse(rng, 20, 15, 90), P)
    op = precondition(mm, seed=1)
    for _ in range(20):
        u = rng.integers(0, P.p, size=15, dtype=np.int64)
        v = rng.integers(0, P.p, size=15, dtype=np.int64)
        left = int(np.sum(op.apply(u) * v % P.p) % P.p)
        right = int(np.sum(u * op.apply(v) % P.p) % P.p)
        assert left == right


def test_precondition_preserves_rank():
    rng = np.random.default_rng(8)
    hits = 0
    for t in range(100):
        m = random_sparse(rng, 40, 60, 250)
        mm = reduce_mod(m, P)
        op = precondition(mm, seed=t)
        dense = mm.to_dense()
        tilde = op.diag[None, :] * (dense.T @ dense % P.p) % P.p
        tilde = tilde * op.diag[:, None] % P.p
        if rank_mod_p(tilde, P.p) == rank_mod_p(dense, P.p):
            hits += 1
    assert hits == 100


def test_digest_changes_with_content():
    a = read_sms("2 2 M\n1 1 1\n0 0 0\n")
    b = read_sms("2 2 M\n1 1 2\n0 0 0\n")
    assert a.digest() != b.digest()
