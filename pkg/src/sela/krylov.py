"""Scalar and block Wiedemann machinery.

Sequences S_i = Y^T Atilde^i Y are produced column by column: the worker
owning column j advances v_j = Atilde^i y_j and takes dot products against
the Y panel.  When the operator is symmetric (X = Y^T with a symmetric
preconditioned product) only the top j+1 entries of column j are computed
and stored; the rest are mirrored at assembly.  Column streams depend only
on (seed, column), never on scheduling, so results are byte-identical for
any worker count.

rank = deg det F - codeg det F of the minimal matrix generator, a Monte
Carlo lower bound on rank(A mod p); the integer rank takes the max over
random primes.
"""

from __future__ import annotations

import math
import multiprocessing as mp
import random
from dataclasses import dataclass

import numpy as np

from .checkpoint import CheckpointStore, ColumnMeta
from .ffield import DEFAULT_PRIME, FftPrime, random_fft_prime
from .polymat import (
    DetZeroError,
    GeneratorLengthError,
    PolyMatrix,
    degree_and_codegree,
    generator_residual,
    min_matrix_generator,
)
from .sparse import SparseIntMatrix, SparseModMatrix, precondition, reduce_mod

DEFAULT_BLOCK_SIZE = 30  # the paper's dominant configuration


class RankError(RuntimeError):
    """Generator reconstruction kept failing across reseeds."""


@dataclass
class BlockSequence:
    """Terms S_i = Y^T Atilde^i Y, with provenance for checkpoint validation."""

    s: int
    terms: np.ndarray  # (length, s, s)
    symmetric: bool
    prime: FftPrime
    seed: int
    n: int  # operator side

    @property
    def length(self) -> int:
        return int(self.terms.shape[0])


@dataclass(frozen=True)
class RankResult:
    rank: int
    primes: tuple[int, ...]
    degree: int
    codegree: int
    trials: int

    def __str__(self):
        ps = ",".join(map(str, self.primes))
        return (
            f"rank {self.rank} (deg {self.degree} - codeg {self.codegree}, "
            f"primes {ps}, {self.trials} trial(s))"
        )


def _dot_block_mod(panel: np.ndarray, v: np.ndarray, p: int) -> np.ndarray:
    """panel^T . v mod p with chunked accumulation (int64-exact)."""
    n = v.shape[0]
    chunk = max(1, ((1 << 63) - 1) // max((p - 1) ** 2, 1))
    if n <= chunk:
        return panel.T @ v % p
    acc = np.zeros(panel.shape[1], dtype=np.int64)
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        acc = (acc + panel[lo:hi].T @ v[lo:hi]) % p
    return acc


def block_y(n: int, s: int, prime: FftPrime, seed: int) -> np.ndarray:
    """The random projection block Y, a pure function of the seed."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, s, prime.p]))
    return rng.integers(0, prime.p, size=(n, s), dtype=np.int64)


_WORKER_CTX = None  # (b, Y, length, symmetric, store, metas); inherited by fork


def _column_job(column: int):
    """Compute (and optionally checkpoint) one column's sequence rows."""
    b, Y, length, symmetric, store, metas = _WORKER_CTX
    meta = metas[column]
    p = b.prime.p
    panel = Y[:, : column + 1] if symmetric else Y
    done = 0
    v = Y[:, column].copy()
    if store is not None:
        done = store.open_column(meta)
        if done >= length:
            return None
        state = store.read_state(column)
        start = 0
        if state is not None and state[0] <= done and state[1].shape[0] == v.shape[0]:
            start, v = state[0], state[1].copy()
        for _ in range(start, done):  # replay up to the first missing row
            v = b.apply(v)
    out = np.zeros((length, panel.shape[1]), dtype=np.int64) if store is None else None
    pending: list[bytes] = []
    for i in range(done, length):
        dots = _dot_block_mod(panel, v, p)
        if store is None:
            out[i] = dots
        else:
            pending.append(store.format_row(meta, i, dots))
        advanced = False
        if i + 1 < length:
            v = b.apply(v)
            advanced = True
        if store is not None and (
            (i + 1 - done) % store.state_every == 0 or i + 1 == length
        ):
            store.append_rows(meta, pending)
            pending.clear()
            # state pins v = Atilde^k y_j with k <= rows on disk
            store.write_state(column, i + 1 if advanced else i, v)
    return out


def block_sequence(
    b,
    s: int,
    length: int,
    store: CheckpointStore | None = None,
    workers: int = 1,
    seed: int = 0,
    digest: int = 0,
) -> BlockSequence:
    """Sequence terms of the blackbox `b` (side b.n) for a seeded block Y."""
    if s < 1 or length < 1:
        raise ValueError("block size and length must be >= 1")
    n = b.n
    symmetric = bool(getattr(b, "symmetric", False))
    Y = block_y(n, s, b.prime, seed)
    metas = [
        ColumnMeta(
            digest=digest,
            prime=b.prime.p,
            s=s,
            seed=seed,
            column=j,
            n=n,
            symmetric=symmetric,
            width=(j + 1) if symmetric else s,
        )
        for j in range(s)
    ]
    global _WORKER_CTX
    _WORKER_CTX = (b, Y, length, symmetric, store, metas)
    try:
        if workers > 1:
            # round-robin assignment so the triangular symmetric costs average
            order = [j for w in range(workers) for j in range(w, s, workers)]
            with mp.get_context("fork").Pool(workers) as pool:
                mapped = pool.map(_column_job, order, chunksize=1)
            by_column = dict(zip(order, mapped))
            results = [by_column[j] for j in range(s)]
        else:
            results = [_column_job(j) for j in range(s)]
    finally:
        _WORKER_CTX = None

    terms = np.zeros((length, s, s), dtype=np.int64)
    for j in range(s):
        rows = store.read_rows(j, length) if store is not None else results[j]
        if symmetric:
            terms[:, : j + 1, j] = rows
        else:
            terms[:, :, j] = rows
    if symmetric:
        upper = np.triu(np.ones((s, s), dtype=bool), k=1)
        for i in range(length):
            terms[i][upper.T] = terms[i].T[upper.T]
    return BlockSequence(s, terms, symmetric, b.prime, seed, n)


def scalar_minpoly(u: np.ndarray, v: np.ndarray, b, length: int) -> np.ndarray:
    """Minimal polynomial (monic, ascending) of the scalars u^T b^i v.

    Divides the minimal polynomial of b; equality holds with high
    probability for random u, v when length >= 2n+2.
    """
    p = b.prime.p
    u = np.asarray(u, dtype=np.int64) % p
    w = np.asarray(v, dtype=np.int64) % p
    seq = np.zeros(length, dtype=np.int64)
    for i in range(length):
        seq[i] = _dot_block_mod(u.reshape(-1, 1), w, p)[0]
        if i + 1 < length:
            w = b.apply(w)
    L, C = _berlekamp_massey(seq, p)
    out = np.zeros(L + 1, dtype=np.int64)
    for i, c in enumerate(C):
        if i <= L:
            out[L - i] = c
    return out


def _berlekamp_massey(seq: np.ndarray, p: int):
    """Connection polynomial C (C[0]=1) with sum_i C_i s_(n-i) = 0, n >= L."""
    C = [1]
    B = [1]
    L = 0
    m = 1
    b = 1
    for n in range(len(seq)):
        d = int(seq[n]) % p
        for i in range(1, min(L, len(C) - 1) + 1):
            d = (d + C[i] * int(seq[n - i])) % p
        if d == 0:
            m += 1
            continue
        coef = d * pow(b, -1, p) % p
        if len(B) + m > len(C):
            C = C + [0] * (len(B) + m - len(C))
        T = list(C)
        for i, bb in enumerate(B):
            C[i + m] = (C[i + m] - coef * bb) % p
        if 2 * L <= n:
            L, B, b, m = n + 1 - L, T, d, 1
        else:
            m += 1
    return L, C[: L + 1]


def sequence_length_for(n: int, s: int) -> int:
    """Default 2*ceil(n/s) + 2; the paper's O(1) term is pinned at +2."""
    return 2 * math.ceil(n / s) + 2 if n else 2


def _as_mod(a, prime: FftPrime) -> SparseModMatrix:
    if isinstance(a, SparseModMatrix):
        if a.prime.p != prime.p:
            raise ValueError("matrix already reduced mod a different prime")
        return a
    return reduce_mod(a, prime)


def block_rank(
    a,
    prime: FftPrime = DEFAULT_PRIME,
    s: int = DEFAULT_BLOCK_SIZE,
    length: int | None = None,
    seed: int = 0,
    max_retries: int = 3,
    store: CheckpointStore | None = None,
    workers: int = 1,
    digest: int = 0,
) -> RankResult:
    """Block Wiedemann rank of A mod p.

    Preconditions A into the symmetric Atilde, generates the sequence,
    reconstructs the minimal generator, and reads the rank off as
    deg det F - codeg det F.  Degenerate projections are retried with a
    fresh Y seed a bounded number of times.
    """
    if isinstance(a, SparseIntMatrix) and a.cols > a.rows:
        a = a.transpose()  # rank is transpose-invariant; smaller operator side
    mod = _as_mod(a, prime)
    if mod.cols > mod.rows:
        mod = SparseModMatrix(mod.csr.T.tocsr(), prime)
    n, m = mod.rows, mod.cols
    if mod.nnz == 0 or n == 0 or m == 0:
        return RankResult(0, (prime.p,), 0, 0, 1)
    last_error: Exception | None = None
    for attempt in range(max_retries + 1):
        trial_seed = seed + 1_000_003 * attempt
        op = precondition(mod, trial_seed)
        want = length if length is not None else sequence_length_for(op.n, s)
        try:
            seq = block_sequence(
                op, s, want, store=store, workers=workers,
                seed=trial_seed, digest=digest,
            )
            F = min_matrix_generator(seq)
            _spot_check_generator(F, seq)
            deg, codeg = degree_and_codegree(F)
        except (DetZeroError, GeneratorLengthError, RankError) as e:
            last_error = e
            if store is not None:
                store.clear()  # a reseeded run cannot reuse old columns
            continue
        rank = deg - codeg
        if rank > min(n, m):
            last_error = RankError(f"rank {rank} exceeds min dimension {min(n, m)}")
            continue
        return RankResult(rank, (prime.p,), deg, codeg, attempt + 1)
    raise RankError(f"no usable generator after {max_retries + 1} attempts: {last_error}")


def _spot_check_generator(F: PolyMatrix, seq: BlockSequence, samples: int = 4) -> None:
    """Cheap residual probe; full offset sweeps live in the test suite."""
    L = seq.length
    deg = F.degree
    if L - deg <= 0:
        return
    offsets = sorted({0, max(0, L - deg - 1), *range(1, L - deg, max(1, (L - deg) // samples))})
    for k in offsets:
        window = seq.terms[k : k + deg + 1]
        if window.shape[0] < deg + 1:
            continue
        if generator_residual(F, window) != 0:
            raise RankError(f"generator fails annihilation at offset {k}")


def integer_rank(
    a: SparseIntMatrix,
    trials: int = 2,
    s: int = DEFAULT_BLOCK_SIZE,
    seed: int = 0,
    length: int | None = None,
) -> RankResult:
    """Max of block_rank over random FFT primes: a Monte Carlo lower bound
    on the integer rank, exact with high probability."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = random.Random(seed)
    used: list[int] = []
    best: RankResult | None = None
    for t in range(trials):
        f = random_fft_prime(rng, exclude=tuple(used))
        used.append(f.p)
        res = block_rank(a, prime=f, s=s, seed=seed + t, length=length)
        if best is None or res.rank > best.rank:
            best = RankResult(res.rank, (f.p,), res.degree, res.codegree, t + 1)
    return RankResult(best.rank, tuple(used), best.degree, best.codegree, trials)


def expected_iterations(r: int, p_workers: int) -> int:
    """Planning helper: 2 + ceil(2r/p) sequence iterations on p workers."""
    if p_workers < 1:
        raise ValueError("worker count must be >= 1")
    return 2 + -(-2 * r // p_workers)
