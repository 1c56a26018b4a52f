"""Integer Smith normal form stack.

Local Smith forms at a prime p come from repeated sparse elimination over
Z/p^e with unit pivots, dividing the residue block by p when no unit is
left and raising e (re-running) when precision saturates.  Torsion primes
are discovered either through the minimal valence of A^T.A or, in the
adaptive algorithm, certified away by the one-invariant-factor machinery:
s_r of a randomly compressed i x i matrix, computed as the lcm of
denominators of p-adic (Dixon) rational solves with random right-hand
sides.  The probability that a prime above the cutoff escapes the OIF
certificate is bounded by M * sum_(p>P) (2/p)^N.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .ffield import FftPrime, is_prime_word, random_fft_prime
from .krylov import integer_rank, scalar_minpoly
from .sparse import PreconditionedOperator, SparseIntMatrix, reduce_mod

SMOOTH_CUTOFF = 100          # the adaptive algorithm's smooth/rough split
TRIAL_DIVISION_BOUND = 10 ** 6
DENSE_SWITCH = 2000          # residue blocks below this side go dense
FILL_BUDGET = 30_000_000     # sparse elimination entry budget


class SmithError(RuntimeError):
    pass


class LocalSmithError(SmithError):
    """Elimination exceeded its memory/precision budget."""


class SingularMatrixError(SmithError):
    pass


class ValenceError(SmithError):
    pass


# ---------------------------------------------------------------------------
# result types

@dataclass(frozen=True)
class SmithForm:
    """Ordered invariant factors with multiplicities; factors divide onward."""

    factors: tuple[tuple[int, int], ...]  # (invariant factor, multiplicity)
    rank: int

    def __post_init__(self):
        prev = None
        total = 0
        for f, mult in self.factors:
            if f <= 0 or mult <= 0:
                raise SmithError(f"bad factor entry ({f}, {mult})")
            if prev is not None:
                if f <= prev or f % prev:
                    raise SmithError(f"{prev} does not divide {f}")
            prev = f
            total += mult
        if total != self.rank:
            raise SmithError(f"multiplicities sum to {total}, rank is {self.rank}")

    def expanded(self) -> list[int]:
        out = []
        for f, mult in self.factors:
            out.extend([f] * mult)
        return out

    def __str__(self):
        if not self.factors:
            return "(empty)"
        return ", ".join(f"{f} ({mult})" for f, mult in self.factors)


@dataclass(frozen=True)
class LocalSmithForm:
    """p-power content of the invariant factors: (exponent, multiplicity)."""

    prime: int
    profile: tuple[tuple[int, int], ...]  # ascending exponents
    rank: int

    def __post_init__(self):
        exps = [e for e, _ in self.profile]
        if exps != sorted(set(exps)):
            raise SmithError("profile exponents must be strictly increasing")
        if sum(m for _, m in self.profile) != self.rank:
            raise SmithError("profile multiplicities must sum to the rank")

    def exponents(self) -> list[int]:
        out = []
        for e, mult in self.profile:
            out.extend([e] * mult)
        return out

    def is_trivial(self) -> bool:
        return all(e == 0 for e, _ in self.profile)

    def __str__(self):
        body = ", ".join(f"{self.prime}^{e} ({m})" for e, m in self.profile)
        return f"at {self.prime}: {body or '(empty)'}"


@dataclass(frozen=True)
class OifParams:
    """Knobs of the one-invariant-factor certificate."""

    M: int = 2
    N: int = 2
    cutoff: int = SMOOTH_CUTOFF
    beta: int | None = None  # right-hand-side bound; default 2 * Hadamard

    def __post_init__(self):
        if self.M < 0 or self.N < 1:
            raise SmithError("OIF repetitions must be positive")


@dataclass
class SmithOutcome:
    """A Smith computation with its certification context.

    kind: "exact", "smooth_only" (rough part not certified) or
    "divisor_only" (some local forms replaced by rank-mod-p divisor info).
    """

    form: SmithForm | None
    kind: str
    rank: int
    local_forms: dict[int, LocalSmithForm] = field(default_factory=dict)
    s_r: int | None = None
    params: OifParams | None = None
    failure_bound: float | None = None
    notes: list[str] = field(default_factory=list)

    def prepend_trivial(self, count: int) -> "SmithOutcome":
        """Account for unit invariant factors removed by chain reduction."""
        if count == 0 or self.form is None:
            if count and self.form is None:
                self.notes.append(f"{count} trivial factors from reduction")
                self.rank += count
            return self
        factors = list(self.form.factors)
        if factors and factors[0][0] == 1:
            factors[0] = (1, factors[0][1] + count)
        else:
            factors.insert(0, (1, count))
        self.form = SmithForm(tuple(factors), self.form.rank + count)
        self.rank += count
        return self


# ---------------------------------------------------------------------------
# factoring small words

def _pollard_rho(n: int, rng: random.Random) -> int:
    if n % 2 == 0:
        return 2
    while True:
        c = rng.randrange(1, n)
        f = lambda x: (x * x + c) % n
        x = y = rng.randrange(2, n)
        d = 1
        while d == 1:
            x = f(x)
            y = f(f(y))
            d = math.gcd(abs(x - y), n)
        if d != n:
            return d


def factor_word(n: int, seed: int = 0) -> tuple[dict[int, int], int]:
    """Factor |n| by trial division then Pollard rho.

    Returns (prime -> exponent, unfactored cofactor); the cofactor is 1 on
    success and > 1 when something exceeded the 63-bit factoring budget.
    """
    n = abs(n)
    out: dict[int, int] = {}
    if n <= 1:
        return out, 1
    for q in range(2, TRIAL_DIVISION_BOUND):
        if q * q > n:
            break
        while n % q == 0:
            out[q] = out.get(q, 0) + 1
            n //= q
    if n == 1:
        return out, 1
    rng = random.Random(seed ^ n)
    stack = [n]
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if is_prime_word(m):
            out[m] = out.get(m, 0) + 1
            continue
        if m >= (1 << 63):
            return out, m  # beyond the word factoring budget
        d = _pollard_rho(m, rng)
        stack.extend([d, m // d])
    return out, 1


# ---------------------------------------------------------------------------
# local Smith forms (sparse elimination over Z/p^e)

def _initial_exponent(p: int) -> int:
    e = 1
    while p ** (e + 1) < (1 << 31):
        e += 1
    return max(1, min(e, 24))


def _max_exponent(p: int) -> int:
    e = 1
    while p ** (e + 1) < (1 << 62):
        e += 1
    return e


class _Saturated(Exception):
    """Precision p^e exhausted before the profile stabilized."""


def _lre_dense(block: np.ndarray, p: int, mod: int, level: int,
               counts: dict[int, int]) -> None:
    """Dense unit-pivot elimination over Z/mod, dividing by p when stuck.

    Retired rows/columns are masked out (zeroed) rather than copied away."""
    A = block % mod
    while True:
        if not A.any():
            return
        units = np.argwhere(A % p != 0)
        if units.size == 0:
            if mod <= p:
                raise _Saturated()
            A //= p
            mod //= p
            A %= mod
            level += 1
            continue
        i, j = int(units[0, 0]), int(units[0, 1])
        inv = pow(int(A[i, j]), -1, mod)
        rows = np.nonzero(A[:, j])[0]
        rows = rows[rows != i]
        if rows.size:
            factor = A[rows, j] * inv % mod
            A[rows] = (A[rows] - factor[:, None] * A[i][None, :]) % mod
        counts[level] = counts.get(level, 0) + 1
        A[i, :] = 0
        A[:, j] = 0


def _lre_sparse(entries, p: int, e: int,
                dense_switch: int, fill_budget: int) -> dict[int, int]:
    """Unit-pivot elimination on dict-of-rows storage; returns the profile
    counts {valuation: multiplicity}.  Raises _Saturated when e is too small
    and LocalSmithError when fill exceeds the budget.

    Pivots come from a lazy min-heap over row fill, refined by Markowitz
    cost among a small candidate set."""
    import heapq

    mod = p ** e
    row_data: dict[int, dict[int, int]] = {}
    col_index: dict[int, set[int]] = {}
    for (i, j), v in entries.items():
        v %= mod
        if v:
            row_data.setdefault(i, {})[j] = v
            col_index.setdefault(j, set()).add(i)
    counts: dict[int, int] = {}
    level = 0
    nnz = sum(len(r) for r in row_data.values())
    heap = [(len(cells), r) for r, cells in row_data.items()]
    heapq.heapify(heap)

    def find_pivot():
        """Best unit pivot among ~24 sparsest candidate rows; None if the
        candidates are unit-free (caller then full-scans)."""
        candidates = []
        while heap and len(candidates) < 24:
            size, r = heapq.heappop(heap)
            cells = row_data.get(r)
            if cells is None:
                continue
            if size != len(cells):
                heapq.heappush(heap, (len(cells), r))
                continue
            candidates.append((r, cells))
        best = None
        best_cost = None
        for r, cells in candidates:
            for c, v in cells.items():
                if v % p:
                    cost = (len(cells) - 1) * (len(col_index[c]) - 1)
                    if best_cost is None or cost < best_cost:
                        best_cost = cost
                        best = (r, c)
                    if cost == 0:
                        break
            if best_cost == 0:
                break
        for r, cells in candidates:
            if best is None or r != best[0]:
                heapq.heappush(heap, (len(cells), r))
        return best

    def full_scan():
        best = None
        best_cost = None
        for r, cells in row_data.items():
            for c, v in cells.items():
                if v % p:
                    cost = (len(cells) - 1) * (len(col_index[c]) - 1)
                    if best_cost is None or cost < best_cost:
                        best_cost = cost
                        best = (r, c)
        return best

    while row_data:
        if (
            len(col_index) <= dense_switch
            and len(row_data) * len(col_index) <= 20_000_000
            and mod < (1 << 31)
        ):
            rmap = {r: a for a, r in enumerate(row_data)}
            cmap = {c: a for a, c in enumerate(col_index)}
            dense = np.zeros((len(rmap), len(cmap)), dtype=np.int64)
            for r, cells in row_data.items():
                for c, v in cells.items():
                    dense[rmap[r], cmap[c]] = v
            _lre_dense(dense, p, mod, level, counts)
            return counts
        pivot = find_pivot()
        if pivot is None:
            pivot = full_scan()
        if pivot is None:
            # every remaining entry is divisible by p
            if mod <= p:
                raise _Saturated()
            mod //= p
            level += 1
            new_rows: dict[int, dict[int, int]] = {}
            col_index.clear()
            for r, cells in row_data.items():
                fresh = {}
                for c, v in cells.items():
                    w = (v // p) % mod
                    if w:
                        fresh[c] = w
                        col_index.setdefault(c, set()).add(r)
                if fresh:
                    new_rows[r] = fresh
            row_data = new_rows
            nnz = sum(len(r) for r in row_data.values())
            heap = [(len(cells), r) for r, cells in row_data.items()]
            heapq.heapify(heap)
            continue
        r0, c0 = pivot
        piv_row = row_data.pop(r0)
        piv_val = piv_row.pop(c0)
        for c in piv_row:
            col_index[c].discard(r0)
        col_index[c0].discard(r0)
        inv = pow(piv_val, -1, mod)
        targets = list(col_index.pop(c0, ()))
        for r in targets:
            cells = row_data.get(r)
            if cells is None or c0 not in cells:
                continue
            f = cells.pop(c0) * inv % mod
            nnz -= 1
            for c, v in piv_row.items():
                w = (cells.get(c, 0) - f * v) % mod
                if w:
                    if c not in cells:
                        nnz += 1
                        col_index.setdefault(c, set()).add(r)
                    cells[c] = w
                elif c in cells:
                    del cells[c]
                    nnz -= 1
                    col_index[c].discard(r)
            if not cells:
                del row_data[r]
            else:
                heapq.heappush(heap, (len(cells), r))
        nnz -= len(piv_row) + 1
        counts[level] = counts.get(level, 0) + 1
        if nnz > fill_budget:
            raise LocalSmithError(
                f"fill {nnz} exceeded the {fill_budget}-entry budget at p={p}"
            )
    return counts


def local_smith(
    a: SparseIntMatrix,
    p: int,
    expected_rank: int | None = None,
    dense_switch: int = DENSE_SWITCH,
    fill_budget: int = FILL_BUDGET,
    seed: int = 0,
) -> LocalSmithForm:
    """Exponent profile of the Smith form of `a` at the prime p.

    Eliminates with unit pivots modulo p^e, dividing the stuck residue block
    by p; e is raised and the elimination re-run until the profile accounts
    for every invariant factor.  The reference count comes from
    expected_rank when the caller knows the rank (it usually does); standalone
    calls fetch their own Monte Carlo rank first, since entries that vanish
    modulo p^e are otherwise indistinguishable from true zeros.
    """
    if not is_prime_word(p):
        raise SmithError(f"{p} is not prime")
    if expected_rank is None:
        expected_rank = integer_rank(a, trials=2, seed=seed).rank
    entries = {
        (int(i), int(j)): int(v)
        for i, j, v in zip(a.row_idx, a.col_idx, a.values)
    }
    e = _initial_exponent(p)
    e_cap = _max_exponent(p)
    while True:
        try:
            counts = _lre_sparse(entries, p, e, dense_switch, fill_budget)
        except _Saturated:
            if e >= e_cap:
                raise LocalSmithError(
                    f"profile at p={p} does not stabilize below p^{e_cap}"
                ) from None
            e = min(2 * e, e_cap)
            continue
        total = sum(counts.values())
        # every unit pivot is a genuine factor, so total <= true rank; only
        # entries that vanished mod p^e can be missing, hence raise e.
        if total < expected_rank and e < e_cap:
            e = min(2 * e, e_cap)
            continue
        if total < expected_rank:
            raise LocalSmithError(
                f"local rank {total} at p={p} never reached {expected_rank}"
            )
        profile = tuple(sorted(counts.items()))
        return LocalSmithForm(p, profile, total)


def _rank_certifies_trivial(a: SparseIntMatrix, p: int, rank: int,
                            seed: int = 0) -> bool:
    """True when block Wiedemann mod p reaches the integer rank, which
    certifies a trivial local form (rank mod p never exceeds the rank).
    Sound in one direction only: a miss proves nothing."""
    from .ffield import FieldError, fft_prime_from_value
    from .krylov import RankError, block_rank

    try:
        f = fft_prime_from_value(p)
    except FieldError:
        return False
    for t in range(2):
        try:
            if block_rank(a, prime=f, s=16, seed=seed + 77 * t).rank == rank:
                return True
        except RankError:
            continue
    return False


# ---------------------------------------------------------------------------
# valence

def minimal_valence(a: SparseIntMatrix, trials: int = 2, seed: int = 0) -> int:
    """Trailing nonzero coefficient of minpoly(A^T.A) over the integers.

    Scalar Wiedemann minimal polynomials modulo independent random FFT
    primes, degree-matched and CRT-combined in the symmetric range until the
    value survives two extra primes unchanged.  Monte Carlo.
    """
    if trials < 2:
        raise ValenceError("valence needs at least 2 prime trials")
    work = a if a.rows >= a.cols else a.transpose()
    n = work.cols
    if n == 0 or work.nnz == 0:
        raise ValenceError("empty matrix has no valence")
    rng = random.Random(seed)
    used: list[int] = []
    best_deg = -1
    best_codeg = -1
    residues: list[tuple[int, int]] = []  # (trailing coeff, prime)
    stable_streak = 0
    combined_prev: int | None = None
    max_primes = max(trials + 6, 12)
    for t in range(max_primes):
        f = random_fft_prime(rng, exclude=tuple(used))
        used.append(f.p)
        mod = reduce_mod(work, f)
        op = PreconditionedOperator(
            mod, np.ones(work.cols, dtype=np.int64), seed
        )
        rng_np = np.random.default_rng(seed + 17 * t)
        u = rng_np.integers(0, f.p, size=n, dtype=np.int64)
        v = rng_np.integers(0, f.p, size=n, dtype=np.int64)
        poly = scalar_minpoly(u, v, op, 2 * n + 2)
        nz = np.nonzero(poly)[0]
        deg, codeg = len(poly) - 1, int(nz[0])
        if deg > best_deg:
            best_deg, best_codeg = deg, codeg
            residues = []
            combined_prev = None
            stable_streak = 0
        if deg < best_deg or codeg != best_codeg:
            continue  # unlucky prime or projection
        residues.append((int(poly[codeg]), f.p))
        value = _crt_symmetric(residues)
        if combined_prev is not None and value == combined_prev:
            stable_streak += 1
        else:
            stable_streak = 0
        combined_prev = value
        if stable_streak >= 2 and len(residues) >= max(2, trials):
            return value
    if combined_prev is None:
        raise ValenceError("primes never agreed on the minimal polynomial degree")
    if stable_streak < 2:
        raise ValenceError("valence failed to stabilize across extra primes")
    return combined_prev


def _crt_symmetric(residues: list[tuple[int, int]]) -> int:
    x, m = 0, 1
    for r, p in residues:
        inv = pow(m % p, -1, p)
        t = (r - x) * inv % p
        x += m * t
        m *= p
    x %= m
    if x > m // 2:
        x -= m
    return x


# ---------------------------------------------------------------------------
# Dixon solver and invariant factors

def _hadamard_log2(a: np.ndarray) -> float:
    """log2 of the column-wise Hadamard bound."""
    if a.size == 0:
        return 0.0
    sq = a.astype(np.float64) ** 2
    norms = sq.sum(axis=0)
    norms = np.maximum(norms, 1.0)
    # float64 squares are approximate for huge entries: pad one bit per column
    return float(np.sum(0.5 * np.log2(norms))) + a.shape[1] * 1e-9 + 1.0


def hadamard_bound(a: np.ndarray) -> int:
    return 1 << (int(math.ceil(_hadamard_log2(a))) + 1)


def _rational_reconstruct(z: int, modulus: int, num_bound: int, den_bound: int):
    """x = n/d with z*d = n mod modulus, |n| <= num_bound, 0 < d <= den_bound."""
    r0, r1 = modulus, z % modulus
    s0, s1 = 0, 1
    while r1 > num_bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    d = abs(s1)
    if d == 0 or d > den_bound:
        raise SmithError("rational reconstruction failed (bounds too tight)")
    n = r1 if s1 > 0 else -r1
    if (n - z * d) % modulus:
        raise SmithError("rational reconstruction produced an inconsistent pair")
    return n, d


class _DixonLift:
    """p-adic lifting context for one dense integer matrix."""

    def __init__(self, dense: np.ndarray, seed: int = 0, tries: int = 5):
        self.a = np.asarray(dense)
        self.n = self.a.shape[0]
        if self.a.shape[0] != self.a.shape[1]:
            raise SmithError("Dixon expects a square matrix")
        if self.n == 0:
            raise SmithError("empty system")
        self.max_abs = int(max(1, np.abs(self.a.astype(object)).max()))
        rng = random.Random(seed)
        last = None
        for _ in range(tries):
            f = random_fft_prime(rng, min_two_adicity=1, max_bits=20)
            try:
                self.inv = self._invert_mod(self.a, f.p)
                self.prime = f.p
                break
            except SingularMatrixError as e:
                last = e
        else:
            raise SingularMatrixError(
                f"matrix singular modulo {tries} random primes; "
                f"likely singular over Q ({last})"
            )
        # exact int64 A.y needs max|A| * (p-1) * n < 2^63
        self.int64_ok = (
            self.max_abs < (1 << 62) // (self.prime * max(self.n, 1))
            and self.a.dtype == np.int64
        )
        self.a_int = self.a.astype(np.int64) if self.int64_ok else self.a.astype(object)
        self.had_log2 = _hadamard_log2(self.a)

    @staticmethod
    def _invert_mod(a: np.ndarray, p: int) -> np.ndarray:
        n = a.shape[0]
        if a.dtype == np.int64:
            reduced = a % p
        else:
            reduced = np.array(
                [[int(x) % p for x in row] for row in a], dtype=np.int64
            )
        work = np.concatenate([reduced, np.eye(n, dtype=np.int64)], axis=1)
        for c in range(n):
            piv = None
            for r in range(c, n):
                if work[r, c]:
                    piv = r
                    break
            if piv is None:
                raise SingularMatrixError(f"singular mod {p}")
            if piv != c:
                work[[c, piv]] = work[[piv, c]]
            inv = pow(int(work[c, c]), -1, p)
            work[c] = work[c] * inv % p
            hits = np.nonzero(work[:, c])[0]
            for r in hits:
                if r != c:
                    work[r] = (work[r] - work[r, c] * work[c]) % p
        return work[:, n:]

    def _iterations(self, num_log2: float, den_log2: float) -> int:
        need = num_log2 + den_log2 + 3
        return max(2, int(math.ceil(need / math.log2(self.prime))) + 2)

    def digits(self, b_vec: list[int], iterations: int) -> list[np.ndarray]:
        """p-adic digit vectors y_k of the solution of A.x = b."""
        p = self.prime
        b_digits: list[np.ndarray] = []
        rem = [int(x) for x in b_vec]
        for _ in range(iterations):
            layer = np.array([r % p for r in rem], dtype=np.int64)
            b_digits.append(layer)
            rem = [(r - int(l)) // p for r, l in zip(rem, layer)]
        if any(rem):
            # leftover high digits of b: fold them into the last layer lazily
            extra = rem
        else:
            extra = None
        r_small = np.zeros(self.n, dtype=np.int64 if self.int64_ok else object)
        ys = []
        for k in range(iterations):
            rhs = (r_small + b_digits[k]) % p
            y = self.inv @ rhs % p
            ys.append(y.astype(np.int64))
            ay = self.a_int @ y
            r_small = (r_small + b_digits[k] - ay)
            assert not np.any(r_small % p), "p-adic residual not divisible"
            r_small //= p
        if extra is not None and any(extra):
            raise SmithError("iteration count too small for this right-hand side")
        return ys

    def solve(self, b_vec: list[int], extra_num_log2: float = 0.0):
        """Exact rational solution (list of Fractions)."""
        b_log2 = max(int(abs(x)).bit_length() for x in b_vec) if b_vec else 1
        num_log2 = self.had_log2 + b_log2 + math.log2(self.n + 1)
        k = self._iterations(num_log2 + extra_num_log2, self.had_log2)
        ys = self.digits(b_vec, k)
        modulus = self.prime ** k
        num_bound = 1 << int(math.ceil(num_log2 + extra_num_log2))
        den_bound = 1 << int(math.ceil(self.had_log2) + 1)
        out = []
        for i in range(self.n):
            z = _combine_digits([int(y[i]) for y in ys], self.prime)
            n_i, d_i = _rational_reconstruct(z, modulus, num_bound, den_bound)
            out.append(Fraction(n_i, d_i))
        return out

    def denominator_lcm(self, b_vec: list[int], seed: int = 0, probes: int = 2) -> int:
        """lcm of solution denominators via random projections (Monte Carlo)."""
        b_log2 = max(int(abs(x)).bit_length() for x in b_vec) if b_vec else 1
        lam_bound = 1 << 10
        proj_log2 = (
            self.had_log2 + b_log2 + math.log2(self.n + 1)
            + math.log2(lam_bound) + math.log2(self.n)
        )
        k = self._iterations(proj_log2, self.had_log2)
        ys = self.digits(b_vec, k)
        modulus = self.prime ** k
        num_bound = 1 << int(math.ceil(proj_log2))
        den_bound = 1 << int(math.ceil(self.had_log2) + 1)
        rng = random.Random(seed)
        out = 1
        for _ in range(probes):
            lam = np.array([rng.randrange(1, lam_bound) for _ in range(self.n)],
                           dtype=np.int64)
            digits = [int(lam @ y) for y in ys]
            z = _combine_digits(digits, self.prime) % modulus
            _, d = _rational_reconstruct(z, modulus, num_bound, den_bound)
            out = out * d // math.gcd(out, d)
        return out


def _combine_digits(digits: list[int], p: int) -> int:
    """sum digits[k] p^k by divide and conquer."""
    def rec(lo: int, hi: int) -> tuple[int, int]:
        if hi - lo == 1:
            return digits[lo], p
        mid = (lo + hi) // 2
        left, pl = rec(lo, mid)
        right, pr = rec(mid, hi)
        return left + pl * right, pl * pr

    if not digits:
        return 0
    val, _ = rec(0, len(digits))
    return val


def dixon_solve(a, b, seed: int = 0):
    """Exact rational solution of a nonsingular integer system by p-adic
    lifting and rational reconstruction."""
    lift = _DixonLift(np.asarray(a), seed=seed)
    return lift.solve([int(x) for x in b])


def last_invariant_factor(a, N: int = 2, beta: int | None = None, seed: int = 0) -> int:
    """Divisor of s_n(A): lcm over N random-rhs solves of the denominator lcm."""
    dense = np.asarray(a)
    if beta is None:
        beta = 2 * hadamard_bound(dense)
    lift = _DixonLift(dense, seed=seed)
    rng = random.Random(seed ^ 0xB0B)
    out = 1
    for t in range(N):
        b = [rng.randrange(beta) for _ in range(dense.shape[0])]
        d = lift.denominator_lcm(b, seed=seed + 31 * t)
        out = out * d // math.gcd(out, d)
    return out


def _compress(a: SparseIntMatrix, i: int, rng: random.Random, spread: int = 16):
    """LAR with L: i x m, R: n x i, small random entries (exact in float64).

    The printed dimensions in the source material do not multiply; this is
    the shape-consistent reading, giving an i x i product."""
    csr = a.to_scipy()
    m, n = a.rows, a.cols
    np_rng = np.random.default_rng(rng.randrange(1 << 62))
    L = np_rng.integers(0, spread, size=(i, m), dtype=np.int64)
    R = np_rng.integers(0, spread, size=(n, i), dtype=np.int64)
    ar = csr @ R  # (m, i) int64, exact
    max_ar = int(np.abs(ar).max(initial=0)) if ar.size else 0
    if max_ar == 0 or math.log2(spread + 1) + math.log2(max_ar + 1) + math.log2(m + 1) < 52:
        lar = np.rint(L.astype(np.float64) @ ar.astype(np.float64)).astype(np.int64)
    else:
        lar = L.astype(object) @ ar.astype(object)
    return lar


def one_invariant_factor(
    i: int,
    a: SparseIntMatrix,
    params: OifParams = OifParams(),
    seed: int = 0,
    max_retries: int = 3,
) -> int:
    """Multiple of s_i(A) (with the theorem's probability): gcd over M
    preconditioner pairs of the LIF of the compressed i x i matrix."""
    if not (1 <= i <= min(a.rows, a.cols)):
        raise SmithError(f"invariant index {i} out of range")
    if params.M < 1:
        raise SmithError("OIF needs M >= 1")
    rng = random.Random(seed)
    result: int | None = None
    for trial in range(params.M):
        value = None
        for attempt in range(max_retries + 1):
            lar = _compress(a, i, rng)
            try:
                value = last_invariant_factor(
                    lar, N=params.N, beta=params.beta,
                    seed=seed + 101 * trial + attempt,
                )
                break
            except SingularMatrixError:
                continue
        if value is None:
            raise SingularMatrixError(
                f"all compressed matrices were singular for i={i}"
            )
        result = value if result is None else math.gcd(result, value)
    return int(result)


# ---------------------------------------------------------------------------
# failure bound

_PRIME_SIEVE_LIMIT = TRIAL_DIVISION_BOUND
_sieve_cache: np.ndarray | None = None


def _primes_below(limit: int) -> np.ndarray:
    global _sieve_cache
    if _sieve_cache is None:
        mask = np.ones(_PRIME_SIEVE_LIMIT, dtype=bool)
        mask[:2] = False
        for q in range(2, int(_PRIME_SIEVE_LIMIT ** 0.5) + 1):
            if mask[q]:
                mask[q * q :: q] = False
        _sieve_cache = np.nonzero(mask)[0]
    return _sieve_cache[_sieve_cache < limit]


def oif_failure_bound(params: OifParams) -> float:
    """Upper bound on the probability that a prime above the cutoff divides
    s_i but escapes the OIF output: M * sum_(p>P) (2/p)^N, the sum taken
    explicitly below 10^6 with an integral tail beyond."""
    if params.N < 2:
        raise SmithError("the failure-bound series diverges for N < 2")
    if params.M == 0:
        return 0.0
    primes = _primes_below(_PRIME_SIEVE_LIMIT)
    tail_primes = primes[primes > params.cutoff]
    partial = float(np.sum((2.0 / tail_primes) ** params.N))
    # integers beyond the sieve dominate the prime tail
    tail = (2.0 ** params.N) * _PRIME_SIEVE_LIMIT ** (1 - params.N) / (params.N - 1)
    return params.M * (partial + tail)


# ---------------------------------------------------------------------------
# assembly and the two pipelines

def combine_local_forms(
    locals_: dict[int, LocalSmithForm], rank: int
) -> SmithForm:
    """Product of local forms: exponents align at the tail (divisibility)."""
    factor_of = [1] * rank
    for p, lf in locals_.items():
        exps = lf.exponents()
        if len(exps) != rank:
            raise SmithError(
                f"local form at {p} accounts for {len(exps)} of {rank} factors"
            )
        for idx, e in enumerate(sorted(exps)):
            if e:
                factor_of[idx] *= p ** e
    grouped: list[tuple[int, int]] = []
    for f in factor_of:
        if grouped and grouped[-1][0] == f:
            grouped[-1] = (f, grouped[-1][1] + 1)
        else:
            grouped.append((f, 1))
    return SmithForm(tuple(grouped), rank)


def smith_via_valence(
    a: SparseIntMatrix,
    seed: int = 0,
    rank: int | None = None,
    fill_budget: int = FILL_BUDGET,
) -> SmithOutcome:
    """Valence-driven Smith form: factor the valence of A^T.A to find the
    candidate torsion primes, then multiply the local forms."""
    if rank is None:
        rank = integer_rank(a, trials=2, seed=seed).rank
    if rank == 0:
        return SmithOutcome(SmithForm((), 0), "exact", 0)
    outcome = SmithOutcome(None, "exact", rank)
    val = minimal_valence(a, seed=seed)
    primes_found, cofactor = factor_word(val, seed=seed)
    if cofactor != 1:
        outcome.kind = "smooth_only"
        outcome.notes.append(
            f"valence cofactor {cofactor} exceeded the 63-bit factoring budget"
        )
    candidates = sorted(set(primes_found) | {2, 3})
    for p in candidates:
        if _rank_certifies_trivial(a, p, rank, seed=seed):
            continue
        try:
            lf = local_smith(a, p, expected_rank=rank, fill_budget=fill_budget)
        except LocalSmithError as e:
            outcome.kind = "divisor_only"
            outcome.notes.append(f"local form at {p} failed: {e}")
            continue
        if not lf.is_trivial():
            outcome.local_forms[p] = lf
    if outcome.kind == "exact" or outcome.kind == "smooth_only":
        full = dict(outcome.local_forms)
        for p in candidates:
            full.setdefault(
                p, LocalSmithForm(p, ((0, rank),), rank)
            )
        outcome.form = combine_local_forms(full, rank)
    outcome.notes.insert(0, f"valence {val}")
    return outcome


def adaptive_smith(
    a: SparseIntMatrix,
    params: OifParams = OifParams(),
    seed: int = 0,
    rank: int | None = None,
    fill_budget: int = FILL_BUDGET,
) -> SmithOutcome:
    """The adaptive algorithm:

    1. r = rank(A);  2. local Smith forms at every prime below the cutoff;
    3. s_r by the one-invariant-factor certificate;  4. P = primes above the
    cutoff dividing s_r;  5. if P is empty the product of local forms is the
    answer, otherwise the members of P get local forms too.
    """
    if rank is None:
        rank = integer_rank(a, trials=2, seed=seed).rank
    if rank == 0:
        return SmithOutcome(SmithForm((), 0), "exact", 0, params=params,
                            failure_bound=oif_failure_bound(params))
    outcome = SmithOutcome(None, "exact", rank, params=params)
    smooth = [int(p) for p in _primes_below(params.cutoff)]
    failed_local: list[int] = []
    for p in smooth:
        if _rank_certifies_trivial(a, p, rank, seed=seed):
            continue
        try:
            lf = local_smith(a, p, expected_rank=rank, fill_budget=fill_budget)
        except LocalSmithError as e:
            failed_local.append(p)
            outcome.notes.append(f"local form at {p} failed: {e}")
            continue
        if not lf.is_trivial():
            outcome.local_forms[p] = lf
    try:
        s_r = one_invariant_factor(rank, a, params, seed=seed)
        outcome.s_r = s_r
    except (SingularMatrixError, SmithError) as e:
        outcome.kind = "smooth_only"
        outcome.notes.append(f"OIF unavailable: {e}")
        s_r = None
    rough: list[int] = []
    if s_r is not None:
        s_r_factors, cofactor = factor_word(s_r, seed=seed)
        if cofactor != 1:
            outcome.kind = "smooth_only"
            outcome.notes.append(
                f"s_r cofactor {cofactor} exceeded the factoring budget"
            )
        rough = sorted(p for p in s_r_factors if p > params.cutoff)
    for p in rough:
        try:
            lf = local_smith(a, p, expected_rank=rank, fill_budget=fill_budget)
        except LocalSmithError as e:
            failed_local.append(p)
            outcome.notes.append(f"local form at rough prime {p} failed: {e}")
            continue
        if not lf.is_trivial():
            outcome.local_forms[p] = lf
    if failed_local:
        outcome.kind = "divisor_only"
        outcome.notes.append(
            "divisor-only result: missing local data at "
            + ", ".join(map(str, failed_local))
        )
    outcome.failure_bound = oif_failure_bound(params)
    if outcome.kind != "divisor_only":
        full = dict(outcome.local_forms)
        for p in smooth + rough:
            if p not in failed_local:
                full.setdefault(p, LocalSmithForm(p, ((0, rank),), rank))
        outcome.form = combine_local_forms(full, rank)
    return outcome


def render_report(outcome: SmithOutcome) -> str:
    """Certification report: rank, per-prime profiles, s_r, OIF and bound."""
    lines = [f"rank\t{outcome.rank}", f"kind\t{outcome.kind}"]
    if outcome.form is not None:
        lines.append(f"smith\t{outcome.form}")
    for p in sorted(outcome.local_forms):
        lines.append(f"local\t{outcome.local_forms[p]}")
    if outcome.s_r is not None:
        lines.append(f"s_r\t{outcome.s_r}")
    if outcome.params is not None:
        pr = outcome.params
        lines.append(f"oif\tM={pr.M} N={pr.N} cutoff={pr.cutoff}")
    if outcome.failure_bound is not None:
        lines.append(f"failure_bound\t{outcome.failure_bound:.6g}")
    for note in outcome.notes:
        lines.append(f"note\t{note}")
    return "\n".join(lines) + "\n"
