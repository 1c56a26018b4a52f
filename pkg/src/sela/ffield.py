"""Word-size prime fields, FFT primes, number-theoretic transforms and CRT.

Primes are of the form p = c*2^k + 1 (c odd) so that the field carries
primitive 2^j-th roots of unity for every j <= k, enabling radix-2 NTTs.
Field elements are plain Python ints (or int64 numpy arrays) reduced to
[0, p); there is no wrapper class.

All numpy kernels assume p < 2^31 so that a product of two residues fits
in int64.  Larger moduli (up to the 62-bit cap) are legal but served by
slower pure-Python paths.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

WORD_BITS = 62          # moduli stay below 2^62 (double-word accumulators)
NUMPY_MOD_BITS = 31     # numpy int64 kernels require p < 2^31

# Deterministic Miller-Rabin witnesses for n < 3.3 * 10^24 (covers 64 bits).
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


class FieldError(ValueError):
    """Raised for unusable moduli, orders or transform lengths."""


def is_prime_word(n: int) -> bool:
    """Deterministic Miller-Rabin primality test for word-size integers."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _two_adicity(n: int) -> int:
    k = 0
    while n % 2 == 0:
        n //= 2
        k += 1
    return k


@dataclass(frozen=True)
class FftPrime:
    """A prime p = c*2^k + 1 with a cached primitive 2^k-th root of unity."""

    p: int
    c: int
    k: int
    w: int

    def __post_init__(self):
        if self.p != self.c * (1 << self.k) + 1 or self.c % 2 == 0:
            raise FieldError(f"{self.p} is not of the form odd*2^{self.k}+1")
        if not is_prime_word(self.p):
            raise FieldError(f"{self.p} is not prime")
        if pow(self.w, 1 << self.k, self.p) != 1 or (
            self.k >= 1 and pow(self.w, 1 << (self.k - 1), self.p) != self.p - 1
        ):
            raise FieldError(f"{self.w} has wrong order for {self.p}")

    def __repr__(self):
        return f"FftPrime({self.p}={self.c}*2^{self.k}+1)"


def _find_root(p: int, c: int, k: int, rng: random.Random | None = None) -> int:
    """Primitive 2^k-th root of unity mod p.

    Random generator search (fast on average), deterministic small-candidate
    scan as fallback.
    """
    if k == 0:
        return 1
    rng = rng or random.Random(0x5E1A)
    half = 1 << (k - 1)
    if p > 5:
        for _ in range(64):
            g = rng.randrange(2, p - 1)
            w = pow(g, c, p)
            if pow(w, half, p) == p - 1:
                return w
    for g in range(2, min(p, 1000)):
        w = pow(g, c, p)
        if pow(w, half, p) == p - 1:
            return w
    raise FieldError(f"no generator found for p={p}")


def make_fft_prime(min_bits: int, min_two_adicity: int) -> FftPrime:
    """Smallest prime >= 2^(min_bits-1) with two-adicity >= min_two_adicity.

    Fails explicitly if no such prime exists below the 62-bit word bound.
    """
    if min_bits > WORD_BITS:
        raise FieldError(f"min_bits {min_bits} exceeds the {WORD_BITS}-bit word bound")
    if min_two_adicity < 1:
        raise FieldError("two-adicity must be >= 1")
    step = 1 << min_two_adicity
    lo = 1 << (min_bits - 1)
    t = max(1, -(-(lo - 1) // step))  # ceil((lo-1)/step)
    while True:
        p = t * step + 1
        if p >= (1 << WORD_BITS):
            raise FieldError(
                f"no prime >= 2^{min_bits - 1} with two-adicity {min_two_adicity} "
                f"below 2^{WORD_BITS}"
            )
        if is_prime_word(p):
            k = _two_adicity(p - 1)
            c = (p - 1) >> k
            return FftPrime(p, c, k, _find_root(p, c, k))
        t += 1


def fft_prime_from_value(p: int) -> FftPrime:
    """Wrap an arbitrary word-size prime, computing its two-adic structure."""
    if p >= (1 << WORD_BITS):
        raise FieldError(f"{p} exceeds the {WORD_BITS}-bit word bound")
    if not is_prime_word(p):
        raise FieldError(f"{p} is not prime")
    k = _two_adicity(p - 1)
    c = (p - 1) >> k
    return FftPrime(p, c, k, _find_root(p, c, k))


def random_fft_prime(
    rng: random.Random,
    min_two_adicity: int = 16,
    max_bits: int = NUMPY_MOD_BITS - 5,
    exclude: tuple[int, ...] = (),
) -> FftPrime:
    """Random FFT prime below 2^max_bits, suitable for exact int64 kernels."""
    step = 1 << min_two_adicity
    t_max = ((1 << max_bits) - 1) // step
    if t_max < 1:
        raise FieldError("max_bits too small for requested two-adicity")
    while True:
        t = rng.randrange(1, t_max + 1)
        p = t * step + 1
        if p in exclude or not is_prime_word(p):
            continue
        k = _two_adicity(p - 1)
        c = (p - 1) >> k
        return FftPrime(p, c, k, _find_root(p, c, k, rng))


def root_of_unity(f: FftPrime, order: int) -> int:
    """Element of exact multiplicative order `order` (a power of two <= 2^k)."""
    if order < 1 or order & (order - 1):
        raise FieldError(f"order {order} is not a power of two")
    if order > (1 << f.k):
        raise FieldError(f"order {order} does not divide 2^{f.k}")
    return pow(f.w, (1 << f.k) // order, f.p)


# ---------------------------------------------------------------------------
# number-theoretic transform

_twiddle_cache: dict[tuple[int, int], np.ndarray] = {}


def _twiddles(f: FftPrime, length: int) -> np.ndarray:
    """Powers w_L^0 .. w_L^(L/2-1) of the length-L root, cached."""
    key = (f.p, length)
    tw = _twiddle_cache.get(key)
    if tw is None:
        r = root_of_unity(f, length)
        out = np.empty(max(length // 2, 1), dtype=np.int64)
        x = 1
        for i in range(out.shape[0]):
            out[i] = x
            x = x * r % f.p
        _twiddle_cache[key] = out
        tw = out
    return tw


def _bit_reverse_indices(length: int) -> np.ndarray:
    bits = length.bit_length() - 1
    idx = np.arange(length)
    rev = np.zeros(length, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def ntt(values, f: FftPrime, inverse: bool = False) -> np.ndarray:
    """Radix-2 NTT along the last axis; `inverse=True` undoes it.

    The forward transform evaluates the coefficient vector at the powers
    w_L^0, w_L^1, ... of the length-L root of unity.
    """
    a = np.asarray(values, dtype=np.int64)
    length = a.shape[-1]
    if length & (length - 1):
        raise FieldError(f"NTT length {length} is not a power of two")
    if length > (1 << f.k):
        raise FieldError(f"NTT length {length} exceeds 2^{f.k} for p={f.p}")
    if f.p >= (1 << NUMPY_MOD_BITS):
        return _ntt_bigmod(a, f, inverse)
    if length == 1:
        return a % f.p
    p = f.p
    a = a[..., _bit_reverse_indices(length)] % p
    table = _twiddles(f, length)
    if inverse:
        key = (p, -length)
        cached = _twiddle_cache.get(key)
        if cached is None:
            r_inv = pow(root_of_unity(f, length), p - 2, p)
            cached = np.empty(length // 2, dtype=np.int64)
            x = 1
            for i in range(length // 2):
                cached[i] = x
                x = x * r_inv % p
            _twiddle_cache[key] = cached
        table = cached
    size = 2
    while size <= length:
        half = size // 2
        tw = table[:: length // size][:half]
        b = a.reshape(a.shape[:-1] + (length // size, size))
        lo = b[..., :half]
        hi = b[..., half:]
        t = hi * tw % p
        s = lo + t
        d = lo - t
        b[..., :half] = np.where(s >= p, s - p, s)
        b[..., half:] = np.where(d < 0, d + p, d)
        size *= 2
    if inverse:
        n_inv = pow(length, p - 2, p)
        a = a * n_inv % p
    return a


def _ntt_bigmod(a: np.ndarray, f: FftPrime, inverse: bool) -> np.ndarray:
    """Object-dtype fallback for moduli past the int64-safe range."""
    p = f.p
    length = a.shape[-1]
    flat = a.reshape(-1, length)
    out = np.empty_like(flat)
    r = root_of_unity(f, length)
    if inverse:
        r = pow(r, p - 2, p)
    for row in range(flat.shape[0]):
        vals = [int(x) % p for x in flat[row]]
        out[row] = _ntt_python(vals, p, r)
    if inverse:
        n_inv = pow(length, p - 2, p)
        out = np.array(
            [[x * n_inv % p for x in row] for row in out], dtype=np.int64
        ).reshape(a.shape)
        return out
    return out.reshape(a.shape)


def _ntt_python(vals: list[int], p: int, root: int) -> list[int]:
    n = len(vals)
    if n == 1:
        return list(vals)
    even = _ntt_python(vals[0::2], p, root * root % p)
    odd = _ntt_python(vals[1::2], p, root * root % p)
    out = [0] * n
    w = 1
    for i in range(n // 2):
        t = w * odd[i] % p
        out[i] = (even[i] + t) % p
        out[i + n // 2] = (even[i] - t) % p
        w = w * root % p
    return out


# ---------------------------------------------------------------------------
# Chinese remaindering

@dataclass(frozen=True)
class CrtBasis:
    """Pairwise-coprime FFT primes and their product."""

    moduli: tuple[FftPrime, ...]
    product: int = field(default=0)

    def __post_init__(self):
        prod = 1
        seen = set()
        for m in self.moduli:
            if m.p in seen:
                raise FieldError(f"repeated modulus {m.p}")
            seen.add(m.p)
            prod *= m.p
        object.__setattr__(self, "product", prod)

    def coefficients(self) -> list[int]:
        """c_i = (M/m_i) * ((M/m_i)^-1 mod m_i); x = sum r_i c_i mod M."""
        out = []
        for m in self.moduli:
            big = self.product // m.p
            out.append(big * pow(big % m.p, -1, m.p))
        return out


def crt_basis_for(min_product: int, min_two_adicity: int = 16, seed: int = 1) -> CrtBasis:
    """Enough random FFT primes for a product strictly above `min_product`."""
    rng = random.Random(seed)
    primes: list[FftPrime] = []
    prod = 1
    while prod <= min_product:
        f = random_fft_prime(rng, min_two_adicity, exclude=tuple(q.p for q in primes))
        primes.append(f)
        prod *= f.p
    return CrtBasis(tuple(primes))


def crt_combine(residues, basis: CrtBasis) -> int:
    """Unique representative in (-M/2, M/2] congruent to every residue."""
    if len(residues) != len(basis.moduli):
        raise FieldError(
            f"{len(residues)} residues for {len(basis.moduli)} moduli"
        )
    for r, m in zip(residues, basis.moduli):
        if not 0 <= r < m.p:
            raise FieldError(f"residue {r} out of range for modulus {m.p}")
    M = basis.product
    x = 0
    for r, c in zip(residues, basis.coefficients()):
        x = (x + int(r) * c) % M
    if x > M // 2:
        x -= M
    return x


def crt_combine_array(residue_stack: np.ndarray, basis: CrtBasis) -> np.ndarray:
    """Symmetric-range CRT applied elementwise to a stack of residue arrays.

    residue_stack[i] holds the values mod basis.moduli[i]; returns an object
    array of Python ints in (-M/2, M/2].
    """
    if residue_stack.shape[0] != len(basis.moduli):
        raise FieldError("residue stack does not match basis size")
    M = basis.product
    acc = np.zeros(residue_stack.shape[1:], dtype=object)
    for layer, c in zip(residue_stack, basis.coefficients()):
        acc = (acc + layer.astype(object) * c) % M
    return np.where(acc > M // 2, acc - M, acc)


# the paper's working prime: 65537 = 2^16 + 1
DEFAULT_PRIME = make_fft_prime(17, 16)
