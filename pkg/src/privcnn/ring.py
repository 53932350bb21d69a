"""Exact arithmetic in the negacyclic rings Z_m[x]/(x^n + 1).

Coefficients are stored as uint64 residues in [0, m).  Multiplication with a
large modulus (up to 2^62) is performed exactly by computing the integer
negacyclic product with NTTs over a pool of 31-bit primes and recombining by
the Chinese Remainder Theorem; the prime count adapts to the operand
magnitudes, so multiplications by small operands (ternary keys, decomposition
digits, plaintext masks) stay cheap.

The module also provides the forward/inverse NTT over the ring's own modulus
(for NTT-friendly moduli), CRT slot batching with generator ordering so that
the Galois maps x -> x^(3^k) act as row rotations, base-w digit decomposition,
and seeded samplers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

COEFF = "coeff"
EVAL = "eval"

# Row swap / rotation generator for the two-row slot structure.
SLOT_GENERATOR = 3

_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all 64-bit integers."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
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


def _find_root_of_unity(order: int, modulus: int) -> int:
    """A primitive `order`-th root of unity mod a prime (order | modulus-1)."""
    if (modulus - 1) % order != 0:
        raise ParameterError(
            f"modulus {modulus} has no primitive {order}-th root of unity"
        )
    cof = (modulus - 1) // order
    for cand in range(2, modulus):
        root = pow(cand, cof, modulus)
        if pow(root, order // 2, modulus) == modulus - 1:
            return root
    raise ParameterError(f"no root of unity found for modulus {modulus}")


@dataclass(frozen=True)
class RingParams:
    """Parameter tuple (n, q, t, sigma) governing every ring and noise computation."""

    n: int
    q: int
    t: int
    sigma: float

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ParameterError(f"ring degree n={self.n} must be a power of two >= 2")
        if self.q >= 1 << 62:
            raise ParameterError("ciphertext modulus must stay below 2^62")
        for name, m in (("q", self.q), ("t", self.t)):
            if not is_prime(m):
                raise ParameterError(f"{name}={m} must be prime")
            if m % (2 * self.n) != 1:
                raise ParameterError(f"{name}={m} must satisfy {name} = 1 mod 2n")
        if self.q <= self.t:
            raise ParameterError("q must exceed t")
        if self.sigma <= 0:
            raise ParameterError("sigma must be positive")

    @property
    def slots(self) -> int:
        """Slots per row under two-row batching."""
        return self.n // 2


@dataclass
class Polynomial:
    """Element of Z_modulus[x]/(x^n + 1) with a tracked coefficient/evaluation domain."""

    coeffs: np.ndarray
    modulus: int
    domain: str = COEFF

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.uint64)

    @property
    def n(self) -> int:
        return len(self.coeffs)

    def copy(self) -> "Polynomial":
        return Polynomial(self.coeffs.copy(), self.modulus, self.domain)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.modulus == other.modulus
            and self.domain == other.domain
            and np.array_equal(self.coeffs, other.coeffs)
        )


def _check_pair(a: Polynomial, b: Polynomial):
    if a.modulus != b.modulus:
        raise ParameterError(f"modulus mismatch: {a.modulus} vs {b.modulus}")
    if a.n != b.n:
        raise ParameterError(f"degree mismatch: {a.n} vs {b.n}")
    if a.domain != b.domain:
        raise ParameterError(f"domain mismatch: {a.domain} vs {b.domain}")


def poly_zero(n: int, modulus: int, domain: str = COEFF) -> Polynomial:
    return Polynomial(np.zeros(n, dtype=np.uint64), modulus, domain)


def poly_const(value: int, n: int, modulus: int) -> Polynomial:
    c = np.zeros(n, dtype=np.uint64)
    c[0] = value % modulus
    return Polynomial(c, modulus)


def poly_add(a: Polynomial, b: Polynomial) -> Polynomial:
    _check_pair(a, b)
    m = np.uint64(a.modulus)
    return Polynomial((a.coeffs + b.coeffs) % m, a.modulus, a.domain)


def poly_sub(a: Polynomial, b: Polynomial) -> Polynomial:
    _check_pair(a, b)
    m = np.uint64(a.modulus)
    return Polynomial((a.coeffs + (m - b.coeffs)) % m, a.modulus, a.domain)


def poly_neg(a: Polynomial) -> Polynomial:
    m = np.uint64(a.modulus)
    return Polynomial((m - a.coeffs) % m, a.modulus, a.domain)


def poly_scalar_mul(a: Polynomial, scalar: int) -> Polynomial:
    s = scalar % a.modulus
    if a.modulus < (1 << 31):
        return Polynomial(a.coeffs * np.uint64(s) % np.uint64(a.modulus), a.modulus, a.domain)
    out = (a.coeffs.astype(object) * s) % a.modulus
    return Polynomial(out.astype(np.uint64), a.modulus, a.domain)


def center_lift(a: Polynomial) -> np.ndarray:
    """Centered representatives in (-m/2, m/2] as an object array of Python ints."""
    m = a.modulus
    vals = a.coeffs.astype(object)
    return np.where(vals > m // 2, vals - m, vals)


def max_abs(a: Polynomial) -> int:
    """Infinity norm of the centered representative."""
    lifted = center_lift(a)
    if len(lifted) == 0:
        return 0
    return int(max(max(lifted), -min(lifted)))


# ---------------------------------------------------------------------------
# Negacyclic NTT
# ---------------------------------------------------------------------------


def _bitrev_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


class NttPlan:
    """Precomputed twiddles for the negacyclic NTT over one modulus.

    Forward is Cooley-Tukey (natural order in, bit-reversed out) with the
    2n-th root powers folded into the twiddles; inverse is Gentleman-Sande.
    Moduli below 2^31 run on uint64 arrays (butterfly products stay under
    2^62); larger moduli fall back to exact object-dtype arithmetic.
    """

    def __init__(self, n: int, modulus: int):
        self.n = n
        self.modulus = modulus
        self.fast = modulus < (1 << 31)
        psi = _find_root_of_unity(2 * n, modulus)
        rev = _bitrev_indices(n)
        powers = [pow(psi, i, modulus) for i in range(n)]
        ipowers = [pow(psi, (-i) % (2 * n), modulus) for i in range(n)]
        dtype = np.uint64 if self.fast else object
        self.psi_br = np.array(powers, dtype=dtype)[rev].copy()
        self.ipsi_br = np.array(ipowers, dtype=dtype)[rev].copy()
        self.n_inv = pow(n, -1, modulus)

    def forward(self, coeffs: np.ndarray) -> np.ndarray:
        p = np.uint64(self.modulus) if self.fast else self.modulus
        a = coeffs.copy() if self.fast else coeffs.astype(object)
        n = self.n
        t, m = n, 1
        while m < n:
            t >>= 1
            s = self.psi_br[m : 2 * m]
            blocks = a.reshape(m, 2 * t)
            u = blocks[:, :t].copy()
            v = (blocks[:, t:] * s[:, None]) % p
            blocks[:, :t] = (u + v) % p
            blocks[:, t:] = (u + (p - v)) % p
            m <<= 1
        return a if self.fast else a.astype(np.uint64)

    def inverse(self, values: np.ndarray) -> np.ndarray:
        p = np.uint64(self.modulus) if self.fast else self.modulus
        a = values.copy() if self.fast else values.astype(object)
        n = self.n
        t, m = 1, n
        while m > 1:
            h = m >> 1
            s = self.ipsi_br[h:m]
            blocks = a.reshape(h, 2 * t)
            u = blocks[:, :t].copy()
            v = blocks[:, t:].copy()
            blocks[:, :t] = (u + v) % p
            blocks[:, t:] = ((u + (p - v)) % p) * s[:, None] % p
            t <<= 1
            m = h
        ninv = np.uint64(self.n_inv) if self.fast else self.n_inv
        a = a * ninv % p
        return a if self.fast else a.astype(np.uint64)


_PLAN_CACHE: dict[tuple[int, int], NttPlan] = {}


def get_plan(n: int, modulus: int) -> NttPlan:
    key = (n, modulus)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        plan = NttPlan(n, modulus)
        _PLAN_CACHE[key] = plan
    return plan


def ntt_forward(p: Polynomial) -> Polynomial:
    """Map to the evaluation domain; requires modulus = 1 mod 2n."""
    if p.domain != COEFF:
        raise ParameterError("ntt_forward expects a coefficient-domain polynomial")
    plan = get_plan(p.n, p.modulus)
    return Polynomial(plan.forward(p.coeffs), p.modulus, EVAL)


def ntt_inverse(p: Polynomial) -> Polynomial:
    """Inverse of ntt_forward."""
    if p.domain != EVAL:
        raise ParameterError("ntt_inverse expects an evaluation-domain polynomial")
    plan = get_plan(p.n, p.modulus)
    return Polynomial(plan.inverse(p.coeffs), p.modulus, COEFF)


# ---------------------------------------------------------------------------
# Exact multiplication over a large modulus via small-prime CRT
# ---------------------------------------------------------------------------

# Primes p = 1 mod 2^14 support negacyclic NTTs for every n <= 8192.
_CRT_STRIDE = 1 << 14


def _gen_crt_primes(count: int) -> list[int]:
    primes = []
    p = (1 << 31) - 1
    p -= (p - 1) % _CRT_STRIDE
    while len(primes) < count:
        if is_prime(p):
            primes.append(p)
        p -= _CRT_STRIDE
    return primes


_CRT_PRIMES = _gen_crt_primes(8)


@dataclass
class _CrtBasis:
    primes: list[int]
    modulus: int  # product
    half: int
    weights: list[int]  # (M/p_i) per prime
    inv: list[int]  # (M/p_i)^-1 mod p_i


_BASIS_CACHE: dict[int, _CrtBasis] = {}


def _basis(k: int) -> _CrtBasis:
    b = _BASIS_CACHE.get(k)
    if b is None:
        primes = _CRT_PRIMES[:k]
        big = math.prod(primes)
        weights = [big // p for p in primes]
        inv = [pow(w, -1, p) for w, p in zip(weights, primes)]
        b = _CrtBasis(primes, big, big // 2, weights, inv)
        _BASIS_CACHE[k] = b
    return b


def _primes_for_bound(bound: int) -> int:
    """Smallest k with prod(primes[:k]) > 2*bound."""
    acc = 1
    for k, p in enumerate(_CRT_PRIMES, start=1):
        acc *= p
        if acc > 2 * bound:
            return k
    raise ParameterError("operand magnitude exceeds the CRT prime pool")


class PreparedOperand:
    """One multiplication operand with per-prime NTT forms cached lazily.

    `signed_residues` carries centered values when the operand is known small
    (ternary keys, signed masks); the declared magnitude bound lets products
    use fewer CRT primes.
    """

    def __init__(self, poly: Polynomial, bound: int | None = None, center: bool = False):
        if poly.domain != COEFF:
            raise ParameterError("prepare only coefficient-domain polynomials")
        self.n = poly.n
        self.modulus = poly.modulus
        if center:
            lifted = center_lift(poly)
            self.bound = bound if bound is not None else max_abs(poly)
            self._residues = lifted
        else:
            self.bound = bound if bound is not None else poly.modulus - 1
            self._residues = poly.coeffs.astype(object)
        self._ntt: dict[int, np.ndarray] = {}

    def ntt_mod(self, prime: int) -> np.ndarray:
        arr = self._ntt.get(prime)
        if arr is None:
            res = np.asarray(self._residues % prime, dtype=np.uint64)
            arr = get_plan(self.n, prime).forward(res)
            self._ntt[prime] = arr
        return arr


def prepare_operand(poly: Polynomial, bound: int | None = None, center: bool = False) -> PreparedOperand:
    return PreparedOperand(poly, bound, center)


def _combine(per_prime: list[np.ndarray], basis: _CrtBasis, modulus: int) -> Polynomial:
    acc = np.zeros(len(per_prime[0]), dtype=object)
    for res, p, w, inv in zip(per_prime, basis.primes, basis.weights, basis.inv):
        part = res * np.uint64(inv) % np.uint64(p)
        acc += part.astype(object) * w
    acc %= basis.modulus
    acc = np.where(acc > basis.half, acc - basis.modulus, acc)
    out = (acc % modulus).astype(np.uint64)
    return Polynomial(out, modulus)


def poly_mul_prepared(a: Polynomial, prep: PreparedOperand, a_bound: int | None = None) -> Polynomial:
    """Negacyclic product of `a` with a prepared operand, reduced mod a.modulus."""
    if a.domain != COEFF:
        raise ParameterError("poly_mul operates on coefficient-domain polynomials")
    if a.n != prep.n or a.modulus != prep.modulus:
        raise ParameterError("operand parameters do not match")
    if a_bound is None:
        a_bound = a.modulus - 1
    k = _primes_for_bound(a.n * a_bound * max(prep.bound, 1))
    basis = _basis(k)
    per_prime = []
    for p in basis.primes:
        plan = get_plan(a.n, p)
        fa = plan.forward(a.coeffs % np.uint64(p))
        per_prime.append(plan.inverse(fa * prep.ntt_mod(p) % np.uint64(p)))
    return _combine(per_prime, basis, a.modulus)


def poly_mul(a: Polynomial, b: Polynomial, a_bound: int | None = None, b_bound: int | None = None) -> Polynomial:
    """Negacyclic product in Z_m[x]/(x^n+1), exact for any modulus below 2^62."""
    _check_pair(a, b)
    if a.domain != COEFF:
        raise ParameterError("poly_mul operates on coefficient-domain polynomials")
    return poly_mul_prepared(a, PreparedOperand(b, bound=b_bound), a_bound=a_bound)


def poly_dot_prepared(
    terms: list[tuple[Polynomial, int, PreparedOperand]], n: int, modulus: int
) -> Polynomial:
    """Exact sum of negacyclic products Sum_i a_i * prep_i with one CRT recombination.

    Each term is (a_i, bound_i, prep_i).  Used by key switching, where the
    digit polynomials multiply the cached key parts.
    """
    if not terms:
        return poly_zero(n, modulus)
    total_bound = sum(n * bound * max(prep.bound, 1) for _, bound, prep in terms)
    k = _primes_for_bound(total_bound)
    basis = _basis(k)
    per_prime = []
    for p in basis.primes:
        plan = get_plan(n, p)
        acc = np.zeros(n, dtype=np.uint64)
        for a, _, prep in terms:
            fa = plan.forward(a.coeffs % np.uint64(p))
            acc = (acc + fa * prep.ntt_mod(p) % np.uint64(p)) % np.uint64(p)
        per_prime.append(plan.inverse(acc))
    return _combine(per_prime, basis, modulus)


def negacyclic_schoolbook(a: Polynomial, b: Polynomial) -> Polynomial:
    """Reference product via full integer convolution with x^n = -1 folding.

    Exact at any modulus (object-dtype big integers); independent of the NTT
    path, so it serves as the multiplication oracle in tests.
    """
    _check_pair(a, b)
    n, m = a.n, a.modulus
    full = np.convolve(a.coeffs.astype(object), b.coeffs.astype(object))
    res = np.zeros(n, dtype=object)
    res[: len(full[:n])] = full[:n]
    res[: n - 1] -= full[n:]
    return Polynomial((res % m).astype(np.uint64), m)


# ---------------------------------------------------------------------------
# Galois automorphisms
# ---------------------------------------------------------------------------

_AUTO_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def _automorphism_tables(n: int, galois_elt: int) -> tuple[np.ndarray, np.ndarray]:
    key = (n, galois_elt)
    cached = _AUTO_CACHE.get(key)
    if cached is None:
        exps = (np.arange(n, dtype=np.int64) * galois_elt) % (2 * n)
        target = np.where(exps < n, exps, exps - n)
        negate = exps >= n
        cached = (target.astype(np.int64), negate)
        _AUTO_CACHE[key] = cached
    return cached


def apply_automorphism(p: Polynomial, galois_elt: int) -> Polynomial:
    """x -> x^g on a coefficient-domain polynomial; g must be odd."""
    if galois_elt % 2 == 0:
        raise ParameterError("galois element must be odd")
    if p.domain != COEFF:
        raise ParameterError("automorphism expects coefficient domain")
    target, negate = _automorphism_tables(p.n, galois_elt % (2 * p.n))
    m = np.uint64(p.modulus)
    out = np.zeros(p.n, dtype=np.uint64)
    vals = np.where(negate, (m - p.coeffs) % m, p.coeffs)
    out[target] = vals
    return Polynomial(out, p.modulus)


def rotation_galois_elt(steps: int, n: int) -> int:
    """Galois element rotating both slot rows left by `steps`."""
    steps %= n // 2
    return pow(SLOT_GENERATOR, steps, 2 * n)


def row_swap_galois_elt(n: int) -> int:
    return 2 * n - 1


# ---------------------------------------------------------------------------
# Slot batching (CRT encode/decode)
# ---------------------------------------------------------------------------


class BatchCodec:
    """Bijection Z_t^n <-> R_t with slots in generator order.

    Slots form two rows of n/2; the map is arranged so the automorphism
    x -> x^(3^k) rotates both rows left by k and x -> x^(2n-1) swaps rows.
    """

    def __init__(self, params: RingParams):
        self.params = params
        n = params.n
        logn = n.bit_length() - 1
        rev = _bitrev_indices(n)
        index_map = np.zeros(n, dtype=np.int64)
        pos = 1
        m = 2 * n
        for i in range(n // 2):
            index_map[i] = rev[(pos - 1) >> 1]
            index_map[i + n // 2] = rev[(m - pos - 1) >> 1]
            pos = pos * SLOT_GENERATOR % m
        self.index_map = index_map
        self.plan = get_plan(n, params.t)

    def encode(self, slots: np.ndarray) -> Polynomial:
        slots = np.asarray(slots, dtype=np.uint64)
        if len(slots) != self.params.n:
            raise ParameterError(f"expected {self.params.n} slot values")
        if np.any(slots >= self.params.t):
            raise ParameterError("slot values must lie in [0, t)")
        buf = np.zeros(self.params.n, dtype=np.uint64)
        buf[self.index_map] = slots
        return Polynomial(self.plan.inverse(buf), self.params.t)

    def decode(self, p: Polynomial) -> np.ndarray:
        if p.modulus != self.params.t or p.n != self.params.n:
            raise ParameterError("polynomial does not match codec parameters")
        if p.domain != COEFF:
            raise ParameterError("decode expects coefficient domain")
        return self.plan.forward(p.coeffs)[self.index_map]


_CODEC_CACHE: dict[RingParams, BatchCodec] = {}


def get_codec(params: RingParams) -> BatchCodec:
    codec = _CODEC_CACHE.get(params)
    if codec is None:
        codec = BatchCodec(params)
        _CODEC_CACHE[params] = codec
    return codec


# ---------------------------------------------------------------------------
# Base-w decomposition
# ---------------------------------------------------------------------------


def decomp_digit_count(w: int, modulus: int) -> int:
    """Digits needed for residues in [0, modulus); exactly floor(log_w(modulus-1)) + 1."""
    if w < 2:
        raise ParameterError("decomposition base must be >= 2")
    count, acc = 1, w
    while acc <= modulus - 1:
        acc *= w
        count += 1
    return count


def base_decompose(p: Polynomial, w: int) -> list[Polynomial]:
    """Digits p^(i) with entries in [0, w) and Sum_i w^i p^(i) = p over Z."""
    levels = decomp_digit_count(w, p.modulus)
    digits = []
    if w & (w - 1) == 0:
        shift = np.uint64(w.bit_length() - 1)
        mask = np.uint64(w - 1)
        cur = p.coeffs.copy()
        for _ in range(levels):
            digits.append(Polynomial(cur & mask, p.modulus))
            cur = cur >> shift
    else:
        cur = p.coeffs.astype(object)
        for _ in range(levels):
            digits.append(Polynomial((cur % w).astype(np.uint64), p.modulus))
            cur = cur // w
    return digits


# ---------------------------------------------------------------------------
# Samplers (all deterministic under an explicit numpy Generator)
# ---------------------------------------------------------------------------


def sample_uniform(n: int, modulus: int, rng: np.random.Generator) -> Polynomial:
    return Polynomial(rng.integers(0, modulus, n, dtype=np.uint64), modulus)


@dataclass
class _GaussianTable:
    values: np.ndarray
    cdf: np.ndarray


_GAUSS_CACHE: dict[float, _GaussianTable] = {}


def _gaussian_table(sigma: float) -> _GaussianTable:
    tab = _GAUSS_CACHE.get(sigma)
    if tab is None:
        tail = int(math.ceil(6 * sigma))
        xs = np.arange(-tail, tail + 1)
        pdf = np.exp(-(xs.astype(float) ** 2) / (2 * sigma * sigma))
        cdf = np.cumsum(pdf / pdf.sum())
        tab = _GaussianTable(xs, cdf)
        _GAUSS_CACHE[sigma] = tab
    return tab


def sample_gaussian(n: int, modulus: int, sigma: float, rng: np.random.Generator) -> Polynomial:
    """Centered discrete Gaussian truncated at 6*sigma, via inverse-CDF table."""
    tab = _gaussian_table(sigma)
    idx = np.searchsorted(tab.cdf, rng.random(n))
    vals = tab.values[idx].astype(np.int64)
    return Polynomial(np.where(vals < 0, modulus + vals, vals).astype(np.uint64), modulus)


def sample_ternary(n: int, modulus: int, rng: np.random.Generator) -> Polynomial:
    vals = rng.integers(-1, 2, n, dtype=np.int64)
    return Polynomial(np.where(vals < 0, modulus + vals, vals).astype(np.uint64), modulus)


# ---------------------------------------------------------------------------
# Serialization: 8-byte little-endian count, then 8-byte little-endian words
# ---------------------------------------------------------------------------


def poly_to_bytes(p: Polynomial) -> bytes:
    return len(p.coeffs).to_bytes(8, "little") + p.coeffs.astype("<u8").tobytes()


def poly_from_bytes(data: bytes, modulus: int, domain: str = COEFF) -> tuple[Polynomial, int]:
    """Parse one framed polynomial; returns (polynomial, bytes consumed)."""
    if len(data) < 8:
        raise ParameterError("truncated polynomial frame")
    n = int.from_bytes(data[:8], "little")
    end = 8 + 8 * n
    if len(data) < end:
        raise ParameterError("truncated polynomial payload")
    coeffs = np.frombuffer(data[8:end], dtype="<u8").astype(np.uint64)
    if np.any(coeffs >= modulus):
        raise ParameterError("coefficient out of range for declared modulus")
    return Polynomial(coeffs, modulus, domain), end
