"""The BFV scheme subset the protocol needs.

Symmetric (secret-key) encryption only: the shared material consists of the
rotation evaluation keys and the re-encryption key, never an encryption
public key.  Ciphertexts live in coefficient domain; the plaintext m in R_t
is embedded as round(q*m/t) per coefficient, so decryption succeeds exactly
when the measured noise satisfies ||v||_inf < q/2t.

Key switching follows the decompose-multiply-accumulate form: the re-encryption
key parts are pk^(i) = ([-(a_i s_dst + e_i) + w^i s_src]_q, a_i), and switching
a ciphertext decomposes c1 into base-w digits, then
c0' = c0 + Sum_i pk0^(i) d_i,  c1' = Sum_i pk1^(i) d_i.
Rotations apply the Galois map first and switch s(x^g) back to s with the
same machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrityError, MissingKeyError, ParameterError
from .params import KEY_MODE_ALL, KEY_MODE_LOG
from .ring import (
    COEFF,
    Polynomial,
    PreparedOperand,
    RingParams,
    apply_automorphism,
    base_decompose,
    center_lift,
    decomp_digit_count,
    get_codec,
    poly_add,
    poly_dot_prepared,
    poly_from_bytes,
    poly_mul_prepared,
    poly_neg,
    poly_sub,
    poly_to_bytes,
    poly_zero,
    prepare_operand,
    rotation_galois_elt,
    row_swap_galois_elt,
    sample_gaussian,
    sample_ternary,
    sample_uniform,
)

OWNER_CLIENT = "client"
OWNER_PROXY = "proxy"

_OWNER_CODES = {OWNER_CLIENT: 0, OWNER_PROXY: 1}
_OWNER_NAMES = {v: k for k, v in _OWNER_CODES.items()}


@dataclass
class SecretKey:
    s: Polynomial  # ternary, represented mod q
    owner: str
    params: RingParams
    _prepared: PreparedOperand | None = None

    @property
    def prepared(self) -> PreparedOperand:
        if self._prepared is None:
            self._prepared = prepare_operand(self.s, bound=1, center=True)
        return self._prepared


@dataclass
class Ciphertext:
    c0: Polynomial
    c1: Polynomial
    owner: str
    fresh: bool = True

    @property
    def n(self) -> int:
        return self.c0.n


@dataclass
class KeyPart:
    pk0: Polynomial
    pk1: Polynomial
    _prep0: PreparedOperand | None = None
    _prep1: PreparedOperand | None = None

    def prepared(self) -> tuple[PreparedOperand, PreparedOperand]:
        if self._prep0 is None:
            self._prep0 = prepare_operand(self.pk0)
            self._prep1 = prepare_operand(self.pk1)
        return self._prep0, self._prep1


@dataclass
class EvaluationKey:
    """Key-switching material for one Galois element."""

    galois_elt: int
    w: int
    levels: int
    parts: list[KeyPart]


@dataclass
class ReEncryptionKey:
    """Key-switching material from the client key to the proxy key (Eq. form above)."""

    w: int
    levels: int
    parts: list[KeyPart]


@dataclass
class KeySet:
    """Rotation keys held by the cloud, in all-keys or log-keys provisioning."""

    mode: str
    w: int
    keys: dict[int, EvaluationKey]
    params: RingParams

    def get(self, galois_elt: int) -> EvaluationKey:
        key = self.keys.get(galois_elt)
        if key is None:
            raise MissingKeyError(galois_elt)
        return key


def keygen(params: RingParams, owner: str, rng: np.random.Generator) -> SecretKey:
    if owner not in _OWNER_CODES:
        raise ParameterError(f"unknown key owner {owner!r}")
    return SecretKey(sample_ternary(params.n, params.q, rng), owner, params)


def _switch_key_parts(
    params: RingParams,
    target: Polynomial,
    sk: SecretKey,
    w: int,
    rng: np.random.Generator,
) -> list[KeyPart]:
    """Parts encrypting w^i * target under sk: ([-(a_i s + e_i) + w^i target]_q, a_i)."""
    levels = decomp_digit_count(w, params.q)
    parts = []
    scale = 1
    for _ in range(levels):
        a = sample_uniform(params.n, params.q, rng)
        e = sample_gaussian(params.n, params.q, params.sigma, rng)
        body = poly_mul_by_secret(a, sk)
        term = Polynomial((target.coeffs.astype(object) * scale % params.q).astype(np.uint64), params.q)
        pk0 = poly_add(poly_neg(poly_add(body, e)), term)
        parts.append(KeyPart(pk0, a))
        scale *= w
    return parts


def poly_mul_by_secret(a: Polynomial, sk: SecretKey) -> Polynomial:
    return poly_mul_prepared(a, sk.prepared)


def galois_keygen(sk: SecretKey, galois_elt: int, w: int, rng: np.random.Generator) -> EvaluationKey:
    rotated = apply_automorphism(sk.s, galois_elt)
    parts = _switch_key_parts(sk.params, rotated, sk, w, rng)
    return EvaluationKey(galois_elt, w, len(parts), parts)


def reenc_keygen(
    sk_client: SecretKey, sk_proxy: SecretKey, w: int, rng: np.random.Generator
) -> ReEncryptionKey:
    """Client-side generation: requires both keys, as only the client holds them."""
    if sk_client.params != sk_proxy.params:
        raise ParameterError("client and proxy keys use different parameters")
    if sk_client.owner != OWNER_CLIENT or sk_proxy.owner != OWNER_PROXY:
        raise ParameterError("re-encryption key runs from the client key to the proxy key")
    parts = _switch_key_parts(sk_client.params, sk_client.s, sk_proxy, w, rng)
    return ReEncryptionKey(w, len(parts), parts)


def generate_keyset(
    sk: SecretKey,
    mode: str,
    w: int,
    rng: np.random.Generator,
    steps: list[int] | None = None,
) -> KeySet:
    """Rotation keys for a provisioning mode.

    log-keys: one key per power-of-two rotation plus the row swap
    (log2(n/2) + 1 keys).  all-keys: every row rotation 1..n/2-1 plus the
    row swap; `steps` may restrict generation when the caller knows the
    workload (tests), which does not change rotate()'s single-automorphism
    behavior.
    """
    n = sk.params.n
    keys: dict[int, EvaluationKey] = {}
    if mode == KEY_MODE_LOG:
        wanted = [1 << j for j in range((n // 2).bit_length() - 1)]
    elif mode == KEY_MODE_ALL:
        wanted = steps if steps is not None else list(range(1, n // 2))
    else:
        raise ParameterError(f"unknown key mode {mode!r}")
    for step in wanted:
        elt = rotation_galois_elt(step, n)
        if elt not in keys:
            keys[elt] = galois_keygen(sk, elt, w, rng)
    swap = row_swap_galois_elt(n)
    keys[swap] = galois_keygen(sk, swap, w, rng)
    return KeySet(mode, w, keys, sk.params)


# ---------------------------------------------------------------------------
# Encrypt / decrypt
# ---------------------------------------------------------------------------


def scale_to_q(pt: Polynomial, params: RingParams) -> Polynomial:
    """Embed R_t -> R_q as round(q*m/t) per coefficient."""
    if pt.modulus != params.t:
        raise ParameterError("plaintext modulus mismatch")
    m = pt.coeffs.astype(object)
    scaled = (2 * params.q * m + params.t) // (2 * params.t)
    return Polynomial(scaled.astype(np.uint64), params.q)


def encrypt(sk: SecretKey, pt: Polynomial, rng: np.random.Generator) -> Ciphertext:
    params = sk.params
    a = sample_uniform(params.n, params.q, rng)
    e = sample_gaussian(params.n, params.q, params.sigma, rng)
    c0 = poly_add(poly_sub(scale_to_q(pt, params), poly_mul_by_secret(a, sk)), e)
    return Ciphertext(c0, a, sk.owner, fresh=True)


def decrypt(sk: SecretKey, ct: Ciphertext) -> Polynomial:
    params = sk.params
    x = poly_add(ct.c0, poly_mul_by_secret(ct.c1, sk))
    centered = center_lift(x)
    t, q = params.t, params.q
    m = ((2 * t * centered + q) // (2 * q)) % t
    return Polynomial(m.astype(np.uint64), t)


def encrypt_slots(sk: SecretKey, slots: np.ndarray, rng: np.random.Generator) -> Ciphertext:
    return encrypt(sk, get_codec(sk.params).encode(slots), rng)


def decrypt_slots(sk: SecretKey, ct: Ciphertext) -> np.ndarray:
    return get_codec(sk.params).decode(decrypt(sk, ct))


def noise_of(ct: Ciphertext, sk: SecretKey, true_pt: Polynomial) -> int:
    """Infinity norm of v = [c0 + c1*s - round(q*m/t)]_q (test facility)."""
    x = poly_add(ct.c0, poly_mul_by_secret(ct.c1, sk))
    v = poly_sub(x, scale_to_q(true_pt, sk.params))
    lifted = center_lift(v)
    return int(max(max(lifted), -min(lifted))) if len(lifted) else 0


def noise_budget(ct: Ciphertext, sk: SecretKey, true_pt: Polynomial) -> float:
    """log2(q/2t) - log2(||v||_inf); positive iff decryption is correct."""
    params = sk.params
    cap = math.log2(params.q / (2 * params.t))
    norm = noise_of(ct, sk, true_pt)
    if norm == 0:
        return cap
    return cap - math.log2(norm)


# ---------------------------------------------------------------------------
# Homomorphic operations
# ---------------------------------------------------------------------------


def _check_owner(a: Ciphertext, b: Ciphertext):
    if a.owner != b.owner:
        raise ParameterError(f"key-tag mismatch: {a.owner} vs {b.owner}")


def he_add(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    _check_owner(a, b)
    return Ciphertext(poly_add(a.c0, b.c0), poly_add(a.c1, b.c1), a.owner, fresh=False)


def he_add_plain(ct: Ciphertext, pt: Polynomial, params: RingParams) -> Ciphertext:
    return Ciphertext(poly_add(ct.c0, scale_to_q(pt, params)), ct.c1, ct.owner, fresh=False)


def he_sub_plain(ct: Ciphertext, pt: Polynomial, params: RingParams) -> Ciphertext:
    return Ciphertext(poly_sub(ct.c0, scale_to_q(pt, params)), ct.c1, ct.owner, fresh=False)


@dataclass
class PreparedPlain:
    """A weight plaintext cached for repeated ciphertext multiplication."""

    poly: Polynomial
    prep: PreparedOperand


def prepare_plain(pt: Polynomial) -> PreparedPlain:
    if pt.domain != COEFF:
        raise ParameterError("prepare coefficient-domain plaintexts")
    return PreparedPlain(pt, prepare_operand(pt, bound=pt.modulus - 1))


def he_mul_plain(ct: Ciphertext, pt: Polynomial | PreparedPlain, params: RingParams) -> Ciphertext:
    """(m_w c0, m_w c1): slot-wise product after decode."""
    if isinstance(pt, PreparedPlain):
        prepared = pt
    else:
        prepared = prepare_plain(pt)
    if prepared.poly.modulus != params.t:
        raise ParameterError("weight plaintext must live in R_t")
    lift = Polynomial(prepared.poly.coeffs, params.q)
    prep = PreparedOperand(lift, bound=params.t - 1)
    # the small-prime transforms of the t-domain form are reusable verbatim:
    # coefficients are < t, below every CRT prime
    prep._ntt = prepared.prep._ntt
    c0 = poly_mul_prepared(ct.c0, prep)
    c1 = poly_mul_prepared(ct.c1, prep)
    return Ciphertext(c0, c1, ct.owner, fresh=False)


def _key_switch(c1: Polynomial, parts: list[KeyPart], w: int, params: RingParams) -> tuple[Polynomial, Polynomial]:
    digits = base_decompose(c1, w)
    bound = w - 1 if w > 1 else 1
    terms0 = []
    terms1 = []
    for digit, part in zip(digits, parts):
        prep0, prep1 = part.prepared()
        terms0.append((digit, bound, prep0))
        terms1.append((digit, bound, prep1))
    adj0 = poly_dot_prepared(terms0, params.n, params.q)
    adj1 = poly_dot_prepared(terms1, params.n, params.q)
    return adj0, adj1


def reencrypt(ct: Ciphertext, rk: ReEncryptionKey, params: RingParams) -> Ciphertext:
    """Convert a client-key ciphertext into a proxy-key ciphertext."""
    if ct.owner != OWNER_CLIENT:
        raise ParameterError("re-encryption applies to client-key ciphertexts")
    adj0, adj1 = _key_switch(ct.c1, rk.parts, rk.w, params)
    return Ciphertext(poly_add(ct.c0, adj0), adj1, OWNER_PROXY, fresh=False)


def apply_galois(ct: Ciphertext, galois_elt: int, keyset: KeySet, params: RingParams) -> Ciphertext:
    key = keyset.get(galois_elt)
    c0 = apply_automorphism(ct.c0, galois_elt)
    c1 = apply_automorphism(ct.c1, galois_elt)
    adj0, adj1 = _key_switch(c1, key.parts, key.w, params)
    return Ciphertext(poly_add(c0, adj0), adj1, ct.owner, fresh=False)


def rotate(
    ct: Ciphertext,
    steps: int,
    keyset: KeySet,
    params: RingParams,
    counter=None,
) -> Ciphertext:
    """Rotate both slot rows left by `steps` (signed, |steps| < n/2).

    all-keys mode uses the single element 3^steps; log-keys composes one
    automorphism per set bit of the step count.
    """
    n = params.n
    if abs(steps) >= n // 2:
        raise ParameterError("|steps| must be below n/2")
    steps %= n // 2
    if steps == 0:
        return ct
    if keyset.mode == KEY_MODE_ALL:
        out = apply_galois(ct, rotation_galois_elt(steps, n), keyset, params)
        if counter is not None:
            counter.autom += 1
        return out
    out = ct
    bit = 0
    while steps:
        if steps & 1:
            out = apply_galois(out, rotation_galois_elt(1 << bit, n), keyset, params)
            if counter is not None:
                counter.autom += 1
        steps >>= 1
        bit += 1
    return out


def swap_rows(ct: Ciphertext, keyset: KeySet, params: RingParams) -> Ciphertext:
    return apply_galois(ct, row_swap_galois_elt(params.n), keyset, params)


def transparent_zero(params: RingParams, owner: str) -> Ciphertext:
    """The (0, 0) ciphertext: a valid, noise-free encryption of zero."""
    return Ciphertext(poly_zero(params.n, params.q), poly_zero(params.n, params.q), owner, fresh=False)


# ---------------------------------------------------------------------------
# Serialization (1-byte type tag, 1-byte owner tag, framed polynomials)
# ---------------------------------------------------------------------------

TAG_CIPHERTEXT = 0x01
TAG_EVAL_KEY = 0x02
TAG_REENC_KEY = 0x03
TAG_SECRET_KEY = 0x04


def ciphertext_to_bytes(ct: Ciphertext) -> bytes:
    head = bytes([TAG_CIPHERTEXT, _OWNER_CODES[ct.owner], 1 if ct.fresh else 0])
    return head + poly_to_bytes(ct.c0) + poly_to_bytes(ct.c1)


def ciphertext_from_bytes(data: bytes, params: RingParams) -> Ciphertext:
    if len(data) < 3 or data[0] != TAG_CIPHERTEXT:
        raise ParameterError("not a ciphertext frame")
    owner = _OWNER_NAMES.get(data[1])
    if owner is None:
        raise ParameterError("unknown owner tag")
    fresh = bool(data[2])
    c0, used = poly_from_bytes(data[3:], params.q)
    c1, used2 = poly_from_bytes(data[3 + used :], params.q)
    if 3 + used + used2 != len(data):
        raise ParameterError("trailing bytes in ciphertext frame")
    return Ciphertext(c0, c1, owner, fresh)


def _parts_to_bytes(parts: list[KeyPart]) -> bytes:
    out = len(parts).to_bytes(2, "little")
    for part in parts:
        out += poly_to_bytes(part.pk0) + poly_to_bytes(part.pk1)
    return out


def _parts_from_bytes(data: bytes, params: RingParams) -> tuple[list[KeyPart], int]:
    count = int.from_bytes(data[:2], "little")
    pos = 2
    parts = []
    for _ in range(count):
        pk0, used = poly_from_bytes(data[pos:], params.q)
        pos += used
        pk1, used = poly_from_bytes(data[pos:], params.q)
        pos += used
        parts.append(KeyPart(pk0, pk1))
    return parts, pos


def eval_key_to_bytes(key: EvaluationKey) -> bytes:
    head = bytes([TAG_EVAL_KEY]) + key.galois_elt.to_bytes(8, "little") + key.w.to_bytes(8, "little")
    return head + _parts_to_bytes(key.parts)


def eval_key_from_bytes(data: bytes, params: RingParams) -> EvaluationKey:
    if data[0] != TAG_EVAL_KEY:
        raise ParameterError("not an evaluation key frame")
    galois_elt = int.from_bytes(data[1:9], "little")
    w = int.from_bytes(data[9:17], "little")
    parts, used = _parts_from_bytes(data[17:], params)
    if 17 + used != len(data):
        raise ParameterError("trailing bytes in evaluation key frame")
    return EvaluationKey(galois_elt, w, len(parts), parts)


def reenc_key_to_bytes(key: ReEncryptionKey) -> bytes:
    return bytes([TAG_REENC_KEY]) + key.w.to_bytes(8, "little") + _parts_to_bytes(key.parts)


def reenc_key_from_bytes(data: bytes, params: RingParams) -> ReEncryptionKey:
    if data[0] != TAG_REENC_KEY:
        raise ParameterError("not a re-encryption key frame")
    w = int.from_bytes(data[1:9], "little")
    parts, used = _parts_from_bytes(data[9:], params)
    if 9 + used != len(data):
        raise ParameterError("trailing bytes in re-encryption key frame")
    return ReEncryptionKey(w, len(parts), parts)


def secret_key_to_bytes(sk: SecretKey) -> bytes:
    return bytes([TAG_SECRET_KEY, _OWNER_CODES[sk.owner]]) + poly_to_bytes(sk.s)


def secret_key_from_bytes(data: bytes, params: RingParams) -> SecretKey:
    if data[0] != TAG_SECRET_KEY:
        raise ParameterError("not a secret key frame")
    owner = _OWNER_NAMES.get(data[1])
    if owner is None:
        raise ParameterError("unknown owner tag")
    s, used = poly_from_bytes(data[2:], params.q)
    if 2 + used != len(data):
        raise ParameterError("trailing bytes in secret key frame")
    return SecretKey(s, owner, params)
