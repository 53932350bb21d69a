"""Input-label delivery: a trusted dealer path and a Diffie-Hellman 1-of-2 OT.

The OT is the two-message random-OT construction over a 2048-bit MODP group:
the sender publishes A = g^a; per choice bit the receiver sends
B = g^b * A^c and derives k_c = H(A^b); the sender derives k_0 = H(B^a) and
k_1 = H((B/A)^a) and ships both labels encrypted.  Each ciphertext carries an
8-byte hash tag so key mismatch or transcript tampering surfaces as an error.

Dealer mode hands the chosen labels over directly and exists for tests and
local simulation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError

# RFC 3526 group 14: 2048-bit MODP prime, generator 2.
GROUP_PRIME = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
GROUP_GEN = 2
GROUP_BYTES = 256

_TAG = 8


def _rand_exponent(rng: np.random.Generator) -> int:
    return int.from_bytes(rng.bytes(GROUP_BYTES), "little") % (GROUP_PRIME - 2) + 1


def _elem_bytes(x: int) -> bytes:
    return x.to_bytes(GROUP_BYTES, "little")


def _kdf(elem: int, index: int, width: int) -> bytes:
    seed = hashlib.sha256(_elem_bytes(elem) + index.to_bytes(8, "little")).digest()
    out = seed
    while len(out) < width:
        out = out + hashlib.sha256(out).digest()
    return out[:width]


def _seal(key: bytes, label: bytes) -> bytes:
    body = label + hashlib.sha256(label).digest()[:_TAG]
    return bytes(a ^ b for a, b in zip(key, body))


def _open(key: bytes, ct: bytes) -> bytes:
    body = bytes(a ^ b for a, b in zip(key, ct))
    label, tag = body[:-_TAG], body[-_TAG:]
    if hashlib.sha256(label).digest()[:_TAG] != tag:
        raise IntegrityError("oblivious-transfer payload failed its integrity tag")
    return label


def deliver_labels_dealer(
    pairs: list[tuple[bytes, bytes]], choice_bits: list[int]
) -> list[bytes]:
    """Trusted selection, test-only: the chosen label per wire, nothing hidden."""
    return [pair[int(bit) & 1] for pair, bit in zip(pairs, choice_bits)]


@dataclass
class OtSenderState:
    a: int
    big_a: int


def sender_setup(rng: np.random.Generator) -> tuple[OtSenderState, bytes]:
    a = _rand_exponent(rng)
    big_a = pow(GROUP_GEN, a, GROUP_PRIME)
    return OtSenderState(a, big_a), _elem_bytes(big_a)


@dataclass
class OtReceiverState:
    exponents: list[int]
    choices: list[int]
    big_a: int


def receiver_respond(
    setup_msg: bytes, choice_bits: list[int], rng: np.random.Generator
) -> tuple[OtReceiverState, bytes]:
    big_a = int.from_bytes(setup_msg, "little")
    exps, points = [], []
    for bit in choice_bits:
        b = _rand_exponent(rng)
        point = pow(GROUP_GEN, b, GROUP_PRIME)
        if bit & 1:
            point = point * big_a % GROUP_PRIME
        exps.append(b)
        points.append(_elem_bytes(point))
    return OtReceiverState(exps, [int(b) & 1 for b in choice_bits], big_a), b"".join(points)


def sender_payload(
    state: OtSenderState, response: bytes, pairs: list[tuple[bytes, bytes]]
) -> bytes:
    if len(response) != GROUP_BYTES * len(pairs):
        raise IntegrityError("oblivious-transfer response has the wrong size")
    width = len(pairs[0][0]) + _TAG if pairs else 0
    inv_a = pow(state.big_a, GROUP_PRIME - 2, GROUP_PRIME)
    out = []
    for i, (l0, l1) in enumerate(pairs):
        point = int.from_bytes(response[i * GROUP_BYTES : (i + 1) * GROUP_BYTES], "little")
        k0 = _kdf(pow(point, state.a, GROUP_PRIME), i, width)
        k1 = _kdf(pow(point * inv_a % GROUP_PRIME, state.a, GROUP_PRIME), i, width)
        out.append(_seal(k0, l0))
        out.append(_seal(k1, l1))
    return b"".join(out)


def receiver_finish(state: OtReceiverState, payload: bytes, label_bytes: int) -> list[bytes]:
    width = label_bytes + _TAG
    if len(payload) != 2 * width * len(state.choices):
        raise IntegrityError("oblivious-transfer payload has the wrong size")
    labels = []
    for i, (b, c) in enumerate(zip(state.exponents, state.choices)):
        k = _kdf(pow(state.big_a, b, GROUP_PRIME), i, width)
        ct = payload[(2 * i + c) * width : (2 * i + c + 1) * width]
        labels.append(_open(k, ct))
    return labels
