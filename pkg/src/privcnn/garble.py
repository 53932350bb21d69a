"""Four-row point-and-permute garbling with free XOR.

Wire labels are 16 bytes; the two labels of a wire differ by a global offset R
whose low bit is pinned to 1, so the label's low bit doubles as the permute
bit.  XOR gates cost nothing; each AND gate ships four rows, every row being
PRF(left label, right label, gate id) XORed with the output label plus an
8-byte zero tag.  A tampered row decrypts to a nonzero tag and raises.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .circuits import AND, XOR, BooleanCircuit
from .errors import IntegrityError, ParameterError

TAG_BYTES = 8
SCHEME_FOUR_ROW = "four_row"


def _label_bytes(label_bits: int) -> int:
    return label_bits // 8


def _prf(la: bytes, lb: bytes, gate_id: int, width: int) -> bytes:
    h = hashlib.sha256(la + lb + gate_id.to_bytes(8, "little")).digest()
    while len(h) < width:
        h += hashlib.sha256(h).digest()
    return h[:width]


def _xor_bytes(a: bytes, b: bytes) -> bytes:
    return (int.from_bytes(a, "little") ^ int.from_bytes(b, "little")).to_bytes(
        len(a), "little"
    )


@dataclass
class GarbledCircuit:
    """The transferable part: tables, decode bits, and a topology binding."""

    label_bits: int
    tables: list[tuple[bytes, bytes, bytes, bytes]]
    decode_bits: list[int]
    circuit_hash: bytes
    scheme: str = SCHEME_FOUR_ROW


@dataclass
class GarblerSecrets:
    """Stays with the garbler: the offset and the zero-labels of input wires."""

    offset: bytes
    zero_labels: dict[int, bytes]  # input and constant wires only
    constant_labels: dict[int, bytes]  # wire -> label of the pinned value


def circuit_hash(circuit: BooleanCircuit) -> bytes:
    return hashlib.sha256(circuit.canonical_bytes()).digest()


def garble(
    circuit: BooleanCircuit, rng: np.random.Generator, label_bits: int = 128
) -> tuple[GarbledCircuit, GarblerSecrets]:
    width = _label_bytes(label_bits)
    offset = bytearray(rng.bytes(width))
    offset[0] |= 1  # permute bit rides on the label's low bit
    offset = bytes(offset)

    labels: dict[int, bytes] = {}
    input_labels: dict[int, bytes] = {}
    for wire in (*circuit.garbler_inputs, *circuit.evaluator_inputs, *circuit.constants):
        zero = rng.bytes(width)
        labels[wire] = zero
        input_labels[wire] = zero

    tables = []
    gate_id = 0
    for gate in circuit.gates:
        za, zb = labels[gate.a], labels[gate.b]
        if gate.op == XOR:
            labels[gate.out] = _xor_bytes(za, zb)
            continue
        zo = rng.bytes(width)
        labels[gate.out] = zo
        rows: list[bytes | None] = [None] * 4
        for va in (0, 1):
            for vb in (0, 1):
                la = za if va == 0 else _xor_bytes(za, offset)
                lb = zb if vb == 0 else _xor_bytes(zb, offset)
                out_label = zo if (va & vb) == 0 else _xor_bytes(zo, offset)
                idx = ((la[0] & 1) << 1) | (lb[0] & 1)
                pad = _prf(la, lb, gate_id, width + TAG_BYTES)
                rows[idx] = _xor_bytes(pad, out_label + bytes(TAG_BYTES))
        tables.append(tuple(rows))
        gate_id += 1

    decode = [labels[w][0] & 1 for w in circuit.outputs]
    const_labels = {
        wire: (input_labels[wire] if bit == 0 else _xor_bytes(input_labels[wire], offset))
        for wire, bit in circuit.constants.items()
    }
    garbled = GarbledCircuit(label_bits, tables, decode, circuit_hash(circuit))
    return garbled, GarblerSecrets(offset, input_labels, const_labels)


def encode_inputs(secrets: GarblerSecrets, wires: list[int], bits) -> list[bytes]:
    """Labels for the garbler's own input bits (or for a dealer-mode delivery)."""
    out = []
    for wire, bit in zip(wires, bits):
        zero = secrets.zero_labels[wire]
        out.append(zero if int(bit) == 0 else _xor_bytes(zero, secrets.offset))
    return out


def label_pair(secrets: GarblerSecrets, wire: int) -> tuple[bytes, bytes]:
    zero = secrets.zero_labels[wire]
    return zero, _xor_bytes(zero, secrets.offset)


def evaluate(
    garbled: GarbledCircuit, circuit: BooleanCircuit, labels: dict[int, bytes]
) -> list[bytes]:
    """Evaluate on one label per live input wire; returns output labels."""
    if garbled.circuit_hash != circuit_hash(circuit):
        raise IntegrityError("garbled tables do not match the circuit topology")
    width = _label_bytes(garbled.label_bits)
    values = dict(labels)
    gate_id = 0
    for gate in circuit.gates:
        la, lb = values[gate.a], values[gate.b]
        if gate.op == XOR:
            values[gate.out] = _xor_bytes(la, lb)
            continue
        idx = ((la[0] & 1) << 1) | (lb[0] & 1)
        row = garbled.tables[gate_id][idx]
        plain = _xor_bytes(_prf(la, lb, gate_id, width + TAG_BYTES), row)
        if plain[width:] != bytes(TAG_BYTES):
            raise IntegrityError(f"garbled row failed integrity check at gate {gate_id}")
        values[gate.out] = plain[:width]
        gate_id += 1
    return [values[w] for w in circuit.outputs]


def decode(garbled: GarbledCircuit, output_labels: list[bytes]) -> list[int]:
    return [
        (label[0] & 1) ^ bit for label, bit in zip(output_labels, garbled.decode_bits)
    ]


# ---------------------------------------------------------------------------
# Wire format (versioned): header, decode bitmap, table blob
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1


def garbled_to_bytes(g: GarbledCircuit) -> bytes:
    if g.scheme != SCHEME_FOUR_ROW:
        raise ParameterError(f"unknown garbling scheme {g.scheme!r}")
    head = bytes([_FORMAT_VERSION, 0])  # version, scheme code
    head += g.label_bits.to_bytes(2, "little")
    head += len(g.tables).to_bytes(4, "little")
    head += len(g.decode_bits).to_bytes(4, "little")
    head += g.circuit_hash
    decode_map = bytearray((len(g.decode_bits) + 7) // 8)
    for i, bit in enumerate(g.decode_bits):
        if bit:
            decode_map[i // 8] |= 1 << (i % 8)
    blob = b"".join(row for rows in g.tables for row in rows)
    return head + bytes(decode_map) + blob


def garbled_from_bytes(data: bytes) -> GarbledCircuit:
    if len(data) < 44 or data[0] != _FORMAT_VERSION:
        raise ParameterError("unsupported garbled-circuit frame")
    if data[1] != 0:
        raise ParameterError("unknown garbling scheme code")
    label_bits = int.from_bytes(data[2:4], "little")
    n_tables = int.from_bytes(data[4:8], "little")
    n_outputs = int.from_bytes(data[8:12], "little")
    chash = data[12:44]
    pos = 44
    map_len = (n_outputs + 7) // 8
    decode_map = data[pos : pos + map_len]
    pos += map_len
    decode_bits = [(decode_map[i // 8] >> (i % 8)) & 1 for i in range(n_outputs)]
    row = label_bits // 8 + TAG_BYTES
    tables = []
    for _ in range(n_tables):
        rows = tuple(data[pos + i * row : pos + (i + 1) * row] for i in range(4))
        pos += 4 * row
        tables.append(rows)
    if pos != len(data):
        raise ParameterError("trailing bytes in garbled-circuit frame")
    return GarbledCircuit(label_bits, tables, decode_bits, chash)
