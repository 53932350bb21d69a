"""Boolean circuits for the activation functions, plus word-level builders.

Gates are XOR and AND over an acyclic wire list; NOT is XOR with a constant-one
wire, so it stays free under free-XOR garbling.  Constant wires are modeled as
garbler inputs with pinned values and folded away wherever an operand is known,
keeping AND counts tight.

Two activation families:
  mod_t      -- shares are t_bits wide, additions reduce mod t via a
                conditional subtraction (compare + MUX) after every add
  truncated  -- shares are b = t_bits - f bits wide, arithmetic is natural
                mod 2^b with no wrap correction; the sign is bit b-1

Plain evaluation is vectorized: passing numpy bit arrays evaluates the whole
batch in one sweep, which makes exhaustive input sweeps cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .params import GC_MODE_MOD_T, GC_MODE_TRUNCATED

XOR = "XOR"
AND = "AND"


@dataclass(frozen=True)
class GcConfig:
    t: int
    f: int = 0
    mode: str = GC_MODE_TRUNCATED
    label_bits: int = 128

    def __post_init__(self):
        if self.mode not in (GC_MODE_MOD_T, GC_MODE_TRUNCATED):
            raise ParameterError(f"unknown gc mode {self.mode!r}")
        if self.f < 0 or self.f >= self.t_bits:
            raise ParameterError("truncated bit count must satisfy 0 <= f < t_bits")
        if self.width < 1:
            raise ParameterError("operating width must be at least one bit")
        if self.label_bits % 8:
            raise ParameterError("label width must be a whole number of bytes")

    @property
    def t_bits(self) -> int:
        return (self.t - 1).bit_length()

    @property
    def width(self) -> int:
        """GC operating width: t_bits shares in mod_t, b = t_bits - f truncated."""
        if self.mode == GC_MODE_MOD_T:
            return self.t_bits
        return self.t_bits - self.f


@dataclass(frozen=True)
class Gate:
    op: str
    a: int
    b: int
    out: int


@dataclass
class BooleanCircuit:
    n_wires: int
    gates: list[Gate]
    garbler_inputs: list[int]
    evaluator_inputs: list[int]
    outputs: list[int]
    constants: dict[int, int]  # wire -> pinned bit, supplied by the garbler

    @property
    def and_count(self) -> int:
        return sum(1 for g in self.gates if g.op == AND)

    @property
    def xor_count(self) -> int:
        return sum(1 for g in self.gates if g.op == XOR)

    def canonical_bytes(self) -> bytes:
        """Stable encoding used for hashing and transport headers."""
        head = b"%d|%d|%d|%d|" % (
            self.n_wires,
            len(self.garbler_inputs),
            len(self.evaluator_inputs),
            len(self.outputs),
        )
        parts = [head]
        parts.append(b",".join(b"%d" % w for w in self.garbler_inputs) + b"|")
        parts.append(b",".join(b"%d" % w for w in self.evaluator_inputs) + b"|")
        parts.append(b",".join(b"%d" % w for w in self.outputs) + b"|")
        parts.append(
            b",".join(b"%d:%d" % (w, v) for w, v in sorted(self.constants.items())) + b"|"
        )
        parts.append(
            b";".join(
                (b"X" if g.op == XOR else b"A") + b"%d,%d,%d" % (g.a, g.b, g.out)
                for g in self.gates
            )
        )
        return b"".join(parts)


class CircuitBuilder:
    def __init__(self):
        self._n = 0
        self.gates: list[Gate] = []
        self.garbler_inputs: list[int] = []
        self.evaluator_inputs: list[int] = []
        self.constants: dict[int, int] = {}
        self._const_wires: dict[int, int] = {}
        self._known: dict[int, int] = {}  # wires with statically-known values

    def _new_wire(self) -> int:
        w = self._n
        self._n += 1
        return w

    def garbler_input(self) -> int:
        w = self._new_wire()
        self.garbler_inputs.append(w)
        return w

    def evaluator_input(self) -> int:
        w = self._new_wire()
        self.evaluator_inputs.append(w)
        return w

    def garbler_word(self, bits: int) -> list[int]:
        return [self.garbler_input() for _ in range(bits)]

    def evaluator_word(self, bits: int) -> list[int]:
        return [self.evaluator_input() for _ in range(bits)]

    def const(self, bit: int) -> int:
        bit = int(bit) & 1
        if bit not in self._const_wires:
            w = self._new_wire()
            self.constants[w] = bit
            self._known[w] = bit
            self._const_wires[bit] = w
        return self._const_wires[bit]

    def xor(self, a: int, b: int) -> int:
        ka, kb = self._known.get(a), self._known.get(b)
        if ka is not None and kb is not None:
            return self.const(ka ^ kb)
        if ka == 0:
            return b
        if kb == 0:
            return a
        out = self._new_wire()
        self.gates.append(Gate(XOR, a, b, out))
        return out

    def and_(self, a: int, b: int) -> int:
        ka, kb = self._known.get(a), self._known.get(b)
        if ka == 0 or kb == 0:
            return self.const(0)
        if ka == 1:
            return b
        if kb == 1:
            return a
        out = self._new_wire()
        self.gates.append(Gate(AND, a, b, out))
        return out

    def not_(self, a: int) -> int:
        return self.xor(a, self.const(1))

    def or_(self, a: int, b: int) -> int:
        return self.xor(self.xor(a, b), self.and_(a, b))

    def build(self, outputs: list[int]) -> BooleanCircuit:
        return BooleanCircuit(
            self._n,
            list(self.gates),
            list(self.garbler_inputs),
            list(self.evaluator_inputs),
            list(outputs),
            dict(self.constants),
        )

    # -- word helpers (LSB-first wire lists) --------------------------------

    def const_word(self, value: int, bits: int) -> list[int]:
        return [self.const((value >> i) & 1) for i in range(bits)]

    def add_words(self, xs: list[int], ys: list[int], carry_in: int | None = None):
        """Ripple-carry addition; returns (sum bits, carry out). One AND per bit."""
        if len(xs) != len(ys):
            raise ParameterError("adder operands must share a width")
        carry = carry_in if carry_in is not None else self.const(0)
        out = []
        for x, y in zip(xs, ys):
            xc = self.xor(x, carry)
            yc = self.xor(y, carry)
            out.append(self.xor(xc, y))
            carry = self.xor(carry, self.and_(xc, yc))
        return out, carry

    def add_mod_pow2(self, xs: list[int], ys: list[int]) -> list[int]:
        out, _ = self.add_words(xs, ys)
        return out

    def sub_words(self, xs: list[int], ys: list[int]):
        """x - y via x + ~y + 1; returns (difference, no_borrow flag)."""
        inv = [self.not_(y) for y in ys]
        return self.add_words(xs, inv, carry_in=self.const(1))

    def geq_const(self, xs: list[int], value: int) -> int:
        _, no_borrow = self.sub_words(xs, self.const_word(value, len(xs)))
        return no_borrow

    def mux(self, sel: int, a: list[int], b: list[int]) -> list[int]:
        """sel ? a : b, one AND per bit."""
        return [self.xor(y, self.and_(sel, self.xor(x, y))) for x, y in zip(a, b)]

    def mask_word(self, xs: list[int], keep: int) -> list[int]:
        return [self.and_(x, keep) for x in xs]

    def add_mod_t(self, xs: list[int], ys: list[int], t: int) -> list[int]:
        """(x + y) mod t for x, y in [0, t): add, then conditional subtract."""
        width = len(xs)
        s, carry = self.add_words(xs, ys)
        full = s + [carry]
        d, wraps = self.sub_words(full, self.const_word(t, width + 1))
        return self.mux(wraps, d[:width], full[:width])

    def sub_mod_t(self, xs: list[int], ys: list[int], t: int) -> list[int]:
        """(x - y) mod t: subtract, add back t on borrow."""
        width = len(xs)
        d, no_borrow = self.sub_words(xs, ys)
        dt, _ = self.add_words(d, self.const_word(t, width))
        return self.mux(no_borrow, d, dt)


# ---------------------------------------------------------------------------
# Activation circuits
# ---------------------------------------------------------------------------


def _reconstruct(b: CircuitBuilder, sx, px, cfg: GcConfig):
    if cfg.mode == GC_MODE_TRUNCATED:
        return b.add_mod_pow2(sx, px)
    return b.add_mod_t(sx, px, cfg.t)


def _is_negative(b: CircuitBuilder, x, cfg: GcConfig) -> int:
    if cfg.mode == GC_MODE_TRUNCATED:
        return x[-1]
    return b.geq_const(x, (cfg.t + 1) // 2)


def _relu_word(b: CircuitBuilder, x, cfg: GcConfig):
    return b.mask_word(x, b.not_(_is_negative(b, x, cfg)))


def _mask_output(b: CircuitBuilder, v, sy, cfg: GcConfig):
    if cfg.mode == GC_MODE_TRUNCATED:
        return b.add_mod_pow2(v, sy)
    return b.add_mod_t(v, sy, cfg.t)


def build_relu(cfg: GcConfig) -> BooleanCircuit:
    """ReLU on reconstructed shares: output = max(s_x + p_x, 0) + s_y.

    Garbler inputs: s_x then the fresh output mask s_y; evaluator inputs: p_x.
    """
    b = CircuitBuilder()
    width = cfg.width
    sx = b.garbler_word(width)
    sy = b.garbler_word(width)
    px = b.evaluator_word(width)
    x = _reconstruct(b, sx, px, cfg)
    out = _mask_output(b, _relu_word(b, x, cfg), sy, cfg)
    return b.build(out)


def _signed_max(b: CircuitBuilder, u, v, cfg: GcConfig):
    if cfg.mode == GC_MODE_TRUNCATED:
        ue = u + [u[-1]]
        ve = v + [v[-1]]
        d, _ = b.sub_words(ue, ve)
        u_smaller = d[-1]
    else:
        d = b.sub_mod_t(u, v, cfg.t)
        u_smaller = b.geq_const(d, (cfg.t + 1) // 2)
    return b.mux(u_smaller, v, u)


def build_maxpool(cfg: GcConfig, pool_size: int = 4) -> BooleanCircuit:
    """Signed max over `pool_size` reconstructed values, plus the output mask."""
    b = CircuitBuilder()
    width = cfg.width
    sxs = [b.garbler_word(width) for _ in range(pool_size)]
    sy = b.garbler_word(width)
    pxs = [b.evaluator_word(width) for _ in range(pool_size)]
    values = [_reconstruct(b, sx, px, cfg) for sx, px in zip(sxs, pxs)]
    best = values[0]
    for v in values[1:]:
        best = _signed_max(b, best, v, cfg)
    out = _mask_output(b, best, sy, cfg)
    return b.build(out)


def build_relu_maxpool(cfg: GcConfig, pool_size: int = 4) -> BooleanCircuit:
    """Fused round: clamp each reconstructed value at zero, then take the max."""
    b = CircuitBuilder()
    width = cfg.width
    sxs = [b.garbler_word(width) for _ in range(pool_size)]
    sy = b.garbler_word(width)
    pxs = [b.evaluator_word(width) for _ in range(pool_size)]
    values = [
        _relu_word(b, _reconstruct(b, sx, px, cfg), cfg) for sx, px in zip(sxs, pxs)
    ]
    best = values[0]
    for v in values[1:]:
        best = _signed_max(b, best, v, cfg)
    out = _mask_output(b, best, sy, cfg)
    return b.build(out)


# ---------------------------------------------------------------------------
# Plain evaluation (vectorized over input batches)
# ---------------------------------------------------------------------------


def eval_plain(circuit: BooleanCircuit, garbler_bits, evaluator_bits):
    """Evaluate on cleartext bits; each input may be a scalar or a batch array."""
    garbler_bits = np.asarray(garbler_bits, dtype=np.uint8)
    evaluator_bits = np.asarray(evaluator_bits, dtype=np.uint8)
    if garbler_bits.shape[0] != len(circuit.garbler_inputs):
        raise ParameterError("garbler bit count mismatch")
    if evaluator_bits.shape[0] != len(circuit.evaluator_inputs):
        raise ParameterError("evaluator bit count mismatch")
    batch_shape = garbler_bits.shape[1:] or evaluator_bits.shape[1:]
    values: dict[int, np.ndarray] = {}
    for wire, bit in circuit.constants.items():
        values[wire] = np.full(batch_shape, bit, dtype=np.uint8) if batch_shape else np.uint8(bit)
    for wire, bits in zip(circuit.garbler_inputs, garbler_bits):
        values[wire] = bits
    for wire, bits in zip(circuit.evaluator_inputs, evaluator_bits):
        values[wire] = bits
    for gate in circuit.gates:
        if gate.op == XOR:
            values[gate.out] = values[gate.a] ^ values[gate.b]
        else:
            values[gate.out] = values[gate.a] & values[gate.b]
    return np.stack([np.asarray(values[w], dtype=np.uint8) for w in circuit.outputs])


def word_to_bits(values, width: int) -> np.ndarray:
    """Integers -> LSB-first bit rows, shaped (width, batch...)."""
    values = np.asarray(values)
    return np.stack([(values >> i) & 1 for i in range(width)]).astype(np.uint8)


def bits_to_word(bits: np.ndarray) -> np.ndarray:
    acc = np.zeros(bits.shape[1:], dtype=np.int64)
    for i in range(bits.shape[0]):
        acc |= bits[i].astype(np.int64) << i
    return acc


# ---------------------------------------------------------------------------
# Size accounting
# ---------------------------------------------------------------------------

GC_ROW_OVERHEAD_BYTES = 8  # integrity tag appended to each table row


def circuit_stats(circuit: BooleanCircuit, cfg: GcConfig, ot_mode: str = "dealer") -> dict:
    """Offline/online byte footprint of one garbled instance."""
    label_bytes = cfg.label_bits // 8
    row = label_bytes + GC_ROW_OVERHEAD_BYTES
    eval_bits = len(circuit.evaluator_inputs)
    online = eval_bits * label_bytes
    garbler_bits = len(circuit.garbler_inputs) + len(circuit.constants)
    online += garbler_bits * label_bytes
    if ot_mode == "base_ot":
        from .ot import GROUP_BYTES

        # receiver points, plus two tagged ciphertexts per choice bit
        online += eval_bits * (GROUP_BYTES + 2 * row) + GROUP_BYTES
    return {
        "and_gates": circuit.and_count,
        "xor_gates": circuit.xor_count,
        "garbled_bytes": 4 * circuit.and_count * row,
        "online_label_bytes": online,
    }
