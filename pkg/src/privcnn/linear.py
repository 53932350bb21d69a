"""Homomorphic linear layers.

Convolution follows the multiply-then-rotate order: each nonzero kernel
element contributes one plaintext multiplication by a masked weight plaintext,
one row rotation of the product (offset zero skips the rotation), and one
accumulation add.  Masks hold the kernel scalar at exactly the input slots
whose contribution lands inside the output image, and zeros elsewhere, which
realizes zero padding and prevents wrap-around garbage at no extra cost.
Zero kernel elements are skipped entirely, so live operation counts scale
with (1 - sparsity).

Layout: input channels are packed channel-contiguous and row-major into row 0
of as few ciphertexts as fit; every output channel accumulates into its own
ciphertext with its image block based at slot 0.  Fully-connected layers use
the generalized-diagonal method on an input vector replicated across the row;
weight sparsity cannot be skipped there because diagonals mix matrix entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bfv
from .errors import ParameterError
from .params import KEY_MODE_ALL, KEY_MODE_LOG
from .ring import RingParams, get_codec

PAD_SAME = "same"
PAD_VALID = "valid"


@dataclass(frozen=True)
class ConvSpec:
    c_in: int
    c_out: int
    kernel: int
    width: int
    stride: int = 1
    pad: str = PAD_SAME

    def __post_init__(self):
        if self.kernel % 2 == 0:
            raise ParameterError("kernel width must be odd")
        if self.stride not in (1, 2):
            raise ParameterError("stride must be 1 or 2")
        if self.pad not in (PAD_SAME, PAD_VALID):
            raise ParameterError(f"unknown padding mode {self.pad!r}")

    @property
    def out_width(self) -> int:
        """Logical output width before any stride selection."""
        if self.pad == PAD_SAME:
            return self.width
        return self.width - self.kernel + 1

    @property
    def strided_width(self) -> int:
        return (self.out_width + self.stride - 1) // self.stride


@dataclass(frozen=True)
class PackedLayout:
    """Slot placement for channel tensors: (ch, y, x) -> slot within one row."""

    n: int
    width: int
    channels: int
    channels_per_ct: int

    @classmethod
    def plan(cls, n: int, width: int, channels: int) -> "PackedLayout":
        block = width * width
        per_ct = (n // 2) // block
        if per_ct == 0:
            raise ParameterError(
                f"image block {width}x{width} exceeds the row capacity n/2 = {n // 2}"
            )
        return cls(n, width, channels, min(per_ct, channels))

    @property
    def group_count(self) -> int:
        return -(-self.channels // self.channels_per_ct)

    def slot(self, ch: int, y: int, x: int) -> tuple[int, int]:
        """(ciphertext group, slot index) for one tensor position."""
        if not (0 <= ch < self.channels and 0 <= y < self.width and 0 <= x < self.width):
            raise ParameterError("position outside the layout")
        group, local = divmod(ch, self.channels_per_ct)
        return group, local * self.width * self.width + y * self.width + x


def pack_input(image: np.ndarray, layout: PackedLayout, t: int) -> list[np.ndarray]:
    """Image (c, w, w) of residues in [0, t) -> one slot vector per group."""
    image = np.asarray(image)
    if image.shape != (layout.channels, layout.width, layout.width):
        raise ParameterError(
            f"image shape {image.shape} does not match layout "
            f"({layout.channels}, {layout.width}, {layout.width})"
        )
    if np.any(image < 0) or np.any(image >= t):
        raise ParameterError("pack expects residues in [0, t)")
    groups = [np.zeros(layout.n, dtype=np.uint64) for _ in range(layout.group_count)]
    for ch in range(layout.channels):
        g, base = layout.slot(ch, 0, 0)
        block = image[ch].reshape(-1).astype(np.uint64)
        groups[g][base : base + block.size] = block
    return groups


def unpack_output(slots: np.ndarray, layout: PackedLayout) -> np.ndarray:
    """Inverse of pack_input for one group-complete slot list."""
    out = np.zeros((layout.channels, layout.width, layout.width), dtype=np.int64)
    for ch in range(layout.channels):
        _, base = layout.slot(ch, 0, 0)
        block = slots[base : base + layout.width * layout.width]
        out[ch] = block.reshape(layout.width, layout.width)
    return out


@dataclass
class ConvTap:
    out_ch: int
    in_ch: int
    ky: int
    kx: int
    weight: int  # centered kernel scalar
    skip: bool
    group_in: int = 0
    offset: int = 0  # signed left-rotation amount
    mask: bfv.PreparedPlain | None = None


@dataclass
class PreparedConvWeights:
    spec: ConvSpec
    layout: PackedLayout
    taps: list[ConvTap]
    params: RingParams

    @property
    def nnz(self) -> int:
        return sum(1 for tap in self.taps if not tap.skip)

    def predicted_ops(self, key_mode: str = KEY_MODE_ALL) -> dict:
        return _count_ops(
            (tap.offset for tap in self.taps if not tap.skip),
            (tap.out_ch for tap in self.taps if not tap.skip),
            self.layout.n,
            key_mode,
        )


def _count_ops(offsets, out_channels, n: int, key_mode: str) -> dict:
    half = n // 2
    pmult = autom = 0
    groups = set()
    distinct = set()
    per_group = {}
    for offset, out_ch in zip(offsets, out_channels):
        pmult += 1
        groups.add(out_ch)
        per_group[out_ch] = per_group.get(out_ch, 0) + 1
        steps = offset % half
        if steps:
            distinct.add(steps)
            if key_mode == KEY_MODE_ALL:
                autom += 1
            else:
                autom += bin(steps).count("1")
    add = sum(count - 1 for count in per_group.values())
    return {"pmult": pmult, "autom": autom, "add": add, "distinct_rotations": len(distinct)}


def prepare_conv(
    kernels: np.ndarray, spec: ConvSpec, layout: PackedLayout, params: RingParams
) -> PreparedConvWeights:
    """Masks and rotation offsets for every kernel element.

    `kernels` is (c_out, c_in, k, k) with centered integer values in
    (-t/2, t/2].  Zero elements produce skip entries carrying no mask.
    """
    kernels = np.asarray(kernels, dtype=np.int64)
    if kernels.shape != (spec.c_out, spec.c_in, spec.kernel, spec.kernel):
        raise ParameterError(
            f"kernel tensor shape {kernels.shape} does not match spec "
            f"({spec.c_out}, {spec.c_in}, {spec.kernel}, {spec.kernel})"
        )
    half_t = params.t // 2
    if np.any(kernels > half_t) or np.any(kernels < -half_t):
        raise ParameterError("kernel values outside the centered plaintext range")
    codec = get_codec(params)
    ctr = spec.kernel // 2
    w = spec.width
    out_w = spec.out_width
    shift = 0 if spec.pad == PAD_SAME else ctr
    taps = []
    for o in range(spec.c_out):
        for c in range(spec.c_in):
            group, base = layout.slot(c, 0, 0)
            for ky in range(spec.kernel):
                for kx in range(spec.kernel):
                    weight = int(kernels[o, c, ky, kx])
                    if weight == 0:
                        taps.append(ConvTap(o, c, ky, kx, 0, skip=True))
                        continue
                    dy, dx = ky - ctr, kx - ctr
                    offset = base + (dy + shift) * w + (dx + shift)
                    mask_slots = np.zeros(layout.n, dtype=np.uint64)
                    wval = weight % params.t
                    for oy in range(out_w):
                        iy = oy + dy + shift
                        if not 0 <= iy < w:
                            continue
                        for ox in range(out_w):
                            ix = ox + dx + shift
                            if 0 <= ix < w:
                                mask_slots[base + iy * w + ix] = wval
                    mask = bfv.prepare_plain(codec.encode(mask_slots))
                    taps.append(
                        ConvTap(o, c, ky, kx, weight, False, group, offset, mask)
                    )
    return PreparedConvWeights(spec, layout, taps, params)


@dataclass
class OpCounter:
    pmult: int = 0
    autom: int = 0
    add: int = 0

    def as_dict(self) -> dict:
        return {"pmult": self.pmult, "autom": self.autom, "add": self.add}


def he_conv(
    cts: list[bfv.Ciphertext],
    prepared: PreparedConvWeights,
    keys: bfv.KeySet,
    params: RingParams,
    counter: OpCounter | None = None,
) -> list[bfv.Ciphertext]:
    """One output ciphertext per output channel; skips zero kernel elements."""
    if len(cts) != prepared.layout.group_count:
        raise ParameterError(
            f"expected {prepared.layout.group_count} input ciphertexts, got {len(cts)}"
        )
    owner = cts[0].owner
    outputs: list[bfv.Ciphertext | None] = [None] * prepared.spec.c_out
    for tap in prepared.taps:
        if tap.skip:
            continue
        term = bfv.he_mul_plain(cts[tap.group_in], tap.mask, params)
        if counter is not None:
            counter.pmult += 1
        if tap.offset % (params.n // 2):
            term = bfv.rotate(term, tap.offset, keys, params, counter=counter)
        acc = outputs[tap.out_ch]
        if acc is None:
            outputs[tap.out_ch] = term
        else:
            outputs[tap.out_ch] = bfv.he_add(acc, term)
            if counter is not None:
                counter.add += 1
    return [
        out if out is not None else bfv.transparent_zero(params, owner)
        for out in outputs
    ]


def op_count(
    kernels: np.ndarray, spec: ConvSpec, layout: PackedLayout, key_mode: str = KEY_MODE_ALL
) -> dict:
    """Pure prediction of he_conv's live counters for a kernel tensor."""
    kernels = np.asarray(kernels)
    ctr = spec.kernel // 2
    shift = 0 if spec.pad == PAD_SAME else ctr
    offsets = []
    out_channels = []
    for o in range(spec.c_out):
        for c in range(spec.c_in):
            _, base = layout.slot(c, 0, 0)
            for ky in range(spec.kernel):
                for kx in range(spec.kernel):
                    if kernels[o, c, ky, kx] == 0:
                        continue
                    offsets.append(base + (ky - ctr + shift) * spec.width + (kx - ctr + shift))
                    out_channels.append(o)
    return _count_ops(offsets, out_channels, layout.n, key_mode)


# ---------------------------------------------------------------------------
# Fully-connected layers (generalized diagonals)
# ---------------------------------------------------------------------------


def _next_pow2(x: int) -> int:
    return 1 << (x - 1).bit_length()


@dataclass
class PreparedFcWeights:
    dim: int  # padded square dimension
    n_in: int
    n_out: int
    diagonals: list[bfv.PreparedPlain]
    params: RingParams


def prepare_fc(matrix: np.ndarray, params: RingParams) -> PreparedFcWeights:
    """Diagonal packing of an (n_out, n_in) centered integer matrix."""
    matrix = np.asarray(matrix, dtype=np.int64)
    if matrix.ndim != 2:
        raise ParameterError("fc weights must be a matrix")
    n_out, n_in = matrix.shape
    dim = _next_pow2(max(n_in, n_out))
    if dim > params.n // 2:
        raise ParameterError(
            f"padded dimension {dim} exceeds the row capacity {params.n // 2}"
        )
    half_t = params.t // 2
    if np.any(matrix > half_t) or np.any(matrix < -half_t):
        raise ParameterError("fc weights outside the centered plaintext range")
    padded = np.zeros((dim, dim), dtype=np.int64)
    padded[:n_out, :n_in] = matrix
    codec = get_codec(params)
    half = params.n // 2
    reps = half // dim
    rows = np.tile(np.arange(dim), reps)
    diagonals = []
    for d in range(dim):
        diag = padded[rows, (rows + d) % dim] % params.t
        slots = np.zeros(params.n, dtype=np.uint64)
        slots[:half] = diag
        diagonals.append(bfv.prepare_plain(codec.encode(slots)))
    return PreparedFcWeights(dim, n_in, n_out, diagonals, params)


def pack_fc_input(vec: np.ndarray, dim: int, params: RingParams) -> np.ndarray:
    """Vector replicated across row 0 so row rotations act block-cyclically."""
    vec = np.asarray(vec, dtype=np.uint64)
    if len(vec) > dim:
        raise ParameterError("vector longer than the packed dimension")
    half = params.n // 2
    if dim > half or half % dim:
        raise ParameterError("padded dimension must divide the row capacity")
    block = np.zeros(dim, dtype=np.uint64)
    block[: len(vec)] = vec
    slots = np.zeros(params.n, dtype=np.uint64)
    slots[:half] = np.tile(block, half // dim)
    return slots


def he_fc(
    ct: bfv.Ciphertext,
    prepared: PreparedFcWeights,
    keys: bfv.KeySet,
    params: RingParams,
    counter: OpCounter | None = None,
) -> bfv.Ciphertext:
    """Sum_d diag_d * rotate(ct, d); every diagonal is multiplied (no skipping)."""
    acc = None
    for d, diag in enumerate(prepared.diagonals):
        term_src = ct if d == 0 else bfv.rotate(ct, d, keys, params, counter=counter)
        term = bfv.he_mul_plain(term_src, diag, params)
        if counter is not None:
            counter.pmult += 1
        if acc is None:
            acc = term
        else:
            acc = bfv.he_add(acc, term)
            if counter is not None:
                counter.add += 1
    return acc


def fc_op_count(dim: int, n: int, key_mode: str = KEY_MODE_ALL) -> dict:
    autom = 0
    for d in range(1, dim):
        if key_mode == KEY_MODE_ALL:
            autom += 1
        else:
            autom += bin(d % (n // 2)).count("1")
    return {"pmult": dim, "autom": autom, "add": dim - 1, "distinct_rotations": dim - 1}
