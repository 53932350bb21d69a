"""Analytic sub-Gaussian noise accounting and decomposition-base selection.

The two convolution variants differ in operation order.  The baseline rotates
the input ciphertext before multiplying in the weights, which amplifies the
rotation key-switching noise by the plaintext-multiplication factor; the
adopted variant multiplies first and rotates the product, leaving the
rotation noise unamplified.  Per accumulated kernel tap:

    rotate_then_mult:  f_w^2 sqrt(c_i) sqrt(2 + w_A^2 l_A / 4)        (t/2) n sigma
    mult_then_rotate:  f_w^2 sqrt(c_i) sqrt(2 + w_A^2 l_A / (t^2 n))  (t/2) n sigma

Sub-Gaussian parameters convert to infinity-norm bounds through a single
configurable tail factor (default 6); the re-encryption key switch adds the
worst-case bound l_SW w_SW B n / 2 with B = 6 sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .ring import RingParams, decomp_digit_count

VARIANT_ROTATE_THEN_MULT = "rotate_then_mult"
VARIANT_MULT_THEN_ROTATE = "mult_then_rotate"
VARIANTS = (VARIANT_ROTATE_THEN_MULT, VARIANT_MULT_THEN_ROTATE)

# Gaussian-style tail heuristic: P(|X| > 6 * param) is negligible.
DEFAULT_TAIL_FACTOR = 6.0


def error_bound(params: RingParams) -> float:
    """Per-coefficient bound B on fresh error samples (truncated at 6 sigma)."""
    return 6.0 * params.sigma


@dataclass(frozen=True)
class NoiseEstimate:
    """A sub-Gaussian parameter plus any worst-case additive bound riding along."""

    subgaussian_param: float
    additive_bound: float = 0.0
    tail_factor: float = DEFAULT_TAIL_FACTOR

    @property
    def inf_norm_bound(self) -> float:
        return self.tail_factor * self.subgaussian_param + self.additive_bound

    def budget_bits_remaining(self, params: RingParams) -> float:
        cap = math.log2(params.q / (2 * params.t))
        if self.inf_norm_bound <= 0:
            return cap
        return cap - math.log2(self.inf_norm_bound)


def fresh_noise(params: RingParams, tail_factor: float = DEFAULT_TAIL_FACTOR) -> NoiseEstimate:
    """Fresh-ciphertext parameter sqrt(2n) * sigma."""
    return NoiseEstimate(math.sqrt(2 * params.n) * params.sigma, tail_factor=tail_factor)


def pmult_amplification(est: NoiseEstimate, params: RingParams) -> NoiseEstimate:
    """Plaintext multiplication scales the parameter by sqrt(n) * t / 2."""
    factor = math.sqrt(params.n) * params.t / 2
    return NoiseEstimate(
        est.subgaussian_param * factor, est.additive_bound * factor, est.tail_factor
    )


def automorphism_noise(
    params: RingParams, w_a: int, tail_factor: float = DEFAULT_TAIL_FACTOR
) -> NoiseEstimate:
    """Additive term per automorphism: parameter sqrt(l_A n) * sigma * w_A / 2."""
    l_a = decomp_digit_count(w_a, params.q)
    return NoiseEstimate(
        math.sqrt(l_a * params.n) * params.sigma * w_a / 2, tail_factor=tail_factor
    )


def _conv_noise_formula(
    params: RingParams, c_in: int, kernel: int, rotation_term: float
) -> float:
    return (
        kernel**2
        * math.sqrt(c_in)
        * math.sqrt(2 + rotation_term)
        * (params.t / 2)
        * params.n
        * params.sigma
    )


def conv_output_noise(
    params: RingParams,
    c_in: int,
    kernel: int,
    w_a: int,
    variant: str,
    tail_factor: float = DEFAULT_TAIL_FACTOR,
) -> NoiseEstimate:
    """Output parameter after one homomorphic convolution layer."""
    if variant not in VARIANTS:
        raise ParameterError(f"unknown convolution variant {variant!r}")
    l_a = decomp_digit_count(w_a, params.q)
    if variant == VARIANT_ROTATE_THEN_MULT:
        term = w_a**2 * l_a / 4
    else:
        term = w_a**2 * l_a / (params.t**2 * params.n)
    return NoiseEstimate(
        _conv_noise_formula(params, c_in, kernel, term), tail_factor=tail_factor
    )


def fc_output_noise(
    params: RingParams,
    dim: int,
    w_a: int,
    variant: str,
    tail_factor: float = DEFAULT_TAIL_FACTOR,
) -> NoiseEstimate:
    """Matrix-vector product via `dim` diagonals.

    Same per-term parameter as the convolution rows; the diagonals accumulate
    in quadrature (sqrt(dim)), mirroring the independent-channel treatment.
    """
    if variant not in VARIANTS:
        raise ParameterError(f"unknown convolution variant {variant!r}")
    l_a = decomp_digit_count(w_a, params.q)
    if variant == VARIANT_ROTATE_THEN_MULT:
        term = w_a**2 * l_a / 4
    else:
        term = w_a**2 * l_a / (params.t**2 * params.n)
    param = math.sqrt(dim) * math.sqrt(2 + term) * (params.t / 2) * params.n * params.sigma
    return NoiseEstimate(param, tail_factor=tail_factor)


def keyswitch_noise_bound(params: RingParams, w_sw: int) -> float:
    """Worst-case additive re-encryption noise l_SW * w_SW * B * n / 2."""
    l_sw = decomp_digit_count(w_sw, params.q)
    return l_sw * w_sw * error_bound(params) * params.n / 2


def layer_output_noise(
    params: RingParams, shape: tuple, w_a: int, variant: str
) -> NoiseEstimate:
    """Dispatch on ("conv", c_in, kernel) or ("fc", dim)."""
    if shape[0] == "conv":
        return conv_output_noise(params, shape[1], shape[2], w_a, variant)
    if shape[0] == "fc":
        return fc_output_noise(params, shape[1], w_a, variant)
    raise ParameterError(f"unknown linear layer kind {shape[0]!r}")


def _layer_rotates(shape: tuple) -> bool:
    """A single-tap, single-channel layer accumulates without any rotation."""
    if shape[0] == "conv":
        return shape[1] > 1 or shape[2] > 1
    return shape[1] > 1


@dataclass(frozen=True)
class BaseSelection:
    w_a: int
    w_sw: int
    worst_layer: int
    worst_budget_bits: float


def _powers_of_two_desc(params: RingParams):
    top = 1 << (params.q.bit_length())
    w = top
    while w >= 2:
        yield w
        w >>= 1


def select_bases(
    params: RingParams,
    shapes: list[tuple],
    safety_margin_bits: float,
    variant: str = VARIANT_MULT_THEN_ROTATE,
) -> BaseSelection:
    """Largest power-of-two bases keeping every layer above the safety margin.

    w_A is maximized first against the worst linear layer (re-encryption noise
    at its smallest feasible base included); w_SW is then maximized subject to
    consuming less than 25% of the headroom left after the first layer.
    First-layer estimates carry the key-switch bound; later layers restart
    from fresh proxy encryptions.
    """
    if not shapes:
        raise ParameterError("no linear layers to plan for")
    cap = params.q / (2 * params.t)

    def worst_case(w_a: int, ks_bound: float) -> tuple[int, float]:
        worst_idx, worst_bits = 0, math.inf
        for idx, shape in enumerate(shapes):
            if _layer_rotates(shape):
                est = layer_output_noise(params, shape, w_a, variant)
                bound = est.inf_norm_bound
            else:
                # no automorphism runs, so the base does not matter
                kind_scale = 1 if shape[0] == "conv" else math.sqrt(shape[1])
                bound = DEFAULT_TAIL_FACTOR * kind_scale * _conv_noise_formula(
                    params, 1, 1, 0.0
                )
            bound += ks_bound if idx == 0 else 0.0
            bits = math.log2(cap / bound) if bound > 0 else math.inf
            if bits < worst_bits:
                worst_idx, worst_bits = idx, bits
        return worst_idx, worst_bits

    ks_min = keyswitch_noise_bound(params, 2)
    chosen_wa = None
    for w_a in _powers_of_two_desc(params):
        _, bits = worst_case(w_a, ks_min)
        if bits >= safety_margin_bits:
            chosen_wa = w_a
            break
    if chosen_wa is None:
        idx, bits = worst_case(2, ks_min)
        raise ParameterError(
            f"infeasible at (n={params.n}, t={params.t}, q={params.q}, "
            f"sigma={params.sigma}): layer {idx} leaves {bits:.1f} bits "
            f"< margin {safety_margin_bits}"
        )

    first_bound = layer_output_noise(params, shapes[0], chosen_wa, variant).inf_norm_bound
    headroom = cap - first_bound
    chosen_wsw = 2
    for w_sw in _powers_of_two_desc(params):
        ks = keyswitch_noise_bound(params, w_sw)
        if ks >= 0.25 * headroom:
            continue
        _, bits = worst_case(chosen_wa, ks)
        if bits >= safety_margin_bits:
            chosen_wsw = w_sw
            break
    idx, bits = worst_case(chosen_wa, keyswitch_noise_bound(params, chosen_wsw))
    return BaseSelection(chosen_wa, chosen_wsw, idx, bits)
