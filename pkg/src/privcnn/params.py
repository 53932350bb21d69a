"""Named parameter presets and the run configuration consumed by the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParameterError
from .ring import RingParams

# 19-bit plaintext modulus / 60-bit ciphertext modulus regime, two ring sizes.
PRESETS: dict[str, RingParams] = {
    "micro": RingParams(n=8, q=8161, t=17, sigma=1.0),
    "small": RingParams(n=64, q=1152921504606851201, t=7937, sigma=2.0),
    "toy": RingParams(n=2048, q=1152921504606830593, t=520193, sigma=4.0),
    "paper": RingParams(n=4096, q=1152921504606830593, t=417793, sigma=4.0),
}

KEY_MODE_ALL = "all-keys"
KEY_MODE_LOG = "log-keys"

GC_MODE_MOD_T = "mod_t"
GC_MODE_TRUNCATED = "truncated"

OT_DEALER = "dealer"
OT_BASE = "base_ot"


def get_preset(name: str) -> RingParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ParameterError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None


@dataclass
class RunConfig:
    """Operator-facing knobs for a protocol run."""

    preset: str = "toy"
    key_mode: str = KEY_MODE_LOG
    gc_mode: str = GC_MODE_TRUNCATED
    lam: int = 40
    seed: int = 0
    ot_mode: str = OT_DEALER
    fuse_pool: bool = True
    safety_margin_bits: float = 1.0
    escrow: bool = False
    params_override: RingParams | None = None

    def __post_init__(self):
        if self.key_mode not in (KEY_MODE_ALL, KEY_MODE_LOG):
            raise ParameterError(f"unknown key mode {self.key_mode!r}")
        if self.gc_mode not in (GC_MODE_MOD_T, GC_MODE_TRUNCATED):
            raise ParameterError(f"unknown gc mode {self.gc_mode!r}")
        if self.ot_mode not in (OT_DEALER, OT_BASE):
            raise ParameterError(f"unknown ot mode {self.ot_mode!r}")
        if self.lam < 1:
            raise ParameterError("lambda must be >= 1")
        if self.params_override is None:
            get_preset(self.preset)

    @property
    def params(self) -> RingParams:
        if self.params_override is not None:
            return self.params_override
        return get_preset(self.preset)
