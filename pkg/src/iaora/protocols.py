"""Per-user transmission rules for the three protocols under comparison.

All decision functions are pure: interference-aware and opportunistic
decisions depend only on the perceived gains and the thresholds, and only the
plain slotted-ALOHA rule consumes randomness. Threshold comparisons follow
the printed conditions exactly: >= for the own-cell gain, <= for the leakage
sum. Ties have probability zero under continuous fading, but the convention
matters for crafted inputs.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .analytics import NetworkConfig, ProtocolParams
from .channel import SlotStream, TAG_DECISION


class ProtocolKind(enum.Enum):
    IA_ORA = "ia-ora"
    ORA = "ora"
    SLOTTED_ALOHA = "slotted-aloha"


@dataclass(frozen=True)
class TransmissionDecision:
    """Transmit flags for every (cell, user) plus the single shared PHY rate."""

    transmits: np.ndarray
    rate: float


def own_and_leakage(perceived: np.ndarray):
    """Split a (..., K, N, K) gain tensor into own-cell gains and leakage sums.

    own[..., j, i] is the gain of user i in cell j toward its serving AP;
    leakage[..., j, i] is that user's summed gain toward all other APs
    (zero when K = 1).
    """
    own = np.swapaxes(np.diagonal(perceived, axis1=-3, axis2=-1), -1, -2)
    leakage = perceived.sum(axis=-1) - own
    return own, leakage


def ia_ora_mask(perceived: np.ndarray, phi_g: float, phi_i: float) -> np.ndarray:
    """Boolean transmit mask for the two-threshold rule, batched over leading axes."""
    own, leakage = own_and_leakage(perceived)
    return (own >= phi_g) & (leakage <= phi_i)


def ora_mask(perceived: np.ndarray, phi_g: float) -> np.ndarray:
    """Boolean transmit mask for the single-threshold opportunistic rule."""
    own, _ = own_and_leakage(perceived)
    return own >= phi_g


def decide_ia_ora(
    perceived: np.ndarray, params: ProtocolParams, cfg: NetworkConfig
) -> TransmissionDecision:
    """Interference-aware rule: transmit iff own gain >= phi_g and leakage <= phi_i.

    Decisions are taken on the perceived gains only; the true gains never
    enter. With K = 1 the leakage condition holds vacuously and the rule
    reduces to the single-cell opportunistic one.
    """
    _check_dims(perceived, cfg)
    return TransmissionDecision(
        transmits=ia_ora_mask(perceived, params.phi_g, params.phi_i), rate=params.rate
    )


def ora_threshold(cfg: NetworkConfig) -> float:
    """Single-cell opportunistic gain threshold ln(N), giving transmit probability 1/N."""
    return math.log(cfg.N)


def ora_rate(cfg: NetworkConfig) -> float:
    """Single-cell opportunistic PHY rate log2(1 + ln(N) * snr)."""
    return math.log1p(ora_threshold(cfg) * cfg.snr) / math.log(2.0)


def decide_ora(perceived: np.ndarray, cfg: NetworkConfig) -> TransmissionDecision:
    """Conventional opportunistic rule: consult the own-cell gain only.

    Threshold ln(N) keeps the transmit probability at 1/N; the rate assumes an
    interference-free link at the threshold gain.
    """
    _check_dims(perceived, cfg)
    return TransmissionDecision(
        transmits=ora_mask(perceived, ora_threshold(cfg)), rate=ora_rate(cfg)
    )


def aloha_rate(cfg: NetworkConfig) -> float:
    """Plain slotted-ALOHA PHY rate log2(1 + snr), oblivious to fading."""
    return math.log1p(cfg.snr) / math.log(2.0)


def decide_aloha(cfg: NetworkConfig, seed: int, slot_index: int = 0) -> TransmissionDecision:
    """Plain slotted ALOHA: transmit with probability p regardless of the channel."""
    uniforms = SlotStream(seed, TAG_DECISION).at(slot_index).random((cfg.K, cfg.N))
    return TransmissionDecision(transmits=uniforms < cfg.p, rate=aloha_rate(cfg))


def _check_dims(perceived: np.ndarray, cfg: NetworkConfig):
    if perceived.shape[-3:] != (cfg.K, cfg.N, cfg.K):
        raise ValueError(
            f"gain tensor shape {perceived.shape} does not match (K, N, K) = "
            f"({cfg.K}, {cfg.N}, {cfg.K})"
        )
