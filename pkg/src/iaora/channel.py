"""Per-slot Rayleigh fading realizations and the gain estimates users act on.

Randomness is organized as counter-based Philox streams addressed by
(master_seed, stream_tag, slot_index): the 128-bit Philox key holds the seed
and a stream tag, and each slot owns a disjoint 2^128-block counter range.
Any slot's draw is therefore computable independently of every other slot,
which makes results independent of execution order and worker count.

Streams: CHANNEL carries the fading coefficients, CAIT the estimation-error
perturbations, DECISION the channel-oblivious transmit coin flips. Keeping
CAIT draws on their own stream means runs that differ only in the error
variance share identical true channels for a given master seed.
"""

from dataclasses import dataclass

import numpy as np

from .analytics import NetworkConfig

_U64 = (1 << 64) - 1

TAG_CHANNEL = 0
TAG_CAIT = 1
TAG_DECISION = 2


@dataclass(frozen=True)
class CaitErrorModel:
    """Gaussian perturbation of the channel coefficients seen by transmitters.

    sigma2 is the variance of the complex error added to each coefficient;
    0 means perfect channel-amplitude knowledge.
    """

    sigma2: float = 0.0

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError(f"sigma2 must be nonnegative, got {self.sigma2}")


@dataclass(frozen=True)
class ChannelRealization:
    """One slot's fading state.

    coeffs[j, i, k] is the complex coefficient from user i of cell j to AP k;
    gains is elementwise |coeffs|^2. Coefficients are retained because the
    estimation-error model perturbs coefficients, not gains.
    """

    coeffs: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        if self.coeffs.ndim != 3 or self.coeffs.shape[0] != self.coeffs.shape[2]:
            raise ValueError(f"expected (K, N, K) coefficients, got {self.coeffs.shape}")
        if self.gains.shape != self.coeffs.shape:
            raise ValueError("gains and coeffs shapes differ")
        expected = self.coeffs.real * self.coeffs.real + self.coeffs.imag * self.coeffs.imag
        if not np.array_equal(self.gains, expected):
            raise ValueError("gains are not the squared magnitudes of coeffs")


class SlotStream:
    """Reusable cursor over the per-slot Philox streams of one (seed, tag) pair.

    Repositioning mutates the counter of a single Philox instance, which is
    bit-identical to constructing Philox(key=(seed, tag), counter=slot << 128)
    from scratch but roughly twice as fast.
    """

    def __init__(self, master_seed: int, tag: int):
        key = np.array([master_seed & _U64, tag & _U64], dtype=np.uint64)
        self._bg = np.random.Philox(key=key)
        self._state = self._bg.state
        self.generator = np.random.Generator(self._bg)

    def at(self, slot_index: int) -> np.random.Generator:
        """Position the stream at the start of `slot_index`'s counter block."""
        if slot_index < 0:
            raise ValueError(f"slot_index must be nonnegative, got {slot_index}")
        st = self._state
        st["state"]["counter"][:] = (0, 0, slot_index & _U64, slot_index >> 64)
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self.generator


def _draw_coeffs(gen: np.random.Generator, shape: tuple) -> np.ndarray:
    parts = gen.standard_normal((2,) + shape)
    return np.sqrt(0.5) * (parts[0] + 1j * parts[1])


def draw_realization(cfg: NetworkConfig, seed: int, slot_index: int = 0) -> ChannelRealization:
    """Draw one slot's i.i.d. CN(0, 1) coefficients; gains come out Exp(1).

    Fully determined by (cfg dimensions, seed, slot_index): calling twice with
    the same arguments replays the identical realization.
    """
    gen = SlotStream(seed, TAG_CHANNEL).at(slot_index)
    coeffs = _draw_coeffs(gen, (cfg.K, cfg.N, cfg.K))
    gains = coeffs.real * coeffs.real + coeffs.imag * coeffs.imag
    return ChannelRealization(coeffs=coeffs, gains=gains)


def draw_gain_batch(
    cfg: NetworkConfig, seed: int, slot_start: int, count: int, with_coeffs: bool = False
):
    """Stack `count` consecutive slots' gains (and optionally coefficients).

    Equivalent to stacking draw_realization for slot_start, ..., slot_start+count-1.
    Returns (gains, coeffs); coeffs is None unless requested, since most runs
    (perfect gain knowledge) never touch the coefficients again.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    stream = SlotStream(seed, TAG_CHANNEL)
    shape = (cfg.K, cfg.N, cfg.K)
    gains = np.empty((count,) + shape)
    coeffs = np.empty((count,) + shape, dtype=np.complex128) if with_coeffs else None
    for i in range(count):
        c = _draw_coeffs(stream.at(slot_start + i), shape)
        if coeffs is not None:
            coeffs[i] = c
        gains[i] = c.real * c.real + c.imag * c.imag
    return gains, coeffs


def perceived_gains(
    real: ChannelRealization, err: CaitErrorModel, seed: int, slot_index: int = 0
) -> np.ndarray:
    """Gains as estimated at the transmitters: |h + dh|^2 with dh ~ CN(0, sigma2).

    Error draws are fresh and i.i.d. per slot, matching the quasi-static
    channel model. sigma2 = 0 returns the true gains unchanged (same array
    values, no randomness consumed).
    """
    if err.sigma2 == 0.0:
        return real.gains
    gen = SlotStream(seed, TAG_CAIT).at(slot_index)
    noise = np.sqrt(err.sigma2) * _draw_coeffs(gen, real.coeffs.shape)
    perturbed = real.coeffs + noise
    return perturbed.real * perturbed.real + perturbed.imag * perturbed.imag


def perceive_gain_batch(
    coeffs: np.ndarray, err: CaitErrorModel, seed: int, slot_start: int
) -> np.ndarray:
    """Batched perceived gains for stacked coefficients of consecutive slots."""
    count = coeffs.shape[0]
    out = np.empty((count,) + coeffs.shape[1:])
    stream = SlotStream(seed, TAG_CAIT)
    scale = np.sqrt(err.sigma2)
    for i in range(count):
        noise = scale * _draw_coeffs(stream.at(slot_start + i), coeffs.shape[1:])
        perturbed = coeffs[i] + noise
        out[i] = perturbed.real * perturbed.real + perturbed.imag * perturbed.imag
    return out


def decision_uniform_batch(
    cfg: NetworkConfig, seed: int, slot_start: int, count: int
) -> np.ndarray:
    """Per-user uniforms for channel-oblivious transmit decisions, one (K, N) block per slot."""
    stream = SlotStream(seed, TAG_DECISION)
    out = np.empty((count, cfg.K, cfg.N))
    for i in range(count):
        out[i] = stream.at(slot_start + i).random((cfg.K, cfg.N))
    return out
