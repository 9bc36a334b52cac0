"""Monte-Carlo slot simulation under the SINR capture model.

Slots are statistically independent (quasi-static i.i.d. fading), so a run is
vectorized trial sampling over fixed-size slot batches rather than an
event-driven simulation. Each slot's randomness comes from its own counter
addressed stream, and per-batch partial sums are combined in batch-index
order, so a run's output is bit-identical regardless of how many workers
processed it. Changing the batch size regroups floating-point sums and may
move results by an ulp; worker count never does.

Decoding rule per cell and slot: zero own-cell transmitters is an idle slot;
two or more is a collision and nothing is decoded; exactly one is decoded iff
its SINR strictly exceeds 2^rate - 1, with the interference summing the true
gains of every other-cell transmitter. Decisions may be taken on perceived
gains, but SINR always uses the true ones.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytics import NetworkConfig, ProtocolParams
from .channel import (
    CaitErrorModel,
    ChannelRealization,
    TAG_DECISION,
    SlotStream,
    draw_gain_batch,
    perceive_gain_batch,
)
from .protocols import (
    ProtocolKind,
    TransmissionDecision,
    aloha_rate,
    ia_ora_mask,
    ora_mask,
    ora_rate,
    ora_threshold,
    own_and_leakage,
)

DEFAULT_BATCH_SIZE = 4096


@dataclass(frozen=True)
class SlotOutcome:
    """Everything observable about one simulated slot.

    transmitters_per_cell holds the sorted transmitting user indices of each
    cell. sinr_per_cell is NaN wherever the cell had no lone transmitter.
    total_interferers counts transmitters network-wide; the interferer count
    seen by cell j is that total minus cell j's own transmitter count.
    """

    transmitters_per_cell: list
    sinr_per_cell: np.ndarray
    decoded_per_cell: np.ndarray
    delivered_rate: float
    total_interferers: int


@dataclass(frozen=True)
class ThroughputStats:
    """Aggregates over a run of independent slots.

    aggregate_phy_throughput is the mean delivered rate per slot (bits/s/Hz,
    summed over cells). mac_throughput_per_cell is the fraction of (slot,
    cell) pairs with exactly one transmitter. empirical_ps is estimated
    conditionally on single-transmitter slots, per cell, then averaged over
    cells (NaN if no cell ever had a lone transmitter). stderr is the sample
    standard deviation of per-slot delivered rate divided by sqrt(slots).
    """

    aggregate_phy_throughput: float
    mac_throughput_per_cell: float
    empirical_p: float
    empirical_ps: float
    slot_count: int
    stderr: float


def singleton_sinr(gains: np.ndarray, tx: np.ndarray, noise: float, zero_interference: bool = False):
    """Per-cell singleton flags and SINRs for a batch of slots.

    gains has shape (S, K, N, K) (true gains), tx shape (S, K, N). Returns
    (single, sinr), both (S, K); sinr is only meaningful where single holds.
    The interference at AP j sums every other-cell transmitter's true gain
    toward j; own-cell collisions are excluded by the singleton flag itself.
    """
    own, _ = own_and_leakage(gains)
    n_per_cell = tx.sum(axis=2)
    single = n_per_cell == 1
    signal = np.where(tx, own, 0.0).sum(axis=2)
    if zero_interference:
        interference = 0.0
    else:
        # contrib[s, k, j]: summed gain of cell k's transmitters at AP j
        contrib = np.einsum("skij,ski->skj", gains, tx.astype(np.float64))
        jj = np.arange(gains.shape[1])
        interference = contrib.sum(axis=1) - contrib[:, jj, jj]
    with np.errstate(invalid="ignore"):
        sinr = signal / (noise + interference)
    return single, sinr


def simulate_slot(
    real: ChannelRealization,
    decision: TransmissionDecision,
    cfg: NetworkConfig,
    zero_interference: bool = False,
) -> SlotOutcome:
    """Resolve one slot: idle/collision bookkeeping, capture test, delivered rate."""
    if decision.transmits.shape != (cfg.K, cfg.N):
        raise ValueError(
            f"decision shape {decision.transmits.shape} does not match (K, N) = "
            f"({cfg.K}, {cfg.N})"
        )
    tx = decision.transmits
    single, sinr = singleton_sinr(
        real.gains[None], tx[None], 1.0 / cfg.snr, zero_interference
    )
    single, sinr = single[0], sinr[0]
    threshold = 2.0 ** decision.rate - 1.0
    decoded = single & (sinr > threshold)
    return SlotOutcome(
        transmitters_per_cell=[np.flatnonzero(tx[j]) for j in range(cfg.K)],
        sinr_per_cell=np.where(single, sinr, np.nan),
        decoded_per_cell=decoded,
        delivered_rate=decision.rate * int(decoded.sum()),
        total_interferers=int(tx.sum()),
    )


def _transmit_masks(cfg, kind, params, err, master_seed, batch_start, count, gains, coeffs):
    """Transmit mask and rate for one batch under the given protocol."""
    if kind is ProtocolKind.SLOTTED_ALOHA:
        stream = SlotStream(master_seed, TAG_DECISION)
        uniforms = np.empty((count, cfg.K, cfg.N))
        for i in range(count):
            uniforms[i] = stream.at(batch_start + i).random((cfg.K, cfg.N))
        return uniforms < cfg.p, aloha_rate(cfg)
    if err.sigma2 > 0.0:
        perceived = perceive_gain_batch(coeffs, err, master_seed, batch_start)
    else:
        perceived = gains
    if kind is ProtocolKind.IA_ORA:
        return ia_ora_mask(perceived, params.phi_g, params.phi_i), params.rate
    if kind is ProtocolKind.ORA:
        return ora_mask(perceived, ora_threshold(cfg)), ora_rate(cfg)
    raise ValueError(f"unknown protocol kind: {kind}")


def _batch_partials(
    cfg: NetworkConfig,
    kind: ProtocolKind,
    params,
    err: CaitErrorModel,
    master_seed: int,
    batch_start: int,
    count: int,
    zero_interference: bool,
):
    """Partial sums for slots [batch_start, batch_start + count)."""
    need_coeffs = err.sigma2 > 0.0 and kind is not ProtocolKind.SLOTTED_ALOHA
    gains, coeffs = draw_gain_batch(cfg, master_seed, batch_start, count, with_coeffs=need_coeffs)
    tx, rate = _transmit_masks(
        cfg, kind, params, err, master_seed, batch_start, count, gains, coeffs
    )
    single, sinr = singleton_sinr(gains, tx, 1.0 / cfg.snr, zero_interference)
    decoded = single & (sinr > 2.0 ** rate - 1.0)
    decoded_cells = decoded.sum(axis=1)
    d = rate * decoded_cells
    return (
        float(d.sum()),
        float((d * d).sum()),
        single.sum(axis=0).astype(np.int64),
        decoded.sum(axis=0).astype(np.int64),
        int(tx.sum()),
    )


def _batch_spans(slots: int, batch_size: int):
    return [(s, min(batch_size, slots - s)) for s in range(0, slots, batch_size)]


def run_trials(
    cfg: NetworkConfig,
    kind: ProtocolKind,
    params: ProtocolParams | None,
    err: CaitErrorModel,
    slots: int,
    master_seed: int,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
    zero_interference: bool = False,
) -> ThroughputStats:
    """Average independent slot outcomes into throughput statistics.

    Deterministic given master_seed and batch_size; the worker count only
    distributes batches and never changes the result. params is required for
    the interference-aware protocol and ignored by the two baselines, whose
    operating points are fixed by the network config.
    """
    if slots < 1:
        raise ValueError(f"slots must be positive, got {slots}")
    if kind is ProtocolKind.IA_ORA:
        if params is None:
            raise ValueError("the interference-aware protocol requires params")
        params.check_against(cfg)
    spans = _batch_spans(slots, batch_size)
    args = [
        (cfg, kind, params, err, master_seed, start, count, zero_interference)
        for start, count in spans
    ]
    if workers > 1 and len(spans) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_batch_partials_star, args, chunksize=1))
    else:
        partials = [_batch_partials(*a) for a in args]

    sum_d = 0.0
    sum_d2 = 0.0
    singles = np.zeros(cfg.K, dtype=np.int64)
    decodes = np.zeros(cfg.K, dtype=np.int64)
    tx_total = 0
    for p_d, p_d2, p_single, p_dec, p_tx in partials:
        sum_d += p_d
        sum_d2 += p_d2
        singles += p_single
        decodes += p_dec
        tx_total += p_tx

    mean_d = sum_d / slots
    if slots > 1:
        var = max(0.0, (sum_d2 - sum_d * sum_d / slots) / (slots - 1))
        stderr = math.sqrt(var / slots)
    else:
        stderr = 0.0
    observed = singles > 0
    if observed.any():
        ps = float(np.mean(decodes[observed] / singles[observed]))
    else:
        ps = math.nan
    return ThroughputStats(
        aggregate_phy_throughput=mean_d,
        mac_throughput_per_cell=float(singles.sum()) / (slots * cfg.K),
        empirical_p=tx_total / (slots * cfg.K * cfg.N),
        empirical_ps=ps,
        slot_count=slots,
        stderr=stderr,
    )


def _batch_partials_star(args):
    return _batch_partials(*args)
