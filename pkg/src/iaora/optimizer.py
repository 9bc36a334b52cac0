"""Practical-regime parameter search and protocol crossover scanning.

The search is exhaustive over a (gain threshold, rate) grid, exactly as the
operating points in the lookup tables were found. Every grid point is
evaluated on the same realizations (common random numbers), which makes the
argmax stable under Monte-Carlo noise; comparisons between nearby points then
share most of their noise. The leakage threshold is never searched: it is
recovered from the gain threshold through the access-probability relation, so
the per-user transmit probability stays 1/N across the whole surface.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analytics import (
    InfeasibleThresholdError,
    NetworkConfig,
    ProtocolParams,
    invert_threshold_relation,
)
from .channel import CaitErrorModel, draw_gain_batch
from .engine import DEFAULT_BATCH_SIZE, ThroughputStats, _batch_spans, run_trials, singleton_sinr
from .protocols import ProtocolKind, ia_ora_mask

# Salt for the seed used when re-evaluating a found optimum, so the evaluation
# slots never coincide with the slots that selected it.
_EVAL_SEED_SALT = 0x9E3779B97F4A7C15
_U64 = (1 << 64) - 1


class NoOptimumError(ValueError):
    """Every grid point was infeasible; no operating point exists on the grid."""


@dataclass(frozen=True)
class GridSpec:
    """Exhaustive-search grid over gain thresholds and PHY rates."""

    phi_g_values: tuple
    rate_values: tuple
    slots_per_point: int

    def __post_init__(self):
        object.__setattr__(self, "phi_g_values", tuple(float(v) for v in self.phi_g_values))
        object.__setattr__(self, "rate_values", tuple(float(v) for v in self.rate_values))
        for name in ("phi_g_values", "rate_values"):
            vals = getattr(self, name)
            if len(vals) == 0:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be strictly ascending")
        if self.slots_per_point < 1000:
            raise ValueError(
                f"slots_per_point must be at least 1000 for meaningful estimates, "
                f"got {self.slots_per_point}"
            )

    @classmethod
    def default(cls, slots_per_point: int = 20000) -> "GridSpec":
        """Gain threshold 0.1..6.0 step 0.1, rate 0.5..8.0 step 0.05."""
        return cls(
            phi_g_values=tuple(np.round(np.arange(0.1, 6.0 + 1e-9, 0.1), 10)),
            rate_values=tuple(np.round(np.arange(0.5, 8.0 + 1e-9, 0.05), 10)),
            slots_per_point=slots_per_point,
        )


@dataclass(frozen=True)
class Optimum:
    """Best grid point plus the full throughput surface it was chosen from.

    full_surface rows are (phi_g, rate, throughput, stderr); infeasible gain
    thresholds appear with throughput -inf and stderr NaN.
    """

    phi_g_star: float
    rate_star: float
    phi_i_star: float
    throughput_at_star: float
    full_surface: list


def _surface_batch(cfg, phi_g_values, phi_i_values, thresholds, master_seed, start, count):
    """Decoded-cell count sums (and squares) per grid point for one slot batch."""
    n_pg = len(phi_g_values)
    n_r = thresholds.shape[0]
    cnt = np.zeros((n_pg, n_r))
    cnt2 = np.zeros((n_pg, n_r))
    gains, _ = draw_gain_batch(cfg, master_seed, start, count)
    noise = 1.0 / cfg.snr
    for ip, (pg, pi) in enumerate(zip(phi_g_values, phi_i_values)):
        if pi is None:
            continue
        tx = ia_ora_mask(gains, pg, pi)
        single, sinr = singleton_sinr(gains, tx, noise)
        decoded = single[:, :, None] & (sinr[:, :, None] > thresholds[None, None, :])
        cells = decoded.sum(axis=1)  # (count, n_r)
        cnt[ip] += cells.sum(axis=0)
        cnt2[ip] += (cells * cells).sum(axis=0)
    return cnt, cnt2


def _surface_batch_star(args):
    return _surface_batch(*args)


def grid_search(
    cfg: NetworkConfig,
    grid: GridSpec,
    master_seed: int,
    workers: int = 1,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> Optimum:
    """Evaluate the whole (phi_g, rate) surface and return the argmax.

    All points see the same channel realizations (same master_seed), so the
    returned optimum is deterministic given (grid, master_seed). Gain
    thresholds with no feasible leakage threshold are recorded at -inf and
    skipped; if none is feasible, NoOptimumError is raised.
    """
    phi_i_values = []
    for pg in grid.phi_g_values:
        try:
            phi_i_values.append(invert_threshold_relation(pg, cfg))
        except InfeasibleThresholdError:
            phi_i_values.append(None)
    if all(pi is None for pi in phi_i_values):
        raise NoOptimumError(
            f"no gain threshold on the grid admits a leakage threshold for K={cfg.K}, N={cfg.N}"
        )

    rates = np.asarray(grid.rate_values)
    thresholds = 2.0 ** rates - 1.0
    slots = grid.slots_per_point
    spans = _batch_spans(slots, batch_size)
    args = [
        (cfg, grid.phi_g_values, phi_i_values, thresholds, master_seed, start, count)
        for start, count in spans
    ]
    if workers > 1 and len(spans) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(_surface_batch_star, args, chunksize=1))
    else:
        partials = [_surface_batch(*a) for a in args]

    cnt = np.zeros((len(grid.phi_g_values), rates.size))
    cnt2 = np.zeros_like(cnt)
    for p_cnt, p_cnt2 in partials:
        cnt += p_cnt
        cnt2 += p_cnt2

    throughput = rates[None, :] * cnt / slots
    if slots > 1:
        var = np.maximum(0.0, (cnt2 - cnt * cnt / slots) / (slots - 1))
        stderr = rates[None, :] * np.sqrt(var / slots)
    else:
        stderr = np.zeros_like(throughput)

    surface = []
    for ip, pg in enumerate(grid.phi_g_values):
        for ir, r in enumerate(rates):
            if phi_i_values[ip] is None:
                surface.append((pg, float(r), -math.inf, math.nan))
            else:
                surface.append((pg, float(r), float(throughput[ip, ir]), float(stderr[ip, ir])))

    masked = np.where(
        np.asarray([pi is not None for pi in phi_i_values])[:, None], throughput, -np.inf
    )
    best = np.unravel_index(int(np.argmax(masked)), masked.shape)
    phi_g_star = grid.phi_g_values[best[0]]
    return Optimum(
        phi_g_star=phi_g_star,
        rate_star=float(rates[best[1]]),
        phi_i_star=phi_i_values[best[0]],
        throughput_at_star=float(throughput[best]),
        full_surface=surface,
    )


def optimum_params(opt: Optimum, epsilon: float = 0.01, delta: float = 0.1) -> ProtocolParams:
    """Package a found optimum as protocol parameters (nu plays no role here)."""
    return ProtocolParams(
        phi_g=opt.phi_g_star,
        phi_i=opt.phi_i_star,
        rate=opt.rate_star,
        nu=0,
        epsilon=epsilon,
        delta=delta,
    )


def evaluate_protocol(
    cfg: NetworkConfig,
    kind: ProtocolKind,
    slots: int,
    master_seed: int,
    err: CaitErrorModel = CaitErrorModel(),
    grid: GridSpec | None = None,
    params: ProtocolParams | None = None,
    workers: int = 1,
) -> tuple[ThroughputStats, ProtocolParams | None]:
    """Throughput of one protocol at its own operating point.

    The interference-aware protocol runs at `params` if given, otherwise at
    the optimum of a grid search (fresh evaluation slots, salted seed). The
    conventional opportunistic baseline is evaluated in its native single-cell
    deployment, the K = 1 special case of the two-threshold rule; plain
    slotted ALOHA runs inside the full K-cell network.
    """
    if kind is ProtocolKind.IA_ORA:
        if params is None:
            opt = grid_search(cfg, grid or GridSpec.default(), master_seed, workers=workers)
            params = optimum_params(opt)
        eval_seed = (master_seed ^ _EVAL_SEED_SALT) & _U64
        return run_trials(cfg, kind, params, err, slots, eval_seed, workers=workers), params
    if kind is ProtocolKind.ORA:
        cfg_single = NetworkConfig(K=1, N=cfg.N, snr=cfg.snr, p=cfg.p)
        return run_trials(cfg_single, kind, None, err, slots, master_seed, workers=workers), None
    if kind is ProtocolKind.SLOTTED_ALOHA:
        return run_trials(cfg, kind, None, err, slots, master_seed, workers=workers), None
    raise ValueError(f"unknown protocol kind: {kind}")


def find_crossover(snr_values_db, throughput_a, throughput_b):
    """First SNR where the ordering of two throughput curves flips.

    Linear interpolation between the adjacent sweep points gives both the
    crossover SNR and the common throughput there. Returns None when the
    ordering never flips (including identical curves).
    """
    diffs = [a - b for a, b in zip(throughput_a, throughput_b)]
    prev_sign = 0
    for i, d in enumerate(diffs):
        sign = (d > 0) - (d < 0)
        if sign == 0:
            continue  # an exact tie alone is not a flip (identical curves never cross)
        if prev_sign != 0 and sign != prev_sign:
            d0, d1 = diffs[i - 1], d
            frac = d0 / (d0 - d1)
            snr = snr_values_db[i - 1] + frac * (snr_values_db[i] - snr_values_db[i - 1])
            thr = throughput_a[i - 1] + frac * (throughput_a[i] - throughput_a[i - 1])
            return float(snr), float(thr)
        prev_sign = sign
    return None


def crossover_scan(
    cfg_base: NetworkConfig,
    snr_values_db,
    kinds: tuple,
    slots: int,
    master_seed: int,
    grid: GridSpec | None = None,
    workers: int = 1,
):
    """Sweep SNR, run both protocols at their own operating points, locate the crossover.

    Returns (crossover, sweep) where crossover is (snr_db, throughput) or None
    and sweep maps each protocol kind to its per-SNR throughput list.
    """
    if len(snr_values_db) < 2:
        raise ValueError("need at least two SNR values to scan for a crossover")
    if any(b <= a for a, b in zip(snr_values_db, snr_values_db[1:])):
        raise ValueError("snr_values_db must be strictly ascending")
    kind_a, kind_b = kinds
    curves = {kind: [] for kind in (kind_a, kind_b)}
    for db in snr_values_db:
        snr = 10.0 ** (db / 10.0)
        cfg = NetworkConfig(K=cfg_base.K, N=cfg_base.N, snr=snr, p=cfg_base.p)
        for kind in curves:
            stats, _ = evaluate_protocol(
                cfg, kind, slots, master_seed, grid=grid, workers=workers
            )
            curves[kind].append(stats.aggregate_phy_throughput)
    if kind_a == kind_b:
        return None, curves
    crossover = find_crossover(snr_values_db, curves[kind_a], curves[kind_b])
    return crossover, curves
