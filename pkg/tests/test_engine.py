"""Slot resolution and trial aggregation: arithmetic oracles, determinism, dual routes."""

import math

import numpy as np
import pytest

from iaora.analytics import NetworkConfig, ProtocolParams, design_protocol_params
from iaora.channel import CaitErrorModel, ChannelRealization, draw_realization, perceived_gains
from iaora.engine import run_trials, simulate_slot
from iaora.protocols import (
    ProtocolKind,
    TransmissionDecision,
    decide_aloha,
    decide_ia_ora,
    decide_ora,
)

NO_ERR = CaitErrorModel()


def realization_with_gains(gains):
    """Wrap prescribed gains as a realization (coefficients on the real axis)."""
    coeffs = np.sqrt(gains).astype(complex)
    return ChannelRealization(coeffs=coeffs, gains=coeffs.real**2 + coeffs.imag**2)


def decision(transmits, rate):
    return TransmissionDecision(transmits=np.asarray(transmits, dtype=bool), rate=rate)


class TestSimulateSlot:
    def test_idle_slot(self):
        cfg = NetworkConfig(K=2, N=2, snr=10.0)
        real = draw_realization(cfg, seed=1)
        out = simulate_slot(real, decision(np.zeros((2, 2)), 2.0), cfg)
        assert out.delivered_rate == 0.0
        assert not out.decoded_per_cell.any()
        assert out.total_interferers == 0
        assert all(len(t) == 0 for t in out.transmitters_per_cell)
        assert np.isnan(out.sinr_per_cell).all()

    def test_collision_never_decodes(self):
        cfg = NetworkConfig(K=1, N=2, snr=10.0)
        # both users have huge gains, still a collision
        real = realization_with_gains(np.full((1, 2, 1), 100.0))
        out = simulate_slot(real, decision([[1, 1]], 0.1), cfg)
        assert not out.decoded_per_cell[0]
        assert out.delivered_rate == 0.0

    def test_two_cell_hand_computation(self):
        # cell 0: lone transmitter user 0; cell 1: lone transmitter user 1
        cfg = NetworkConfig(K=2, N=2, snr=10.0)
        g = np.zeros((2, 2, 2))
        g[0, 0] = [3.0, 0.4]   # signal 3.0 at AP0, leaks 0.4 into AP1
        g[0, 1] = [9.9, 9.9]   # idle user, values irrelevant
        g[1, 1] = [0.7, 2.0]   # leaks 0.7 into AP0, signal 2.0 at AP1
        g[1, 0] = [5.5, 5.5]   # idle user
        real = realization_with_gains(g)
        tx = [[1, 0], [0, 1]]
        rate = 1.5
        out = simulate_slot(real, decision(tx, rate), cfg)
        sinr0 = 3.0 / (0.1 + 0.7)
        sinr1 = 2.0 / (0.1 + 0.4)
        assert out.sinr_per_cell[0] == pytest.approx(sinr0, rel=1e-12)
        assert out.sinr_per_cell[1] == pytest.approx(sinr1, rel=1e-12)
        threshold = 2.0**rate - 1.0  # 1.8284...
        assert out.decoded_per_cell.tolist() == [sinr0 > threshold, sinr1 > threshold]
        assert out.delivered_rate == rate * out.decoded_per_cell.sum()
        assert out.total_interferers == 2
        assert [t.tolist() for t in out.transmitters_per_cell] == [[0], [1]]

    def test_capture_is_strictly_above_threshold(self):
        cfg = NetworkConfig(K=1, N=1, snr=10.0)
        rate = 2.0
        threshold = 2.0**rate - 1.0
        at = realization_with_gains(np.full((1, 1, 1), threshold / cfg.snr))
        above = realization_with_gains(np.full((1, 1, 1), threshold / cfg.snr * (1 + 1e-9)))
        assert not simulate_slot(at, decision([[1]], rate), cfg).decoded_per_cell[0]
        assert simulate_slot(above, decision([[1]], rate), cfg).decoded_per_cell[0]

    def test_interference_uses_true_gains(self):
        # decisions may come from perceived gains, SINR must not
        cfg = NetworkConfig(K=2, N=1, snr=10.0)
        g = np.zeros((2, 1, 2))
        g[0, 0] = [5.0, 0.0]
        g[1, 0] = [40.0, 1.0]  # cell1 transmitter dumps 40.0 onto AP0
        real = realization_with_gains(np.transpose(g, (0, 1, 2)))
        out = simulate_slot(real, decision([[1], [1]], 1.0), cfg)
        assert out.sinr_per_cell[0] == pytest.approx(5.0 / (0.1 + 40.0), rel=1e-12)

    def test_zero_interference_hook(self):
        cfg = NetworkConfig(K=2, N=1, snr=10.0)
        g = np.zeros((2, 1, 2))
        g[0, 0] = [5.0, 0.0]
        g[1, 0] = [40.0, 1.0]
        real = realization_with_gains(g)
        out = simulate_slot(real, decision([[1], [1]], 1.0), cfg, zero_interference=True)
        assert out.sinr_per_cell[0] == pytest.approx(50.0, rel=1e-12)

    def test_decoded_implies_single_transmitter(self):
        cfg = NetworkConfig(K=3, N=4, snr=10.0)
        rng = np.random.default_rng(0)
        for trial in range(50):
            real = draw_realization(cfg, seed=trial)
            tx = rng.random((3, 4)) < 0.3
            out = simulate_slot(real, decision(tx, 0.5), cfg)
            for j in range(3):
                if out.decoded_per_cell[j]:
                    assert len(out.transmitters_per_cell[j]) == 1

    def test_dimension_mismatch(self):
        cfg = NetworkConfig(K=2, N=2, snr=10.0)
        real = draw_realization(cfg, seed=1)
        with pytest.raises(ValueError):
            simulate_slot(real, decision(np.zeros((2, 3)), 1.0), cfg)


class TestRunTrials:
    def test_single_slot_equals_outcome(self):
        cfg = NetworkConfig(K=2, N=100, snr=10.0)
        params = design_protocol_params(cfg)
        stats = run_trials(cfg, ProtocolKind.IA_ORA, params, NO_ERR, 1, master_seed=5)
        real = draw_realization(cfg, seed=5, slot_index=0)
        out = simulate_slot(real, decide_ia_ora(real.gains, params, cfg), cfg)
        assert stats.aggregate_phy_throughput == out.delivered_rate
        assert stats.slot_count == 1
        assert stats.stderr == 0.0

    def test_requires_params_for_ia_ora(self):
        cfg = NetworkConfig(K=2, N=10, snr=10.0)
        with pytest.raises(ValueError):
            run_trials(cfg, ProtocolKind.IA_ORA, None, NO_ERR, 10, master_seed=0)

    def test_rejects_zero_slots(self):
        cfg = NetworkConfig(K=2, N=10, snr=10.0)
        with pytest.raises(ValueError):
            run_trials(cfg, ProtocolKind.SLOTTED_ALOHA, None, NO_ERR, 0, master_seed=0)

    @pytest.mark.parametrize("kind", [ProtocolKind.IA_ORA, ProtocolKind.ORA, ProtocolKind.SLOTTED_ALOHA])
    def test_matches_manual_slot_loop(self, kind):
        cfg = NetworkConfig(K=2, N=40, snr=10.0)
        params = design_protocol_params(cfg) if kind is ProtocolKind.IA_ORA else None
        slots, seed = 300, 31
        stats = run_trials(cfg, kind, params, NO_ERR, slots, master_seed=seed, batch_size=128)

        delivered, singles, decodes, tx_total = [], np.zeros(2), np.zeros(2), 0
        for s in range(slots):
            real = draw_realization(cfg, seed=seed, slot_index=s)
            if kind is ProtocolKind.IA_ORA:
                d = decide_ia_ora(real.gains, params, cfg)
            elif kind is ProtocolKind.ORA:
                d = decide_ora(real.gains, cfg)
            else:
                d = decide_aloha(cfg, seed=seed, slot_index=s)
            out = simulate_slot(real, d, cfg)
            delivered.append(out.delivered_rate)
            counts = np.array([len(t) for t in out.transmitters_per_cell])
            singles += counts == 1
            decodes += out.decoded_per_cell
            tx_total += out.total_interferers
        assert stats.aggregate_phy_throughput == pytest.approx(np.mean(delivered), rel=1e-12)
        assert stats.mac_throughput_per_cell == pytest.approx(singles.sum() / (slots * 2), rel=1e-12)
        assert stats.empirical_p == pytest.approx(tx_total / (slots * 2 * 40), rel=1e-12)
        assert stats.empirical_ps == pytest.approx(np.mean(decodes / singles), rel=1e-12)
        assert stats.stderr == pytest.approx(np.std(delivered, ddof=1) / math.sqrt(slots), rel=1e-9)

    def test_matches_manual_loop_with_estimation_error(self):
        cfg = NetworkConfig(K=2, N=40, snr=10.0)
        params = design_protocol_params(cfg)
        err = CaitErrorModel(sigma2=0.2)
        slots, seed = 200, 77
        stats = run_trials(cfg, ProtocolKind.IA_ORA, params, err, slots, master_seed=seed, batch_size=64)
        delivered = []
        for s in range(slots):
            real = draw_realization(cfg, seed=seed, slot_index=s)
            perceived = perceived_gains(real, err, seed=seed, slot_index=s)
            out = simulate_slot(real, decide_ia_ora(perceived, params, cfg), cfg)
            delivered.append(out.delivered_rate)
        assert stats.aggregate_phy_throughput == pytest.approx(np.mean(delivered), rel=1e-12)

    def test_worker_count_does_not_change_results(self):
        cfg = NetworkConfig(K=2, N=50, snr=10.0)
        params = design_protocol_params(cfg)
        ref = run_trials(cfg, ProtocolKind.IA_ORA, params, NO_ERR, 3000, master_seed=9, workers=1, batch_size=512)
        for workers in (2, 3):
            alt = run_trials(
                cfg, ProtocolKind.IA_ORA, params, NO_ERR, 3000, master_seed=9,
                workers=workers, batch_size=512,
            )
            assert alt == ref  # bit-identical, not approximately equal

    def test_zero_interference_with_nu0_rate_always_decodes(self):
        # with interference off and the rate at the nu = 0 ladder top, every
        # admitted transmission clears the capture threshold
        cfg = NetworkConfig(K=2, N=100, snr=10.0)
        params = design_protocol_params(cfg, phi_i=1.0)
        nu0 = ProtocolParams(
            phi_g=params.phi_g, phi_i=params.phi_i,
            rate=math.log2(1 + params.phi_g * cfg.snr), nu=0,
        )
        stats = run_trials(
            cfg, ProtocolKind.IA_ORA, nu0, NO_ERR, 20_000, master_seed=3,
            zero_interference=True,
        )
        assert stats.empirical_ps == 1.0

    def test_ora_single_cell_always_decodes(self):
        # lone single-cell transmitter at threshold gain ln N decodes a.s.
        cfg = NetworkConfig(K=1, N=100, snr=10.0)
        stats = run_trials(cfg, ProtocolKind.ORA, None, NO_ERR, 20_000, master_seed=12)
        assert stats.empirical_ps == 1.0

    def test_aloha_mac_matches_closed_form(self):
        cfg = NetworkConfig(K=1, N=100, snr=10.0)
        stats = run_trials(cfg, ProtocolKind.SLOTTED_ALOHA, None, NO_ERR, 20_000, master_seed=21)
        expected = 0.36972963764972644
        se = math.sqrt(expected * (1 - expected) / 20_000)
        assert abs(stats.mac_throughput_per_cell - expected) < 3.5 * se

    def test_empirical_p_calibrated(self):
        cfg = NetworkConfig(K=3, N=50, snr=1.0)
        params = design_protocol_params(cfg, phi_i=1.0)
        slots = 20_000
        stats = run_trials(cfg, ProtocolKind.IA_ORA, params, NO_ERR, slots, master_seed=14)
        p = 1.0 / 50
        se = math.sqrt(p * (1 - p) / (slots * 3 * 50))
        assert abs(stats.empirical_p - p) < 3 * se

    def test_deterministic_given_seed(self):
        cfg = NetworkConfig(K=2, N=30, snr=10.0)
        a = run_trials(cfg, ProtocolKind.SLOTTED_ALOHA, None, NO_ERR, 500, master_seed=8)
        b = run_trials(cfg, ProtocolKind.SLOTTED_ALOHA, None, NO_ERR, 500, master_seed=8)
        c = run_trials(cfg, ProtocolKind.SLOTTED_ALOHA, None, NO_ERR, 500, master_seed=9)
        assert a == b
        assert a != c
