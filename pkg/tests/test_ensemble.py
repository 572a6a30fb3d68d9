"""Ensemble sampling, treatments, and jump-process evolution."""

import numpy as np
import pytest

from tlspectro.ensemble import (
    CabsProtocol,
    DipoleDist,
    EnsembleSpec,
    JitterParams,
    Mode,
    TlsEnsemble,
    apply_cabs,
    evolve,
    sample_ensemble,
    thermal_cycle,
    visible_subset,
)
from tlspectro.errors import ConfigurationError
from tlspectro.model import DeviceParams, TlsParams

DEV = DeviceParams()


def small_ensemble(seed=3, p0=75.0):
    return sample_ensemble(EnsembleSpec(p0_target=p0, seed=seed), DEV)


class TestSampling:
    def test_zero_density_empty(self):
        ens = sample_ensemble(EnsembleSpec(p0_target=0.0, seed=1), DEV)
        assert len(ens) == 0

    def test_member_count(self):
        spec = EnsembleSpec(p0_target=75.0, delta0_band=(0.5e9, 6.0e9))
        # 75 per um^3 GHz x 5.6 um^3 x 5.5 GHz
        assert spec.member_count(DEV) == 2310

    def test_deterministic_under_seed(self):
        a = small_ensemble(seed=11)
        b = small_ensemble(seed=11)
        np.testing.assert_array_equal(a.delta0, b.delta0)
        np.testing.assert_array_equal(a.delta, b.delta)
        np.testing.assert_array_equal(a.p_z, b.p_z)

    def test_seed_changes_draw(self):
        a = small_ensemble(seed=11)
        b = small_ensemble(seed=12)
        assert not np.array_equal(a.delta0, b.delta0)

    def test_distribution_shapes(self):
        ens = small_ensemble(seed=5)
        spec = EnsembleSpec()
        assert ens.delta0.min() >= spec.delta0_band[0]
        assert ens.delta0.max() <= spec.delta0_band[1]
        assert abs(ens.p_z.mean() - 0.49) < 0.02
        assert np.all(ens.p_z >= 0.05) and np.all(ens.p_z <= 1.0)
        # log-uniform: roughly equal counts per octave of delta0
        lo_octave = np.sum(ens.delta0 < 1e9)
        hi_octave = np.sum((ens.delta0 >= 2e9) & (ens.delta0 < 4e9))
        assert 0.6 < lo_octave / hi_octave < 1.6

    def test_empty_band_rejected(self):
        with pytest.raises(ConfigurationError):
            EnsembleSpec(delta0_band=(2e9, 2e9))
        with pytest.raises(ConfigurationError):
            EnsembleSpec(delta_band=(1e9, -1e9))


class TestVisibleSubset:
    def test_empty_ensemble(self):
        ens = sample_ensemble(EnsembleSpec(p0_target=0.0, seed=1), DEV)
        assert visible_subset(ens, DEV, (4.19e9, 4.21e9), (0.0, 0.05)) == []

    def test_known_crossing_included(self):
        ens = TlsEnsemble(
            delta0=np.array([4.0e9]),
            delta=np.array([0.0]),
            p_z=np.array([0.5]),
            gamma=np.array([1e5]),
        )
        vis = visible_subset(ens, DEV, (4.195e9, 4.205e9), (0.0, 0.05))
        assert len(vis) == 1
        assert len(vis[0].crossing_biases) == 1
        assert vis[0].crossing_biases[0] == pytest.approx(5.19e-3, abs=0.01e-3)
        assert not vis[0].vertex_in_band

    def test_out_of_reach_excluded(self):
        ens = TlsEnsemble(
            delta0=np.array([5.0e9]),
            delta=np.array([0.0]),
            p_z=np.array([0.5]),
            gamma=np.array([1e5]),
        )
        assert visible_subset(ens, DEV, (4.19e9, 4.21e9), (0.0, 0.05)) == []

    def test_vertex_in_band_annotation(self):
        ens = TlsEnsemble(
            delta0=np.array([4.2e9]),
            delta=np.array([0.0]),
            p_z=np.array([0.5]),
            gamma=np.array([1e5]),
        )
        vis = visible_subset(ens, DEV, (4.19e9, 4.21e9), (-0.01, 0.01))
        assert len(vis) == 1 and vis[0].vertex_in_band


class TestCabs:
    def test_switches_to_jitter(self):
        ens = small_ensemble()
        jit = apply_cabs(ens, CabsProtocol())
        assert jit.mode == Mode.JITTER
        assert len(jit) == len(ens)
        np.testing.assert_array_equal(jit.delta0, ens.delta0)
        np.testing.assert_array_equal(jit.p_z, ens.p_z)
        assert np.all(jit.next_jump > jit.clock)
        assert np.any(jit.offsets != 0.0)

    def test_idempotent_reseeds(self):
        ens = small_ensemble()
        once = apply_cabs(ens, CabsProtocol())
        twice = apply_cabs(once, CabsProtocol())
        assert twice.mode == Mode.JITTER
        assert len(twice) == len(ens)
        assert not np.array_equal(once.offsets, twice.offsets)

    def test_invalid_protocol(self):
        with pytest.raises(ConfigurationError):
            CabsProtocol(repetitions=0)


class TestThermalCycle:
    def test_reset_at_10k(self):
        jit = apply_cabs(small_ensemble(), CabsProtocol())
        back = thermal_cycle(jit, 10.0)
        assert back.mode == Mode.STEADY
        assert np.all(back.offsets == 0.0)
        assert len(back) == len(jit)
        np.testing.assert_array_equal(back.p_z, jit.p_z)

    def test_steady_is_fixed_point(self):
        ens = small_ensemble()
        assert thermal_cycle(ens, 300.0).mode == Mode.STEADY

    def test_below_threshold_unchanged(self):
        jit = apply_cabs(small_ensemble(), CabsProtocol())
        still = thermal_cycle(jit, 4.0)
        assert still.mode == Mode.JITTER
        np.testing.assert_array_equal(still.offsets, jit.offsets)

    def test_negative_temperature_rejected(self):
        with pytest.raises(ConfigurationError):
            thermal_cycle(small_ensemble(), -1.0)

    def test_optional_dipole_redraw(self):
        jit = apply_cabs(small_ensemble(), CabsProtocol())
        back = thermal_cycle(jit, 300.0, redraw_dipoles=True, dipole_dist=DipoleDist(mean=0.3, sd=0.1))
        assert len(back) == len(jit)
        assert not np.array_equal(back.p_z, jit.p_z)
        assert abs(back.p_z.mean() - 0.3) < 0.03


class TestEvolve:
    def test_zero_dt_identity(self):
        jit = apply_cabs(small_ensemble(), CabsProtocol())
        same = evolve(jit, 0.0)
        np.testing.assert_array_equal(same.offsets, jit.offsets)
        assert same.clock == jit.clock

    def test_steady_offsets_stay_zero(self):
        ens = small_ensemble()
        out = evolve(ens, 1e4)
        assert np.all(out.offsets == 0.0)
        assert out.clock == ens.clock + 1e4

    def test_density_preserved(self):
        jit = apply_cabs(small_ensemble(), CabsProtocol())
        out = evolve(jit, 3600.0)
        assert len(out) == len(jit)

    def test_jump_counts_poisson(self):
        jit = apply_cabs(small_ensemble(), CabsProtocol(), JitterParams(tau_dwell_s=10.0))
        out = evolve(jit, 100 * 10.0)
        mean_jumps = out.jump_counts.mean()
        assert mean_jumps == pytest.approx(100, abs=10)

    def test_next_jump_strictly_increases(self):
        jit = apply_cabs(small_ensemble(), CabsProtocol())
        later = evolve(jit, 3600.0)
        moved = later.jump_counts > jit.jump_counts
        assert np.all(later.next_jump[moved] > jit.next_jump[moved])

    def test_replay_from_snapshot(self):
        jit = apply_cabs(small_ensemble(), CabsProtocol())
        a = evolve(evolve(jit, 360.0), 360.0)
        b = evolve(evolve(jit, 360.0), 360.0)
        np.testing.assert_array_equal(a.offsets, b.offsets)
        np.testing.assert_array_equal(a.next_jump, b.next_jump)

    def test_dwell_mean(self):
        # empirical dwell mean over >= 1e4 draws within 5 percent
        jit = apply_cabs(small_ensemble(), CabsProtocol(), JitterParams(tau_dwell_s=180.0))
        out = evolve(jit, 180.0 * 8)
        total_jumps = out.jump_counts.sum()
        assert total_jumps >= 1e4
        rate = total_jumps / (len(out) * 180.0 * 8)
        assert 1.0 / rate == pytest.approx(180.0, rel=0.05)


class TestSerialization:
    def test_round_trip_steady(self):
        ens = small_ensemble()
        back = TlsEnsemble.from_dict(ens.to_dict())
        np.testing.assert_array_equal(back.delta0, ens.delta0)
        assert back.mode == ens.mode

    def test_round_trip_jitter_preserves_evolution(self):
        jit = evolve(apply_cabs(small_ensemble(), CabsProtocol()), 360.0)
        back = TlsEnsemble.from_dict(jit.to_dict())
        a = evolve(jit, 360.0)
        b = evolve(back, 360.0)
        np.testing.assert_array_equal(a.offsets, b.offsets)
