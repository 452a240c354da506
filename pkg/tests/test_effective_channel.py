import numpy as np
import pytest

from app.models.beamforming import PhaseVector
from app.models.system import SystemConfig
from app.services.effective_channel import NormalizedChannels, align_phases, effective_gain, project_unit_modulus
from app.services.errors import DegeneratePhaseError, DimensionMismatchError
from app.services.scenario import generate_scenario


class TestEffectiveGain:
    def test_hand_computed_alignment(self):
        # q^H = [j, -1]
        q = np.array([-1j, -1.0])
        v, gamma = align_phases(1.0, q)
        np.testing.assert_allclose(v.bare, [-1j, -1.0], atol=1e-12)
        assert gamma == pytest.approx(9.0)
        assert effective_gain(1.0, q, v) == pytest.approx(9.0)

    def test_direct_link_only(self):
        assert effective_gain(2.0 + 0j, np.zeros(3), np.ones(3)) == pytest.approx(4.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            effective_gain(1.0, np.ones(3), np.ones(4))

    def test_aligned_vector_beats_random_vectors(self):
        rng = np.random.default_rng(1)
        h_d = complex(rng.standard_normal(), rng.standard_normal())
        q = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        v, gamma = align_phases(h_d, q)
        assert effective_gain(h_d, q, v) == pytest.approx(gamma)
        for _ in range(50):
            random_v = np.exp(2j * np.pi * rng.uniform(size=8))
            assert effective_gain(h_d, q, random_v) <= gamma + 1e-9

    def test_zero_reflected_entries_keep_unit_phase(self):
        v, gamma = align_phases(1.0, np.array([0.0, 1.0j]))
        assert v.bare[0] == 1.0
        assert gamma == pytest.approx(4.0)


class TestProjectUnitModulus:
    def test_reference_rotation(self):
        projected = project_unit_modulus(np.array([1.0, 1j, 0.5j]))
        np.testing.assert_allclose(projected.values, [-1j, 1.0, 1.0], atol=1e-12)

    def test_projection_keeps_phases(self):
        projected = project_unit_modulus(np.array([2 * np.exp(1j * np.pi / 4), 3j, 0.5]))
        assert np.angle(projected.values[0]) == pytest.approx(np.pi / 4)
        assert projected.values[-1] == 1.0
        np.testing.assert_allclose(np.abs(projected.values), 1.0)

    def test_zero_entry_is_degenerate(self):
        projected = project_unit_modulus(np.array([0.0, 1j, 1.0]))
        assert projected.degenerate == 1
        assert projected.values[0] == 1.0

    def test_strict_projection_raises(self):
        with pytest.raises(DegeneratePhaseError):
            project_unit_modulus(np.array([0.0, 1j, 1.0]), strict=True)

    def test_bare_vector(self):
        projected = project_unit_modulus(np.array([3.0, -2j]), augmented=False)
        assert not projected.augmented
        np.testing.assert_allclose(projected.values, [1.0, -1j])
        np.testing.assert_allclose(projected.full, [1.0, -1j, 1.0])

    def test_phase_vector_rejects_non_unit_entries(self):
        with pytest.raises(ValueError):
            PhaseVector(np.array([0.5, 1.0]))


class TestNormalizedChannels:
    def setup_method(self):
        self.scenario = generate_scenario(SystemConfig(num_elements=5, num_devices=3, seed=2))
        self.channels = NormalizedChannels.from_scenario(self.scenario)

    def test_aligned_vector_has_unit_normalized_gain(self):
        for k in range(3):
            v, gamma = align_phases(self.scenario.h_d[k], self.scenario.q[k])
            assert self.channels.gains(v.full)[k] == pytest.approx(1.0)
            assert self.channels.gamma[k] == pytest.approx(gamma)

    def test_gains_are_bounded(self):
        rng = np.random.default_rng(3)
        vectors = np.column_stack([np.exp(2j * np.pi * rng.uniform(size=(20, 5))), np.ones(20)])
        gains = self.channels.gains(vectors)
        assert gains.shape == (3, 20)
        assert np.all(gains <= 1.0 + 1e-12)

    def test_composite_coefficient(self):
        cfg = self.scenario.config
        expected = cfg.efficiency_array * cfg.hap_power * self.channels.gamma**2 / cfg.noise_power
        np.testing.assert_allclose(self.channels.composite, expected)

    def test_strength_order(self):
        order = self.channels.strength_order()
        assert np.all(np.diff(self.channels.gamma[order]) <= 0)

    def test_unreachable_device_inactive(self):
        bare = self.scenario.without_irs()
        zeroed = bare.q_bar.copy()
        zeroed[1] = 0.0
        channels = NormalizedChannels.from_scenario(
            type(bare)(bare.config, bare.positions, bare.g, bare.h_r, bare.h_d, bare.q, zeroed)
        )
        assert channels.active.tolist() == [True, False, True]
