import numpy as np
import pytest

from aeromec.config import RotorParams, table1_config
from aeromec.energy import (
    economic_speed,
    induced_speed_factor,
    local_compute_bits_energy,
    offload_bits,
    propulsion_power,
    propulsion_power_split_speed,
    propulsion_terms,
)

ROTOR = RotorParams()


def test_hover_power_is_651_w():
    assert propulsion_power(0.0, ROTOR) == pytest.approx(651.0, abs=1e-9)


def test_blade_profile_term_at_20():
    blade, _, _ = propulsion_terms(20.0, ROTOR)
    assert blade == pytest.approx(225.0 * (1 + 1200.0 / 14400.0), rel=1e-12)
    assert blade == pytest.approx(243.75)


def test_term_sum_equals_total():
    rng = np.random.default_rng(1)
    for v in rng.uniform(0, 30, size=100):
        assert sum(propulsion_terms(v, ROTOR)) == pytest.approx(
            propulsion_power(v, ROTOR), abs=1e-10
        )


def test_economic_speed_window():
    v_star = economic_speed(ROTOR, 20.0, 0.01)
    assert 14.5 <= v_star <= 15.5


def test_single_interior_minimum():
    grid = np.arange(0.0, 20.0 + 0.005, 0.01)
    p = np.array([propulsion_power(v, ROTOR) for v in grid])
    interior_minima = 0
    for i in range(1, len(grid) - 1):
        if p[i] < p[i - 1] and p[i] <= p[i + 1]:
            interior_minima += 1
    assert interior_minima == 1


def test_split_speed_matches_exact_on_curve():
    for v in (0.0, 3.7, 14.9, 20.0):
        v2 = induced_speed_factor(v, ROTOR)
        assert propulsion_power_split_speed(v, v2, ROTOR) == pytest.approx(
            propulsion_power(v, ROTOR), rel=1e-12
        )
    assert induced_speed_factor(0.0, ROTOR) == pytest.approx(1.0)


def test_local_compute_examples():
    bits, joules = local_compute_bits_energy(0.0, 1e3, 0.297, 1e-26)
    assert bits == 0 and joules == 0

    bits, _ = local_compute_bits_energy(0.3e9, 1e3, 0.297, 1e-26)
    assert bits == pytest.approx(8.91e4, rel=1e-12)

    _, e1 = local_compute_bits_energy(0.1e9, 1e3, 0.297, 1e-26)
    _, e2 = local_compute_bits_energy(0.2e9, 1e3, 0.297, 1e-26)
    assert e2 == pytest.approx(8 * e1, rel=1e-12)

    with pytest.raises(ValueError):
        local_compute_bits_energy(0.4e9, 1e3, 0.297, 1e-26, f_max=0.3e9)


def test_offload_bits_examples():
    assert offload_bits(0.5, 0.297, 30e6, 0.0, 1e-7, 1e-8) == 0.0
    # unit SNR with theta * dhat * B == 1 gives exactly one bit
    assert offload_bits(0.5, 2.0, 1.0, 1.0, 1e-8, 1e-8) == pytest.approx(1.0)
    # gain chosen so p*gain/noise == 1000; frozen 0.1 * 0.297 * 3e7 * log2(1001)
    got = offload_bits(0.1, 0.297, 30e6, 8.0, 1.25e-6, 1e-8)
    assert got == pytest.approx(8880798.59662287, rel=1e-12)


def test_table1_defaults_give_expected_slot_times():
    cfg = table1_config()
    assert cfg.delta_t_s == pytest.approx(0.3)
    assert cfg.delta_hat_s == pytest.approx(0.297)
    assert cfg.quota_bits == pytest.approx(5e5)
