import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aeromec.config import ci_config, table1_config
from aeromec.geometry import (
    compute_aods,
    make_slot_context,
    nominal_channel,
    slant_distance,
    steering_vector,
)


def test_aod_reference_cases():
    vert, horiz = compute_aods((0, 0), (0, 20), 20.0)
    assert vert == pytest.approx(np.pi / 4, abs=1e-12)
    assert horiz == pytest.approx(np.pi, abs=1e-12)

    vert, horiz = compute_aods((5, 5), (5, 5), 13.0)
    assert vert == pytest.approx(np.pi / 2, abs=1e-12)
    assert horiz == 0.0

    vert, horiz = compute_aods((0, 0), (20, 0), 20.0)
    assert vert == pytest.approx(np.pi / 4, abs=1e-12)
    assert horiz == pytest.approx(np.pi / 2, abs=1e-12)


@given(
    qx=st.floats(-100, 100),
    qy=st.floats(-100, 100),
    ux=st.floats(-100, 100),
    uy=st.floats(-100, 100),
    h=st.floats(1.0, 200.0),
)
@settings(max_examples=200, deadline=None)
def test_aod_identity(qx, qy, ux, uy, h):
    # sin^2(vert) + (horizontal/slant)^2 == 1
    vert, _ = compute_aods((qx, qy), (ux, uy), h)
    horiz = np.hypot(qx - ux, qy - uy)
    d = slant_distance((qx, qy), (ux, uy), h)
    assert np.sin(vert) ** 2 + (horiz / d) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_steering_trivial_grid():
    cfg = table1_config(grid_nx=1, grid_ny=1)
    a = steering_vector(0.3, 1.2, cfg)
    assert a.shape == (1,)
    assert a[0] == pytest.approx(1.0)


def test_steering_two_element_broadside():
    # vertical pi/2, horizontal 0, half-wavelength row spacing: phases 0, pi
    cfg = table1_config(grid_nx=2, grid_ny=1)
    a = steering_vector(np.pi / 2, 0.0, cfg)
    assert a == pytest.approx(np.array([1.0, -1.0]), abs=1e-12)


@given(
    vert=st.floats(0.0, np.pi / 2),
    horiz=st.floats(0.0, np.pi),
    nx=st.integers(1, 4),
    ny=st.integers(1, 4),
)
@settings(max_examples=100, deadline=None)
def test_steering_unit_modulus(vert, horiz, nx, ny):
    cfg = table1_config(grid_nx=nx, grid_ny=ny)
    a = steering_vector(vert, horiz, cfg)
    assert np.abs(a) == pytest.approx(np.ones(nx * ny), abs=1e-12)
    assert np.linalg.norm(a) ** 2 == pytest.approx(nx * ny, rel=1e-12)


def test_nominal_channel_gain():
    cfg = table1_config()
    rho = cfg.path_gain_ref
    # directly overhead: slant distance equals the altitude
    h = nominal_channel(cfg.mec_xy_m, cfg.mec_xy_m, cfg)
    assert np.linalg.norm(h) ** 2 == pytest.approx(rho * cfg.n_t / cfg.altitude_m**2, rel=1e-12)

    # doubling the slant distance quarters the gain
    g1 = np.linalg.norm(nominal_channel((0, 0), (0, 0), cfg.replace(altitude_m=20.0))) ** 2
    g2 = np.linalg.norm(nominal_channel((0, 0), (0, 0), cfg.replace(altitude_m=40.0))) ** 2
    assert g1 == pytest.approx(4 * g2, rel=1e-12)

    assert slant_distance((0, 0), (0, 20), 20.0) == pytest.approx(np.sqrt(800.0))


def test_slot_context_quota_and_shapes():
    cfg = ci_config()
    ctx = make_slot_context(cfg, 1, cfg.q_start_m)
    assert ctx.steering_gu.shape == (cfg.n_users, cfg.n_t)
    assert ctx.steering_eve.shape == (cfg.n_eves, cfg.n_t)
    assert ctx.quota_bits == pytest.approx(np.full(cfg.n_users, cfg.task_bits / cfg.n_slots))
    assert ctx.slots_remaining == cfg.n_slots
    # steering rows are unit modulus
    assert np.abs(ctx.steering_gu) == pytest.approx(np.ones_like(ctx.steering_gu, dtype=float))
