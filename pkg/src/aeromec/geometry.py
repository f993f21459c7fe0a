"""Departure angles, planar-array steering vectors and LoS channel estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SPEED_OF_LIGHT, NetworkConfig

# below this horizontal offset the platform is overhead and the horizontal
# angle is taken as 0 (the steering vector is all-ones there regardless)
EPS_NADIR_M = 1e-6


def compute_aods(q: np.ndarray, target: np.ndarray, altitude_m: float) -> tuple[float, float]:
    """Vertical and horizontal departure angles toward a ground node.

    Vertical angle in (0, pi/2]; horizontal angle measured from the +y axis
    in [0, pi], defined as 0 at nadir.
    """
    q = np.asarray(q, dtype=float)
    target = np.asarray(target, dtype=float)
    horiz = float(np.linalg.norm(q - target))
    vert = np.arcsin(altitude_m / np.hypot(altitude_m, horiz))
    if horiz < EPS_NADIR_M:
        return float(vert), 0.0
    horiz_ang = np.arccos(np.clip((q[1] - target[1]) / horiz, -1.0, 1.0))
    return float(vert), float(horiz_ang)


def steering_vector(vert: float, horiz: float, cfg: NetworkConfig) -> np.ndarray:
    """Unit-modulus phase vector over the Nx x Ny grid (row factor outer)."""
    wavenum = 2 * np.pi * cfg.spacing_m * cfg.carrier_hz / SPEED_OF_LIGHT
    phase = wavenum * np.sin(vert)
    row = np.exp(-1j * phase * np.cos(horiz) * np.arange(cfg.grid_nx))
    col = np.exp(-1j * phase * np.sin(horiz) * np.arange(cfg.grid_ny))
    return np.kron(row, col)


def slant_distance(q: np.ndarray, target: np.ndarray, altitude_m: float) -> float:
    return float(np.hypot(altitude_m, np.linalg.norm(np.asarray(q) - np.asarray(target))))


def nominal_channel(q_prev: np.ndarray, target: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    """LoS channel estimate sqrt(rho) * a / d evaluated at q_prev."""
    vert, horiz = compute_aods(q_prev, target, cfg.altitude_m)
    a = steering_vector(vert, horiz, cfg)
    d = slant_distance(q_prev, target, cfg.altitude_m)
    return np.sqrt(cfg.path_gain_ref) * a / d


@dataclass(frozen=True)
class SlotContext:
    """Everything frozen for one slot: previous position, steering vectors
    evaluated there, per-slot quotas and the remaining-slot count.
    """

    n: int  # 1-based slot index
    q_prev: np.ndarray
    steering_gu: np.ndarray  # (K, N_T)
    steering_eve: np.ndarray  # (M, N_T)
    steering_mec: np.ndarray  # (N_T,)
    quota_bits: np.ndarray  # (K,)
    slots_remaining: int

    @property
    def n_users(self) -> int:
        return self.steering_gu.shape[0]

    @property
    def n_eves(self) -> int:
        return self.steering_eve.shape[0]


def make_slot_context(cfg: NetworkConfig, n: int, q_prev: np.ndarray) -> SlotContext:
    """Freeze the per-slot channel directions at the previous slot position."""
    q_prev = np.asarray(q_prev, dtype=float)

    def steer(target):
        vert, horiz = compute_aods(q_prev, target, cfg.altitude_m)
        return steering_vector(vert, horiz, cfg)

    return SlotContext(
        n=n,
        q_prev=q_prev.copy(),
        steering_gu=np.array([steer(u) for u in cfg.gu_xy_m]),
        steering_eve=np.array([steer(u) for u in cfg.eve_xy_m]),
        steering_mec=steer(cfg.mec_xy_m),
        quota_bits=np.full(cfg.n_users, cfg.quota_bits),
        slots_remaining=cfg.n_slots - n + 1,
    )
