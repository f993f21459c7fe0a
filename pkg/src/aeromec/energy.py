"""Physical energy and power formulas: rotor propulsion, computation,
offloading/download transmission, and the weighted per-slot objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig, RotorParams

BREAKDOWN_CSV_HEADER = [
    "slot",
    "e_gu_local_j",
    "e_gu_offload_j",
    "e_uav_compute_j",
    "e_uav_offload_j",
    "e_download_j",
    "e_propulsion_j",
    "e_gu_total_j",
    "e_uav_total_j",
    "weighted_total_j",
]


def propulsion_terms(v: float, rotor: RotorParams) -> tuple[float, float, float]:
    """Blade-profile, parasite and induced power (W) at horizontal speed v."""
    blade = rotor.blade_power_w * (1.0 + 3.0 * v * v / rotor.tip_speed_mps**2)
    parasite = 0.5 * rotor.drag_ratio * rotor.air_density * rotor.solidity * rotor.disc_area_m2 * v**3
    induced = rotor.induced_power_w * induced_speed_factor(v, rotor)
    return blade, parasite, induced


def propulsion_power(v: float, rotor: RotorParams) -> float:
    """Total rotary-wing propulsion power (W) at horizontal speed v >= 0."""
    return sum(propulsion_terms(v, rotor))


def induced_speed_factor(v: float, rotor: RotorParams) -> float:
    """(sqrt(1 + v^4/(4 v0^4)) - v^2/(2 v0^2))^(1/2); equals 1 in hover."""
    x = (v / rotor.v0_mps) ** 2 / 2.0
    return float(np.sqrt(np.sqrt(1.0 + x * x) - x))


def propulsion_power_split_speed(v1: float, v2: float, rotor: RotorParams) -> float:
    """Propulsion power with the induced term driven by its own variable v2.

    Coincides with propulsion_power(v1) when v2 = induced_speed_factor(v1).
    """
    blade = rotor.blade_power_w * (1.0 + 3.0 * v1 * v1 / rotor.tip_speed_mps**2)
    parasite = 0.5 * rotor.drag_ratio * rotor.air_density * rotor.solidity * rotor.disc_area_m2 * v1**3
    return blade + parasite + rotor.induced_power_w * v2


def economic_speed(rotor: RotorParams, v_hi: float = 20.0, step: float = 0.01) -> float:
    """Grid argmin of the propulsion power curve on [0, v_hi]."""
    grid = np.arange(0.0, v_hi + step / 2, step)
    powers = [propulsion_power(v, rotor) for v in grid]
    return float(grid[int(np.argmin(powers))])


def local_compute_bits_energy(
    f_l: float, cycles_per_bit: float, delta_hat_s: float, chip: float, f_max: float | None = None
) -> tuple[float, float]:
    """Bits finished and energy spent computing locally at CPU rate f_l."""
    if f_l < 0 or (f_max is not None and f_l > f_max * (1 + 1e-12)):
        raise ValueError(f"CPU rate {f_l} outside [0, {f_max}]")
    bits = f_l * delta_hat_s / cycles_per_bit
    joules = chip * f_l**3 * delta_hat_s
    return bits, joules


def offload_bits(
    theta: float, delta_hat_s: float, bandwidth_hz: float, p: float, gain: float, noise_w: float
) -> float:
    """Bits moved over a link with power p and channel gain ||h||^2."""
    if not 0 <= theta <= 1 + 1e-12:
        raise ValueError("time-share ratio outside [0, 1]")
    if p < 0:
        raise ValueError("negative transmit power")
    return theta * delta_hat_s * bandwidth_hz * np.log2(1.0 + p * gain / noise_w)


@dataclass(frozen=True)
class EnergyBreakdown:
    e_gu_local: np.ndarray  # (K,) J
    e_gu_offload: np.ndarray  # (K,) J
    e_uav_compute: np.ndarray  # (K,) J
    e_uav_offload: float
    e_download: float
    e_propulsion: float
    e_gu_total: float
    e_uav_total: float
    weighted_total: float

    def csv_row(self, slot: int) -> list:
        return [
            slot,
            float(self.e_gu_local.sum()),
            float(self.e_gu_offload.sum()),
            float(self.e_uav_compute.sum()),
            self.e_uav_offload,
            self.e_download,
            self.e_propulsion,
            self.e_gu_total,
            self.e_uav_total,
            self.weighted_total,
        ]


def assemble_breakdown(point, cfg: NetworkConfig) -> EnergyBreakdown:
    """Per-slot energy components assembled from the original formula shapes.

    Evaluates products of the point's physical quantities (time shares,
    CPU rates, powers, covariance traces, speed variables) rather than the
    objective's fused exponential terms, so it cross-checks the
    reparametrized objective value as an independent code path. Transmit
    powers enter through their log proxies (exp(zeta)), and the induced
    propulsion term through the split speed variable, exactly as the
    objective accounts them; raw-physics gaps are reported separately by
    physical_gaps().
    """
    dh = cfg.delta_hat_s
    theta = np.exp(point.t)
    theta_a = float(np.exp(point.t_a))
    e_local = cfg.chip_gu * point.f_l**3 * dh
    e_off_gu = theta * dh * np.exp(point.zeta)
    e_comp = cfg.chip_uav * point.f_u**3 * theta_a * dh
    e_off_uav = theta_a * dh * float(np.exp(point.zeta_a))
    e_down = cfg.download_s * float(
        np.real(sum(np.trace(W) for W in point.W_gu) + np.trace(point.Z))
    )
    e_prop = propulsion_power_split_speed(point.v1, point.v2, cfg.rotor) * cfg.delta_t_s
    e_gu_total = float(e_local.sum() + e_off_gu.sum())
    e_uav_total = float(e_comp.sum()) + e_off_uav + e_down + e_prop
    bd = EnergyBreakdown(
        e_gu_local=e_local,
        e_gu_offload=e_off_gu,
        e_uav_compute=e_comp,
        e_uav_offload=e_off_uav,
        e_download=e_down,
        e_propulsion=e_prop,
        e_gu_total=e_gu_total,
        e_uav_total=e_uav_total,
        weighted_total=e_gu_total + cfg.uav_energy_weight * e_uav_total,
    )
    for name in ("e_gu_local", "e_gu_offload", "e_uav_compute"):
        if np.any(getattr(bd, name) < -1e-12):
            raise ValueError(f"negative energy component {name}: reparametrization bug")
    for name in ("e_uav_offload", "e_download", "e_propulsion"):
        if getattr(bd, name) < -1e-12:
            raise ValueError(f"negative energy component {name}: reparametrization bug")
    return bd


def physical_gaps(point, q_prev: np.ndarray, cfg: NetworkConfig) -> dict:
    """Raw-physics consistency gaps, meaningful at converged points only.

    Measures how far the log power proxies and split speed variables sit
    from the quantities they stand in for.
    """
    speed = float(np.linalg.norm(point.q - q_prev)) / cfg.delta_t_s
    tr_wa = float(np.real(np.trace(point.W_a)))
    p_ref = np.maximum(point.p, 1e-9)
    return {
        "power_proxy_rel": float(np.max(np.abs(np.exp(point.zeta) - point.p) / p_ref)),
        "wa_proxy_rel": abs(float(np.exp(point.zeta_a)) - tr_wa) / max(tr_wa, 1e-9),
        "v1_gap_mps": abs(point.v1 - speed),
        "v2_gap": abs(point.v2 - induced_speed_factor(point.v1, cfg.rotor)),
        "propulsion_exact_w": propulsion_power(speed, cfg.rotor),
        "propulsion_split_w": propulsion_power_split_speed(point.v1, point.v2, cfg.rotor),
    }
