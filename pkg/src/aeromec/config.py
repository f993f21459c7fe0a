"""Scenario configuration: geometry, radio, task and power budgets.

All physical quantities carry explicit unit suffixes in field and config-file
key names (``*_s``, ``*_hz``, ``*_w``, ``*_m``, ``*_mps``) so that a config
written in MHz or Mbits cannot be silently misread.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class RotorParams:
    """Rotary-wing propulsion constants.

    blade_power_w / induced_power_w are the hover blade-profile and induced
    power; tip_speed_mps the rotor tip speed; v0_mps the mean rotor induced
    velocity in hover; air_density in kg/m^3; disc_area_m2 the rotor disc
    area; drag_ratio the fuselage drag ratio; solidity the rotor solidity.
    """

    blade_power_w: float = 225.0
    induced_power_w: float = 426.0
    tip_speed_mps: float = 120.0
    air_density: float = 1.225
    disc_area_m2: float = 0.503
    drag_ratio: float = 0.6
    solidity: float = 0.05
    v0_mps: float = 4.03  # absent from the instance table; see README


def _herm_pd(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(mat, mat.conj().T, atol=1e-12):
        raise ValueError(f"{name} must be Hermitian")
    eig = np.linalg.eigvalsh(mat)
    if eig.min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    return mat


@dataclass(frozen=True)
class NetworkConfig:
    """Immutable scenario description. Defaults reproduce the reference instance."""

    # geometry (horizontal coordinates, meters)
    gu_xy_m: np.ndarray = field(
        default_factory=lambda: np.array(
            # note: entries 4 and 6 coincide in the source instance table
            # (likely a typo there); reproduced verbatim.
            [(0, 20), (10, 10), (15, 40), (40, 20), (30, 10), (40, 20)], dtype=float
        )
    )
    eve_xy_m: np.ndarray = field(
        default_factory=lambda: np.array([(10, 0), (30, 0)], dtype=float)
    )
    mec_xy_m: np.ndarray = field(default_factory=lambda: np.array([20.0, 20.0]))
    altitude_m: float = 20.0
    q_start_m: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0]))
    q_final_m: np.ndarray = field(default_factory=lambda: np.array([0.0, 40.0]))

    # antenna grid
    grid_nx: int = 2
    grid_ny: int = 2
    carrier_hz: float = 2.4e9
    antenna_spacing_m: float | None = None  # None -> half wavelength

    # flight / schedule
    period_s: float = 6.0
    n_slots: int = 20
    download_s: float = 0.003
    v_max_mps: float = 20.0

    # radio
    bandwidth_hz: float = 30e6
    noise_gu_w: float = 1e-8
    noise_eve_w: float = 1e-8
    noise_mec_w: float = 1e-8
    sinr_req_linear: float = 0.1  # -10 dB download floor at each user
    sinr_leak_linear: float = 10 ** (-1.5)  # -15 dB eavesdropper ceiling

    # tasks and computation
    task_bits: float = 10e6  # per user over the whole flight
    cycles_per_bit: float = 1e3
    f_gu_max_hz: float = 0.3e9
    f_uav_max_hz: float = 6e9
    p_gu_max_w: float = 8.0
    p_uav_max_w: float = 20.0
    chip_gu: float = 1e-26  # effective capacitance coefficients
    chip_uav: float = 1e-26

    # channel error ellipsoids: scalar c means c*I of size n_t
    err_gu: float | np.ndarray = 1e10
    err_eve: float | np.ndarray = 1e10
    err_mec: float | np.ndarray = 1e10

    # objective weight on UAV-side energy
    uav_energy_weight: float = 0.01

    rotor: RotorParams = field(default_factory=RotorParams)

    def __post_init__(self):
        object.__setattr__(self, "gu_xy_m", np.atleast_2d(np.asarray(self.gu_xy_m, dtype=float)))
        object.__setattr__(self, "eve_xy_m", np.atleast_2d(np.asarray(self.eve_xy_m, dtype=float)))
        object.__setattr__(self, "mec_xy_m", np.asarray(self.mec_xy_m, dtype=float))
        object.__setattr__(self, "q_start_m", np.asarray(self.q_start_m, dtype=float))
        object.__setattr__(self, "q_final_m", np.asarray(self.q_final_m, dtype=float))
        if self.grid_nx < 1 or self.grid_ny < 1:
            raise ValueError("antenna grid must be at least 1x1")
        if self.altitude_m <= 0:
            raise ValueError("altitude must be positive")
        if not (self.delta_t_s > self.download_s > 0):
            raise ValueError("slot length must exceed the download window")
        if not (self.sinr_req_linear > self.sinr_leak_linear > 0):
            raise ValueError("download SINR floor must exceed the leakage ceiling")
        if np.linalg.norm(self.q_start_m - self.q_final_m) > (self.n_slots + 1) * self.v_max_mps * self.delta_t_s:
            raise ValueError("final point unreachable within the flight period")
        for name in ("err_gu", "err_eve", "err_mec"):
            val = getattr(self, name)
            if np.isscalar(val):
                if val <= 0:
                    raise ValueError(f"{name} scale must be positive")
            else:
                object.__setattr__(self, name, _herm_pd(val, name))

    # ----- derived quantities ---------------------------------------------

    @property
    def n_users(self) -> int:
        return self.gu_xy_m.shape[0]

    @property
    def n_eves(self) -> int:
        return self.eve_xy_m.shape[0]

    @property
    def n_t(self) -> int:
        return self.grid_nx * self.grid_ny

    @property
    def delta_t_s(self) -> float:
        return self.period_s / self.n_slots

    @property
    def delta_hat_s(self) -> float:
        return self.delta_t_s - self.download_s

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def spacing_m(self) -> float:
        return self.antenna_spacing_m if self.antenna_spacing_m is not None else self.wavelength_m / 2

    @property
    def path_gain_ref(self) -> float:
        """(wavelength / 4 pi)^2 — derived, never stored."""
        return (self.wavelength_m / (4 * np.pi)) ** 2

    @property
    def quota_bits(self) -> float:
        """Per-slot task quota for each user."""
        return self.task_bits / self.n_slots

    def err_matrix(self, which: str, index: int = 0) -> np.ndarray:
        """Error-ellipsoid shape matrix for a link ('gu' | 'eve' | 'mec')."""
        val = {"gu": self.err_gu, "eve": self.err_eve, "mec": self.err_mec}[which]
        if np.isscalar(val):
            return float(val) * np.eye(self.n_t, dtype=complex)
        return np.asarray(val)

    def replace(self, **kw) -> "NetworkConfig":
        return dataclasses.replace(self, **kw)

    # ----- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        d = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, RotorParams):
                d[f.name] = dataclasses.asdict(v)
            elif isinstance(v, np.ndarray):
                if np.iscomplexobj(v):
                    d[f.name] = {"re": v.real.tolist(), "im": v.imag.tolist()}
                else:
                    d[f.name] = v.tolist()
            else:
                d[f.name] = v
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def config_from_dict(d: dict) -> NetworkConfig:
    kw = dict(d)
    if "rotor" in kw and isinstance(kw["rotor"], dict):
        kw["rotor"] = RotorParams(**kw["rotor"])
    for name in ("err_gu", "err_eve", "err_mec"):
        v = kw.get(name)
        if isinstance(v, dict):
            kw[name] = np.asarray(v["re"]) + 1j * np.asarray(v["im"])
        elif isinstance(v, list):
            kw[name] = np.asarray(v)
    known = {f.name for f in dataclasses.fields(NetworkConfig)}
    unknown = set(kw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return NetworkConfig(**kw)


def load_config(path: str) -> NetworkConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a key/value mapping")
    return config_from_dict(data)


def save_config(cfg: NetworkConfig, path: str) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=True)


def table1_config(**overrides) -> NetworkConfig:
    """Full reference scenario: 6 users, 2 eavesdroppers, 20 slots."""
    return NetworkConfig(**overrides)


def ci_config(**overrides) -> NetworkConfig:
    """Desk-scale scenario for fast runs: 3 users, 1 eavesdropper, 8 slots."""
    base = dict(
        gu_xy_m=np.array([(0, 20), (10, 10), (15, 40)], dtype=float),
        eve_xy_m=np.array([(10, 0)], dtype=float),
        n_slots=8,
    )
    base.update(overrides)
    return NetworkConfig(**base)
