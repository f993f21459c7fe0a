"""Slot-by-slot mission rollout with trajectory causality.

Feeds each slot's converged position into the next slot's channel
evaluation, aggregates energy and convergence traces, and persists the
run (CSV outputs, replay state, manifest).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import NetworkConfig, config_from_dict
from .energy import BREAKDOWN_CSV_HEADER, EnergyBreakdown, assemble_breakdown, propulsion_power
from .geometry import make_slot_context
from .sca import SlotInfeasibleError, SlotSolution, run_slot
from .solver import SolverOptions
from .subproblem import BuildOptions

TRAJECTORY_CSV_HEADER = ["slot", "x_m", "y_m", "speed_mps"]
TRACE_CSV_HEADER = ["slot", "iteration", "tau3_j", "max_violation", "solve_ms"]


@dataclass
class MissionResult:
    cfg: NetworkConfig
    slots: list[SlotSolution]
    trajectory: np.ndarray  # (n_solved + 1, 2) starting at q_start
    breakdowns: list[EnergyBreakdown]
    terminal_hop_energy_j: float
    infeasible_slot: int | None = None
    wall_time_s: float = 0.0

    @property
    def complete(self) -> bool:
        return self.infeasible_slot is None and all(
            s.status in ("converged", "max-iter") for s in self.slots
        )

    @property
    def speeds(self) -> np.ndarray:
        return velocity_profile(self.trajectory, self.cfg.delta_t_s)

    @property
    def total_weighted_j(self) -> float:
        """Sum of per-slot objectives (terminal hop reported separately)."""
        return float(sum(s.objective for s in self.slots))

    @property
    def grand_total_j(self) -> float:
        return self.total_weighted_j + self.terminal_hop_energy_j


def velocity_profile(trajectory: np.ndarray, delta_t_s: float) -> np.ndarray:
    traj = np.asarray(trajectory)
    return np.linalg.norm(np.diff(traj, axis=0), axis=1) / delta_t_s


def plan_mission(
    cfg: NetworkConfig,
    options: BuildOptions | None = None,
    eps: float = 1e-3,
    max_iter: int = 50,
    solver_opts: SolverOptions | None = None,
    pins: dict | None = None,
    include_terminal_hop_energy: bool = True,
    audit: bool = True,
    progress=None,
) -> MissionResult:
    """Sequential slot solves; the steering directions for slot n are frozen
    at position q[n-1]. Stops early (partial result) on an infeasible slot.
    """
    options = options or BuildOptions()
    t0 = time.perf_counter()
    q = cfg.q_start_m.copy()
    traj = [q.copy()]
    slots: list[SlotSolution] = []
    breakdowns: list[EnergyBreakdown] = []
    infeasible = None
    for n in range(1, cfg.n_slots + 1):
        ctx = make_slot_context(cfg, n, q)
        try:
            sol = run_slot(ctx, cfg, options=options, eps=eps, max_iter=max_iter,
                           solver_opts=solver_opts, pins=pins, audit=audit)
        except SlotInfeasibleError:
            infeasible = n
            break
        slots.append(sol)
        breakdowns.append(assemble_breakdown(sol.point, cfg))
        q = sol.point.q.copy()
        traj.append(q.copy())
        if progress:
            progress(n, sol)
        if not sol.status.startswith(("converged", "max-iter")):
            break
    hop = 0.0
    if include_terminal_hop_energy and infeasible is None and len(traj) == cfg.n_slots + 1:
        hop_speed = float(np.linalg.norm(traj[-1] - cfg.q_final_m)) / cfg.delta_t_s
        hop = cfg.uav_energy_weight * propulsion_power(hop_speed, cfg.rotor) * cfg.delta_t_s
    return MissionResult(
        cfg=cfg,
        slots=slots,
        trajectory=np.asarray(traj),
        breakdowns=breakdowns,
        terminal_hop_energy_j=hop,
        infeasible_slot=infeasible,
        wall_time_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def save_mission(mission: MissionResult, out_dir: str, seeds: dict | None = None) -> dict:
    """Write trajectory/energy/trace CSVs, replay state and the manifest.

    Returns the manifest dictionary.
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg = mission.cfg
    speeds = mission.speeds

    rows = [[0, mission.trajectory[0][0], mission.trajectory[0][1], 0.0]]
    for n in range(1, mission.trajectory.shape[0]):
        rows.append([n, mission.trajectory[n][0], mission.trajectory[n][1], float(speeds[n - 1])])
    _write_csv(os.path.join(out_dir, "trajectory.csv"), TRAJECTORY_CSV_HEADER, rows)

    _write_csv(
        os.path.join(out_dir, "energy.csv"),
        BREAKDOWN_CSV_HEADER,
        [bd.csv_row(i + 1) for i, bd in enumerate(mission.breakdowns)],
    )

    trace_rows = []
    for sol in mission.slots:
        viol = [0.0] + sol.violation_trace
        times = [0.0] + sol.solve_times_ms
        for i, tau in enumerate(sol.objective_trace):
            trace_rows.append([sol.slot, i, tau,
                               viol[i] if i < len(viol) else 0.0,
                               times[i] if i < len(times) else 0.0])
    _write_csv(os.path.join(out_dir, "trace.csv"), TRACE_CSV_HEADER, trace_rows)

    state = mission_state_arrays(mission)
    np.savez_compressed(os.path.join(out_dir, "mission_state.npz"), **state)

    summary = {
        "total_weighted_j": mission.total_weighted_j,
        "terminal_hop_energy_j": mission.terminal_hop_energy_j,
        "grand_total_j": mission.grand_total_j,
        "infeasible_slot": mission.infeasible_slot,
        "slot_status": [s.status for s in mission.slots],
        "slot_iterations": [s.iterations for s in mission.slots],
        "rank_quality": [s.rank_quality for s in mission.slots],
        "wall_time_s": mission.wall_time_s,
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1)

    manifest = write_manifest(out_dir, cfg, seeds or {},
                              ["trajectory.csv", "energy.csv", "trace.csv",
                               "mission_state.npz", "summary.json"])
    return manifest


def mission_state_arrays(mission: MissionResult) -> dict:
    """Per-slot decision data sufficient to replay evaluations."""
    pts = [s.point for s in mission.slots]
    if not pts:
        return {"trajectory": mission.trajectory}
    return {
        "trajectory": mission.trajectory,
        "q_prev": np.array([mission.trajectory[i] for i in range(len(pts))]),
        "q": np.array([p.q for p in pts]),
        "theta": np.array([p.theta for p in pts]),
        "theta_a": np.array([p.theta_a for p in pts]),
        "p": np.array([p.p for p in pts]),
        "f_l": np.array([p.f_l for p in pts]),
        "f_u": np.array([p.f_u for p in pts]),
        "W_a": np.array([p.W_a for p in pts]),
        "W_gu": np.array([p.W_gu for p in pts]),
        "Z": np.array([p.Z for p in pts]),
        "tau3": np.array([s.objective for s in mission.slots]),
    }


def write_manifest(out_dir: str, cfg: NetworkConfig, seeds: dict, files: list[str]) -> dict:
    inventory = {}
    for name in files:
        path = os.path.join(out_dir, name)
        if os.path.exists(path):
            with open(path, "rb") as fh:
                inventory[name] = hashlib.sha256(fh.read()).hexdigest()
    manifest = {
        "tool": "aeromec",
        "version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seeds": seeds,
        "outputs": inventory,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest


def load_manifest_config(run_dir: str) -> NetworkConfig:
    with open(os.path.join(run_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    return config_from_dict(manifest["config"])
