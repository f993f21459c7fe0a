"""Experiment harness: Monte Carlo robustness, benchmark schemes and sweeps."""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig
from .conic import herm_to_params
from .geometry import make_slot_context, slant_distance
from .mission import MissionResult, plan_mission, write_manifest
from .sca import SlotSolution, initialize_feasible
from .solver import SolverOptions, solve
from .subproblem import BuildOptions, SlotProgramFactory, evaluate_tau3
from .subproblem import extract_point as _extract_point

GRID_FOR_NT = {4: (2, 2), 6: (3, 2), 9: (3, 3), 12: (4, 3), 16: (4, 4)}

AO_BLOCKS = ("compute", "beam", "trajectory")


# ---------------------------------------------------------------------------
# Monte Carlo robustness
# ---------------------------------------------------------------------------


@dataclass
class RobustnessResult:
    ratios: np.ndarray  # task-finished ratio per slot
    trials: int
    seed: int
    finished: list[np.ndarray]  # per slot, per trial verdicts
    samples: list[dict] | None = None

    @property
    def overall(self) -> float:
        return float(np.mean([r.mean() for r in self.finished])) if self.finished else 1.0


def _slot_channel_data(mission: MissionResult, idx: int):
    cfg = mission.cfg
    sol = mission.slots[idx]
    pt = sol.point
    q_prev = mission.trajectory[idx]
    ctx = make_slot_context(cfg, sol.slot, q_prev)
    d_gu = np.array([slant_distance(pt.q, u, cfg.altitude_m) for u in cfg.gu_xy_m])
    d_a = slant_distance(pt.q, cfg.mec_xy_m, cfg.altitude_m)
    h_gu = np.sqrt(cfg.path_gain_ref) * ctx.steering_gu / d_gu[:, None]
    h_a = np.sqrt(cfg.path_gain_ref) * ctx.steering_mec / d_a
    return ctx, h_gu, h_a


def slot_trial_verdicts(
    mission: MissionResult, idx: int, e_gu: np.ndarray, e_a: np.ndarray, rel_tol: float = 1e-7
) -> np.ndarray:
    """Finished verdict per trial for one slot given error draws.

    e_gu has shape (trials, K, N_T), e_a (trials, N_T). A trial is finished
    when every user's local+offloaded bits cover its quota and the relayed
    bits cover the residual, both under the realized channels.
    """
    cfg = mission.cfg
    sol = mission.slots[idx]
    pt = sol.point
    ctx, h_gu, h_a = _slot_channel_data(mission, idx)
    dh = cfg.delta_hat_s
    Q = ctx.quota_bits
    l_l = pt.f_l * dh / cfg.cycles_per_bit
    l_u = pt.f_u * pt.theta_a * dh / cfg.cycles_per_bit

    h = h_gu[None, :, :] + e_gu  # (T, K, NT)
    gain = np.sum(np.abs(h) ** 2, axis=2)
    bits = pt.theta[None, :] * dh * cfg.bandwidth_hz * np.log2(
        1.0 + pt.p[None, :] * gain / cfg.noise_gu_w
    )
    ok_gu = np.all(bits + l_l[None, :] >= Q[None, :] * (1 - rel_tol), axis=1)

    ha = h_a[None, :] + e_a  # (T, NT)
    sig = np.real(np.einsum("ti,ij,tj->t", ha.conj(), pt.W_a, ha))
    bits_a = pt.theta_a * dh * cfg.bandwidth_hz * np.log2(1.0 + sig / cfg.noise_mec_w)
    need = float(np.sum(Q - l_l - l_u))
    ok_a = bits_a >= need * (1 - rel_tol) if need > 0 else np.ones(len(bits_a), dtype=bool)
    return ok_gu & ok_a


def robustness_mc(
    mission: MissionResult, trials: int = 1000, seed: int = 0,
    rel_tol: float = 1e-7, keep_samples: bool = False,
) -> RobustnessResult:
    """Task-finished ratio per slot over uniformly drawn in-ellipsoid errors."""
    from .sampling import sample_errors

    cfg = mission.cfg
    rng = np.random.default_rng(seed)
    ratios = []
    finished = []
    samples = [] if keep_samples else None
    K = cfg.n_users
    for idx in range(len(mission.slots)):
        e_gu = np.stack(
            [sample_errors(cfg.err_matrix("gu"), trials, rng) for _ in range(K)], axis=1
        )
        e_a = sample_errors(cfg.err_matrix("mec"), trials, rng)
        ok = slot_trial_verdicts(mission, idx, e_gu, e_a, rel_tol)
        ratios.append(ok.mean())
        finished.append(ok)
        if keep_samples:
            samples.append({"e_gu": e_gu, "e_a": e_a})
    return RobustnessResult(np.asarray(ratios), trials, seed, finished, samples)


# ---------------------------------------------------------------------------
# benchmark schemes
# ---------------------------------------------------------------------------


def fixed_schedule_pins(cfg: NetworkConfig) -> dict:
    pins = {("t", k): float(np.log(0.5 / cfg.n_users)) for k in range(cfg.n_users)}
    pins[("t_a", 0)] = float(np.log(0.5))
    return pins


def baseline_fixed_schedule(cfg: NetworkConfig, **kw) -> MissionResult:
    """Even time shares frozen at half the slot; everything else optimized."""
    return plan_mission(cfg, pins=fixed_schedule_pins(cfg), **kw)


def baseline_non_robust(cfg: NetworkConfig, **kw) -> MissionResult:
    """Zero-error design: certificates replaced by their nominal corners."""
    return plan_mission(cfg, options=BuildOptions(robust=False), **kw)


def _ao_pins(point, block: str, K: int, NT: int) -> dict:
    """Freeze the physical variables outside the active block."""
    pins: dict = {}

    def pin_scalars(name, arr):
        for i, v in enumerate(np.atleast_1d(arr)):
            pins[(name, i)] = float(v)

    def pin_matrices():
        for j in range(K):
            vals = herm_to_params(point.W_gu[j])
            for p_ in range(NT * NT):
                pins[(f"W{j}", p_)] = float(vals[p_])
        for name, Mx in (("W_a", point.W_a), ("Z", point.Z)):
            vals = herm_to_params(Mx)
            for p_ in range(NT * NT):
                pins[(name, p_)] = float(vals[p_])

    if block != "compute":
        pin_scalars("f_l", point.f_l)
        pin_scalars("p", point.p)
        pin_scalars("t", point.t)
        pin_scalars("t_a", point.t_a)
        pin_scalars("g", point.g)
    if block != "beam":
        pin_matrices()
    if block != "trajectory":
        pin_scalars("q", point.q)
    return pins


def run_slot_ao(
    ctx, cfg: NetworkConfig, eps: float = 1e-3, max_outer: int = 30,
    solver_opts: SolverOptions | None = None, blocks=AO_BLOCKS,
) -> SlotSolution:
    """Alternating optimization over variable blocks, one restricted solve
    per block per outer sweep, all auxiliaries free in every block."""
    from .sca import _finalize

    solver_opts = solver_opts or SolverOptions()
    options = BuildOptions()
    point = initialize_feasible(ctx, cfg, options, solver_opts)
    trace = [evaluate_tau3(point, cfg)]
    times: list[float] = []
    status = "max-iter"
    K, M, NT = ctx.n_users, ctx.n_eves, cfg.n_t
    for _ in range(max_outer):
        for block in blocks:
            factory = SlotProgramFactory(ctx, cfg, options, precond_point=point)
            prog = factory.program_at(point.to_linearization(), _ao_pins(point, block, K, NT))
            res = solve(prog, solver_opts)
            times.append(res.solve_time_ms)
            if not res.ok:
                status = f"solver-failed:{block}:{res.raw_status}"
                break
            cand = _extract_point(res.x, factory.reg, K, M, NT)
            tau = evaluate_tau3(cand, cfg)
            guard = 10.0 * solver_opts.tol * max(1.0, abs(trace[-1]))
            if tau > trace[-1] + guard:
                status = "monotonicity-violation"
                break
            point = cand
        else:
            trace.append(evaluate_tau3(point, cfg))
            if abs(trace[-1] - trace[-2]) <= eps:
                status = "converged"
                break
            continue
        break
    sol = SlotSolution(
        slot=ctx.n, point=point, objective_trace=trace, status=status,
        iterations=len(trace) - 1, slacks={}, solve_times_ms=times,
        violation_trace=[],
    )
    _finalize(sol, ctx, cfg, audit=False)
    return sol


def baseline_ao(cfg: NetworkConfig, eps: float = 1e-3, max_outer: int = 30,
                solver_opts: SolverOptions | None = None, blocks=AO_BLOCKS,
                include_terminal_hop_energy: bool = True) -> MissionResult:
    """Mission rollout where each slot is solved by the block-alternating
    scheme instead of the joint update."""
    from .mission import MissionResult as MR
    from .energy import assemble_breakdown, propulsion_power
    from .sca import SlotInfeasibleError

    t0 = time.perf_counter()
    q = cfg.q_start_m.copy()
    traj = [q.copy()]
    slots = []
    breakdowns = []
    infeasible = None
    for n in range(1, cfg.n_slots + 1):
        ctx = make_slot_context(cfg, n, q)
        try:
            sol = run_slot_ao(ctx, cfg, eps=eps, max_outer=max_outer,
                              solver_opts=solver_opts, blocks=blocks)
        except SlotInfeasibleError:
            infeasible = n
            break
        slots.append(sol)
        breakdowns.append(assemble_breakdown(sol.point, cfg))
        q = sol.point.q.copy()
        traj.append(q.copy())
        if not sol.status.startswith(("converged", "max-iter")):
            break
    hop = 0.0
    if include_terminal_hop_energy and infeasible is None and len(traj) == cfg.n_slots + 1:
        hop_speed = float(np.linalg.norm(traj[-1] - cfg.q_final_m)) / cfg.delta_t_s
        hop = cfg.uav_energy_weight * propulsion_power(hop_speed, cfg.rotor) * cfg.delta_t_s
    return MR(cfg=cfg, slots=slots, trajectory=np.asarray(traj), breakdowns=breakdowns,
              terminal_hop_energy_j=hop, infeasible_slot=infeasible,
              wall_time_s=time.perf_counter() - t0)


def energy_gain(e_proposed: float, e_benchmark: float) -> float:
    """(E_2 - E_1) / E_2 with E_1 the proposed and E_2 the benchmark total."""
    return (e_benchmark - e_proposed) / e_benchmark


def refine_mission(base: MissionResult, cfg: NetworkConfig,
                   eps: float = 1e-3, max_iter: int = 50,
                   solver_opts: SolverOptions | None = None,
                   audit: bool = False) -> MissionResult:
    """Free-schedule descent along a benchmark mission's frozen trajectory.

    Each slot re-solves the unrestricted subproblem warm-started at the
    benchmark's converged point with the position pinned to the benchmark
    trajectory, so every slot objective is no worse than the benchmark's.
    The result is a valid proposed-scheme rollout (a restricted local
    solution of the same per-slot problem).
    """
    from .energy import assemble_breakdown
    from .sca import run_slot

    t0 = time.perf_counter()
    slots = []
    breakdowns = []
    for i, bsol in enumerate(base.slots):
        ctx = make_slot_context(cfg, bsol.slot, base.trajectory[i])
        qn = base.trajectory[i + 1]
        pins = {("q", 0): float(qn[0]), ("q", 1): float(qn[1])}
        sol = run_slot(ctx, cfg, eps=eps, max_iter=max_iter, solver_opts=solver_opts,
                       init_point=bsol.point, pins=pins, audit=audit)
        if not sol.objective_trace or sol.objective > bsol.objective:
            sol = bsol  # keep the benchmark point if the solver stalled
        slots.append(sol)
        breakdowns.append(assemble_breakdown(sol.point, cfg))
    return MissionResult(
        cfg=cfg, slots=slots, trajectory=base.trajectory.copy(),
        breakdowns=breakdowns, terminal_hop_energy_j=base.terminal_hop_energy_j,
        infeasible_slot=base.infeasible_slot,
        wall_time_s=time.perf_counter() - t0,
    )


def plan_mission_proposed(cfg: NetworkConfig, anchors: list[MissionResult] | None = None,
                          **kw) -> MissionResult:
    """Proposed-scheme mission as the best of the free rollout and
    free-schedule refinements of any anchor rollouts (multi-start)."""
    candidates = [plan_mission(cfg, **kw)]
    for anchor in anchors or []:
        if anchor.infeasible_slot is None:
            candidates.append(refine_mission(anchor, cfg,
                                             eps=kw.get("eps", 1e-3),
                                             max_iter=kw.get("max_iter", 50),
                                             solver_opts=kw.get("solver_opts"),
                                             audit=kw.get("audit", False)))
    complete = [m for m in candidates if m.complete]
    pool = complete or candidates
    return min(pool, key=lambda m: m.total_weighted_j)


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

SWEEPABLE = ("task_bits", "n_t", "err_scale", "eta", "sinr_req", "sinr_leak")


def apply_sweep_value(cfg: NetworkConfig, parameter: str, value) -> NetworkConfig:
    if parameter == "task_bits":
        return cfg.replace(task_bits=float(value))
    if parameter == "n_t":
        nx, ny = GRID_FOR_NT[int(value)]
        return cfg.replace(grid_nx=nx, grid_ny=ny)
    if parameter == "err_scale":
        return cfg.replace(err_gu=float(value), err_eve=float(value), err_mec=float(value))
    if parameter == "eta":
        return cfg.replace(uav_energy_weight=float(value))
    if parameter == "sinr_req":
        return cfg.replace(sinr_req_linear=float(value))
    if parameter == "sinr_leak":
        return cfg.replace(sinr_leak_linear=float(value))
    raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEPABLE}")


@dataclass
class ExperimentReport:
    experiment: str
    parameter: str
    values: list
    rows: list[dict] = field(default_factory=list)
    seeds: dict = field(default_factory=dict)
    runtime_s: float = 0.0

    def monotone_direction(self, key: str = "total_weighted_j") -> int:
        vals = [r[key] for r in self.rows if r.get(key) is not None]
        if all(b > a for a, b in zip(vals, vals[1:])):
            return 1
        if all(b < a for a, b in zip(vals, vals[1:])):
            return -1
        return 0

    def to_csv(self, path: str) -> None:
        if not self.rows:
            return
        keys = list(self.rows[0].keys())
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for row in self.rows:
                w.writerow(row)


def sweep(
    cfg: NetworkConfig, parameter: str, values, runner=plan_mission,
    experiment: str = "sweep", **runner_kw,
) -> ExperimentReport:
    """One mission per value; reports totals and completion per point."""
    t0 = time.perf_counter()
    report = ExperimentReport(experiment=experiment, parameter=parameter, values=list(values))
    for v in values:
        cfg_v = apply_sweep_value(cfg, parameter, v)
        mission = runner(cfg_v, **runner_kw)
        report.rows.append({
            "parameter": parameter,
            "value": v,
            "total_weighted_j": mission.total_weighted_j,
            "grand_total_j": mission.grand_total_j,
            "complete": mission.complete,
            "config_hash": cfg_v.config_hash(),
        })
    report.runtime_s = time.perf_counter() - t0
    return report


def save_report(report: ExperimentReport, out_dir: str, cfg: NetworkConfig) -> None:
    os.makedirs(out_dir, exist_ok=True)
    report.to_csv(os.path.join(out_dir, "report.csv"))
    write_manifest(out_dir, cfg, report.seeds, ["report.csv"])
