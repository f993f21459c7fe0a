"""Per-slot successive convex approximation driver.

Feasible-point construction (heuristic stage, then slack-restoration stage),
the monotone solve loop, rank-one beam recovery from the relaxed covariance
matrices, and the post-convergence worst-case audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig
from .conic import evaluate_block_slacks
from .energy import assemble_breakdown, induced_speed_factor
from .geometry import SlotContext, slant_distance
from .robust import worst_case_max, worst_case_oracle
from .solver import SolverOptions, solve
from .subproblem import (
    LOG_CPU_REF_HZ,
    V2_FLOOR,
    BuildOptions,
    DecisionPoint,
    SlotProgramFactory,
    evaluate_tau3,
    extract_point,
    point_vector,
)

FEAS_TOL = 1e-9
RANK_ONE_QUALITY = 0.999


class SlotInfeasibleError(RuntimeError):
    def __init__(self, slot: int, detail: str = ""):
        super().__init__(f"slot {slot} infeasible{': ' + detail if detail else ''}")
        self.slot = slot
        self.detail = detail


@dataclass
class SlotSolution:
    slot: int
    point: DecisionPoint
    objective_trace: list[float]
    status: str  # converged | max-iter | monotonicity-violation | solver-failed
    iterations: int
    slacks: dict[str, float]
    solve_times_ms: list[float]
    violation_trace: list[float]
    rank_quality: dict[str, float] = field(default_factory=dict)
    beams_gu: np.ndarray | None = None
    beam_relay: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def converged(self) -> bool:
        return self.status == "converged"


# ---------------------------------------------------------------------------
# feasible initialization
# ---------------------------------------------------------------------------


def _step_toward_final(ctx: SlotContext, cfg: NetworkConfig) -> np.ndarray:
    qp = ctx.q_prev
    reach = ctx.slots_remaining * cfg.v_max_mps * cfg.delta_t_s
    gap = float(np.linalg.norm(qp - cfg.q_final_m))
    if gap <= reach:
        return qp.copy()
    step = min(gap - reach, cfg.v_max_mps * cfg.delta_t_s)
    return qp + step * (cfg.q_final_m - qp) / gap


def _grid_refine(fn, grid):
    vals = [fn(x) for x in grid]
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]
    for _ in range(60):
        mids = np.linspace(lo, hi, 5)
        mv = [fn(x) for x in mids]
        j = int(np.argmax(mv))
        lo, hi = mids[max(j - 1, 0)], mids[min(j + 1, 4)]
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    x = 0.5 * (lo + hi)
    if vals[k] > fn(x):
        return grid[k], vals[k]
    return x, fn(x)


def _worst_gain_vec(p: float, hbar: np.ndarray, C: np.ndarray) -> float:
    """min over the error set of p * ||hbar + e||^2 (uplink with MRC)."""
    n = hbar.shape[0]
    val, _ = worst_case_oracle(p * np.eye(n), p * hbar, p * float(np.real(hbar.conj() @ hbar)), C, 1.0)
    return max(val, 0.0)


def _worst_gain_quad(W: np.ndarray, hbar: np.ndarray, C: np.ndarray) -> float:
    """min over the error set of (hbar + e)^H W (hbar + e)."""
    val, _ = worst_case_oracle(W, W @ hbar, float(np.real(hbar.conj() @ W @ hbar)), C, 1.0)
    return max(val, 0.0)


def initialize_feasible(
    ctx: SlotContext,
    cfg: NetworkConfig,
    options: BuildOptions | None = None,
    solver_opts: SolverOptions | None = None,
) -> DecisionPoint:
    """Construct a subproblem-feasible starting point.

    Stage A assembles a heuristic point (step-toward-final position, even
    time shares, clamped CPU rates, matched-filter beams with a power
    fix-point, isotropic artificial noise, certificate multipliers from 1-D
    eigenvalue searches). If its self-linearized feasibility check fails,
    stage B runs slack-minimizing restoration solves, re-linearizing at each
    returned iterate.
    """
    options = options or BuildOptions()
    solver_opts = solver_opts or SolverOptions()
    point = stage_a_point(ctx, cfg)
    factory = SlotProgramFactory(ctx, cfg, options, precond_point=point)
    if _self_feasible(factory, point, ctx, cfg):
        return point
    restored = _stage_b_restore(point, ctx, cfg, options, solver_opts)
    if restored is None:
        raise SlotInfeasibleError(ctx.n, "restoration could not reach the feasible set")
    return restored


def stage_a_point(ctx: SlotContext, cfg: NetworkConfig) -> DecisionPoint:
    """Heuristic candidate point; feasible on benign geometries, otherwise
    the restoration stage starts from it."""
    K, M, NT = ctx.n_users, ctx.n_eves, cfg.n_t
    rho = cfg.path_gain_ref
    dh = cfg.delta_hat_s

    q = _step_toward_final(ctx, cfg)
    d_gu = np.array([slant_distance(q, u, cfg.altitude_m) for u in cfg.gu_xy_m])
    d_eve = np.array([slant_distance(q, u, cfg.altitude_m) for u in cfg.eve_xy_m])
    d_a = slant_distance(q, cfg.mec_xy_m, cfg.altitude_m)
    h_gu = np.sqrt(rho) * ctx.steering_gu / d_gu[:, None]
    h_eve = np.sqrt(rho) * ctx.steering_eve / d_eve[:, None]
    h_a = np.sqrt(rho) * ctx.steering_mec / d_a

    theta_a = 0.5
    t = np.full(K, math.log(0.5 / K))
    t_a = math.log(theta_a)
    Q = ctx.quota_bits
    f_l = np.minimum(cfg.f_gu_max_hz, 0.8 * Q * cfg.cycles_per_bit / dh)
    l_l = f_l * dh / cfg.cycles_per_bit
    f_u = np.clip(0.8 * (Q - l_l) * cfg.cycles_per_bit / (theta_a * dh), 1.0, 0.999 * cfg.f_uav_max_hz / K)
    g = np.log(f_u / LOG_CPU_REF_HZ)
    p = np.full(K, cfg.p_gu_max_w)

    # relay beam at (almost) full power toward the ground MEC
    wa_dir = ctx.steering_mec / np.linalg.norm(ctx.steering_mec)
    W_a = 0.999 * cfg.p_uav_max_w * np.outer(wa_dir, wa_dir.conj())
    # isotropic artificial noise
    z_diag = 0.05 * cfg.p_uav_max_w / NT
    Z = z_diag * np.eye(NT, dtype=complex)

    # download beams: matched filter with a margin power fix-point
    beams = (ctx.steering_gu / np.sqrt(NT)).conj()  # unit-norm MRT, |h^H w| maximal
    G = np.abs(h_gu.conj() @ beams.T) ** 2  # G[k, j] = |h_k^H w_j|^2
    z_at_user = z_diag * np.linalg.norm(h_gu, axis=1) ** 2
    P = np.zeros(K)
    margin = 1.5
    for _ in range(60):
        interf = (G * P[None, :]).sum(axis=1) - np.diag(G) * P
        P = margin * cfg.sinr_req_linear * (cfg.noise_gu_w + interf + z_at_user) / np.diag(G)
    budget = cfg.p_uav_max_w - float(np.real(np.trace(Z)))
    if P.sum() > 0.95 * budget:
        P *= 0.95 * budget / P.sum()
    W_gu = np.array([P[k] * np.outer(beams[k], beams[k].conj()) for k in range(K)])

    # worst-case received-power proxies and their certificates
    m_small = 1e-3
    s = np.log(d_gu**2 * (1 + m_small))
    s_eve = np.log(d_eve**2 * (1 + m_small))
    s_a = math.log(d_a**2 * (1 + m_small))

    alpha = np.array([0.98 * _worst_gain_vec(p[k], h_gu[k], cfg.err_matrix("gu")) for k in range(K)])
    alpha_a = 0.98 * _worst_gain_quad(W_a, h_a, cfg.err_matrix("mec"))

    C_gu = cfg.err_matrix("gu")
    C_mec = cfg.err_matrix("mec")
    lam = np.zeros(K)
    beta = np.zeros(K)
    gam = np.zeros(K)
    lam_grid_base = np.concatenate([[0.0], np.logspace(-16, 2, 37)])
    for k in range(K):
        a = ctx.steering_gu[k]
        cmax = float(np.linalg.eigvalsh(C_gu)[-1])

        def mineig(lmbda, k=k, a=a):
            gam_k = math.log((alpha[k] + lmbda) * (1 + m_small))
            beta_k = math.exp(gam_k + s[k]) * (1 + m_small)
            tl = lmbda * C_gu + p[k] * np.eye(NT)
            M_ = np.zeros((NT + 1, NT + 1), dtype=complex)
            M_[:NT, :NT] = tl
            M_[:NT, NT] = p[k] * np.sqrt(rho) * a
            M_[NT, :NT] = np.conj(M_[:NT, NT])
            M_[NT, NT] = p[k] * rho * NT - beta_k
            return float(np.linalg.eigvalsh(M_)[0])

        for _ in range(10):
            lam_k, val = _grid_refine(mineig, lam_grid_base * max(p[k] / cmax, 1e-18))
            if val >= 0:
                break
            alpha[k] *= 0.9
        lam[k] = lam_k
        gam[k] = math.log((alpha[k] + lam[k]) * (1 + m_small))
        beta[k] = math.exp(gam[k] + s[k]) * (1 + m_small)

    def mineig_relay(lmbda):
        gam_ = math.log((alpha_a + lmbda) * (1 + m_small))
        beta_ = math.exp(gam_ + s_a) * (1 + m_small)
        M_ = np.zeros((NT + 1, NT + 1), dtype=complex)
        M_[:NT, :NT] = lmbda * C_mec + W_a
        M_[:NT, NT] = np.sqrt(rho) * (W_a @ ctx.steering_mec)
        M_[NT, :NT] = np.conj(M_[:NT, NT])
        M_[NT, NT] = rho * np.real(ctx.steering_mec.conj() @ W_a @ ctx.steering_mec) - beta_
        return float(np.linalg.eigvalsh(M_)[0])

    cmax_a = float(np.linalg.eigvalsh(C_mec)[-1])
    for _ in range(10):
        lam_a, val = _grid_refine(mineig_relay, lam_grid_base * max(np.real(np.trace(W_a)) / cmax_a, 1e-18))
        if val >= 0:
            break
        alpha_a *= 0.9
    gam_a = math.log((alpha_a + lam_a) * (1 + m_small))
    beta_a = math.exp(gam_a + s_a) * (1 + m_small)

    # QoS and leakage certificates
    C_eve = [cfg.err_matrix("eve", m) for m in range(M)]
    lam_u = np.zeros(K)
    beta_u = np.zeros(K)
    gam_u = np.zeros(K)
    sum_W = W_gu.sum(axis=0)
    for k in range(K):
        X = Z + (sum_W - W_gu[k]) - W_gu[k] / cfg.sinr_req_linear
        a = ctx.steering_gu[k]
        border = -np.sqrt(rho) * (X @ a)
        base_corner = -rho * float(np.real(a.conj() @ X @ a))

        def mineig_qos(lmbda, k=k, X=X, border=border, base_corner=base_corner):
            gam_val = math.log(max(lmbda, 1e-18) * (1 + m_small))
            beta_val = math.exp(gam_val + s[k]) * (1 + m_small) + cfg.noise_gu_w * d_gu[k] ** 2 * (1 + m_small)
            M_ = np.zeros((NT + 1, NT + 1), dtype=complex)
            M_[:NT, :NT] = lmbda * C_gu - X
            M_[:NT, NT] = border
            M_[NT, :NT] = np.conj(border)
            M_[NT, NT] = -beta_val + base_corner
            return float(np.linalg.eigvalsh(M_)[0])

        x_scale = max(float(np.abs(X).max()), 1e-12)
        lam_u[k], _ = _grid_refine(mineig_qos, np.logspace(-10, 6, 33) * x_scale / cmax_gu_safe(C_gu))
        lam_u[k] = max(lam_u[k], 1e-18)
        gam_u[k] = math.log(lam_u[k] * (1 + m_small))
        beta_u[k] = math.exp(gam_u[k] + s[k]) * (1 + m_small) + cfg.noise_gu_w * d_gu[k] ** 2 * (1 + m_small)

    lam_u_mk = np.zeros((M, K))
    beta_u_mk = np.zeros((M, K))
    gam_u_mk = np.zeros((M, K))
    for m in range(M):
        for k in range(K):
            X = Z + (sum_W - W_gu[k]) - W_gu[k] / cfg.sinr_leak_linear
            a = ctx.steering_eve[m]
            border = np.sqrt(rho) * (X @ a)
            base_corner = rho * float(np.real(a.conj() @ X @ a))

            def mineig_sec(lmbda, X=X, border=border, base_corner=base_corner, m=m):
                gam_val = math.log(max(lmbda, 1e-18) * (1 + m_small))
                e2_val = math.exp(gam_val + s_eve[m]) * (1 + m_small)
                beta_val = cfg.noise_eve_w * d_eve[m] ** 2 * (1 - 1e-4) - e2_val
                M_ = np.zeros((NT + 1, NT + 1), dtype=complex)
                M_[:NT, :NT] = lmbda * C_eve[m] + X
                M_[:NT, NT] = border
                M_[NT, :NT] = np.conj(border)
                M_[NT, NT] = beta_val + base_corner
                return float(np.linalg.eigvalsh(M_)[0])

            grid = np.concatenate([[1e-18], np.logspace(-16, 0, 33) * cfg.noise_eve_w])
            lam_u_mk[m, k], _ = _grid_refine(mineig_sec, grid)
            lam_u_mk[m, k] = max(lam_u_mk[m, k], 1e-18)
            gam_u_mk[m, k] = math.log(lam_u_mk[m, k] * (1 + m_small))
            beta_u_mk[m, k] = cfg.noise_eve_w * d_eve[m] ** 2 * (1 - 1e-4) - math.exp(
                gam_u_mk[m, k] + s_eve[m]
            ) * (1 + m_small)

    # rate proxies
    r = np.log(np.maximum(np.log2(1 + alpha / cfg.noise_gu_w), 1e-12)) - 1e-6
    r_a = math.log(max(np.log2(1 + alpha_a / cfg.noise_mec_w), 1e-12)) - 1e-6
    zeta = np.log(p) + 1e-9
    zeta_a = math.log(max(float(np.real(np.trace(W_a))), 1e-12)) + 1e-9

    v1 = float(np.linalg.norm(q - ctx.q_prev)) / cfg.delta_t_s
    v2 = max((1 + 1e-6) * induced_speed_factor(v1, cfg.rotor), V2_FLOOR * (1 + 1e-6))

    return DecisionPoint(
        f_l=f_l, p=p, t=t, t_a=t_a, g=g, zeta=zeta, zeta_a=zeta_a, r=r, r_a=r_a,
        alpha=alpha, alpha_a=alpha_a, lam=lam, lam_a=lam_a, lam_u=lam_u,
        lam_u_mk=lam_u_mk, beta=beta, beta_a=beta_a, beta_u=beta_u,
        beta_u_mk=beta_u_mk, gam=gam, gam_a=gam_a, gam_u=gam_u,
        gam_u_mk=gam_u_mk, s=s, s_eve=s_eve, s_a=s_a, v1=v1, v2=v2, q=q,
        W_gu=W_gu, W_a=W_a, Z=Z,
        aux={
            "nu_rate": 0.5 * (np.exp(r) + np.log2(1 + alpha / cfg.noise_gu_w)),
            "nu_rate_a": 0.5 * (math.exp(r_a) + np.log2(1 + alpha_a / cfg.noise_mec_w)),
            "sqd": d_gu**2 * (1 + 0.5 * m_small),
            "sqd_eve": d_eve**2 * (1 + 0.5 * m_small),
            "sqd_a": d_a**2 * (1 + 0.5 * m_small),
            "flsq": (f_l / cfg.f_gu_max_hz) ** 2 + 1e-12,
            "flcub": (f_l / cfg.f_gu_max_hz) ** 3 + 1e-12,
            "v1sq": (v1 / cfg.v_max_mps) ** 2 + 1e-12,
            "v1cub": (v1 / cfg.v_max_mps) ** 3 + 1e-12,
            "winv": (1 + 1e-9) / v2,
            "uinv": (1 + 2e-9) / v2**2,
        },
    )


def cmax_gu_safe(C: np.ndarray) -> float:
    return max(float(np.linalg.eigvalsh(C)[-1]), 1e-30)


def _self_feasible(factory: SlotProgramFactory, point: DecisionPoint,
                   ctx: SlotContext, cfg: NetworkConfig, tol: float = FEAS_TOL) -> bool:
    prog = factory.program_at(point.to_linearization())
    x = point_vector(point, factory.reg, ctx, cfg)
    slacks = evaluate_block_slacks(prog, x)
    return min(slacks.values()) >= -tol


def _stage_b_restore(point, ctx, cfg, options, solver_opts, rounds: int = 5):
    slack_opts = BuildOptions(robust=options.robust, slack=True)
    K, M, NT = ctx.n_users, ctx.n_eves, cfg.n_t
    cand = point
    lin = point.to_linearization()
    for _ in range(rounds):
        slack_factory = SlotProgramFactory(ctx, cfg, slack_opts, precond_point=cand)
        prog = slack_factory.program_at(lin)
        res = solve(prog, solver_opts)
        if res.status == "infeasible" or not res.ok:
            return None
        cand = extract_point(res.x, slack_factory.reg, K, M, NT)
        cand.raw = None  # drop the slack-registry vector; epigraphs re-derive
        check_factory = SlotProgramFactory(ctx, cfg, options, precond_point=cand)
        if _self_feasible(check_factory, cand, ctx, cfg):
            return cand
        lin = cand.to_linearization()
    return None


# ---------------------------------------------------------------------------
# SCA loop
# ---------------------------------------------------------------------------


def run_slot(
    ctx: SlotContext,
    cfg: NetworkConfig,
    options: BuildOptions | None = None,
    eps: float = 1e-3,
    max_iter: int = 50,
    solver_opts: SolverOptions | None = None,
    init_point: DecisionPoint | None = None,
    pins: dict | None = None,
    audit: bool = True,
) -> SlotSolution:
    """Algorithm loop: solve the linearized subproblem until the objective
    change falls below eps. The objective trace must be nonincreasing within
    10x solver tolerance; a violation aborts with a diagnostic status.
    """
    options = options or BuildOptions()
    solver_opts = solver_opts or SolverOptions()
    point = init_point or initialize_feasible(ctx, cfg, options, solver_opts)
    trace = [evaluate_tau3(point, cfg)]
    lin = point.to_linearization()
    status = "max-iter"
    times: list[float] = []
    violations: list[float] = []
    slacks: dict[str, float] = {}
    K, M, NT = ctx.n_users, ctx.n_eves, cfg.n_t
    gap_max = 0.0
    for _ in range(max_iter):
        # fresh certificate preconditioning at the current iterate
        factory = SlotProgramFactory(ctx, cfg, options, precond_point=point)
        prog = factory.program_at(lin, pins)
        res = solve(prog, solver_opts)
        times.append(res.solve_time_ms)
        if not res.ok:
            status = f"solver-failed:{res.raw_status}"
            break
        cand = extract_point(res.x, factory.reg, K, M, NT)
        tau = evaluate_tau3(cand, cfg)
        guard = 10.0 * solver_opts.tol * max(1.0, abs(trace[-1]))
        slacks = evaluate_block_slacks(prog, res.x)
        violations.append(-min(0.0, min(slacks.values())))
        gap_max = max(gap_max, _breakdown_gap(cand, cfg))
        if tau > trace[-1] + guard:
            status = "monotonicity-violation"
            break
        trace.append(tau)
        point = cand
        lin = point.to_linearization()
        if abs(trace[-1] - trace[-2]) <= eps:
            status = "converged"
            break

    sol = SlotSolution(
        slot=ctx.n,
        point=point,
        objective_trace=trace,
        status=status,
        iterations=len(trace) - 1,
        slacks=slacks,
        solve_times_ms=times,
        violation_trace=violations,
    )
    sol.diagnostics["max_breakdown_gap_rel"] = gap_max
    _finalize(sol, ctx, cfg, audit=audit)
    return sol


def _finalize(sol: SlotSolution, ctx: SlotContext, cfg: NetworkConfig, audit: bool) -> None:
    pt = sol.point
    K = ctx.n_users
    rng = np.random.default_rng(1234 + ctx.n)
    beams = []
    for k in range(K):
        ctx_k = _gu_recovery_context(pt, ctx, cfg, k)
        w, quality, path = recover_rank_one(pt.W_gu[k], check=ctx_k, rng=rng)
        sol.rank_quality[f"W{k}"] = quality
        beams.append(w)
    sol.beams_gu = np.array(beams)
    w_a, q_a, _ = recover_rank_one(pt.W_a, rng=rng)
    sol.rank_quality["W_a"] = q_a
    sol.beam_relay = w_a
    sol.diagnostics["breakdown_vs_tau3_rel"] = _breakdown_gap(pt, cfg)
    sol.diagnostics["beta_u_mk_negative"] = bool(np.any(pt.beta_u_mk < 0))
    if audit:
        sol.diagnostics["true_constraint_slacks"] = evaluate_true_constraints(pt, ctx, cfg)
        sol.diagnostics["nominal_recovered"] = nominal_beam_check(sol, ctx, cfg)


def _breakdown_gap(pt: DecisionPoint, cfg: NetworkConfig) -> float:
    bd = assemble_breakdown(pt, cfg)
    tau = evaluate_tau3(pt, cfg)
    return abs(bd.weighted_total - tau) / max(1.0, abs(tau))


def _gu_recovery_context(pt, ctx, cfg, k):
    rho = cfg.path_gain_ref
    d_gu = np.array([slant_distance(pt.q, u, cfg.altitude_m) for u in cfg.gu_xy_m])
    d_eve = np.array([slant_distance(pt.q, u, cfg.altitude_m) for u in cfg.eve_xy_m])
    h_gu = np.sqrt(rho) * ctx.steering_gu / d_gu[:, None]
    h_eve = np.sqrt(rho) * ctx.steering_eve / d_eve[:, None]
    other = [pt.W_gu[j] for j in range(ctx.n_users) if j != k]
    den_k = cfg.noise_gu_w + float(
        np.real(h_gu[k].conj() @ (sum(other) + pt.Z) @ h_gu[k])
    )
    return {
        "h_own": h_gu[k],
        "den_own": den_k,
        "sinr_req": cfg.sinr_req_linear,
        "h_eves": h_eve,
        "Z": pt.Z,
        "others": other,
        "noise_eve": cfg.noise_eve_w,
        "sinr_leak": cfg.sinr_leak_linear,
        "power_cap": float(np.real(np.trace(pt.W_gu[k]))) * (1 + 1e-9),
    }


def recover_rank_one(W: np.ndarray, check: dict | None = None,
                     rng: np.random.Generator | None = None, draws: int = 200):
    """Beam vector from a relaxed covariance matrix.

    High-quality matrices (largest eigenvalue >= 99.9% of the trace) use the
    scaled principal eigenvector; otherwise Gaussian randomization draws
    candidates, rescales each to meet the served user's nominal SINR, and
    keeps the cheapest draw that also respects leakage and the matrix power.
    Returns (vector, quality, path).
    """
    W = np.asarray(W, dtype=complex)
    tr = float(np.real(np.trace(W)))
    if tr <= 0:
        return np.zeros(W.shape[0], dtype=complex), 1.0, "zero"
    ew, V = np.linalg.eigh(W)
    quality = float(ew[-1] / tr)
    if quality >= RANK_ONE_QUALITY or check is None:
        return V[:, -1] * np.sqrt(max(ew[-1], 0.0)), quality, "principal"
    rng = rng or np.random.default_rng(0)
    sqrtW = (V * np.sqrt(np.maximum(ew, 0.0))) @ V.conj().T
    best = None
    n = W.shape[0]
    for _ in range(draws):
        xi = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        w = sqrtW @ xi
        sig = abs(np.vdot(check["h_own"], w)) ** 2
        if sig <= 0:
            continue
        scale_sq = check["sinr_req"] * check["den_own"] / sig
        w = w * np.sqrt(scale_sq)
        power = float(np.real(np.vdot(w, w)))
        if power > check["power_cap"]:
            continue
        ok = True
        for h_e in check["h_eves"]:
            num = abs(np.vdot(h_e, w)) ** 2
            den = check["noise_eve"] + float(
                np.real(h_e.conj() @ (sum(check["others"]) + check["Z"]) @ h_e)
            )
            if num / den > check["sinr_leak"]:
                ok = False
                break
        if ok and (best is None or power < best[1]):
            best = (w, power)
    if best is None:
        return V[:, -1] * np.sqrt(max(ew[-1], 0.0)), quality, "randomization-failed"
    return best[0], quality, "randomized"


def nominal_beam_check(sol: SlotSolution, ctx: SlotContext, cfg: NetworkConfig) -> dict:
    """Nominal-channel SINR and leakage with the recovered rank-one beams."""
    pt = sol.point
    rho = cfg.path_gain_ref
    d_gu = np.array([slant_distance(pt.q, u, cfg.altitude_m) for u in cfg.gu_xy_m])
    d_eve = np.array([slant_distance(pt.q, u, cfg.altitude_m) for u in cfg.eve_xy_m])
    h_gu = np.sqrt(rho) * ctx.steering_gu / d_gu[:, None]
    h_eve = np.sqrt(rho) * ctx.steering_eve / d_eve[:, None]
    W = sol.beams_gu
    K = ctx.n_users
    sinr = np.zeros(K)
    for k in range(K):
        sig = abs(np.vdot(h_gu[k], W[k])) ** 2
        interf = sum(abs(np.vdot(h_gu[k], W[j])) ** 2 for j in range(K) if j != k)
        an = float(np.real(h_gu[k].conj() @ pt.Z @ h_gu[k]))
        sinr[k] = sig / (cfg.noise_gu_w + interf + an)
    leak = np.zeros((ctx.n_eves, K))
    for m in range(ctx.n_eves):
        for k in range(K):
            sig = abs(np.vdot(h_eve[m], W[k])) ** 2
            interf = sum(abs(np.vdot(h_eve[m], W[j])) ** 2 for j in range(K) if j != k)
            an = float(np.real(h_eve[m].conj() @ pt.Z @ h_eve[m]))
            leak[m, k] = sig / (cfg.noise_eve_w + interf + an)
    return {
        "sinr_min_rel": float(sinr.min() / cfg.sinr_req_linear),
        "leak_max_rel": float(leak.max() / cfg.sinr_leak_linear) if leak.size else 0.0,
    }


# ---------------------------------------------------------------------------
# original-constraint audit (worst cases via the oracle, not the LMIs)
# ---------------------------------------------------------------------------


def evaluate_true_constraints(pt: DecisionPoint, ctx: SlotContext, cfg: NetworkConfig) -> dict[str, float]:
    """Relative slacks of the pre-reformulation constraint set at a point.

    Robust constraints are verified with the trust-region oracle over the
    unscaled error sets. Positive values mean satisfied.
    """
    K, M = ctx.n_users, ctx.n_eves
    rho = cfg.path_gain_ref
    dh = cfg.delta_hat_s
    out: dict[str, float] = {}
    d_gu = np.array([slant_distance(pt.q, u, cfg.altitude_m) for u in cfg.gu_xy_m])
    d_eve = np.array([slant_distance(pt.q, u, cfg.altitude_m) for u in cfg.eve_xy_m])
    d_a = slant_distance(pt.q, cfg.mec_xy_m, cfg.altitude_m)
    h_gu = np.sqrt(rho) * ctx.steering_gu / d_gu[:, None]
    h_eve = np.sqrt(rho) * ctx.steering_eve / d_eve[:, None]
    h_a = np.sqrt(rho) * ctx.steering_mec / d_a

    theta = pt.theta
    theta_a = pt.theta_a
    f_u = pt.f_u
    l_l = pt.f_l * dh / cfg.cycles_per_bit
    l_u = f_u * theta_a * dh / cfg.cycles_per_bit
    Q = ctx.quota_bits

    # worst-case uplink rate balances
    for k in range(K):
        wc = _worst_gain_vec(pt.p[k], h_gu[k], cfg.err_matrix("gu"))
        bits = theta[k] * dh * cfg.bandwidth_hz * np.log2(1 + wc / cfg.noise_gu_w)
        out[f"rate-balance[{k}]"] = float((bits + l_l[k] - Q[k]) / Q[k])
        out[f"per-user-cap[{k}]"] = float((Q[k] - l_l[k] - l_u[k]) / Q[k])
    wc_a = _worst_gain_quad(pt.W_a, h_a, cfg.err_matrix("mec"))
    bits_a = theta_a * dh * cfg.bandwidth_hz * np.log2(1 + wc_a / cfg.noise_mec_w)
    need = float(np.sum(Q - l_l - l_u))
    out["relay-balance"] = float((bits_a - need) / max(Q.sum(), 1.0))

    # worst-case download QoS and leakage
    sum_W = pt.W_gu.sum(axis=0)
    for k in range(K):
        X = pt.Z + (sum_W - pt.W_gu[k]) - pt.W_gu[k] / cfg.sinr_req_linear
        val, _ = worst_case_max(
            X, X @ h_gu[k],
            float(np.real(h_gu[k].conj() @ X @ h_gu[k])) + cfg.noise_gu_w,
            cfg.err_matrix("gu"), 1.0,
        )
        norm = cfg.noise_gu_w + abs(float(np.real(h_gu[k].conj() @ X @ h_gu[k])))
        out[f"qos[{k}]"] = float(-val / norm)
    for m in range(M):
        for k in range(K):
            X = pt.Z + (sum_W - pt.W_gu[k]) - pt.W_gu[k] / cfg.sinr_leak_linear
            val, _ = worst_case_oracle(
                X, X @ h_eve[m],
                float(np.real(h_eve[m].conj() @ X @ h_eve[m])) + cfg.noise_eve_w,
                cfg.err_matrix("eve", m), 1.0,
            )
            norm = cfg.noise_eve_w + abs(float(np.real(h_eve[m].conj() @ X @ h_eve[m])))
            out[f"security[{m},{k}]"] = float(val / norm)

    # schedule, budgets, trajectory, PSD
    out["time-split"] = float(1.0 - theta.sum() - theta_a)
    out["gu-cpu-box"] = float(min((cfg.f_gu_max_hz - pt.f_l).min(), pt.f_l.min()) / cfg.f_gu_max_hz)
    out["uav-cpu-cap"] = float((cfg.f_uav_max_hz - f_u.sum()) / cfg.f_uav_max_hz)
    out["gu-power-box"] = float(min((cfg.p_gu_max_w - pt.p).min(), pt.p.min()) / cfg.p_gu_max_w)
    tr_dl = float(np.real(sum(np.trace(Wk) for Wk in pt.W_gu) + np.trace(pt.Z)))
    out["uav-download-power-cap"] = float((cfg.p_uav_max_w - tr_dl) / cfg.p_uav_max_w)
    out["uav-offload-power-cap"] = float(
        (cfg.p_uav_max_w - np.real(np.trace(pt.W_a))) / cfg.p_uav_max_w
    )
    vstep = cfg.v_max_mps * cfg.delta_t_s
    out["step-limit"] = float((vstep - np.linalg.norm(pt.q - ctx.q_prev)) / vstep)
    out["terminal-reach"] = float(
        (ctx.slots_remaining * vstep - np.linalg.norm(pt.q - cfg.q_final_m)) / vstep
    )
    out["psd-vars"] = float(
        min(
            min(np.linalg.eigvalsh(Wk)[0] for Wk in pt.W_gu),
            np.linalg.eigvalsh(pt.W_a)[0],
            np.linalg.eigvalsh(pt.Z)[0],
        )
    )
    return out
