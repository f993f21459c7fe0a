import numpy as np
import pytest
from collections import Counter

from aeromec.config import ci_config
from aeromec.conic import ProgramBuilder, VariableRegistry, evaluate_block_slacks
from aeromec.geometry import make_slot_context
from aeromec.sca import initialize_feasible
from aeromec.solver import SolverOptions, solve
from aeromec.subproblem import (
    LN2,
    LOG_CPU_REF_HZ,
    BuildOptions,
    SlotProgramFactory,
    block_count_formula,
    evaluate_tau3,
    extract_point,
    make_registry,
    point_vector,
    scalar_groups,
)
from conftest import tiny_config

REQUIRED_SYMBOLS = [
    # decision and auxiliary scalars of the per-slot variable set
    "f_l", "p", "t", "t_a", "g", "zeta", "zeta_a", "r", "r_a",
    "alpha", "alpha_a", "lam", "lam_a", "lam_u", "lam_u_mk",
    "beta", "beta_a", "beta_u", "beta_u_mk",
    "gam", "gam_a", "gam_u", "gam_u_mk",
    "s", "s_eve", "s_a", "v1", "v2", "q",
]


def test_registry_covers_variable_set():
    K, M, NT = 3, 2, 4
    reg = make_registry(K, M, NT)
    for name in REQUIRED_SYMBOLS:
        assert reg.has(name), name
    for j in range(K):
        assert reg.is_hermitian(f"W{j}")
    assert reg.is_hermitian("W_a") and reg.is_hermitian("Z")
    counts = dict(scalar_groups(K, M))
    assert counts["lam_u_mk"] == M * K
    assert counts["s_eve"] == M


@pytest.mark.parametrize("K,M", [(2, 1), (3, 2)])
def test_block_census_matches_formula(K, M):
    cfg = tiny_config(
        gu_xy_m=np.array([(5.0 * k, 10.0 + k) for k in range(K)]),
        eve_xy_m=np.array([(8.0 + m, 0.0) for m in range(M)]),
    )
    ctx = make_slot_context(cfg, 1, cfg.q_start_m)
    fac = SlotProgramFactory(ctx, cfg)
    pt = initialize_feasible(ctx, cfg)
    prog = fac.program_at(pt.to_linearization())
    got = Counter(b.kind for b in prog.blocks)
    want = block_count_formula(K, M)
    assert {k: got.get(k, 0) for k in want} == want


def test_rate_definition_pins_log_base():
    # max nu subject to nu * ln2 <= ln(1 + alpha/sigma^2) with alpha = sigma^2
    # must give exactly one bit per channel use: log2(2) = 1
    reg = VariableRegistry()
    reg.add("nu")
    pb = ProgramBuilder(reg)
    pb.add_objective("nu", 0, -1.0)
    sigma2 = 1e-8
    alpha = sigma2
    pb.add_exp("rate-def", (0.0, [("nu", 0, LN2)]), (1.0, []), (1.0 + alpha / sigma2, []))
    res = solve(pb.build())
    assert res.ok
    assert res.x[0] == pytest.approx(1.0, rel=1e-7)


def test_tau3_and_breakdown_agree_on_solved_points(tiny_mission, tiny_cfg):
    from aeromec.energy import assemble_breakdown

    for sol in tiny_mission.slots:
        tau = evaluate_tau3(sol.point, tiny_cfg)
        bd = assemble_breakdown(sol.point, tiny_cfg)
        assert bd.weighted_total == pytest.approx(tau, rel=1e-9)
        assert sol.diagnostics["max_breakdown_gap_rel"] <= 1e-6


def test_surrogate_tangency_at_linearization(tiny_mission, tiny_cfg):
    # rebuilding the subproblem at a converged point's own linearization and
    # evaluating at that point: every tangent family's surrogate equals the
    # true nonlinear constraint there (slack pairs match to 1e-9)
    cfg = tiny_cfg
    sol = tiny_mission.slots[0]
    pt = sol.point
    ctx = make_slot_context(cfg, sol.slot, tiny_mission.trajectory[0])
    fac = SlotProgramFactory(ctx, cfg, precond_point=pt)
    prog = fac.program_at(pt.to_linearization())
    x = point_vector(pt, fac.reg, ctx, cfg)
    slacks = evaluate_block_slacks(prog, x)

    def norm_tangent(cexp, true_slack):
        # rows are normalized by e^{max(cexp, -25)}
        return float(np.exp(-max(cexp, -25.0)) * true_slack)

    K = ctx.n_users
    true_f1 = min(
        norm_tangent(pt.gam[k], np.exp(pt.gam[k]) - pt.alpha[k] - pt.lam[k]) for k in range(K)
    )
    assert slacks["tangent-gain"] == pytest.approx(true_f1, abs=1e-9)
    true_f2 = norm_tangent(pt.gam_a, np.exp(pt.gam_a) - pt.alpha_a - pt.lam_a)
    assert slacks["tangent-gain-relay"] == pytest.approx(true_f2, abs=1e-9)
    true_f11 = min(
        norm_tangent(pt.zeta[k], np.exp(pt.zeta[k]) - pt.p[k]) for k in range(K)
    )
    assert slacks["tangent-power"] == pytest.approx(true_f11, abs=1e-9)
    # distance family: surrogate at the point equals exp(s) - sqd
    x_sqd = x[fac.reg.slice("sqd")]
    true_f5 = min(
        norm_tangent(pt.s[k], np.exp(pt.s[k]) - x_sqd[k]) for k in range(K)
    )
    assert slacks["tangent-dist-gu"] == pytest.approx(true_f5, abs=1e-9)
    # propulsion minorant at tangency: v2^2 + |dq|^2/(v0 dt)^2 - uinv
    den = cfg.rotor.v0_mps**2 * cfg.delta_t_s**2
    dq = pt.q - ctx.q_prev
    uinv = float(x[fac.reg.index("uinv")])
    true_f13 = pt.v2**2 + float(dq @ dq) / den - uinv
    assert slacks["tangent-propulsion"] == pytest.approx(true_f13, abs=1e-9)


def test_feasible_point_satisfies_original_constraints(tiny_mission):
    # surrogate feasibility is contained in true feasibility
    for sol in tiny_mission.slots:
        audit = sol.diagnostics["true_constraint_slacks"]
        for tag, slack in audit.items():
            assert slack >= -1e-6, (tag, slack)


def test_pins_fix_variables(tiny_cfg):
    cfg = tiny_cfg
    ctx = make_slot_context(cfg, 1, cfg.q_start_m)
    pt = initialize_feasible(ctx, cfg)
    fac = SlotProgramFactory(ctx, cfg, precond_point=pt)
    pins = {("t_a", 0): float(np.log(0.5))}
    prog = fac.program_at(pt.to_linearization(), pins)
    res = solve(prog)
    assert res.ok
    got = extract_point(res.x, fac.reg, ctx.n_users, ctx.n_eves, cfg.n_t)
    assert got.t_a == pytest.approx(np.log(0.5), abs=1e-7)


def test_structural_dump_roundtrip(tiny_cfg):
    from aeromec.conic import program_from_dict

    cfg = tiny_cfg
    ctx = make_slot_context(cfg, 1, cfg.q_start_m)
    pt = initialize_feasible(ctx, cfg)
    fac = SlotProgramFactory(ctx, cfg, precond_point=pt)
    prog = fac.program_at(pt.to_linearization())
    clone = program_from_dict(prog.dump())
    assert clone.structural_hash() == prog.structural_hash()


def test_nominal_mode_drops_certificates(tiny_cfg):
    cfg = tiny_cfg
    ctx = make_slot_context(cfg, 1, cfg.q_start_m)
    pt = initialize_feasible(ctx, cfg, BuildOptions(robust=False))
    fac = SlotProgramFactory(ctx, cfg, BuildOptions(robust=False), precond_point=pt)
    prog = fac.program_at(pt.to_linearization())
    tags = {b.tag for b in prog.blocks}
    assert not any(t.startswith("wc-") for t in tags)
    assert "nom-offload-snr" in tags and "nom-security" in tags
