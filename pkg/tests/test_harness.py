import numpy as np
import pytest

from aeromec.conic import evaluate_block_slacks
from aeromec.geometry import make_slot_context
from aeromec.harness import (
    apply_sweep_value,
    baseline_fixed_schedule,
    energy_gain,
    fixed_schedule_pins,
    plan_mission_proposed,
    refine_mission,
    robustness_mc,
    slot_trial_verdicts,
    sweep,
)
from aeromec.mission import plan_mission
from aeromec.subproblem import SlotProgramFactory, point_vector
from conftest import tiny_config


@pytest.fixture(scope="module")
def tiny_fixed(tiny_cfg):
    return baseline_fixed_schedule(tiny_cfg, audit=False)


def test_robust_mission_always_finishes(tiny_mission):
    res = robustness_mc(tiny_mission, trials=300, seed=7, keep_samples=True)
    assert np.all(res.ratios == 1.0)
    # verdicts are recomputable from the stored samples
    for idx, s in enumerate(res.samples):
        again = slot_trial_verdicts(tiny_mission, idx, s["e_gu"], s["e_a"])
        np.testing.assert_array_equal(again, res.finished[idx])


def test_fixed_schedule_freezes_time_shares(tiny_cfg, tiny_fixed):
    pins = fixed_schedule_pins(tiny_cfg)
    for sol in tiny_fixed.slots:
        for k in range(tiny_cfg.n_users):
            assert sol.point.t[k] == pytest.approx(pins[("t", k)], abs=1e-7)
        assert sol.point.t_a == pytest.approx(pins[("t_a", 0)], abs=1e-7)


def test_fixed_schedule_points_feasible_for_free_problem(tiny_cfg, tiny_fixed):
    # the dominance mechanism: every benchmark slot solution lies in the
    # unrestricted problem's feasible set
    for i, sol in enumerate(tiny_fixed.slots):
        ctx = make_slot_context(tiny_cfg, sol.slot, tiny_fixed.trajectory[i])
        fac = SlotProgramFactory(ctx, tiny_cfg, precond_point=sol.point)
        prog = fac.program_at(sol.point.to_linearization())
        slacks = evaluate_block_slacks(prog, point_vector(sol.point, fac.reg, ctx, tiny_cfg))
        assert min(slacks.values()) >= -1e-7


def test_proposed_dominates_fixed_schedule(tiny_cfg, tiny_mission, tiny_fixed):
    refined = refine_mission(tiny_fixed, tiny_cfg)
    best = min([tiny_mission, refined], key=lambda m: m.total_weighted_j)
    assert best.total_weighted_j <= tiny_fixed.total_weighted_j * (1 + 1e-6)
    # refinement never loses a slot
    for ref, base in zip(refined.slots, tiny_fixed.slots):
        assert ref.objective <= base.objective * (1 + 1e-9)


def test_sweep_single_value_equals_plain(tiny_cfg, tiny_mission):
    rep = sweep(tiny_cfg, "task_bits", [tiny_cfg.task_bits], audit=False)
    assert rep.rows[0]["complete"]
    assert rep.rows[0]["total_weighted_j"] == pytest.approx(tiny_mission.total_weighted_j, rel=1e-9)


def test_apply_sweep_value():
    cfg = tiny_config()
    assert apply_sweep_value(cfg, "task_bits", 4e6).task_bits == 4e6
    assert apply_sweep_value(cfg, "n_t", 9).n_t == 9
    assert np.real(apply_sweep_value(cfg, "err_scale", 1e8).err_matrix("gu")[0, 0]) == 1e8
    with pytest.raises(ValueError):
        apply_sweep_value(cfg, "nonsense", 1)


def test_energy_gain():
    assert energy_gain(1.0, 2.0) == pytest.approx(0.5)
    assert energy_gain(2.0, 2.0) == 0.0
