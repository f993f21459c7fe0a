"""Command-line surface: plan | evaluate | sweep | presets.

Exit codes: 0 success, 2 config/usage errors, 3 infeasible mission
(partial outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import NetworkConfig, ci_config, load_config, save_config, table1_config
from .harness import (
    baseline_ao,
    baseline_fixed_schedule,
    baseline_non_robust,
    energy_gain,
    robustness_mc,
    save_report,
    sweep,
)
from .mission import load_manifest_config, plan_mission, save_mission, write_manifest
from .solver import SolverOptions
from .subproblem import BuildOptions

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

FIG7_ERR_SCALES = (1e8, 5e8, 1e9)


def _load_cfg(args) -> NetworkConfig:
    if args.config:
        return load_config(args.config)
    return ci_config() if args.profile == "ci" else table1_config()


def _mission_kw(args) -> dict:
    kw = {"eps": args.eps, "max_iter": args.max_iter}
    if args.profile == "ci":
        kw["audit"] = False
    return kw


def cmd_plan(args) -> int:
    try:
        cfg = _load_cfg(args)
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    mission = plan_mission(cfg, **_mission_kw(args))
    save_mission(mission, args.out, seeds={})
    if mission.infeasible_slot is not None:
        print(f"mission infeasible at slot {mission.infeasible_slot}", file=sys.stderr)
        return EXIT_INFEASIBLE
    print(f"total weighted energy: {mission.total_weighted_j:.6f} J "
          f"(+ terminal hop {mission.terminal_hop_energy_j:.6f} J)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.experiment != "mc":
        print(f"unknown experiment {args.experiment!r} (expected: mc)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_manifest_config(args.mission)
    except Exception as exc:
        print(f"cannot load mission manifest: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    mission = plan_mission(cfg, **_mission_kw(args))
    res = robustness_mc(mission, trials=args.trials, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "ratios.csv")
    with open(path, "w") as fh:
        fh.write("slot,task_finished_ratio\n")
        for i, r in enumerate(res.ratios, start=1):
            fh.write(f"{i},{r:.6f}\n")
    write_manifest(args.out, cfg, {"mc_seed": args.seed, "trials": args.trials}, ["ratios.csv"])
    print(f"task finished ratios: {res.ratios.tolist()}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg = _load_cfg(args)
        values = [float(v) for v in args.values.split(",") if v.strip()]
        if not values:
            raise ValueError("empty sweep value list")
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = sweep(cfg, args.parameter, values, experiment=f"sweep-{args.parameter}",
                   **_mission_kw(args))
    save_report(report, args.out, cfg)
    if not all(r["complete"] for r in report.rows):
        return EXIT_INFEASIBLE
    print(f"wrote {os.path.join(args.out, 'report.csv')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# figure presets
# ---------------------------------------------------------------------------


def _preset_cfg(args) -> NetworkConfig:
    if args.config:
        return load_config(args.config)
    return ci_config() if args.profile == "ci" else table1_config()


def preset_fig3(args, cfg) -> int:
    mission = plan_mission(cfg, **_mission_kw(args))
    save_mission(mission, args.out)
    return EXIT_OK if mission.infeasible_slot is None else EXIT_INFEASIBLE


def preset_fig4(args, cfg) -> int:
    long_dir = os.path.join(args.out, "task1")
    short_dir = os.path.join(args.out, "task2")
    m1 = plan_mission(cfg, **_mission_kw(args))
    save_mission(m1, long_dir)
    short_cfg = cfg.replace(task_bits=1e6, period_s=2.5, n_slots=10)
    m2 = plan_mission(short_cfg, **_mission_kw(args))
    save_mission(m2, short_dir)
    ok = m1.infeasible_slot is None and m2.infeasible_slot is None
    return EXIT_OK if ok else EXIT_INFEASIBLE


def preset_fig5(args, cfg) -> int:
    from .harness import GRID_FOR_NT

    bits = [2e6, 6e6, 10e6] if args.profile == "ci" else [2e6, 4e6, 6e6, 8e6, 10e6]
    ants = [4, 9] if args.profile == "ci" else [4, 6, 9]
    rows = []
    for nt in ants:
        nx, ny = GRID_FOR_NT[nt]
        rep = sweep(cfg.replace(grid_nx=nx, grid_ny=ny), "task_bits", bits,
                    experiment=f"fig5-nt{nt}", **_mission_kw(args))
        for r in rep.rows:
            r["n_t"] = nt
            rows.append(r)
    _write_rows(args.out, rows, cfg)
    return EXIT_OK


def preset_fig6(args, cfg) -> int:
    bits = [2e6, 6e6, 10e6] if args.profile == "ci" else [2e6, 4e6, 6e6, 8e6, 10e6]
    rows = []
    for b in bits:
        cfg_b = cfg.replace(task_bits=b)
        prop = plan_mission(cfg_b, **_mission_kw(args))
        base = baseline_fixed_schedule(cfg_b, **_mission_kw(args))
        rows.append({
            "task_bits": b,
            "proposed_j": prop.total_weighted_j,
            "fixed_schedule_j": base.total_weighted_j,
        })
    _write_rows(args.out, rows, cfg)
    return EXIT_OK


def preset_fig7(args, cfg) -> int:
    rows = []
    for scale in FIG7_ERR_SCALES:
        cfg_s = cfg.replace(err_gu=scale, err_eve=scale, err_mec=scale)
        robust = plan_mission(cfg_s, **_mission_kw(args))
        ratio = robustness_mc(robust, trials=args.trials, seed=args.seed)
        rows.append({"err_scale": scale, "design": "robust",
                     "min_ratio": float(ratio.ratios.min()),
                     "mean_ratio": float(ratio.ratios.mean())})
    nonrob = baseline_non_robust(cfg.replace(err_gu=FIG7_ERR_SCALES[0],
                                             err_eve=FIG7_ERR_SCALES[0],
                                             err_mec=FIG7_ERR_SCALES[0]),
                                 **_mission_kw(args))
    for scale in FIG7_ERR_SCALES:
        mission = nonrob
        mission.cfg = mission.cfg.replace(err_gu=scale, err_eve=scale, err_mec=scale)
        ratio = robustness_mc(mission, trials=args.trials, seed=args.seed)
        rows.append({"err_scale": scale, "design": "non-robust",
                     "min_ratio": float(ratio.ratios.min()),
                     "mean_ratio": float(ratio.ratios.mean())})
    _write_rows(args.out, rows, cfg)
    return EXIT_OK


def preset_fig8(args, cfg) -> int:
    bits = [2e6, 10e6] if args.profile == "ci" else [2e6, 4e6, 6e6, 8e6, 10e6]
    rows = []
    for b in bits:
        cfg_b = cfg.replace(task_bits=b)
        prop = plan_mission(cfg_b, **_mission_kw(args))
        ao = baseline_ao(cfg_b, eps=args.eps)
        rows.append({
            "task_bits": b,
            "proposed_j": prop.total_weighted_j,
            "ao_j": ao.total_weighted_j,
            "energy_gain": energy_gain(prop.total_weighted_j, ao.total_weighted_j),
        })
    _write_rows(args.out, rows, cfg)
    return EXIT_OK


def _write_rows(out_dir, rows, cfg):
    os.makedirs(out_dir, exist_ok=True)
    keys = list(rows[0].keys())
    with open(os.path.join(out_dir, "report.csv"), "w") as fh:
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(str(r[k]) for k in keys) + "\n")
    write_manifest(out_dir, cfg, {}, ["report.csv"])


PRESETS = {"fig3": preset_fig3, "fig4": preset_fig4, "fig5": preset_fig5,
           "fig6": preset_fig6, "fig7": preset_fig7, "fig8": preset_fig8}


def cmd_presets(args) -> int:
    if args.figure not in PRESETS:
        print(f"unknown preset {args.figure!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _preset_cfg(args)
    except Exception as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return PRESETS[args.figure](args, cfg)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aeromec",
                                 description="secure aerial-MEC energy planner")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario YAML (defaults to the built-in scenario)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int, default=1000)
        p.add_argument("--profile", choices=["full", "ci"], default="full")
        p.add_argument("--eps", type=float, default=1e-3)
        p.add_argument("--max-iter", type=int, default=50)

    p = sub.add_parser("plan", help="solve a mission and write CSV outputs")
    common(p)
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("evaluate", help="evaluate an experiment on a planned mission")
    common(p)
    p.add_argument("--mission", required=True, help="directory of a previous plan run")
    p.add_argument("--experiment", default="mc")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep", help="one mission per value of a parameter")
    common(p)
    p.add_argument("--parameter", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("presets", help="scripted experiments (fig3..fig8)")
    common(p)
    p.add_argument("figure", choices=sorted(PRESETS))
    p.set_defaults(fn=cmd_presets)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
