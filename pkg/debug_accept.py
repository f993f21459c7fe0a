"""One-shot diagnostic for the failing acceptance criteria (dev tool)."""
import pickle
import sys
import time

import numpy as np

sys.path.insert(0, "src")
from aeromec.config import ci_config, table1_config
from aeromec.harness import GRID_FOR_NT, baseline_ao, baseline_fixed_schedule, baseline_non_robust, robustness_mc, sweep
from aeromec.mission import plan_mission

t0 = time.time()
out = {}

def log(*a):
    print(f"[{time.time()-t0:7.1f}s]", *a, flush=True)

ci = ci_config()
full = table1_config()

log("ci mission...")
ci_m = plan_mission(ci, audit=True)
out["ci_mission"] = ci_m
log("ci:", [s.status for s in ci_m.slots], [s.iterations for s in ci_m.slots])

log("full mission...")
full_m = plan_mission(full, audit=True)
out["full_mission"] = full_m
log("full:", [f"{s.status}:{s.iterations}" for s in full_m.slots])
for s in full_m.slots:
    tr = s.objective_trace
    ups = [b - a for a, b in zip(tr, tr[1:]) if b > a + 1e-8 * max(1, abs(a))]
    if ups or s.status != "converged":
        log(f"  slot {s.slot}: {s.status} iters={s.iterations} upticks={ups[:3]}")

log("A4 robust missions...")
for scale in (1e8, 5e8, 1e9):
    cfg_s = ci.replace(err_gu=scale, err_eve=scale, err_mec=scale)
    m = plan_mission(cfg_s, audit=False)
    r = robustness_mc(m, trials=1000, seed=11)
    out[f"rob_{scale:.0e}"] = m
    log(f"  robust@{scale:.0e}: statuses {[s.status for s in m.slots]} ratios {np.round(r.ratios,4)}")
cfg_n = ci.replace(err_gu=1e8, err_eve=1e8, err_mec=1e8)
nr = baseline_non_robust(cfg_n, audit=False)
rn = robustness_mc(nr, trials=1000, seed=11)
out["nonrob"] = nr
log(f"  nonrobust: statuses {[s.status for s in nr.slots]} ratios {np.round(rn.ratios,4)}")

log("A6 sweeps...")
rep = sweep(ci, "task_bits", [2e6, 4e6, 6e6, 8e6, 10e6], audit=False)
log("  task bits totals:", [f"{r['total_weighted_j']:.4f}|{r['complete']}" for r in rep.rows])
ants = []
for nt in (4, 6, 9):
    nx, ny = GRID_FOR_NT[nt]
    m = plan_mission(ci.replace(grid_nx=nx, grid_ny=ny), audit=False)
    ants.append(m.total_weighted_j)
    out[f"nt{nt}"] = m
    log(f"  nt{nt}: total {m.total_weighted_j:.4f} statuses {[s.status for s in m.slots]}")

log("A9 AO...")
ao = baseline_ao(full)
out["full_ao"] = ao
log("  ao:", [f"{s.status}:{s.iterations}" for s in ao.slots], "infeasible:", ao.infeasible_slot)
log("  ao total:", ao.total_weighted_j, "complete:", ao.complete)

log("full fixed...")
fx = baseline_fixed_schedule(full, audit=False)
out["full_fixed"] = fx
log("  fixed total", fx.total_weighted_j, [s.status for s in fx.slots])

with open("/tmp/daccept.pkl", "wb") as fh:
    pickle.dump(out, fh)
log("pickled to /tmp/daccept.pkl")
