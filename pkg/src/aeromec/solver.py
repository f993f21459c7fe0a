"""Back-ends consuming the canonical conic form.

Primary back-end is Clarabel (interior point); SCS is available as a
fallback. Both receive a block-respecting Ruiz-equilibrated copy of the
program; the returned iterate is unscaled before use.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .conic import (
    CONE_EXP,
    CONE_NONNEG,
    CONE_PSD,
    CONE_SOC,
    CONE_ZERO,
    ConicProgram,
    ruiz_equilibrate,
)

STATUS_OPTIMAL = "optimal"
STATUS_ALMOST = "almost_optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_FAILED = "failed"


@dataclass
class SolveResult:
    status: str
    x: np.ndarray | None
    obj: float | None
    solve_time_ms: float
    iterations: int
    backend: str
    raw_status: str = ""
    effective_tol: float = 1e-9  # tolerance of the attempt that produced x

    @property
    def ok(self) -> bool:
        return self.status in (STATUS_OPTIMAL, STATUS_ALMOST)


@dataclass
class SolverOptions:
    backend: str = "clarabel"
    tol: float = 1e-9
    max_iter: int = 200_000
    # Clarabel applies its own Ruiz equilibration; the extra pass here is
    # off by default and available for back-ends without one.
    equilibrate: bool = False
    verbose: bool = False
    retry_ladder: bool = True


def solve(program: ConicProgram, options: SolverOptions | None = None) -> SolveResult:
    """Solve one canonical program; numerical stalls of the primary
    back-end retry at reduced accuracy, with the extra equilibration pass,
    and finally with the first-order fallback.
    """
    opts = options or SolverOptions()
    res = _solve_once(program, opts)
    if res.status != STATUS_FAILED or not opts.retry_ladder:
        return res
    ladder = [
        {"tol": max(opts.tol, 1e-7)},
        {"tol": max(opts.tol, 1e-7), "equilibrate": not opts.equilibrate},
        {"tol": max(opts.tol, 1e-6)},
        {"backend": "scs", "tol": max(opts.tol, 1e-7), "equilibrate": True,
         "max_iter": 50_000},
    ]
    for step in ladder:
        alt = SolverOptions(**{**opts.__dict__, **step})
        res_i = _solve_once(program, alt)
        if res_i.status != STATUS_FAILED:
            return res_i
    return res


def _solve_once(program: ConicProgram, opts: SolverOptions) -> SolveResult:
    if opts.equilibrate:
        A, b, c, e_row, d_col, obj_scale = ruiz_equilibrate(program)
    else:
        A, b, c = program.A, program.b, program.c
        d_col = np.ones(program.c.shape[0])
        obj_scale = 1.0
    t0 = time.perf_counter()
    if opts.backend == "clarabel":
        status, x_scaled, iters, raw = _solve_clarabel(A, b, c, program.blocks, opts)
    elif opts.backend == "scs":
        status, x_scaled, iters, raw = _solve_scs(A, b, c, program.blocks, opts)
    else:
        raise ValueError(f"unknown backend {opts.backend!r}")
    ms = (time.perf_counter() - t0) * 1e3
    if x_scaled is None:
        return SolveResult(status, None, None, ms, iters, opts.backend, raw, opts.tol)
    x_solver = d_col * x_scaled
    obj = float(program.c @ x_solver) + program.obj_const
    return SolveResult(status, program.to_physical(x_solver), obj, ms, iters,
                       opts.backend, raw, opts.tol)


def _solve_clarabel(A, b, c, blocks, opts):
    import clarabel

    cones = []
    for blk in blocks:
        if blk.kind == CONE_ZERO:
            cones.append(clarabel.ZeroConeT(blk.dim))
        elif blk.kind == CONE_NONNEG:
            cones.append(clarabel.NonnegativeConeT(blk.dim))
        elif blk.kind == CONE_SOC:
            cones.append(clarabel.SecondOrderConeT(blk.dim))
        elif blk.kind == CONE_EXP:
            cones.append(clarabel.ExponentialConeT())
        elif blk.kind == CONE_PSD:
            cones.append(clarabel.PSDTriangleConeT(blk.dim))
        else:
            raise ValueError(blk.kind)
    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.tol_gap_abs = opts.tol
    settings.tol_gap_rel = opts.tol
    settings.tol_feas = opts.tol
    settings.max_iter = min(opts.max_iter, 500)
    P = sp.csc_matrix((c.shape[0], c.shape[0]))
    solver = clarabel.DefaultSolver(P, c, A.tocsc(), b, cones, settings)
    sol = solver.solve()
    name = str(sol.status)
    status = {
        "Solved": STATUS_OPTIMAL,
        "AlmostSolved": STATUS_ALMOST,
        "PrimalInfeasible": STATUS_INFEASIBLE,
        "AlmostPrimalInfeasible": STATUS_INFEASIBLE,
        "DualInfeasible": STATUS_UNBOUNDED,
        "AlmostDualInfeasible": STATUS_UNBOUNDED,
    }.get(name, STATUS_FAILED)
    x = np.asarray(sol.x) if status in (STATUS_OPTIMAL, STATUS_ALMOST) else None
    return status, x, int(sol.iterations), name


def _scs_permutation(blocks):
    """Row permutation and cone dict for SCS's fixed block order."""
    order = {CONE_ZERO: 0, CONE_NONNEG: 1, CONE_SOC: 2, CONE_PSD: 3, CONE_EXP: 4}
    ranges = []
    r = 0
    for blk in blocks:
        ranges.append((order[blk.kind], r, blk))
        r += blk.rows
    perm = []
    cone = {"z": 0, "l": 0, "q": [], "s": [], "ep": 0}
    for kind_order in range(5):
        for o, start, blk in ranges:
            if o != kind_order:
                continue
            rows = list(range(start, start + blk.rows))
            if blk.kind == CONE_PSD:
                # SCS wants lower-triangle column order; ours is upper-col
                perm.extend(start + _upper_to_lower_perm(blk.dim))
                cone["s"].append(blk.dim)
            else:
                perm.extend(rows)
                if blk.kind == CONE_ZERO:
                    cone["z"] += blk.dim
                elif blk.kind == CONE_NONNEG:
                    cone["l"] += blk.dim
                elif blk.kind == CONE_SOC:
                    cone["q"].append(blk.dim)
                elif blk.kind == CONE_EXP:
                    cone["ep"] += 1
    return np.asarray(perm), cone


def _upper_to_lower_perm(n: int) -> np.ndarray:
    pos_upper = {}
    p = 0
    for j in range(n):
        for i in range(j + 1):
            pos_upper[(i, j)] = p
            p += 1
    out = []
    for j in range(n):
        for i in range(j, n):
            out.append(pos_upper[(j, i)])
    return np.asarray(out)


def _solve_scs(A, b, c, blocks, opts):
    import scs

    perm, cone = _scs_permutation(blocks)
    A_csr = A.tocsr()[perm]
    data = {"A": A_csr.tocsc(), "b": b[perm], "c": c}
    solver = scs.SCS(
        data,
        cone,
        eps_abs=max(opts.tol, 1e-9),
        eps_rel=max(opts.tol, 1e-9),
        max_iters=min(opts.max_iter, 50_000),
        verbose=opts.verbose,
    )
    sol = solver.solve()
    raw = sol["info"]["status"]
    # inaccurate first-order iterates violate constraints far beyond our
    # audit tolerances; treat anything but a clean solve as failed
    status = {
        "solved": STATUS_OPTIMAL,
        "infeasible": STATUS_INFEASIBLE,
        "unbounded": STATUS_UNBOUNDED,
    }.get(raw, STATUS_FAILED)
    x = np.asarray(sol["x"]) if status in (STATUS_OPTIMAL, STATUS_ALMOST) else None
    return status, x, int(sol["info"]["iter"]), raw
