"""Solver-agnostic canonical conic form.

A program is ``min c'x + k`` subject to ``b - A x`` lying in a product of
zero / nonnegative / second-order / exponential / PSD cones. PSD blocks are
stored in scaled-vector form (upper triangle, column order, off-diagonals
multiplied by sqrt(2)) over the symmetric real embedding of the Hermitian
matrix, so any real-cone back-end can consume them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

CONE_ZERO = "zero"
CONE_NONNEG = "nonneg"
CONE_SOC = "soc"
CONE_EXP = "exp"
CONE_PSD = "psd"


@dataclass(frozen=True)
class ConeBlock:
    kind: str
    dim: int  # PSD: matrix side; others: row count
    tag: str

    @property
    def rows(self) -> int:
        if self.kind == CONE_PSD:
            return self.dim * (self.dim + 1) // 2
        return self.dim


class VariableRegistry:
    """Named variable groups laid out contiguously in one real vector."""

    def __init__(self):
        self._layout: dict[str, tuple[int, int]] = {}
        self._herm: dict[str, int] = {}
        self.size = 0

    def add(self, name: str, count: int = 1) -> None:
        if name in self._layout:
            raise ValueError(f"variable {name!r} registered twice")
        self._layout[name] = (self.size, count)
        self.size += count

    def add_hermitian(self, name: str, n: int) -> None:
        self.add(name, n * n)
        self._herm[name] = n

    def names(self):
        return self._layout.keys()

    def has(self, name: str) -> bool:
        return name in self._layout

    def count(self, name: str) -> int:
        return self._layout[name][1]

    def index(self, name: str, i: int = 0) -> int:
        off, cnt = self._layout[name]
        if not 0 <= i < cnt:
            raise IndexError(f"{name}[{i}] out of range {cnt}")
        return off + i

    def slice(self, name: str) -> slice:
        off, cnt = self._layout[name]
        return slice(off, off + cnt)

    def herm_dim(self, name: str) -> int:
        return self._herm[name]

    def is_hermitian(self, name: str) -> bool:
        return name in self._herm


# ----- Hermitian matrix parametrization -------------------------------------
# layout: n diagonal entries, then (re, im) pairs for i < j in row order

def herm_param_count(n: int) -> int:
    return n * n


def herm_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def herm_basis(n: int) -> np.ndarray:
    """Stacked Hermitian basis matrices matching the parameter layout."""
    out = np.zeros((n * n, n, n), dtype=complex)
    for k in range(n):
        out[k, k, k] = 1.0
    for p, (i, j) in enumerate(herm_pairs(n)):
        out[n + 2 * p, i, j] = 1.0
        out[n + 2 * p, j, i] = 1.0
        out[n + 2 * p + 1, i, j] = 1.0j
        out[n + 2 * p + 1, j, i] = -1.0j
    return out


def herm_from_params(vals: np.ndarray, n: int) -> np.ndarray:
    M = np.zeros((n, n), dtype=complex)
    M[np.arange(n), np.arange(n)] = vals[:n]
    for p, (i, j) in enumerate(herm_pairs(n)):
        M[i, j] = vals[n + 2 * p] + 1j * vals[n + 2 * p + 1]
        M[j, i] = np.conj(M[i, j])
    return M


def herm_to_params(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    vals = np.empty(n * n)
    vals[:n] = np.real(np.diag(M))
    for p, (i, j) in enumerate(herm_pairs(n)):
        vals[n + 2 * p] = M[i, j].real
        vals[n + 2 * p + 1] = M[i, j].imag
    return vals


# ----- real embedding of Hermitian blocks + scaled vectorization ------------

def real_embed(C: np.ndarray) -> np.ndarray:
    """[[Re, -Im], [Im, Re]] — symmetric iff C is Hermitian, PSD iff C is."""
    X, Y = C.real, C.imag
    return np.block([[X, -Y], [Y, X]])


def svec_index_arrays(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row/col indices and sqrt(2) scaling for upper-triangle column order."""
    ii, jj, sc = [], [], []
    for j in range(m):
        for i in range(j + 1):
            ii.append(i)
            jj.append(j)
            sc.append(1.0 if i == j else np.sqrt(2.0))
    return np.array(ii), np.array(jj), np.array(sc)


def svec(M: np.ndarray) -> np.ndarray:
    ii, jj, sc = svec_index_arrays(M.shape[0])
    return M[ii, jj] * sc


def unsvec(v: np.ndarray, m: int) -> np.ndarray:
    ii, jj, sc = svec_index_arrays(m)
    M = np.zeros((m, m))
    M[ii, jj] = v / sc
    M[jj, ii] = v / sc
    return M


class EmbedSvec:
    """Cached linear map: complex Hermitian (n,n) -> svec of its 2n embedding."""

    def __init__(self, n: int):
        self.n = n
        self.m = 2 * n
        ii, jj, sc = svec_index_arrays(self.m)
        # embedding entry (i, j): block by i < n, j < n
        top_i, top_j = ii % n, jj % n
        self.take_real = (ii < n) == (jj < n)
        # sign: Re blocks are +X; top-right block is -Y, bottom-left +Y
        sign = np.where(self.take_real, 1.0, np.where(ii < n, -1.0, 1.0))
        self.scale = sc * sign
        self.src_i, self.src_j = top_i, top_j

    def apply(self, C: np.ndarray) -> np.ndarray:
        vals = np.where(self.take_real, C.real[self.src_i, self.src_j], C.imag[self.src_i, self.src_j])
        return vals * self.scale

    def apply_stack(self, Cs: np.ndarray) -> np.ndarray:
        """(B, n, n) complex -> (B, rows) real."""
        re = Cs.real[:, self.src_i, self.src_j]
        im = Cs.imag[:, self.src_i, self.src_j]
        return np.where(self.take_real[None, :], re, im) * self.scale[None, :]


@dataclass
class ConicProgram:
    registry: VariableRegistry
    c: np.ndarray
    obj_const: float
    blocks: list[ConeBlock]
    A: sp.csc_matrix
    b: np.ndarray
    col_scale: np.ndarray | None = None

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]

    def to_solver_units(self, x_phys: np.ndarray) -> np.ndarray:
        return x_phys if self.col_scale is None else x_phys / self.col_scale

    def to_physical(self, x_solver: np.ndarray) -> np.ndarray:
        return x_solver if self.col_scale is None else x_solver * self.col_scale

    def block_row_ranges(self) -> list[tuple[int, int]]:
        out, r = [], 0
        for blk in self.blocks:
            out.append((r, r + blk.rows))
            r += blk.rows
        return out

    def dump(self) -> dict:
        coo = self.A.tocoo()
        return {
            "n_vars": int(self.c.shape[0]),
            "objective": self.c.tolist(),
            "objective_const": self.obj_const,
            "blocks": [{"kind": blk.kind, "dim": blk.dim, "tag": blk.tag} for blk in self.blocks],
            "A": {
                "rows": coo.row.tolist(),
                "cols": coo.col.tolist(),
                "vals": coo.data.tolist(),
                "shape": list(coo.shape),
            },
            "b": self.b.tolist(),
            "col_scale": None if self.col_scale is None else self.col_scale.tolist(),
            "variables": {name: [self.registry.index(name), self.registry.count(name)] for name in self.registry.names()},
        }

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.dump(), fh)

    def structural_hash(self) -> str:
        d = self.dump()
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def program_from_dict(d: dict) -> ConicProgram:
    reg = VariableRegistry()
    for name, (off, cnt) in sorted(d["variables"].items(), key=lambda kv: kv[1][0]):
        reg.add(name, cnt)
    A = sp.coo_matrix(
        (d["A"]["vals"], (d["A"]["rows"], d["A"]["cols"])), shape=tuple(d["A"]["shape"])
    ).tocsc()
    return ConicProgram(
        registry=reg,
        c=np.asarray(d["objective"]),
        obj_const=d["objective_const"],
        blocks=[ConeBlock(b["kind"], b["dim"], b["tag"]) for b in d["blocks"]],
        A=A,
        b=np.asarray(d["b"]),
        col_scale=None if d.get("col_scale") is None else np.asarray(d["col_scale"]),
    )


class ProgramBuilder:
    """Accumulates tagged cone blocks of affine expressions.

    A row spec is ``(const, [(name, idx, coeff), ...])``; the block asserts
    the stacked expressions lie in the cone. Coefficients are given in
    physical units; per-variable column scales (declared up front) map the
    solver's variables to well-conditioned units, with the physical value
    recovered as x_phys = col_scale * x_solver.
    """

    def __init__(self, registry: VariableRegistry):
        self.reg = registry
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._b: list[float] = []
        self.blocks: list[ConeBlock] = []
        self.c = np.zeros(registry.size)
        self.obj_const = 0.0
        self.col_scale = np.ones(registry.size)

    def set_col_scale(self, name: str, scale) -> None:
        self.col_scale[self.reg.slice(name)] = scale

    # objective ------------------------------------------------------------

    def add_objective(self, name: str, idx: int, coeff: float) -> None:
        j = self.reg.index(name, idx)
        self.c[j] += coeff * self.col_scale[j]

    # generic rows ----------------------------------------------------------

    def _append_rows(self, rows) -> int:
        start = len(self._b)
        for const, terms in rows:
            r = len(self._b)
            self._b.append(float(const))
            if terms:
                cols = np.array([self.reg.index(n, i) for n, i, _ in terms])
                vals = np.array([-float(c) for _, _, c in terms]) * self.col_scale[cols]
                self._rows.append(np.full(cols.shape, r))
                self._cols.append(cols)
                self._vals.append(vals)
        return len(self._b) - start

    def add_block(self, kind: str, tag: str, rows) -> None:
        n = self._append_rows(rows)
        if kind == CONE_EXP and n != 3:
            raise ValueError("exponential block must have exactly 3 rows")
        self.blocks.append(ConeBlock(kind, n, tag))

    def add_nonneg(self, tag: str, rows) -> None:
        self.add_block(CONE_NONNEG, tag, rows)

    def add_zero(self, tag: str, rows) -> None:
        self.add_block(CONE_ZERO, tag, rows)

    def add_soc(self, tag: str, rows) -> None:
        self.add_block(CONE_SOC, tag, rows)

    def add_exp(self, tag: str, x_row, y_row, z_row) -> None:
        """z >= y * exp(x / y) for the three affine rows."""
        self.add_block(CONE_EXP, tag, [x_row, y_row, z_row])

    # PSD blocks over Hermitian affine maps ----------------------------------

    def add_psd_hermitian(self, tag: str, dim: int, const: np.ndarray,
                          coeff_cols: list[tuple[int, np.ndarray]]) -> None:
        """Affine Hermitian-matrix map into the PSD cone.

        coeff_cols pairs a global column index with the Hermitian coefficient
        matrix multiplying that variable.
        """
        es = _embed_svec_cache(dim)
        start = len(self._b)
        svec_const = es.apply(const)
        self._b.extend(svec_const.tolist())
        nrows = svec_const.shape[0]
        row_idx = np.arange(start, start + nrows)
        for col, coeff in coeff_cols:
            colvals = -es.apply(coeff) * self.col_scale[col]
            nz = np.abs(colvals) > 0
            if nz.any():
                self._rows.append(row_idx[nz])
                self._cols.append(np.full(int(nz.sum()), col))
                self._vals.append(colvals[nz])
        self.blocks.append(ConeBlock(CONE_PSD, 2 * dim, tag))

    # snapshots for cached constant structure --------------------------------

    def snapshot(self) -> tuple:
        return (
            len(self._rows),
            len(self._b),
            len(self.blocks),
            self.c.copy(),
            self.obj_const,
        )

    def restore(self, snap) -> None:
        narr, nb, nblk, c, k = snap
        del self._rows[narr:], self._cols[narr:], self._vals[narr:]
        del self._b[nb:]
        del self.blocks[nblk:]
        self.c = c.copy()
        self.obj_const = k

    def build(self) -> ConicProgram:
        m = len(self._b)
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = vals = np.zeros(0)
        A = sp.coo_matrix((vals, (rows, cols)), shape=(m, self.reg.size)).tocsc()
        return ConicProgram(
            registry=self.reg,
            c=self.c.copy(),
            obj_const=self.obj_const,
            blocks=list(self.blocks),
            A=A,
            b=np.asarray(self._b),
            col_scale=self.col_scale.copy(),
        )


_EMBED_CACHE: dict[int, EmbedSvec] = {}


def _embed_svec_cache(n: int) -> EmbedSvec:
    if n not in _EMBED_CACHE:
        _EMBED_CACHE[n] = EmbedSvec(n)
    return _EMBED_CACHE[n]


# ----- scaling ---------------------------------------------------------------

def block_row_groups(blocks: list[ConeBlock]) -> list[tuple[int, int, bool]]:
    """(start, stop, rows_scale_jointly) per block; zero/nonneg rows scale freely."""
    out, r = [], 0
    for blk in blocks:
        out.append((r, r + blk.rows, blk.kind not in (CONE_ZERO, CONE_NONNEG)))
        r += blk.rows
    return out


def ruiz_equilibrate(program: ConicProgram, iters: int = 6,
                     lo: float = 1e-8, hi: float = 1e8):
    """Block-respecting Ruiz scaling.

    Returns (A', b', c', row_scale e, col_scale d, obj_scale): the scaled
    program solves for x' with x = d * x'. Rows belonging to one SOC / exp /
    PSD block share a scale so cone membership is preserved.
    """
    A = program.A.tocsr().copy()
    m, n = A.shape
    e = np.ones(m)
    d = np.ones(n)
    groups = block_row_groups(program.blocks)
    for _ in range(iters):
        absA = abs(A)
        row_max = np.asarray(absA.max(axis=1).todense()).ravel()
        for start, stop, joint in groups:
            if joint and stop > start:
                row_max[start:stop] = row_max[start:stop].max()
        row_max[row_max == 0] = 1.0
        er = 1.0 / np.sqrt(row_max)
        np.clip(er, lo, hi, out=er)
        A = sp.diags(er) @ A
        e *= er

        absA = abs(A)
        col_max = np.asarray(absA.max(axis=0).todense()).ravel()
        col_max[col_max == 0] = 1.0
        dc = 1.0 / np.sqrt(col_max)
        np.clip(dc, lo, hi, out=dc)
        A = A @ sp.diags(dc)
        d *= dc

    b = program.b * e
    c = program.c * d
    cmax = np.abs(c).max()
    obj_scale = 1.0 / cmax if cmax > 0 else 1.0
    return A.tocsc(), b, c * obj_scale, e, d, obj_scale


# ----- generic slack evaluation ----------------------------------------------

def evaluate_block_slacks(program: ConicProgram, x: np.ndarray) -> dict[str, float]:
    """Signed feasibility margin per block (negative = violated).

    zero: -max residual magnitude; nonneg: min entry; soc: t - ||z||;
    exp: z - y e^(x/y); psd: smallest eigenvalue of the embedded matrix.
    `x` is in physical units.
    """
    s = program.b - program.A @ program.to_solver_units(x)
    out: dict[str, float] = {}
    r = 0
    for blk in program.blocks:
        sl = s[r : r + blk.rows]
        r += blk.rows
        if blk.kind == CONE_ZERO:
            val = -float(np.abs(sl).max()) if sl.size else 0.0
        elif blk.kind == CONE_NONNEG:
            val = float(sl.min()) if sl.size else 0.0
        elif blk.kind == CONE_SOC:
            val = float(sl[0] - np.linalg.norm(sl[1:]))
        elif blk.kind == CONE_EXP:
            xx, yy, zz = sl
            if yy > 1e-14:
                val = float(zz - yy * np.exp(min(xx / yy, 700.0)))
            else:
                # closure: y -> 0 requires x <= 0, z >= 0
                val = float(min(yy, zz, -xx))
        elif blk.kind == CONE_PSD:
            M = unsvec(sl, blk.dim)
            val = float(np.linalg.eigvalsh(M)[0])
        else:
            raise ValueError(blk.kind)
        key = blk.tag
        out[key] = min(out.get(key, np.inf), val)
    return out
