"""Worst-case machinery over bounded ellipsoidal channel errors.

Holds the trust-region oracle used as an independent verifier, the
multiplier-feasibility search for bordered matrix implications, and the
builders for the four worst-case LMI families consumed by the subproblem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conic import herm_basis

COND_LIMIT = 1e12


def _hermitize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def scale_error_sets(shape_matrices, distances) -> list[tuple[np.ndarray, float]]:
    """Scaled uncertainty sets {v : v^H C v <= d^2} for scaled errors v = e*d."""
    return [(np.asarray(C), float(d) ** 2) for C, d in zip(shape_matrices, distances)]


def worst_case_oracle(
    F: np.ndarray, g: np.ndarray, h: float, C: np.ndarray, radius_sq: float
) -> tuple[float, np.ndarray]:
    """min of e^H F e + 2 Re(g^H e) + h over {e : e^H C e <= radius_sq}.

    Exact trust-region solve: whiten by C^(-1/2), eigen-decompose, then root
    the secular equation (with hard-case handling). Returns the minimum and
    an attaining point.
    """
    C = np.asarray(C, dtype=complex)
    n = C.shape[0]
    wC, VC = np.linalg.eigh(_hermitize(C))
    if wC.min() <= 0 or wC.max() / wC.min() > COND_LIMIT:
        raise ValueError("ellipsoid matrix ill-conditioned or not PD")
    Cinv_half = (VC * (1.0 / np.sqrt(wC))) @ VC.conj().T

    Ft = _hermitize(Cinv_half @ np.asarray(F, dtype=complex) @ Cinv_half)
    gt = Cinv_half @ np.asarray(g, dtype=complex).reshape(n)
    lam, V = np.linalg.eigh(Ft)
    c = V.conj().T @ gt
    r2 = float(radius_sq)

    w = _trs_coords(lam, c, r2)
    val = float(np.real(np.sum(lam * np.abs(w) ** 2) + 2 * np.real(np.vdot(c, w)))) + float(h)
    e = Cinv_half @ (V @ w)
    return val, e


def _trs_coords(lam: np.ndarray, c: np.ndarray, r2: float) -> np.ndarray:
    if r2 <= 0:
        return np.zeros_like(c)
    r = np.sqrt(r2)
    # interior stationary point when the quadratic is convex
    if lam.min() > 0:
        w0 = -c / lam
        if np.linalg.norm(w0) <= r:
            return w0
    mu0 = max(0.0, -float(lam.min()))

    def w_of(mu):
        den = lam + mu
        safe = np.abs(den) > 1e-300
        w = np.zeros_like(c)
        w[safe] = -c[safe] / den[safe]
        return w

    def norm2(mu):
        den = lam + mu
        safe = np.abs(den) > 1e-300
        if np.any(~safe & (np.abs(c) > 1e-14 * max(1.0, np.abs(c).max()))):
            return np.inf
        return float(np.sum(np.abs(c[safe]) ** 2 / den[safe] ** 2))

    span = max(1.0, float(np.abs(lam).max()))
    if norm2(mu0 + 1e-14 * span) <= r2:
        # hard case (or exact convex boundary): fill the lowest eigenspace
        w = w_of(mu0)
        if mu0 == 0.0 and lam.min() >= 0:
            return w  # convex, flat directions add nothing
        deficit = r2 - float(np.linalg.norm(w) ** 2)
        if deficit > 0:
            idx = int(np.argmin(lam))
            w[idx] += np.sqrt(deficit)
        return w

    # secular equation: ||w(mu)||^2 = r^2, decreasing in mu on (mu0, inf)
    lo = mu0
    step = max(span, np.linalg.norm(c) / r)
    hi = mu0 + step
    while norm2(hi) > r2:
        hi = mu0 + (hi - mu0) * 4.0
        if hi > 1e300:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if norm2(mid) > r2:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return w_of(hi)


def worst_case_max(F, g, h, C, radius_sq) -> tuple[float, np.ndarray]:
    val, e = worst_case_oracle(-np.asarray(F), -np.asarray(g), -float(h), C, radius_sq)
    return -val, e


def sprocedure_feasible(
    F1, g1, h1, F2, g2, h2, tol: float = 1e-9
) -> tuple[bool, float, float]:
    """Search for lambda >= 0 with [[F2,g2],[g2^H,h2]] <= lambda [[F1,g1],[g1^H,h1]].

    The smallest eigenvalue of the difference is concave in lambda; a bracket
    plus golden-section refinement finds its maximizer. Returns (feasible,
    lambda, best smallest-eigenvalue).
    """
    B1 = _border(F1, g1, h1)
    B2 = _border(F2, g2, h2)
    scale = max(1.0, np.abs(B1).max(), np.abs(B2).max())

    def mineig(lam):
        return float(np.linalg.eigvalsh(lam * B1 - B2)[0])

    lams = np.concatenate([[0.0], np.logspace(-12, 12, 49) * scale])
    vals = np.array([mineig(l) for l in lams])
    k = int(np.argmax(vals))
    lo = lams[max(k - 1, 0)]
    hi = lams[min(k + 1, len(lams) - 1)]
    if hi <= lo:
        hi = lo + 1.0
    phi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    x1 = b - phi * (b - a)
    x2 = a + phi * (b - a)
    f1, f2 = mineig(x1), mineig(x2)
    for _ in range(120):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (b - a)
            f2 = mineig(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - phi * (b - a)
            f1 = mineig(x1)
        if b - a <= 1e-14 * max(1.0, b):
            break
    lam_best = 0.5 * (a + b)
    best = mineig(lam_best)
    if vals[k] >= best:
        lam_best, best = lams[k], vals[k]
    return best >= -tol * scale, float(lam_best), float(best)


def _border(F, g, h) -> np.ndarray:
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    g = np.asarray(g, dtype=complex).reshape(-1, 1)
    n = F.shape[0]
    out = np.zeros((n + 1, n + 1), dtype=complex)
    out[:n, :n] = F
    out[:n, n:] = g
    out[n:, :n] = g.conj().T
    out[n, n] = h
    return out


# ----- LMI blocks -------------------------------------------------------------


@dataclass
class LmiBlock:
    """Affine map from named scalar/matrix variables to a bordered Hermitian
    matrix required to be PSD. Keys are (variable name, flat parameter index).
    """

    dim: int
    const: np.ndarray
    coeffs: dict[tuple[str, int], np.ndarray] = field(default_factory=dict)
    tag: str = ""

    def add(self, key: tuple[str, int], coeff: np.ndarray) -> None:
        if key in self.coeffs:
            self.coeffs[key] = self.coeffs[key] + coeff
        else:
            self.coeffs[key] = coeff

    def assemble(self, values: dict[tuple[str, int], float]) -> np.ndarray:
        M = self.const.astype(complex).copy()
        for key, coeff in self.coeffs.items():
            M += values[key] * coeff
        return M

    def structure_ok(self, atol: float = 1e-10) -> bool:
        mats = [self.const, *self.coeffs.values()]
        return all(np.allclose(M, M.conj().T, atol=atol) for M in mats)

    def structure_dict(self) -> dict:
        return {
            "tag": self.tag,
            "dim": self.dim,
            "const": {"re": self.const.real.tolist(), "im": self.const.imag.tolist()},
            "coeffs": {
                f"{name}[{idx}]": {"re": M.real.tolist(), "im": M.imag.tolist()}
                for (name, idx), M in self.coeffs.items()
            },
        }


def _bordered(tl: np.ndarray, border: np.ndarray, corner: float | complex) -> np.ndarray:
    n = tl.shape[0]
    out = np.zeros((n + 1, n + 1), dtype=complex)
    out[:n, :n] = tl
    out[:n, n] = border
    out[n, :n] = np.conj(border)
    out[n, n] = np.real(corner)
    return out


def build_offload_snr_lmi(
    k: int, a: np.ndarray, C: np.ndarray, rho: float, tag: str | None = None
) -> LmiBlock:
    """Worst-case received-power certificate for user k's uplink.

    [[lam C + p I, p sqrt(rho) a], [(.)^H, p rho N_T - beta]] >= 0,
    affine in (p, lam, beta).
    """
    n = a.shape[0]
    blk = LmiBlock(dim=n + 1, const=np.zeros((n + 1, n + 1), dtype=complex),
                   tag=tag or f"wc-offload-snr[{k}]")
    blk.add(("p", k), _bordered(np.eye(n), np.sqrt(rho) * a, rho * n))
    blk.add(("lam", k), _bordered(np.asarray(C, dtype=complex), np.zeros(n), 0.0))
    blk.add(("beta", k), _bordered(np.zeros((n, n)), np.zeros(n), -1.0))
    return blk


def _x_matrix_terms(blk, a, rho, signs, sign_outer, n):
    """Adds coefficients of sign_outer * (bordered map of X = sum s_m M_m)."""
    basis = herm_basis(n)
    border_stack = np.einsum("bij,j->bi", basis, a)
    corner_stack = np.real(np.einsum("i,bij,j->b", a.conj(), basis, a))
    for mat_name, s in signs.items():
        f = sign_outer * s
        for p in range(n * n):
            blk.add(
                (mat_name, p),
                _bordered(f * basis[p], f * np.sqrt(rho) * border_stack[p], f * rho * corner_stack[p]),
            )


def build_qos_lmi(
    k: int,
    a: np.ndarray,
    C: np.ndarray,
    rho: float,
    gamma_req: float,
    user_mat_names: list[str],
    noise_mat_name: str = "Z",
    tag: str | None = None,
) -> LmiBlock:
    """Worst-case download-SINR floor for user k.

    [[lam_u C - X, -sqrt(rho) X a], [(.)^H, -beta_u - rho a^H X a]] >= 0
    with X = Z + sum_{j != k} W_j - W_k / gamma_req.
    """
    n = a.shape[0]
    blk = LmiBlock(dim=n + 1, const=np.zeros((n + 1, n + 1), dtype=complex),
                   tag=tag or f"wc-qos[{k}]")
    blk.add(("lam_u", k), _bordered(np.asarray(C, dtype=complex), np.zeros(n), 0.0))
    blk.add(("beta_u", k), _bordered(np.zeros((n, n)), np.zeros(n), -1.0))
    signs = {name: (-1.0 / gamma_req if j == k else 1.0) for j, name in enumerate(user_mat_names)}
    signs[noise_mat_name] = 1.0
    _x_matrix_terms(blk, a, rho, signs, sign_outer=-1.0, n=n)
    return blk


def build_security_lmi(
    m: int,
    k: int,
    a_eve: np.ndarray,
    C_eve: np.ndarray,
    rho: float,
    gamma_seq: float,
    user_mat_names: list[str],
    flat_idx: int,
    noise_mat_name: str = "Z",
    tag: str | None = None,
) -> LmiBlock:
    """Worst-case leakage ceiling at eavesdropper m for user k's stream.

    [[lam_u_mk C_e + X, sqrt(rho) X a_e], [(.)^H, beta_u_mk + rho a_e^H X a_e]]
    >= 0 with X = Z + sum_{j != k} W_j - W_k / gamma_seq. This certifies the
    lower-bound direction of the leakage constraint.
    """
    n = a_eve.shape[0]
    blk = LmiBlock(dim=n + 1, const=np.zeros((n + 1, n + 1), dtype=complex),
                   tag=tag or f"wc-security[{m},{k}]")
    blk.add(("lam_u_mk", flat_idx), _bordered(np.asarray(C_eve, dtype=complex), np.zeros(n), 0.0))
    blk.add(("beta_u_mk", flat_idx), _bordered(np.zeros((n, n)), np.zeros(n), 1.0))
    signs = {name: (-1.0 / gamma_seq if j == k else 1.0) for j, name in enumerate(user_mat_names)}
    signs[noise_mat_name] = 1.0
    _x_matrix_terms(blk, a_eve, rho, signs, sign_outer=1.0, n=n)
    return blk


def build_relay_snr_lmi(
    a: np.ndarray, C: np.ndarray, rho: float, relay_mat_name: str = "W_a", tag: str = "wc-relay-snr"
) -> LmiBlock:
    """Worst-case received-power certificate for the relay downlink beam.

    [[lam_a C + W_a, sqrt(rho) W_a a], [(.)^H, rho a^H W_a a - beta_a]] >= 0.
    """
    n = a.shape[0]
    blk = LmiBlock(dim=n + 1, const=np.zeros((n + 1, n + 1), dtype=complex), tag=tag)
    blk.add(("lam_a", 0), _bordered(np.asarray(C, dtype=complex), np.zeros(n), 0.0))
    blk.add(("beta_a", 0), _bordered(np.zeros((n, n)), np.zeros(n), -1.0))
    _x_matrix_terms(blk, a, rho, {relay_mat_name: 1.0}, sign_outer=1.0, n=n)
    return blk


def dump_lmi_structures(blocks: list[LmiBlock], path: str) -> None:
    import json

    with open(path, "w") as fh:
        json.dump([blk.structure_dict() for blk in blocks], fh)
